#include <doctest.h>

#include <algorithm>
#include <set>

#include "clustvit/errors.hpp"
#include "clustvit/pseudo_clusters.hpp"
#include "oracles.hpp"

using namespace clustvit;

TEST_CASE("uniform mask and deviant pixel") {
    Mask m(16, 16, 5);
    for (std::size_t p : {1u, 4u, 8u, 16u}) {
        auto l = pseudo::patch_labels(m, p);
        CHECK(std::all_of(l.begin(), l.end(), [](int v) { return v == 5; }));
    }
    m.at(9, 2) = 4;
    auto l = pseudo::patch_labels(m, 8);
    CHECK(l == std::vector<int>{5, 5, 0, 5});
}

TEST_CASE("reserved class 0 is rejected") {
    Mask m(8, 8, 1);
    m.at(7, 7) = 0;
    try {
        pseudo::patch_labels(m, 4);
        FAIL("expected DataError");
    } catch (const DataError& e) {
        CHECK(std::string(e.what()).find("(7, 7)") != std::string::npos);
    }
    CHECK_THROWS_AS(pseudo::patch_labels(Mask(10, 8, 1), 4), ConfigError);
}

TEST_CASE("topk relabel by frequency") {
    std::vector<int> classes;
    for (auto [c, n] : std::vector<std::pair<int, int>>{{7, 10}, {2, 5}, {9, 3}, {4, 1}})
        classes.insert(classes.end(), n, c);
    classes.insert(classes.begin() + 3, 2, 0);
    auto pc = pseudo::topk_relabel(classes, 2);
    CHECK(pc.class_of_label == std::map<int, int>{{1, 7}, {2, 2}});
    for (std::size_t i = 0; i < classes.size(); ++i) {
        const int want = classes[i] == 7 ? 1 : classes[i] == 2 ? 2 : 0;
        CHECK(pc.labels[i] == want);
    }
}

TEST_CASE("single class and tie rule") {
    std::vector<int> single(6, 3);
    auto pc = pseudo::topk_relabel(single, 3);
    CHECK(std::all_of(pc.labels.begin(), pc.labels.end(), [](int v) { return v == 1; }));
    CHECK(pc.class_of_label.size() == 1);

    std::vector<int> tie = {8, 3, 8, 3};
    auto t = pseudo::topk_relabel(tie, 1);
    CHECK(t.class_of_label.at(1) == 3);
    CHECK(t.labels == std::vector<int>{0, 1, 0, 1});
}

TEST_CASE("generate equals the brute-force oracle on random masks") {
    Rng rng(21);
    for (int trial = 0; trial < 1000; ++trial) {
        const std::size_t p = rng.uniform() < 0.5 ? 4 : 8;
        const auto gh = static_cast<std::size_t>(rng.uniform_int(1, 32 / static_cast<std::int64_t>(p)));
        const auto gw = static_cast<std::size_t>(rng.uniform_int(1, 32 / static_cast<std::int64_t>(p)));
        const auto k = static_cast<std::size_t>(rng.uniform_int(1, 5));
        auto m = oracle::random_mask(rng, gh * p, gw * p, static_cast<int>(rng.uniform_int(1, 7)));
        CHECK(pseudo::generate(m, p, k).labels == oracle::pseudo_labels(m, p, k));
    }
}

TEST_CASE("relabel properties") {
    Rng rng(22);
    for (int trial = 0; trial < 200; ++trial) {
        auto m = oracle::random_mask(rng, 32, 32, 6);
        auto classes = pseudo::patch_labels(m, 4);
        const auto k = static_cast<std::size_t>(rng.uniform_int(1, 4));
        auto pc = pseudo::topk_relabel(classes, k);

        // frequency order of labels
        std::vector<std::size_t> count(k + 1, 0);
        for (int l : pc.labels) ++count[static_cast<std::size_t>(l)];
        for (std::size_t l = 2; l <= pc.class_of_label.size(); ++l) CHECK(count[l - 1] >= count[l]);

        // idempotence
        CHECK(pseudo::topk_relabel(pc.labels, k).labels == pc.labels);

        // increasing k never adds zeros
        auto bigger = pseudo::topk_relabel(classes, k + 1);
        CHECK(std::count(bigger.labels.begin(), bigger.labels.end(), 0) <=
              std::count(pc.labels.begin(), pc.labels.end(), 0));

        // an order-preserving class-id bijection leaves the partition unchanged
        Mask shifted = m;
        for (auto& v : shifted.labels) v = v * 3 + 10;
        CHECK(pseudo::generate(shifted, 4, k).labels == pc.labels);
    }
}

TEST_CASE("cluster accuracy") {
    PseudoClusterMask pc;
    pc.labels = {1, 0, 2, 0};
    std::vector<int> same = pc.labels;
    CHECK(pseudo::cluster_accuracy(same, pc) == 1.0);
    std::vector<int> zeros(4, 0);
    CHECK(pseudo::cluster_accuracy(zeros, pc) == 0.5);
    std::vector<int> short_pred(3, 0);
    CHECK_THROWS_AS(pseudo::cluster_accuracy(short_pred, pc), ShapeError);

    Rng rng(23);
    for (int trial = 0; trial < 100; ++trial) {
        pc.labels.assign(50, 0);
        std::vector<int> pred(50);
        std::size_t hits = 0;
        for (std::size_t i = 0; i < 50; ++i) {
            pc.labels[i] = static_cast<int>(rng.uniform_int(0, 3));
            pred[i] = static_cast<int>(rng.uniform_int(0, 3));
            hits += pred[i] == pc.labels[i];
        }
        CHECK(pseudo::cluster_accuracy(pred, pc) == static_cast<double>(hits) / 50);
    }
}
