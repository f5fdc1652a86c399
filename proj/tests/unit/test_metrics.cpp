#include <doctest.h>

#include <cmath>

#include "clustvit/errors.hpp"
#include "clustvit/metrics.hpp"
#include "clustvit/model.hpp"
#include "clustvit/ops.hpp"
#include "oracles.hpp"

using namespace clustvit;

namespace {

Mask random_gt(Rng& rng, std::size_t h, std::size_t w, int c) {
    Mask m(h, w);
    for (auto& v : m.labels) v = static_cast<int>(rng.uniform_int(1, c));
    return m;
}

}  // namespace

TEST_CASE("combined loss: closed form, lambda linearity") {
    Mask gt(4, 4, 2);
    PseudoClusterMask pc;
    pc.labels = {0, 1, 2, 3};
    auto l = metrics::combined_loss(Tensor::zeros({16, 3}), gt, Tensor::zeros({4, 4}), pc, 0.1);
    CHECK(l.report.total == doctest::Approx(std::log(3.0) + 0.1 * std::log(4.0)).epsilon(1e-14));
    CHECK(l.report.total == doctest::Approx(1.23722).epsilon(1e-5));
    CHECK(l.total.item() == l.report.total);

    Rng rng(1);
    auto seg = oracle::random_tensor({16, 3}, rng), cl = oracle::random_tensor({4, 4}, rng);
    auto r0 = metrics::combined_loss(seg, gt, cl, pc, 0.0).report;
    auto r1 = metrics::combined_loss(seg, gt, cl, pc, 0.1).report;
    auto r2 = metrics::combined_loss(seg, gt, cl, pc, 1.0).report;
    CHECK(r0.total == r0.seg_loss);
    CHECK(r1.total == doctest::Approx(r0.seg_loss + 0.1 * r0.clust_loss).epsilon(1e-15));
    CHECK(r2.total == doctest::Approx(r0.seg_loss + r0.clust_loss).epsilon(1e-15));

    CHECK(metrics::combined_loss(seg, gt, Tensor{}, pc, 0.1).report.total == r0.seg_loss);
    CHECK_THROWS_AS(metrics::combined_loss(seg, gt, cl, pc, -1.0), ConfigError);
    CHECK_THROWS_AS(metrics::combined_loss(seg, Mask(2, 2, 1), cl, pc, 0.1), ShapeError);
}

TEST_CASE("lambda decides whether the cluster loss reaches the backbone") {
    EncoderConfig c;
    c.image_height = c.image_width = 8;
    c.patch_size = 4;
    c.embed_dim = 4;
    c.num_heads = 1;
    c.num_layers = 2;
    c.injection_point = 1;
    c.clusters = 2;
    c.cluster_hidden = 5;
    ClustViT m(c, 3);
    Rng rng(4);
    Image img(8, 8);
    for (auto& v : img.rgb) v = rng.uniform();
    Mask gt = random_gt(rng, 8, 8, 3);
    PseudoClusterMask pc;
    pc.labels = {1, 0, 2, 1};

    // block0 feeds both heads; gradient of the combined loss minus the
    // seg-only gradient isolates the cluster term.
    auto grad_of = [&](double lambda) {
        auto& ps = m.parameters();
        ps.zero_grad();
        auto fr = m.forward(img);
        backward(metrics::combined_loss(fr.seg_logits, gt, fr.cluster_logits, pc, lambda).total);
        auto g = ps.find("block0.ffn.fc2.weight")->tensor.grad();
        return std::vector<double>(g.begin(), g.end());
    };
    auto seg_only = [&] {
        auto& ps = m.parameters();
        ps.zero_grad();
        auto fr = m.forward(img);
        backward(metrics::combined_loss(fr.seg_logits, gt, Tensor{}, pc, 0.0).total);
        auto g = ps.find("block0.ffn.fc2.weight")->tensor.grad();
        return std::vector<double>(g.begin(), g.end());
    }();
    auto g0 = grad_of(0.0), g1 = grad_of(1.0);
    double diff0 = 0, diff1 = 0;
    for (std::size_t i = 0; i < g0.size(); ++i) {
        diff0 = std::max(diff0, std::abs(g0[i] - seg_only[i]));
        diff1 = std::max(diff1, std::abs(g1[i] - seg_only[i]));
    }
    CHECK(diff0 == 0.0);
    CHECK(diff1 > 1e-8);
}

TEST_CASE("miou examples") {
    ConfusionMatrix perfect(3);
    for (std::size_t c = 0; c < 3; ++c) perfect.add(c, c, 10 + c);
    CHECK(metrics::miou(perfect).miou == 1.0);

    ConfusionMatrix off(2);
    off.add(0, 1, 5);
    off.add(1, 0, 7);
    CHECK(metrics::miou(off).miou == 0.0);

    ConfusionMatrix m(2);
    m.add(0, 0, 50);
    m.add(0, 1, 10);
    m.add(1, 0, 20);
    m.add(1, 1, 20);
    auto r = metrics::miou(m);
    CHECK(r.iou[0] == doctest::Approx(50.0 / 80));
    CHECK(r.iou[1] == doctest::Approx(20.0 / 50));
    CHECK(r.miou == doctest::Approx(0.5125));

    ConfusionMatrix absent(3);
    absent.add(0, 0, 4);
    absent.add(1, 1, 4);
    auto ra = metrics::miou(absent);
    CHECK(ra.classes_counted == 2);
    CHECK(std::isnan(ra.iou[2]));
    CHECK(ra.miou == 1.0);

    CHECK_THROWS_AS(metrics::miou(ConfusionMatrix(2)), Error);
}

TEST_CASE("confusion accumulation") {
    ConfusionMatrix m(3);
    std::vector<int> gt = {0, 1, 2, 1}, pred = gt;
    m.accumulate(gt, pred);
    CHECK(m.at(1, 1) == 2);
    CHECK(m.total() == 4);

    std::vector<int> g1 = {1}, p1 = {2};
    m.accumulate(g1, p1);
    CHECK(m.at(1, 2) == 1);

    std::vector<int> bad = {0, 3, 0, 0};
    try {
        m.accumulate(gt, bad);
        FAIL("expected ShapeError");
    } catch (const ShapeError& e) {
        CHECK(std::string(e.what()).find("pixel 1") != std::string::npos);
    }

    Rng rng(5);
    ConfusionMatrix acc(4), a(4), b(4);
    std::vector<std::uint64_t> naive(16, 0);
    for (int trial = 0; trial < 20; ++trial) {
        std::vector<int> g(30), p(30);
        for (std::size_t i = 0; i < 30; ++i) {
            g[i] = static_cast<int>(rng.uniform_int(0, 3));
            p[i] = static_cast<int>(rng.uniform_int(0, 3));
            ++naive[static_cast<std::size_t>(g[i] * 4 + p[i])];
        }
        acc.accumulate(g, p);
        (trial % 2 ? a : b).accumulate(g, p);
    }
    a += b;
    for (std::size_t i = 0; i < 4; ++i)
        for (std::size_t j = 0; j < 4; ++j) {
            CHECK(acc.at(i, j) == naive[i * 4 + j]);
            CHECK(a.at(i, j) == naive[i * 4 + j]);
        }
}

TEST_CASE("miou is invariant under a shared relabeling") {
    Rng rng(6);
    for (int trial = 0; trial < 20; ++trial) {
        std::vector<int> g(50), p(50);
        for (std::size_t i = 0; i < 50; ++i) {
            g[i] = static_cast<int>(rng.uniform_int(0, 3));
            p[i] = rng.uniform() < 0.7 ? g[i] : static_cast<int>(rng.uniform_int(0, 3));
        }
        const int perm[] = {2, 0, 3, 1};
        std::vector<int> g2(50), p2(50);
        for (std::size_t i = 0; i < 50; ++i) {
            g2[i] = perm[g[i]];
            p2[i] = perm[p[i]];
        }
        ConfusionMatrix a(4), b(4);
        a.accumulate(g, p);
        b.accumulate(g2, p2);
        const double ma = metrics::miou(a).miou;
        CHECK(ma >= 0.0);
        CHECK(ma <= 1.0);
        CHECK(ma == doctest::Approx(metrics::miou(b).miou).epsilon(1e-15));
    }
}
