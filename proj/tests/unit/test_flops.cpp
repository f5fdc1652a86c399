#include <doctest.h>

#include <numeric>

#include "clustvit/data_synth.hpp"
#include "clustvit/errors.hpp"
#include "clustvit/flops.hpp"
#include "clustvit/model.hpp"
#include "oracles.hpp"

using namespace clustvit;

namespace {

Image random_image(const EncoderConfig& c, Rng& rng) {
    Image img(c.image_height, c.image_width);
    for (auto& v : img.rgb) v = rng.uniform();
    return img;
}

// Assignment with exactly `clustered` patches spread over `active` clusters.
std::vector<int> make_assignment(std::size_t n, std::size_t clustered, std::size_t active, Rng& rng) {
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    for (std::size_t i = n - 1; i > 0; --i)
        std::swap(order[i], order[static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(i)))]);
    std::vector<int> a(n, 0);
    for (std::size_t i = 0; i < clustered; ++i) a[order[i]] = static_cast<int>(1 + i % active);
    return a;
}

}  // namespace

TEST_CASE("block flops hand count and quadratic term") {
    CHECK(flops::block_flops(1, 2, 1) == 104);
    const auto d = 16u;
    const auto quad = [&](std::size_t n) { return flops::block_flops(n, d, 1) - 2 * 12 * n * d * d; };
    CHECK(quad(20) == 4 * quad(10));
    CHECK_THROWS_AS(flops::block_flops(0, 4, 1), ConfigError);
}

TEST_CASE("model flops additivity and boundaries") {
    EncoderConfig c;
    const auto full = flops::model_flops(c, 65);
    const auto van = flops::vanilla_flops(c);
    CHECK(full.total() - van.total() == full.cluster);
    CHECK(full.cluster == 2 * 64 * (96 * 387 + 387 * 4));
    CHECK(full.regenerator == 0);

    c.injection_point = c.num_layers;
    CHECK(flops::model_flops(c, 20).suffix == 0);

    EncoderConfig bad;
    CHECK_THROWS_AS(flops::model_flops(bad, 66), ConfigError);
    CHECK_THROWS_AS(flops::model_flops(bad, 3, 3), ConfigError);
}

TEST_CASE("model flops grows with tokens when ip < L") {
    for (std::size_t ip = 1; ip < 8; ++ip) {
        EncoderConfig c;
        c.injection_point = ip;
        for (std::size_t t = 1 + c.clusters; t < 65; ++t)
            CHECK(flops::model_flops(c, t + 1).total() > flops::model_flops(c, t).total());
    }
}

TEST_CASE("model flops grows with ip for a fixed reduction") {
    EncoderConfig c;
    for (std::size_t t : {5u, 20u, 40u, 64u})
        for (std::size_t ip = 1; ip < 8; ++ip) {
            c.injection_point = ip;
            auto lo = flops::model_flops(c, t).total();
            c.injection_point = ip + 1;
            CHECK(flops::model_flops(c, t).total() > lo);
        }
}

TEST_CASE("break-even point") {
    EncoderConfig c;
    auto be = flops::break_even_tokens(c);
    REQUIRE(be.has_value());
    const auto van = flops::vanilla_flops(c).total();
    CHECK(flops::model_flops(c, *be, c.clusters).total() < van);
    CHECK(flops::model_flops(c, *be + 1, c.clusters).total() >= van);
    c.clusters = 0;
    CHECK_FALSE(flops::break_even_tokens(c).has_value());
}

TEST_CASE("analytic flops equal the instrumented forward") {
    EncoderConfig c;
    ClustViT m(c, 1);
    Rng rng(2);
    auto img = random_image(c, rng);
    // 28 of 65 tokens after ip: 36 patches clustered into 3 clusters
    auto a = make_assignment(64, 40, 3, rng);
    auto got = flops::instrumented_flops(m, img, std::span<const int>(a));
    CHECK(got == flops::model_flops(c, 28, 3));
    CHECK(got.total() == flops::model_flops(c, 28).total());

    EncoderConfig v;
    v.clusters = 0;
    ClustViT vm(v, 1);
    CHECK(flops::instrumented_flops(vm, img) == flops::vanilla_flops(v));
}

TEST_CASE("analytic flops equal the instrumented forward on random configs") {
    Rng rng(3);
    for (int trial = 0; trial < 20; ++trial) {
        EncoderConfig c;
        c.patch_size = static_cast<std::size_t>(rng.uniform_int(2, 4));
        c.image_height = c.patch_size * static_cast<std::size_t>(rng.uniform_int(1, 4));
        c.image_width = c.patch_size * static_cast<std::size_t>(rng.uniform_int(1, 4));
        c.num_heads = static_cast<std::size_t>(rng.uniform_int(1, 3));
        c.embed_dim = c.num_heads * static_cast<std::size_t>(rng.uniform_int(1, 4));
        c.num_layers = static_cast<std::size_t>(rng.uniform_int(1, 4));
        c.ffn_hidden = rng.uniform() < 0.5 ? 0 : static_cast<std::size_t>(rng.uniform_int(1, 9));
        c.num_classes = static_cast<std::size_t>(rng.uniform_int(1, 5));
        c.clusters = static_cast<std::size_t>(rng.uniform_int(0, 4));
        c.injection_point = static_cast<std::size_t>(rng.uniform_int(1, static_cast<std::int64_t>(c.num_layers)));
        c.cluster_hidden = static_cast<std::size_t>(rng.uniform_int(0, 7));
        CAPTURE(trial);
        ClustViT m(c, static_cast<std::uint64_t>(trial));
        auto img = random_image(c, rng);
        const std::size_t n = c.num_patches();
        if (!c.clustering()) {
            CHECK(flops::instrumented_flops(m, img) == flops::vanilla_flops(c));
            continue;
        }
        const auto active = static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(std::min(c.clusters, n))));
        const auto clustered =
            active == 0 ? 0 : static_cast<std::size_t>(rng.uniform_int(static_cast<std::int64_t>(active), static_cast<std::int64_t>(n)));
        auto a = make_assignment(n, clustered, active, rng);
        const std::size_t tokens = 1 + (n - clustered) + active;
        CHECK(flops::instrumented_flops(m, img, std::span<const int>(a)) == flops::model_flops(c, tokens, active));
    }
}

TEST_CASE("dataset cost std: vanilla and forced-constant clustering are flat") {
    auto samples = synth::generate(SceneSpec::preset("sparse", 5, 6));
    EncoderConfig c;
    c.clusters = 0;
    ClustViT van(c, 1);
    auto r = flops::dataset_cost(van, samples);
    CHECK(r.std == 0.0);
    CHECK(r.mean == static_cast<double>(flops::vanilla_flops(c).total()));

    EncoderConfig k3;
    ClustViT clustered(k3, 1);
    // every patch to cluster 2
    auto& ps = clustered.parameters();
    for (auto& v : ps.find("cluster.fc2.weight")->tensor.data()) v = 0;
    ps.find("cluster.fc2.bias")->tensor.data()[2] = 1.0;
    auto rc = flops::dataset_cost(clustered, samples);
    CHECK(rc.std == 0.0);
    for (auto t : rc.tokens_after_ip) CHECK(t == 2);

    for (std::size_t i = 0; i < rc.per_image_flops.size(); ++i) CHECK(rc.per_image_flops[i] == rc.breakdowns[i].total());
    CHECK_THROWS_AS(flops::dataset_cost(van, {}), DataError);
}

TEST_CASE("summary statistics use the population std") {
    std::vector<FlopBreakdown> b(4);
    b[0].prefix = 2, b[1].prefix = 4, b[2].prefix = 4, b[3].prefix = 6;
    auto r = flops::summarize({"a", "b", "c", "d"}, {1, 2, 3, 4}, b);
    CHECK(r.mean == 4.0);
    CHECK(r.std == doctest::Approx(std::sqrt(2.0)));
}

TEST_CASE("token histogram covers every image") {
    std::vector<std::size_t> t = {1, 5, 5, 17, 65, 64, 30};
    auto bins = flops::token_histogram(t, 65, 5);
    std::size_t total = 0;
    for (const auto& b : bins) total += b.count;
    CHECK(total == t.size());
    CHECK(bins.front().low == 1);
    CHECK(bins.back().high > 65);
    CHECK(bins[0].count == 3);  // [1, 6)
    CHECK_THROWS_AS(flops::token_histogram({66}, 65, 5), ConfigError);
}

TEST_CASE("throughput runs single-threaded and restores the cap") {
    EncoderConfig c;
    c.image_height = c.image_width = 16;
    ClustViT m(c, 1);
    Rng rng(4);
    std::vector<Image> imgs = {random_image(c, rng)};
    CHECK(flops::throughput(m, imgs, 1, 3) > 0.0);
    CHECK_THROWS_AS(flops::throughput(m, imgs, 0, 3), ConfigError);
}
