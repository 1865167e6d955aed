#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <random>

#include "doctest.h"
#include "matte/grad_check.hpp"
#include "matte/refine.hpp"

using namespace matte;

namespace {

RefineConfig tiny_cfg() {
    RefineConfig cfg;
    cfg.feat_dim = 32;
    cfg.num_heads = 4;
    return cfg;
}

}  // namespace

TEST_CASE("config validation") {
    RefineConfig cfg = tiny_cfg();
    CHECK_NOTHROW(cfg.validate());
    cfg.num_heads = 5;
    CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
    cfg = tiny_cfg();
    cfg.s = 0;
    CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
}

TEST_CASE("forward shape, range and determinism") {
    std::mt19937_64 rng(31);
    RefineNet<float> net(tiny_cfg(), rng);
    std::vector<RegionCoord> coords{{0, 0}, {0, 1}, {1, 0}, {3, 4}};
    auto knn = knn_bruteforce(coords, 8);
    Tensor<float> crops = Tensor<float>::randn({4, 8, 8, 4}, rng, 0.5);
    NoGradGuard ng;
    Tensor<float> a = net.forward(crops, coords, knn);
    CHECK(a.shape() == Shape{4, 8, 8});
    for (float v : a.values()) {
        CHECK(v >= 0.0f);
        CHECK(v <= 1.0f);
    }
    Tensor<float> b = net.forward(crops, coords, knn);
    CHECK(a.values() == b.values());
}

TEST_CASE("empty and single-region inputs") {
    std::mt19937_64 rng(32);
    RefineNet<float> net(tiny_cfg(), rng);
    NoGradGuard ng;
    Tensor<float> none = net.forward(Tensor<float>::zeros({0, 8, 8, 4}), {}, {});
    CHECK(none.shape() == Shape{0, 8, 8});
    // a lone region has an empty neighbor list; the block still runs on k+1=1
    std::vector<RegionCoord> coords{{2, 2}};
    Tensor<float> crops = Tensor<float>::randn({1, 8, 8, 4}, rng, 0.5);
    Tensor<float> a = net.forward(crops, coords, knn_bruteforce(coords, 8));
    CHECK(a.shape() == Shape{1, 8, 8});
    for (float v : a.values()) {
        CHECK(v >= 0.0f);
        CHECK(v <= 1.0f);
    }
}

TEST_CASE("region order does not change per-region outputs") {
    std::mt19937_64 rng(33);
    RefineNet<float> net(tiny_cfg(), rng);
    std::vector<RegionCoord> coords{{0, 0}, {0, 2}, {2, 0}, {2, 2}, {1, 1}};
    auto knn = knn_bruteforce(coords, 8);
    Tensor<float> crops = Tensor<float>::randn({5, 8, 8, 4}, rng, 0.5);
    NoGradGuard ng;
    Tensor<float> base = net.forward(crops, coords, knn);

    // reverse the region order; KNN indices recomputed for the new order
    std::vector<RegionCoord> rcoords(coords.rbegin(), coords.rend());
    std::vector<float> rvals;
    for (int i = 4; i >= 0; --i)
        for (int j = 0; j < 8 * 8 * 4; ++j)
            rvals.push_back(crops.values()[std::size_t(i) * 8 * 8 * 4 + std::size_t(j)]);
    Tensor<float> rcrops({5, 8, 8, 4}, rvals);
    Tensor<float> perm = net.forward(rcrops, rcoords, knn_bruteforce(rcoords, 8));
    for (int i = 0; i < 5; ++i)
        for (int j = 0; j < 64; ++j)
            CHECK(perm.values()[std::size_t(4 - i) * 64 + std::size_t(j)] ==
                  doctest::Approx(base.values()[std::size_t(i) * 64 + std::size_t(j)])
                      .epsilon(1e-6));
}

TEST_CASE("bias table receives gradient on used slots including out-of-range") {
    std::mt19937_64 rng(34);
    RefineConfig cfg = tiny_cfg();
    RefineNet<float> net(cfg, rng);
    // (0,0) and (0,9) are farther apart than s=4, so the out-of-range slot is used
    std::vector<RegionCoord> coords{{0, 0}, {0, 1}, {0, 9}};
    auto knn = knn_bruteforce(coords, 8);
    Tensor<float> crops = Tensor<float>::randn({3, 8, 8, 4}, rng, 0.5);
    backward(sum(square(net.forward(crops, coords, knn))));
    REQUIRE(net.bias_table().has_grad());
    const auto& g = net.bias_table().grad();
    int last = bias_table_size(cfg.s) - 1;
    CHECK(std::abs(g[std::size_t(bias_center_slot(cfg.s))]) > 0.0f);
    CHECK(std::abs(g[std::size_t(last)]) > 0.0f);
    double total = 0;
    for (float v : g) total += std::abs(v);
    CHECK(total > 0.0);
}

TEST_CASE("both attention block variants pass a 64-bit gradient check") {
    std::mt19937_64 rng(35);
    for (bool central : {false, true}) {
        CraBlock<double> blk(8, 2, central, rng);
        std::vector<Tensor<double>> inputs{Tensor<double>::randn({4, 8}, rng, 1.0, true),
                                           Tensor<double>::randn({4}, rng, 1.0, true)};
        auto rep = grad_check(
            central ? "cra_central" : "cra_full",
            [&](std::vector<Tensor<double>>& in) {
                return sum(square(blk.forward(in[0], in[1])));
            },
            inputs);
        INFO((central ? "central" : "full") << " max_rel_error " << rep.max_rel_error);
        CHECK(rep.passed);
    }
}

TEST_CASE("central-only block emits a single token") {
    std::mt19937_64 rng(36);
    CraBlock<float> blk(8, 2, true, rng);
    Tensor<float> neigh = Tensor<float>::randn({5, 8}, rng, 1.0);
    Tensor<float> bias = Tensor<float>::zeros({5});
    NoGradGuard ng;
    CHECK(blk.forward(neigh, bias).shape() == Shape{1, 8});
}

TEST_CASE("analytic per-region cost matches block cost structure") {
    RefineConfig cfg = tiny_cfg();
    auto per = RefineNet<float>::analytic_macs_per_region(cfg);
    CHECK(per > 0);
    // doubling feat_dim should roughly quadruple the attention cost share
    RefineConfig big = cfg;
    big.feat_dim = 64;
    CHECK(RefineNet<float>::analytic_macs_per_region(big) > per);
}

TEST_CASE("encode produces one feature vector per region") {
    std::mt19937_64 rng(37);
    RefineNet<float> net(tiny_cfg(), rng);
    Tensor<float> crops = Tensor<float>::randn({3, 8, 8, 4}, rng, 0.5);
    NoGradGuard ng;
    CHECK(net.encode(crops).shape() == Shape{3, 32});
}
