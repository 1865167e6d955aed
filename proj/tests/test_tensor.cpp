#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <random>

#include "doctest.h"
#include "matte/grad_check.hpp"
#include "matte/tensor.hpp"

using namespace matte;

TEST_CASE("pixel_unshuffle layout") {
    std::vector<float> v(16);
    for (int i = 0; i < 16; ++i) v[std::size_t(i)] = float(i);
    Tensor<float> t({4, 4, 1}, v);
    Tensor<float> u = pixel_unshuffle(t, 2);
    CHECK(u.shape() == Shape{2, 2, 4});
    CHECK(u.values()[0] == 0.0f);
    CHECK(u.values()[1] == 1.0f);
    CHECK(u.values()[2] == 4.0f);
    CHECK(u.values()[3] == 5.0f);
}

TEST_CASE("pixel_unshuffle p=1 is identity") {
    std::mt19937_64 rng(1);
    Tensor<float> t = Tensor<float>::randn({3, 5, 2}, rng, 1.0);
    CHECK(pixel_unshuffle(t, 1).values() == t.values());
}

TEST_CASE("pixel shuffle round trip is bit exact") {
    std::mt19937_64 rng(2);
    for (int p : {2, 4}) {
        Tensor<float> t = Tensor<float>::randn({8, 12, 3}, rng, 1.0);
        Tensor<float> rt = pixel_shuffle(pixel_unshuffle(t, p), p);
        CHECK(rt.shape() == t.shape());
        CHECK(rt.values() == t.values());
    }
}

TEST_CASE("pixel ops reject bad divisibility") {
    Tensor<float> t = Tensor<float>::zeros({56, 56, 4});
    CHECK_THROWS_AS(pixel_unshuffle(t, 3), std::invalid_argument);
    CHECK_THROWS_AS(pixel_shuffle(t, 8), std::invalid_argument);
}

TEST_CASE("attention matches an explicit loop oracle") {
    std::mt19937_64 rng(3);
    Tensor<double> q = Tensor<double>::randn({3, 4}, rng, 1.0);
    Tensor<double> k = Tensor<double>::randn({3, 4}, rng, 1.0);
    Tensor<double> v = Tensor<double>::randn({3, 4}, rng, 1.0);
    Tensor<double> b = Tensor<double>::randn({3, 3}, rng, 1.0);
    Tensor<double> out = attention(q, k, v, b);
    // straight-line reference, no reuse of the library's matmul
    for (int i = 0; i < 3; ++i) {
        double logits[3], mx = -1e300;
        for (int j = 0; j < 3; ++j) {
            double dot = 0;
            for (int c = 0; c < 4; ++c)
                dot += q.values()[std::size_t(i * 4 + c)] * k.values()[std::size_t(j * 4 + c)];
            logits[j] = dot / std::sqrt(4.0) + b.values()[std::size_t(i * 3 + j)];
            mx = std::max(mx, logits[j]);
        }
        double z = 0;
        for (double& l : logits) {
            l = std::exp(l - mx);
            z += l;
        }
        for (int c = 0; c < 4; ++c) {
            double acc = 0;
            for (int j = 0; j < 3; ++j)
                acc += logits[j] / z * v.values()[std::size_t(j * 4 + c)];
            CHECK(out.values()[std::size_t(i * 4 + c)] ==
                  doctest::Approx(acc).epsilon(1e-12));
        }
    }
}

TEST_CASE("attention single key returns V exactly") {
    Tensor<float> q({1, 2}, {0.3f, -0.7f});
    Tensor<float> k({1, 2}, {1.0f, 2.0f});
    Tensor<float> v({1, 2}, {5.0f, -3.0f});
    Tensor<float> b({1}, {0.0f});
    CHECK(attention(q, k, v, b).values() == v.values());
}

TEST_CASE("attention with zero bias equals attention without bias") {
    std::mt19937_64 rng(4);
    Tensor<float> q = Tensor<float>::randn({5, 8}, rng, 1.0);
    Tensor<float> k = Tensor<float>::randn({6, 8}, rng, 1.0);
    Tensor<float> v = Tensor<float>::randn({6, 8}, rng, 1.0);
    Tensor<float> b = Tensor<float>::zeros({6});
    CHECK(attention(q, k, v, b).values() == attention(q, k, v).values());
}

TEST_CASE("softmax rows sum to one and mask suppresses keys") {
    std::mt19937_64 rng(5);
    Tensor<float> x = Tensor<float>::randn({4, 6}, rng, 3.0);
    std::vector<float> bias(6, 0.0f);
    bias[2] = float(kMaskNegative);
    Tensor<float> b({6}, bias);
    Tensor<float> y = softmax(x, &b);
    for (int r = 0; r < 4; ++r) {
        double s = 0;
        for (int j = 0; j < 6; ++j) s += y.values()[std::size_t(r * 6 + j)];
        CHECK(s == doctest::Approx(1.0).epsilon(1e-6));
        CHECK(y.values()[std::size_t(r * 6 + 2)] < 1e-9);
    }
}

TEST_CASE("conv2d with identity kernel is identity") {
    std::mt19937_64 rng(6);
    Tensor<float> x = Tensor<float>::randn({5, 7, 1}, rng, 1.0);
    Tensor<float> w({1, 1, 1, 1}, {1.0f});
    Tensor<float> b = Tensor<float>::zeros({1});
    CHECK(conv2d(x, w, b, 1, 0).values() == x.values());
}

TEST_CASE("layer_norm of a constant row is zero before affine") {
    Tensor<float> x = Tensor<float>::full({2, 4}, 3.5f);
    Tensor<float> g = Tensor<float>::full({4}, 1.0f);
    Tensor<float> be = Tensor<float>::zeros({4});
    Tensor<float> y = layer_norm(x, g, be);
    for (float v : y.values()) CHECK(std::abs(v) < 1e-6f);
}

TEST_CASE("bilinear_upsample of a constant plane stays constant") {
    Tensor<float> x = Tensor<float>::full({1, 1, 1}, 2.25f);
    Tensor<float> y = bilinear_upsample(x, 4);
    for (float v : y.values()) CHECK(v == 2.25f);
}

TEST_CASE("backward analytic example and accumulation") {
    Tensor<float> x({3}, {1.0f, 2.0f, 3.0f}, true);
    Tensor<float> loss = sum(square(x));
    backward(loss);
    CHECK(x.grad() == std::vector<float>{2.0f, 4.0f, 6.0f});
    backward(loss);
    CHECK(x.grad() == std::vector<float>{4.0f, 8.0f, 12.0f});
}

TEST_CASE("backward rejects non-scalar loss") {
    Tensor<float> x = Tensor<float>::zeros({2, 2}, true);
    CHECK_THROWS_AS(backward(square(x)), std::invalid_argument);
}

TEST_CASE("attention backward reaches all four inputs") {
    std::mt19937_64 rng(7);
    Tensor<float> q = Tensor<float>::randn({3, 4}, rng, 1.0, true);
    Tensor<float> k = Tensor<float>::randn({5, 4}, rng, 1.0, true);
    Tensor<float> v = Tensor<float>::randn({5, 4}, rng, 1.0, true);
    Tensor<float> b = Tensor<float>::randn({5}, rng, 1.0, true);
    backward(sum(attention(q, k, v, b)));
    for (const Tensor<float>* t : {&q, &k, &v, &b}) {
        REQUIRE(t->has_grad());
        double norm = 0;
        for (float g : t->grad()) {
            CHECK(std::isfinite(g));
            norm += std::abs(g);
        }
        CHECK(norm > 0.0);
    }
}

TEST_CASE("no-grad mode records nothing") {
    Tensor<float> x = Tensor<float>::full({2}, 1.0f, true);
    NoGradGuard ng;
    Tensor<float> y = square(x);
    CHECK_FALSE(y.tracked());
}

TEST_CASE("grad_check sample of primitives") {
    std::mt19937_64 rng(8);
    auto t = [&](Shape s) { return Tensor<double>::randn(std::move(s), rng, 1.0, true); };
    struct Case {
        const char* name;
        std::vector<Tensor<double>> inputs;
        ScalarClosure fn;
    };
    std::vector<Case> cases;
    cases.push_back({"square", {t({3, 4})}, [](auto& in) { return sum(square(in[0])); }});
    cases.push_back({"gelu", {t({10})}, [](auto& in) { return sum(gelu(in[0])); }});
    cases.push_back({"matmul", {t({3, 4}), t({4, 2})},
                     [](auto& in) { return sum(matmul(in[0], in[1])); }});
    cases.push_back({"layer_norm", {t({3, 5}), t({5}), t({5})}, [](auto& in) {
                         return sum(layer_norm(in[0], in[1], in[2]));
                     }});
    cases.push_back({"conv2d", {t({5, 5, 2}), t({3, 3, 2, 3}), t({3})}, [](auto& in) {
                         return sum(square(conv2d(in[0], in[1], in[2], 2, 1)));
                     }});
    cases.push_back({"softmax", {t({4, 5})}, [](auto& in) {
                         return sum(square(softmax(in[0])));
                     }});
    cases.push_back({"bilinear", {t({3, 4, 2})}, [](auto& in) {
                         return sum(square(bilinear_upsample(in[0], 2)));
                     }});
    for (auto& c : cases) {
        auto rep = grad_check(c.name, c.fn, c.inputs);
        INFO(c.name << " max_rel_error " << rep.max_rel_error);
        CHECK(rep.passed);
    }
}

TEST_CASE("grad_check excludes the relu kink but passes nearby") {
    std::vector<Tensor<double>> in{Tensor<double>({4}, {-1.5, -0.2, 0.3, 2.0}, true)};
    auto rep = grad_check(
        "relu", [](auto& x) { return sum(square(relu(x[0]))); }, in);
    CHECK(rep.passed);
}
