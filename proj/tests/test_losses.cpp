#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <random>

#include "doctest.h"
#include "matte/losses.hpp"

using namespace matte;

TEST_CASE("bce at p=0.5 is ln 2 and at the target is near zero") {
    Tensor<double> half = Tensor<double>::full({4, 4}, 0.5);
    std::vector<double> target(16, 1.0);
    CHECK(loss_coarse_alpha(half, target).item() ==
          doctest::Approx(std::log(2.0)).epsilon(1e-9));
    Tensor<double> exact = Tensor<double>::full({4, 4}, 1.0);
    // clamped at 1e-7, so the floor is -log(1-1e-7)
    CHECK(loss_coarse_alpha(exact, target).item() ==
          doctest::Approx(-std::log(1.0 - kBceClamp)).epsilon(1e-6));
}

TEST_CASE("bce matches a scalar loop oracle") {
    std::mt19937_64 rng(41);
    std::uniform_real_distribution<double> u(0.01, 0.99);
    std::vector<double> p(24), t(24);
    for (auto& v : p) v = u(rng);
    for (auto& v : t) v = u(rng) > 0.5 ? 1.0 : 0.0;
    Tensor<double> pred({4, 6}, p);
    double want = 0;
    for (int i = 0; i < 24; ++i)
        want += -(t[std::size_t(i)] * std::log(p[std::size_t(i)]) +
                  (1 - t[std::size_t(i)]) * std::log(1 - p[std::size_t(i)]));
    want /= 24;
    CHECK(loss_coarse_alpha(pred, t).item() == doctest::Approx(want).epsilon(1e-12));
}

TEST_CASE("focal class weights") {
    auto w3 = focal_class_weights({5, 5, 5});
    for (double v : w3) CHECK(v == doctest::Approx(1.0 / 3).epsilon(1e-12));
    auto w2 = focal_class_weights({100, 400, 0});
    CHECK(w2[0] == doctest::Approx(2.0 / 3).epsilon(1e-12));
    CHECK(w2[1] == doctest::Approx(1.0 / 3).epsilon(1e-12));
    CHECK(w2[2] == 0.0);
    auto wr = focal_class_weights({9, 4, 1});
    CHECK(wr[0] + wr[1] + wr[2] == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(wr[2] > wr[1]);  // rarer class weighs more
    CHECK(wr[1] > wr[0]);
}

TEST_CASE("focal loss matches a scalar loop oracle") {
    std::mt19937_64 rng(42);
    std::uniform_real_distribution<double> u(0.05, 1.0);
    int h = 5, w = 7;
    std::vector<double> logits(std::size_t(h) * w * 3);
    for (auto& v : logits) v = u(rng);
    // normalize to probabilities
    for (int i = 0; i < h * w; ++i) {
        double s = logits[std::size_t(i) * 3] + logits[std::size_t(i) * 3 + 1] +
                   logits[std::size_t(i) * 3 + 2];
        for (int c = 0; c < 3; ++c) logits[std::size_t(i) * 3 + c] /= s;
    }
    TrimapTarget tgt{h, w, {}};
    std::uniform_int_distribution<int> cls(0, 2);
    for (int i = 0; i < h * w; ++i) tgt.classes.push_back(std::uint8_t(cls(rng)));
    std::vector<std::int64_t> counts(3, 0);
    for (auto c : tgt.classes) counts[c]++;
    auto wts = focal_class_weights(counts);
    double want = 0;
    for (int i = 0; i < h * w; ++i) {
        int c = tgt.classes[std::size_t(i)];
        double p = logits[std::size_t(i) * 3 + c];
        want += -wts[std::size_t(c)] * (1 - p) * (1 - p) * std::log(p);
    }
    want /= h * w;
    Tensor<double> pred({h, w, 3}, logits);
    CHECK(loss_trimap_focal(pred, tgt).item() == doctest::Approx(want).epsilon(1e-10));
}

TEST_CASE("charbonnier floors") {
    LossConfig cfg;
    Tensor<double> a = Tensor<double>::full({8, 8}, 0.3);
    CHECK(loss_alpha(a, a, cfg.epsilon).item() == doctest::Approx(cfg.epsilon).epsilon(1e-9));
    // equal inputs give a 5 * epsilon Laplacian floor, one epsilon per level
    Tensor<double> big = Tensor<double>::full({64, 64}, 0.3);
    CHECK(loss_laplacian(big, big, cfg.epsilon).item() ==
          doctest::Approx(5 * cfg.epsilon).epsilon(1e-9));
    // constant offset c gives sqrt(c^2 + eps^2)
    Tensor<double> b = Tensor<double>::full({8, 8}, 0.45);
    CHECK(loss_alpha(a, b, cfg.epsilon).item() ==
          doctest::Approx(std::sqrt(0.15 * 0.15 + cfg.epsilon * cfg.epsilon)).epsilon(1e-9));
}

TEST_CASE("laplacian loss matches an independent pyramid oracle") {
    std::mt19937_64 rng(43);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    int n = 64;
    std::vector<double> pv(std::size_t(n) * n), gv(std::size_t(n) * n);
    for (auto& v : pv) v = u(rng);
    for (auto& v : gv) v = u(rng);
    double eps = 1e-6;

    // straight-line reference: blur, downsample, upsample, residual
    auto down = [](const std::vector<double>& x, int h, int w) {
        static const double k[5] = {1 / 16.0, 4 / 16.0, 6 / 16.0, 4 / 16.0, 1 / 16.0};
        std::vector<double> out(std::size_t(h / 2) * (w / 2), 0.0);
        for (int oi = 0; oi < h / 2; ++oi)
            for (int oj = 0; oj < w / 2; ++oj) {
                double acc = 0;
                for (int a = -2; a <= 2; ++a)
                    for (int b = -2; b <= 2; ++b) {
                        int i = oi * 2 + a, j = oj * 2 + b;
                        if (i < 0 || i >= h || j < 0 || j >= w) continue;  // zero border
                        acc += k[a + 2] * k[b + 2] * x[std::size_t(i) * w + j];
                    }
                out[std::size_t(oi) * (w / 2) + oj] = acc;
            }
        return out;
    };
    auto up2 = [](const std::vector<double>& x, int h, int w) {
        std::vector<double> out(std::size_t(h * 2) * (w * 2));
        for (int oi = 0; oi < h * 2; ++oi)
            for (int oj = 0; oj < w * 2; ++oj) {
                double si = (oi + 0.5) / 2 - 0.5, sj = (oj + 0.5) / 2 - 0.5;
                int i0 = std::clamp(int(std::floor(si)), 0, h - 1);
                int j0 = std::clamp(int(std::floor(sj)), 0, w - 1);
                int i1 = std::clamp(i0 + 1, 0, h - 1), j1 = std::clamp(j0 + 1, 0, w - 1);
                double fi = std::clamp(si - std::floor(si), 0.0, 1.0);
                double fj = std::clamp(sj - std::floor(sj), 0.0, 1.0);
                if (si < 0) fi = 0;
                if (sj < 0) fj = 0;
                out[std::size_t(oi) * (w * 2) + oj] =
                    (1 - fi) * ((1 - fj) * x[std::size_t(i0) * w + j0] +
                                fj * x[std::size_t(i0) * w + j1]) +
                    fi * ((1 - fj) * x[std::size_t(i1) * w + j0] +
                          fj * x[std::size_t(i1) * w + j1]);
            }
        return out;
    };
    auto residuals = [&](std::vector<double> cur) {
        std::vector<std::vector<double>> res;
        int h = n, w = n;
        for (int l = 0; l < 5; ++l) {
            auto d = down(cur, h, w);
            auto u2 = up2(d, h / 2, w / 2);
            std::vector<double> r(cur.size());
            for (std::size_t i = 0; i < cur.size(); ++i) r[i] = cur[i] - u2[i];
            res.push_back(std::move(r));
            cur = std::move(d);
            h /= 2;
            w /= 2;
        }
        return res;
    };
    auto rp = residuals(pv), rg = residuals(gv);
    double want = 0;
    for (int l = 0; l < 5; ++l) {
        double acc = 0;
        for (std::size_t i = 0; i < rp[std::size_t(l)].size(); ++i) {
            double d = rp[std::size_t(l)][i] - rg[std::size_t(l)][i];
            acc += std::sqrt(d * d + eps * eps);
        }
        want += acc / double(rp[std::size_t(l)].size());
    }
    Tensor<double> pred({n, n}, pv), gt({n, n}, gv);
    CHECK(loss_laplacian(pred, gt, eps).item() == doctest::Approx(want).epsilon(1e-9));
}

TEST_CASE("laplacian rejects non-divisible sizes") {
    Tensor<float> a = Tensor<float>::zeros({48, 64});
    CHECK_THROWS_AS(loss_laplacian(a, a, 1e-6), std::invalid_argument);
}

TEST_CASE("composition loss floor, degenerate layers and loop oracle") {
    std::mt19937_64 rng(44);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    int h = 6, w = 5;
    double eps = 1e-6;
    std::vector<double> ap(std::size_t(h) * w), ag(std::size_t(h) * w),
        fv(std::size_t(h) * w * 3), bv(std::size_t(h) * w * 3);
    for (auto& v : ap) v = u(rng);
    for (auto& v : ag) v = u(rng);
    for (auto& v : fv) v = u(rng);
    for (auto& v : bv) v = u(rng);
    Tensor<double> pa({h, w}, ap), ga({h, w}, ag), fg({h, w, 3}, fv), bg({h, w, 3}, bv);
    CHECK(loss_composition(pa, pa, fg, bg, eps).item() == doctest::Approx(eps).epsilon(1e-9));
    // identical layers make every alpha composite the same image
    CHECK(loss_composition(pa, ga, fg, fg, eps).item() == doctest::Approx(eps).epsilon(1e-9));
    double want = 0;
    for (int i = 0; i < h * w; ++i)
        for (int c = 0; c < 3; ++c) {
            double cp = ap[std::size_t(i)] * fv[std::size_t(i) * 3 + c] +
                        (1 - ap[std::size_t(i)]) * bv[std::size_t(i) * 3 + c];
            double cg = ag[std::size_t(i)] * fv[std::size_t(i) * 3 + c] +
                        (1 - ag[std::size_t(i)]) * bv[std::size_t(i) * 3 + c];
            want += std::sqrt((cp - cg) * (cp - cg) + eps * eps);
        }
    want /= double(h) * w * 3;
    CHECK(loss_composition(pa, ga, fg, bg, eps).item() == doctest::Approx(want).epsilon(1e-10));
}

TEST_CASE("total_loss sums components and rejects non-finite ones") {
    std::vector<std::pair<std::string, Tensor<float>>> parts{
        {"a", Tensor<float>::scalar(1.5f)}, {"b", Tensor<float>::scalar(0.25f)}};
    CHECK(total_loss(parts).item() == 1.75f);
    std::swap(parts[0], parts[1]);
    CHECK(total_loss(parts).item() == 1.75f);
    parts.push_back({"bad", Tensor<float>::scalar(std::numeric_limits<float>::quiet_NaN())});
    CHECK_THROWS_WITH_AS(total_loss(parts), doctest::Contains("bad"), std::runtime_error);
}

TEST_CASE("pseudo-trimap covers every fractional pixel with uncertainty") {
    std::mt19937_64 rng(45);
    std::uniform_real_distribution<float> u(0.0f, 1.0f);
    int n = 64;
    std::vector<float> alpha(std::size_t(n) * n, 0.0f);
    // soft disk in the middle
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
            double d = std::hypot(i - 32.0, j - 32.0);
            alpha[std::size_t(i) * n + j] = float(std::clamp(1.5 - d / 12.0, 0.0, 1.0));
        }
    LossConfig cfg;
    cfg.erode_radius = 3;
    cfg.dilate_radius = 3;
    TrimapPyramid pyr = make_pseudo_trimap(alpha, n, n, cfg);
    REQUIRE(pyr.full.classes.size() == std::size_t(n) * n);
    int unc = 0;
    for (int i = 0; i < n * n; ++i) {
        float a = alpha[std::size_t(i)];
        std::uint8_t c = pyr.full.classes[std::size_t(i)];
        if (a > 0.001f && a < 0.999f) CHECK(c == kTrimapUncertain);
        if (c == kTrimapFg) CHECK(a >= 0.999f);
        if (c == kTrimapBg) CHECK(a <= 0.001f);
        unc += c == kTrimapUncertain;
    }
    CHECK(unc > 0);
    // downsampled levels keep uncertainty wherever any source pixel had it
    CHECK(pyr.at8.h == n / 8);
    CHECK(pyr.at16.h == n / 16);
    CHECK(pyr.at32.h == n / 32);
    for (int i = 0; i < n / 8; ++i)
        for (int j = 0; j < n / 8; ++j) {
            bool any = false;
            for (int a = 0; a < 8; ++a)
                for (int b = 0; b < 8; ++b)
                    any = any || pyr.full.classes[std::size_t(i * 8 + a) * n + j * 8 + b] ==
                                     kTrimapUncertain;
            CHECK((pyr.at8.classes[std::size_t(i) * (n / 8) + j] == kTrimapUncertain) == any);
        }
}

TEST_CASE("pseudo-trimap of constant alpha") {
    LossConfig cfg;
    std::vector<float> zeros(64 * 64, 0.0f);
    TrimapPyramid p0 = make_pseudo_trimap(zeros, 64, 64, cfg);
    for (auto c : p0.full.classes) CHECK(c == kTrimapBg);
    for (auto c : p0.at32.classes) CHECK(c == kTrimapBg);
    std::vector<float> ones(64 * 64, 1.0f);
    TrimapPyramid p1 = make_pseudo_trimap(ones, 64, 64, cfg);
    for (auto c : p1.full.classes) CHECK(c == kTrimapFg);
}

TEST_CASE("binary alpha with zero radii has no uncertain band") {
    LossConfig cfg;
    cfg.erode_radius = 0;
    cfg.dilate_radius = 0;
    std::vector<float> alpha(32 * 32, 0.0f);
    for (int i = 0; i < 16; ++i)
        for (int j = 0; j < 32; ++j) alpha[std::size_t(i) * 32 + j] = 1.0f;
    TrimapPyramid p = make_pseudo_trimap(alpha, 32, 32, cfg);
    for (std::size_t i = 0; i < p.full.classes.size(); ++i)
        CHECK(p.full.classes[i] == (alpha[i] >= 0.999f ? kTrimapFg : kTrimapBg));
}

TEST_CASE("erode_disk shrinks a square by the radius") {
    int n = 16;
    std::vector<std::uint8_t> m(std::size_t(n) * n, 0);
    for (int i = 4; i < 12; ++i)
        for (int j = 4; j < 12; ++j) m[std::size_t(i) * n + j] = 1;
    auto e = erode_disk(m, n, n, 2);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
            bool inside = i >= 6 && i < 10 && j >= 6 && j < 10;
            CHECK((e[std::size_t(i) * n + j] != 0) == inside);
        }
    CHECK(erode_disk(m, n, n, 0) == m);
}

TEST_CASE("downsample_average box means") {
    std::vector<float> x = {0, 1, 2, 3};
    auto y = downsample_average(x, 2, 2, 2);
    REQUIRE(y.size() == 1);
    CHECK(y[0] == 1.5f);
}
