#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>
#include <deque>
#include <random>

#include "doctest.h"
#include "matte/metrics.hpp"

using namespace matte;

namespace {

// straight-line references, no shared code with the library

double oracle_sad(const std::vector<float>& p, const std::vector<float>& g) {
    double s = 0;
    for (std::size_t i = 0; i < p.size(); ++i) s += std::abs(double(p[i]) - double(g[i]));
    return s;
}

double oracle_sad_t(const std::vector<float>& p, const std::vector<float>& g,
                    const std::vector<std::uint8_t>& m) {
    double s = 0;
    for (std::size_t i = 0; i < p.size(); ++i)
        if (m[i]) s += std::abs(double(p[i]) - double(g[i]));
    return s;
}

int oracle_reflect(int i, int n) {
    // symmetric half-sample reflection
    for (;;) {
        if (i < 0)
            i = -1 - i;
        else if (i >= n)
            i = 2 * n - 1 - i;
        else
            return i;
    }
}

// direct 2D convolution gradient magnitude, derivative-of-Gaussian kernels
std::vector<double> oracle_grad_mag(const std::vector<float>& img, int h, int w, double sigma) {
    int r = int(std::ceil(3.0 * sigma));
    std::vector<double> g, dg;
    double z = 0;
    for (int t = -r; t <= r; ++t) {
        double e = std::exp(-t * t / (2.0 * sigma * sigma));
        g.push_back(e);
        dg.push_back(-t / (sigma * sigma) * e);
        z += e;
    }
    for (auto& v : g) v /= z;
    for (auto& v : dg) v /= z;
    std::vector<double> out(std::size_t(h) * w);
    for (int i = 0; i < h; ++i)
        for (int j = 0; j < w; ++j) {
            double gx = 0, gy = 0;
            for (int a = -r; a <= r; ++a)
                for (int b = -r; b <= r; ++b) {
                    double v = img[std::size_t(oracle_reflect(i + a, h)) * w +
                                   oracle_reflect(j + b, w)];
                    gx += g[std::size_t(a + r)] * dg[std::size_t(b + r)] * v;
                    gy += dg[std::size_t(a + r)] * g[std::size_t(b + r)] * v;
                }
            out[std::size_t(i) * w + j] = std::hypot(gx, gy);
        }
    return out;
}

double oracle_grad(const std::vector<float>& p, const std::vector<float>& g, int h, int w,
                   double sigma) {
    auto mp = oracle_grad_mag(p, h, w, sigma);
    auto mg = oracle_grad_mag(g, h, w, sigma);
    double s = 0;
    for (std::size_t i = 0; i < mp.size(); ++i) s += (mp[i] - mg[i]) * (mp[i] - mg[i]);
    return s;
}

// BFS-based largest 4-connected component
std::vector<std::uint8_t> oracle_largest(const std::vector<std::uint8_t>& m, int h, int w) {
    std::vector<int> comp(m.size(), -1);
    int best_id = -1;
    long best_area = 0, n_comp = 0;
    for (int s = 0; s < h * w; ++s) {
        if (!m[std::size_t(s)] || comp[std::size_t(s)] >= 0) continue;
        long area = 0;
        std::deque<int> q{s};
        comp[std::size_t(s)] = int(n_comp);
        while (!q.empty()) {
            int p = q.front();
            q.pop_front();
            ++area;
            int i = p / w, j = p % w;
            int cand[4][2] = {{i - 1, j}, {i + 1, j}, {i, j - 1}, {i, j + 1}};
            for (auto& c : cand) {
                if (c[0] < 0 || c[0] >= h || c[1] < 0 || c[1] >= w) continue;
                int t = c[0] * w + c[1];
                if (m[std::size_t(t)] && comp[std::size_t(t)] < 0) {
                    comp[std::size_t(t)] = int(n_comp);
                    q.push_back(t);
                }
            }
        }
        if (area > best_area) {
            best_area = area;
            best_id = int(n_comp);
        }
        ++n_comp;
    }
    std::vector<std::uint8_t> out(m.size(), 0);
    for (std::size_t i = 0; i < m.size(); ++i) out[i] = comp[i] == best_id;
    return out;
}

double oracle_conn(const std::vector<float>& p, const std::vector<float>& g, int h, int w,
                   double step) {
    std::size_t n = p.size();
    std::vector<double> li(n, 1.0);
    std::vector<std::uint8_t> done(n, 0);
    for (int k = 1; k * step <= 1.0 + 1e-9; ++k) {
        double theta = k * step;
        std::vector<std::uint8_t> joint(n);
        for (std::size_t i = 0; i < n; ++i)
            joint[i] = p[i] >= float(theta) && g[i] >= float(theta);
        auto omega = oracle_largest(joint, h, w);
        for (std::size_t i = 0; i < n; ++i)
            if (!done[i] && !omega[i]) {
                li[i] = float((k - 1) * step);
                done[i] = 1;
            }
    }
    double s = 0;
    for (std::size_t i = 0; i < n; ++i) {
        double dp = double(p[i]) - li[i], dg = double(g[i]) - li[i];
        double up = dp >= 0.15 ? 1.0 - dp : 1.0;
        double ug = dg >= 0.15 ? 1.0 - dg : 1.0;
        s += std::abs(up - ug);
    }
    return s;
}

}  // namespace

TEST_CASE("identical mattes score zero on every metric") {
    std::mt19937_64 rng(51);
    std::uniform_real_distribution<float> u(0.0f, 1.0f);
    std::vector<float> a(16 * 16);
    for (auto& v : a) v = u(rng);
    std::vector<std::uint8_t> mask(a.size(), 1);
    CHECK(metric_sad(a, a) == 0.0);
    CHECK(metric_sad_t(a, a, mask) == 0.0);
    CHECK(metric_grad(a, a, 16, 16) == 0.0);
    CHECK(metric_conn(a, a, 16, 16) == 0.0);
}

TEST_CASE("inverted binary matte has SAD equal to the pixel count") {
    std::vector<float> gt(100, 0.0f), pred(100, 1.0f);
    for (int i = 0; i < 50; ++i) {
        gt[std::size_t(i)] = 1.0f;
        pred[std::size_t(i)] = 0.0f;
    }
    CHECK(metric_sad(pred, gt) == 100.0);
}

TEST_CASE("sad_t counts only masked pixels") {
    std::vector<float> gt(16, 0.0f), pred(16, 0.5f);
    std::vector<std::uint8_t> mask(16, 0);
    mask[3] = mask[7] = 1;
    CHECK(metric_sad_t(pred, gt, mask) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK_THROWS_AS(metric_sad_t(pred, gt, std::vector<std::uint8_t>(8, 1)),
                    std::invalid_argument);
}

TEST_CASE("random pairs match independent oracles") {
    std::mt19937_64 rng(52);
    std::uniform_real_distribution<float> u(0.0f, 1.0f);
    std::bernoulli_distribution coin(0.4);
    int h = 16, w = 16;
    for (int rep = 0; rep < 50; ++rep) {
        std::vector<float> p(std::size_t(h) * w), g(std::size_t(h) * w);
        std::vector<std::uint8_t> m(std::size_t(h) * w);
        for (auto& v : p) v = u(rng);
        for (auto& v : g) v = u(rng);
        for (auto& v : m) v = coin(rng);
        auto close = [](double got, double want) {
            double denom = std::max({std::abs(got), std::abs(want), 1e-9});
            return std::abs(got - want) / denom < 1e-6;
        };
        CHECK(close(metric_sad(p, g), oracle_sad(p, g)));
        CHECK(close(metric_sad_t(p, g, m), oracle_sad_t(p, g, m)));
        CHECK(close(metric_grad(p, g, h, w), oracle_grad(p, g, h, w, 1.4)));
        CHECK(close(metric_conn(p, g, h, w), oracle_conn(p, g, h, w, 0.1)));
    }
}

TEST_CASE("connectivity favors the matte attached to the dominant blob") {
    // gt: one solid block; pred A keeps it connected, pred B detaches a part
    int h = 8, w = 8;
    std::vector<float> gt(std::size_t(h) * w, 0.0f);
    for (int i = 0; i < 8; ++i)
        for (int j = 0; j < 4; ++j) gt[std::size_t(i) * w + j] = 1.0f;
    std::vector<float> connected = gt, detached = gt;
    for (int i = 0; i < 8; ++i) detached[std::size_t(i) * w + 2] = 0.0f;  // cut a column
    CHECK(metric_conn(connected, gt, h, w) == 0.0);
    CHECK(metric_conn(detached, gt, h, w) > 0.0);
}

TEST_CASE("grad is sensitive to edge sharpness") {
    int h = 16, w = 16;
    std::vector<float> sharp(std::size_t(h) * w, 0.0f), soft(std::size_t(h) * w, 0.0f);
    for (int i = 0; i < h; ++i)
        for (int j = 0; j < w; ++j) {
            sharp[std::size_t(i) * w + j] = j < 8 ? 1.0f : 0.0f;
            soft[std::size_t(i) * w + j] = float(std::clamp((11.0 - j) / 6.0, 0.0, 1.0));
        }
    CHECK(metric_grad(soft, sharp, h, w) > 0.0);
}
