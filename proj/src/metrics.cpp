#include "matte/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace matte {

namespace {

void check_sizes(std::size_t a, std::size_t b) {
    if (a != b) throw std::invalid_argument("metric: prediction/ground-truth size mismatch");
}

// symmetric (reflect) border index: ... c b a | a b c ...
inline int reflect(int i, int n) {
    while (i < 0 || i >= n) {
        if (i < 0) i = -i - 1;
        if (i >= n) i = 2 * n - i - 1;
    }
    return i;
}

struct GaussKernels {
    std::vector<double> g, dg;  // smoothing and first-derivative taps
    int radius;
};

GaussKernels gaussian_derivative_kernels(double sigma) {
    GaussKernels k;
    k.radius = static_cast<int>(std::ceil(3.0 * sigma));
    double sum_g = 0.0;
    for (int i = -k.radius; i <= k.radius; ++i) {
        double e = std::exp(-0.5 * i * i / (sigma * sigma));
        k.g.push_back(e);
        k.dg.push_back(-i / (sigma * sigma) * e);
        sum_g += e;
    }
    for (auto& v : k.g) v /= sum_g;
    for (auto& v : k.dg) v /= sum_g;
    return k;
}

// separable convolution: taps along rows (dx) or columns (dy)
std::vector<double> convolve_sep(const std::vector<float>& img, int h, int w,
                                 const std::vector<double>& row_taps,
                                 const std::vector<double>& col_taps, int radius) {
    std::vector<double> tmp(std::size_t(h) * w, 0.0), out(std::size_t(h) * w, 0.0);
    for (int i = 0; i < h; ++i)
        for (int j = 0; j < w; ++j) {
            double acc = 0.0;
            for (int t = -radius; t <= radius; ++t)
                acc += row_taps[std::size_t(t + radius)] *
                       img[std::size_t(i) * w + reflect(j + t, w)];
            tmp[std::size_t(i) * w + j] = acc;
        }
    for (int i = 0; i < h; ++i)
        for (int j = 0; j < w; ++j) {
            double acc = 0.0;
            for (int t = -radius; t <= radius; ++t)
                acc += col_taps[std::size_t(t + radius)] * tmp[std::size_t(reflect(i + t, h)) * w + j];
            out[std::size_t(i) * w + j] = acc;
        }
    return out;
}

std::vector<double> gradient_magnitude(const std::vector<float>& img, int h, int w,
                                       double sigma) {
    GaussKernels k = gaussian_derivative_kernels(sigma);
    auto gx = convolve_sep(img, h, w, k.dg, k.g, k.radius);
    auto gy = convolve_sep(img, h, w, k.g, k.dg, k.radius);
    std::vector<double> mag(gx.size());
    for (std::size_t i = 0; i < gx.size(); ++i)
        mag[i] = std::sqrt(gx[i] * gx[i] + gy[i] * gy[i]);
    return mag;
}

// largest 4-connected component of a binary mask, flood fill
std::vector<std::uint8_t> largest_component(const std::vector<std::uint8_t>& mask, int h, int w) {
    std::vector<int> label(mask.size(), -1);
    std::vector<std::int64_t> area;
    std::vector<int> stack;
    for (int start = 0; start < h * w; ++start) {
        if (!mask[std::size_t(start)] || label[std::size_t(start)] >= 0) continue;
        int id = static_cast<int>(area.size());
        area.push_back(0);
        stack.push_back(start);
        label[std::size_t(start)] = id;
        while (!stack.empty()) {
            int p = stack.back();
            stack.pop_back();
            area[std::size_t(id)]++;
            int i = p / w, j = p % w;
            const int ni[4] = {i - 1, i + 1, i, i};
            const int nj[4] = {j, j, j - 1, j + 1};
            for (int t = 0; t < 4; ++t) {
                if (ni[t] < 0 || ni[t] >= h || nj[t] < 0 || nj[t] >= w) continue;
                int q = ni[t] * w + nj[t];
                if (mask[std::size_t(q)] && label[std::size_t(q)] < 0) {
                    label[std::size_t(q)] = id;
                    stack.push_back(q);
                }
            }
        }
    }
    std::vector<std::uint8_t> out(mask.size(), 0);
    if (area.empty()) return out;
    int best = static_cast<int>(
        std::max_element(area.begin(), area.end()) - area.begin());
    for (std::size_t i = 0; i < mask.size(); ++i)
        if (label[i] == best) out[i] = 1;
    return out;
}

}  // namespace

double metric_sad(const std::vector<float>& pred, const std::vector<float>& gt) {
    check_sizes(pred.size(), gt.size());
    double acc = 0.0;
    for (std::size_t i = 0; i < pred.size(); ++i) acc += std::abs(double(pred[i]) - gt[i]);
    return acc;
}

double metric_sad_t(const std::vector<float>& pred, const std::vector<float>& gt,
                    const std::vector<std::uint8_t>& mask) {
    check_sizes(pred.size(), gt.size());
    if (mask.size() != pred.size())
        throw std::invalid_argument("metric_sad_t: missing or mismatched transition mask");
    double acc = 0.0;
    for (std::size_t i = 0; i < pred.size(); ++i)
        if (mask[i]) acc += std::abs(double(pred[i]) - gt[i]);
    return acc;
}

double metric_grad(const std::vector<float>& pred, const std::vector<float>& gt, int h, int w,
                   double sigma) {
    check_sizes(pred.size(), gt.size());
    check_sizes(pred.size(), std::size_t(h) * w);
    auto mp = gradient_magnitude(pred, h, w, sigma);
    auto mg = gradient_magnitude(gt, h, w, sigma);
    double acc = 0.0;
    for (std::size_t i = 0; i < mp.size(); ++i) {
        double d = mp[i] - mg[i];
        acc += d * d;
    }
    return acc;
}

double metric_conn(const std::vector<float>& pred, const std::vector<float>& gt, int h, int w,
                   double step) {
    check_sizes(pred.size(), gt.size());
    check_sizes(pred.size(), std::size_t(h) * w);
    const std::size_t n = pred.size();
    // l_map: largest threshold at which a pixel is still connected to the
    // dominant jointly-opaque component
    std::vector<float> l_map(n, -1.0f);
    int steps = static_cast<int>(std::round(1.0 / step));
    for (int k = 1; k <= steps; ++k) {
        float theta = static_cast<float>(k * step);
        std::vector<std::uint8_t> joint(n);
        for (std::size_t i = 0; i < n; ++i) joint[i] = pred[i] >= theta && gt[i] >= theta;
        auto omega = largest_component(joint, h, w);
        float level = static_cast<float>((k - 1) * step);
        for (std::size_t i = 0; i < n; ++i)
            if (l_map[i] < 0.0f && !omega[i]) l_map[i] = level;
    }
    for (auto& v : l_map)
        if (v < 0.0f) v = 1.0f;
    constexpr double kDegreeThreshold = 0.15;
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        double dp = double(pred[i]) - l_map[i];
        double dg = double(gt[i]) - l_map[i];
        double phi_p = 1.0 - (dp >= kDegreeThreshold ? dp : 0.0);
        double phi_g = 1.0 - (dg >= kDegreeThreshold ? dg : 0.0);
        acc += std::abs(phi_p - phi_g);
    }
    return acc;
}

}  // namespace matte
