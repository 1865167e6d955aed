#ifndef MATTE_LOSSES_HPP
#define MATTE_LOSSES_HPP

// Pseudo-trimap target generation and the full training-loss suite: BCE for
// coarse alpha, class-weighted focal loss for the trimap, Charbonnier alpha
// loss, 5-level Laplacian pyramid loss and composition loss.

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "matte/region.hpp"
#include "matte/tensor.hpp"

namespace matte {

struct LossConfig {
    double epsilon = 1e-6;  // Charbonnier epsilon
    int pyramid_levels = 5;
    // Morphology radii in full-resolution pixels. dilate_radius erodes the
    // definite-background mask (dilating the band into the background),
    // erode_radius erodes the definite-foreground mask.
    int dilate_radius = 10;
    int erode_radius = 10;

    void validate() const {
        if (epsilon <= 0) throw std::invalid_argument("loss: epsilon must be > 0");
        if (dilate_radius < 0 || erode_radius < 0)
            throw std::invalid_argument("loss: radii must be >= 0");
    }
};

// One-hot 3-class trimap target at some resolution level.
struct TrimapTarget {
    int h = 0, w = 0;
    std::vector<std::uint8_t> classes;  // kTrimapFg / kTrimapBg / kTrimapUncertain

    template <typename T>
    std::vector<T> onehot() const {
        std::vector<T> out(std::size_t(h) * w * 3, T(0));
        for (std::size_t i = 0; i < classes.size(); ++i) out[i * 3 + classes[i]] = T(1);
        return out;
    }
};

struct TrimapPyramid {
    TrimapTarget full, at8, at16, at32;
};

// Disk erosion: a pixel keeps 1 iff every in-bounds pixel within the disk
// is 1 (out-of-bounds neighbors are ignored).
std::vector<std::uint8_t> erode_disk(const std::vector<std::uint8_t>& mask, int h, int w,
                                     int radius);

// alpha_gt: [H,W] in [0,1]. fg = erode(alpha >= 0.999), bg = erode(alpha <=
// 0.001), uncertain = complement; every 0 < alpha < 1 pixel lands in the
// uncertain class. Downsampling lets uncertain win (max-pool), fg/bg by
// majority with ties going to fg.
TrimapPyramid make_pseudo_trimap(const std::vector<float>& alpha_gt, int h, int w,
                                 const LossConfig& cfg);

// Box average-pool by an integer factor (targets for the coarse alpha heads).
template <typename T>
std::vector<T> downsample_average(const std::vector<T>& x, int h, int w, int f) {
    std::vector<T> out(std::size_t(h / f) * (w / f), T(0));
    for (int i = 0; i < h; ++i)
        for (int j = 0; j < w; ++j) out[std::size_t(i / f) * (w / f) + j / f] += x[std::size_t(i) * w + j];
    for (auto& v : out) v /= static_cast<T>(f) * f;
    return out;
}

inline constexpr double kBceClamp = 1e-7;

// Mean binary cross entropy; predictions clamped to [1e-7, 1-1e-7].
template <typename T>
Tensor<T> loss_coarse_alpha(const Tensor<T>& pred, const std::vector<T>& target) {
    if (pred.numel() != static_cast<std::int64_t>(target.size()))
        shape_error("loss_coarse_alpha: prediction/target size mismatch");
    Tensor<T> t(pred.shape(), target);
    Tensor<T> one = Tensor<T>::full(pred.shape(), T(1));
    Tensor<T> p = clamp(pred, kBceClamp, 1.0 - kBceClamp);
    Tensor<T> term = add(mul(t, log(p)), mul(sub(one, t), log(sub(one, p))));
    return scalar_mul(mean(term), -1.0);
}

// Focal-loss class weights: w_i = n_i^{-1/2} / sum over classes with n_i > 0.
inline std::vector<double> focal_class_weights(const std::vector<std::int64_t>& counts) {
    std::vector<double> w(counts.size(), 0.0);
    double denom = 0.0;
    for (std::size_t i = 0; i < counts.size(); ++i)
        if (counts[i] > 0) denom += 1.0 / std::sqrt(double(counts[i]));
    if (denom == 0.0) return w;
    for (std::size_t i = 0; i < counts.size(); ++i)
        if (counts[i] > 0) w[i] = (1.0 / std::sqrt(double(counts[i]))) / denom;
    return w;
}

// pred: [h,w,3] softmax probabilities. Mean over pixels of the weighted
// focal term -sum_i w_i (1-p_i)^2 tau_i log(pred_i).
template <typename T>
Tensor<T> loss_trimap_focal(const Tensor<T>& pred, const TrimapTarget& target) {
    if (pred.rank() != 3 || pred.dim(2) != 3 || pred.dim(0) != target.h ||
        pred.dim(1) != target.w)
        shape_error("loss_trimap_focal: prediction/target shape mismatch");
    std::vector<std::int64_t> counts(3, 0);
    for (auto c : target.classes) counts[c]++;
    std::vector<double> w = focal_class_weights(counts);
    std::vector<T> tau = target.onehot<T>();
    std::vector<T> wtau(tau.size(), T(0));
    for (std::size_t i = 0; i < tau.size(); ++i)
        wtau[i] = tau[i] * static_cast<T>(w[i % 3]);
    Tensor<T> tau_t(pred.shape(), std::move(tau));
    Tensor<T> wtau_t(pred.shape(), std::move(wtau));
    Tensor<T> one = Tensor<T>::full(pred.shape(), T(1));
    // p_i = tau_i * pred_i + (1 - tau_i) * (1 - pred_i)
    Tensor<T> p = add(mul(tau_t, pred), mul(sub(one, tau_t), sub(one, pred)));
    Tensor<T> focal = mul(wtau_t, mul(square(sub(one, p)), log(clamp(pred, kBceClamp, 1.0))));
    double npix = double(target.h) * target.w;
    return scalar_mul(sum(focal), -1.0 / npix);
}

template <typename T>
Tensor<T> charbonnier_mean(const Tensor<T>& diff, double epsilon) {
    return mean(sqrt(scalar_add(square(diff), epsilon * epsilon)));
}

template <typename T>
Tensor<T> loss_alpha(const Tensor<T>& pred, const Tensor<T>& gt, double epsilon) {
    check_same_shape(pred, gt, "loss_alpha");
    return charbonnier_mean(sub(pred, gt), epsilon);
}

// 5-tap binomial blur + stride-2 sample on [H,W,1].
template <typename T>
Tensor<T> pyramid_down(const Tensor<T>& x) {
    static const double k1d[5] = {1 / 16.0, 4 / 16.0, 6 / 16.0, 4 / 16.0, 1 / 16.0};
    std::vector<T> w(25);
    for (int i = 0; i < 5; ++i)
        for (int j = 0; j < 5; ++j) w[std::size_t(i) * 5 + j] = static_cast<T>(k1d[i] * k1d[j]);
    Tensor<T> kernel({5, 5, 1, 1}, std::move(w));
    Tensor<T> zero_b = Tensor<T>::zeros({1});
    return conv2d(x, kernel, zero_b, 2, 2);
}

// Laplacian residuals at 1/1 .. 1/16 from a 5-level pyramid reaching 1/32.
template <typename T>
std::vector<Tensor<T>> laplacian_pyramid(const Tensor<T>& plane, int levels) {
    if (plane.rank() != 2) shape_error("laplacian_pyramid: expects [H,W]");
    int H = plane.dim(0), W = plane.dim(1);
    int div = 1 << levels;
    if (H % div != 0 || W % div != 0)
        shape_error("laplacian_pyramid: dims must be divisible by " + std::to_string(div));
    std::vector<Tensor<T>> out;
    Tensor<T> cur = reshape(plane, {H, W, 1});
    for (int l = 0; l < levels; ++l) {
        Tensor<T> down = pyramid_down(cur);
        Tensor<T> up = bilinear_upsample(down, 2);
        out.push_back(sub(cur, up));
        cur = down;
    }
    return out;
}

template <typename T>
Tensor<T> loss_laplacian(const Tensor<T>& pred, const Tensor<T>& gt, double epsilon,
                         int levels = 5) {
    check_same_shape(pred, gt, "loss_laplacian");
    auto pp = laplacian_pyramid(pred, levels);
    auto pg = laplacian_pyramid(gt, levels);
    Tensor<T> total = Tensor<T>::scalar(T(0));
    for (int l = 0; l < levels; ++l)
        total = add(total, charbonnier_mean(sub(pp[std::size_t(l)], pg[std::size_t(l)]), epsilon));
    return total;
}

// Mean Charbonnier between composites under the ground-truth and predicted
// alpha; fg/bg are the known synthetic layers.
template <typename T>
Tensor<T> loss_composition(const Tensor<T>& pred_alpha, const Tensor<T>& gt_alpha,
                           const Tensor<T>& fg, const Tensor<T>& bg, double epsilon) {
    check_same_shape(pred_alpha, gt_alpha, "loss_composition");
    if (fg.rank() != 3 || fg.dim(2) != 3 || fg.shape() != bg.shape())
        shape_error("loss_composition: fg/bg must be matching [H,W,3]");
    int H = pred_alpha.dim(0), W = pred_alpha.dim(1);
    auto expand3 = [&](const Tensor<T>& a) {
        Tensor<T> col = reshape(a, {H, W, 1});
        return concat({col, col, col}, 2);
    };
    Tensor<T> one = Tensor<T>::full({H, W, 3}, T(1));
    Tensor<T> ap = expand3(pred_alpha);
    Tensor<T> ag = expand3(gt_alpha);
    Tensor<T> comp_p = add(mul(ap, fg), mul(sub(one, ap), bg));
    Tensor<T> comp_g = add(mul(ag, fg), mul(sub(one, ag), bg));
    return charbonnier_mean(sub(comp_p, comp_g), epsilon);
}

// Unweighted sum; any non-finite component aborts with a named error.
template <typename T>
Tensor<T> total_loss(const std::vector<std::pair<std::string, Tensor<T>>>& components) {
    Tensor<T> total = Tensor<T>::scalar(T(0));
    for (const auto& [name, c] : components) {
        if (!std::isfinite(double(c.item())))
            throw std::runtime_error("total_loss: non-finite component '" + name + "'");
        total = add(total, c);
    }
    return total;
}

}  // namespace matte

#endif  // MATTE_LOSSES_HPP
