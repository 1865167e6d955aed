#include "matte/synth.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace matte {

namespace {

inline int reflect(int i, int n) {
    while (i < 0 || i >= n) {
        if (i < 0) i = -i - 1;
        if (i >= n) i = 2 * n - i - 1;
    }
    return i;
}

// Shared composition so that synthesis and augmentation produce bit-equal
// images for identical (alpha, F, B).
std::vector<float> compose(const std::vector<float>& alpha, const std::vector<float>& fg,
                           const std::vector<float>& bg) {
    std::vector<float> img(fg.size());
    for (std::size_t p = 0; p < alpha.size(); ++p)
        for (int c = 0; c < 3; ++c)
            img[p * 3 + c] = alpha[p] * fg[p * 3 + c] + (1.0f - alpha[p]) * bg[p * 3 + c];
    return img;
}

// Smooth color field: bilinear blend of four random corner colors.
std::vector<float> color_field(int h, int w, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    float corner[4][3];
    for (auto& c : corner)
        for (auto& v : c) v = static_cast<float>(u(rng));
    std::vector<float> out(std::size_t(h) * w * 3);
    for (int i = 0; i < h; ++i)
        for (int j = 0; j < w; ++j) {
            float fy = h > 1 ? float(i) / (h - 1) : 0.0f;
            float fx = w > 1 ? float(j) / (w - 1) : 0.0f;
            for (int c = 0; c < 3; ++c)
                out[(std::size_t(i) * w + j) * 3 + c] =
                    (1 - fy) * ((1 - fx) * corner[0][c] + fx * corner[1][c]) +
                    fy * ((1 - fx) * corner[2][c] + fx * corner[3][c]);
        }
    return out;
}

void rgb_to_hsv(float r, float g, float b, float& h, float& s, float& v) {
    float mx = std::max({r, g, b}), mn = std::min({r, g, b});
    v = mx;
    float d = mx - mn;
    s = mx > 0 ? d / mx : 0.0f;
    if (d == 0.0f) {
        h = 0.0f;
    } else if (mx == r) {
        h = 60.0f * std::fmod((g - b) / d + 6.0f, 6.0f);
    } else if (mx == g) {
        h = 60.0f * ((b - r) / d + 2.0f);
    } else {
        h = 60.0f * ((r - g) / d + 4.0f);
    }
}

void hsv_to_rgb(float h, float s, float v, float& r, float& g, float& b) {
    float c = v * s;
    float hp = std::fmod(std::fmod(h, 360.0f) + 360.0f, 360.0f) / 60.0f;
    float x = c * (1.0f - std::abs(std::fmod(hp, 2.0f) - 1.0f));
    float m = v - c;
    float rr = 0, gg = 0, bb = 0;
    switch (int(hp)) {
        case 0: rr = c; gg = x; break;
        case 1: rr = x; gg = c; break;
        case 2: gg = c; bb = x; break;
        case 3: gg = x; bb = c; break;
        case 4: rr = x; bb = c; break;
        default: rr = c; bb = x; break;
    }
    r = rr + m;
    g = gg + m;
    b = bb + m;
}

void color_jitter(std::vector<float>& rgb, const AugmentParams& p) {
    if (p.hue_shift == 0.0 && p.sat_scale == 1.0 && p.val_scale == 1.0) return;
    for (std::size_t i = 0; i + 2 < rgb.size() + 1; i += 3) {
        float h, s, v;
        rgb_to_hsv(rgb[i], rgb[i + 1], rgb[i + 2], h, s, v);
        h += static_cast<float>(p.hue_shift);
        s = std::clamp(s * static_cast<float>(p.sat_scale), 0.0f, 1.0f);
        v = std::clamp(v * static_cast<float>(p.val_scale), 0.0f, 1.0f);
        hsv_to_rgb(h, s, v, rgb[i], rgb[i + 1], rgb[i + 2]);
    }
}

std::vector<float> hflip_plane(const std::vector<float>& x, int h, int w, int ch) {
    std::vector<float> out(x.size());
    for (int i = 0; i < h; ++i)
        for (int j = 0; j < w; ++j)
            for (int c = 0; c < ch; ++c)
                out[(std::size_t(i) * w + j) * ch + c] =
                    x[(std::size_t(i) * w + (w - 1 - j)) * ch + c];
    return out;
}

// Inverse-mapped affine: dst (i,j) samples src at the rotated/scaled
// position about the canvas center, shifted by (ty,tx). Identity parameters
// hit integer positions exactly and are a bit-exact no-op.
std::vector<float> affine_plane(const std::vector<float>& x, int h, int w, int ch,
                                const AugmentParams& p) {
    if (p.scale == 1.0 && p.angle == 0.0 && p.tx == 0.0 && p.ty == 0.0) return x;
    double cy = (h - 1) / 2.0, cx = (w - 1) / 2.0;
    double ca = std::cos(-p.angle * M_PI / 180.0), sa = std::sin(-p.angle * M_PI / 180.0);
    double inv = 1.0 / p.scale;
    std::vector<float> out(x.size());
    for (int i = 0; i < h; ++i)
        for (int j = 0; j < w; ++j) {
            double dy = i - cy - p.ty, dx = j - cx - p.tx;
            double sy = cy + inv * (ca * dy - sa * dx);
            double sx = cx + inv * (sa * dy + ca * dx);
            int i0 = static_cast<int>(std::floor(sy)), j0 = static_cast<int>(std::floor(sx));
            double fy = sy - i0, fx = sx - j0;
            int i1 = std::clamp(i0 + 1, 0, h - 1), j1 = std::clamp(j0 + 1, 0, w - 1);
            i0 = std::clamp(i0, 0, h - 1);
            j0 = std::clamp(j0, 0, w - 1);
            for (int c = 0; c < ch; ++c) {
                auto at = [&](int ii, int jj) {
                    return double(x[(std::size_t(ii) * w + jj) * ch + c]);
                };
                out[(std::size_t(i) * w + j) * ch + c] = static_cast<float>(
                    (1 - fy) * ((1 - fx) * at(i0, j0) + fx * at(i0, j1)) +
                    fy * ((1 - fx) * at(i1, j0) + fx * at(i1, j1)));
            }
        }
    return out;
}

}  // namespace

std::vector<float> gaussian_blur(const std::vector<float>& plane, int h, int w, double sigma) {
    if (sigma <= 0) return plane;
    int radius = static_cast<int>(std::ceil(3.0 * sigma));
    std::vector<double> taps(std::size_t(2 * radius + 1));
    double sum = 0;
    for (int i = -radius; i <= radius; ++i) {
        taps[std::size_t(i + radius)] = std::exp(-0.5 * i * i / (sigma * sigma));
        sum += taps[std::size_t(i + radius)];
    }
    for (auto& t : taps) t /= sum;
    std::vector<float> tmp(plane.size()), out(plane.size());
    for (int i = 0; i < h; ++i)
        for (int j = 0; j < w; ++j) {
            double acc = 0;
            for (int t = -radius; t <= radius; ++t)
                acc += taps[std::size_t(t + radius)] * plane[std::size_t(i) * w + reflect(j + t, w)];
            tmp[std::size_t(i) * w + j] = static_cast<float>(acc);
        }
    for (int i = 0; i < h; ++i)
        for (int j = 0; j < w; ++j) {
            double acc = 0;
            for (int t = -radius; t <= radius; ++t)
                acc += taps[std::size_t(t + radius)] * tmp[std::size_t(reflect(i + t, h)) * w + j];
            out[std::size_t(i) * w + j] = static_cast<float>(acc);
        }
    return out;
}

CompositeSample synthesize_sample(const std::vector<float>& fg_sprite,
                                  const std::vector<float>& alpha_sprite, int sprite_h,
                                  int sprite_w, const std::vector<float>& background, int h,
                                  int w, Placement placement) {
    if (fg_sprite.size() != std::size_t(sprite_h) * sprite_w * 3 ||
        alpha_sprite.size() != std::size_t(sprite_h) * sprite_w)
        throw std::invalid_argument("synthesize_sample: sprite size mismatch");
    if (background.size() != std::size_t(h) * w * 3)
        throw std::invalid_argument("synthesize_sample: background size mismatch");
    if (placement.row < 0 || placement.col < 0 || placement.row + sprite_h > h ||
        placement.col + sprite_w > w)
        throw std::out_of_range("synthesize_sample: placement out of bounds");
    CompositeSample s;
    s.h = h;
    s.w = w;
    s.bg = background;
    s.fg = background;  // F outside the sprite is irrelevant (alpha there is 0)
    s.alpha.assign(std::size_t(h) * w, 0.0f);
    for (int i = 0; i < sprite_h; ++i)
        for (int j = 0; j < sprite_w; ++j) {
            std::size_t dst = std::size_t(placement.row + i) * w + placement.col + j;
            s.alpha[dst] = alpha_sprite[std::size_t(i) * sprite_w + j];
            for (int c = 0; c < 3; ++c)
                s.fg[dst * 3 + c] = fg_sprite[(std::size_t(i) * sprite_w + j) * 3 + c];
        }
    s.image = compose(s.alpha, s.fg, s.bg);
    return s;
}

CompositeSample make_random_sample(int size, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    int h = size, w = size;
    std::vector<float> alpha(std::size_t(h) * w, 0.0f);
    // soft-edged blob silhouette
    double cy = h * (0.45 + 0.2 * u(rng)), cx = w * (0.35 + 0.3 * u(rng));
    double r0 = size * (0.16 + 0.08 * u(rng));
    double wob_phase = 2.0 * M_PI * u(rng);
    for (int i = 0; i < h; ++i)
        for (int j = 0; j < w; ++j) {
            double dy = i - cy, dx = j - cx;
            double ang = std::atan2(dy, dx);
            double r = r0 * (1.0 + 0.15 * std::sin(3 * ang + wob_phase));
            double d = std::sqrt(dy * dy + dx * dx) - r;
            alpha[std::size_t(i) * w + j] =
                static_cast<float>(std::clamp(0.5 - d / 3.0, 0.0, 1.0));
        }
    // thin hair-like strokes radiating from the silhouette edge
    std::vector<float> strokes(alpha.size(), 0.0f);
    int n_strokes = 8 + int(u(rng) * 8);
    for (int sI = 0; sI < n_strokes; ++sI) {
        double ang = 2.0 * M_PI * u(rng);
        double y = cy + (r0 * 0.8) * std::sin(ang);
        double x = cx + (r0 * 0.8) * std::cos(ang);
        double dir = ang + 0.5 * (u(rng) - 0.5);
        double len = size * (0.12 + 0.15 * u(rng));
        double curve = 0.08 * (u(rng) - 0.5);
        for (double t = 0; t < len; t += 0.5) {
            int yi = int(std::lround(y)), xi = int(std::lround(x));
            if (yi >= 0 && yi < h && xi >= 0 && xi < w)
                strokes[std::size_t(yi) * w + xi] = 1.0f;
            dir += curve * 0.5;
            y += 0.5 * std::sin(dir);
            x += 0.5 * std::cos(dir);
        }
    }
    strokes = gaussian_blur(strokes, h, w, 0.7);
    float smax = *std::max_element(strokes.begin(), strokes.end());
    if (smax > 0)
        for (auto& v : strokes) v = std::min(1.0f, v * (1.0f / smax));
    for (std::size_t i = 0; i < alpha.size(); ++i)
        alpha[i] = std::min(1.0f, alpha[i] + strokes[i]);
    // solid core and clean background so fg/bg classes are nonempty
    for (int i = 0; i < h; ++i)
        for (int j = 0; j < w; ++j) {
            double dy = i - cy, dx = j - cx;
            double d = std::sqrt(dy * dy + dx * dx);
            auto& a = alpha[std::size_t(i) * w + j];
            if (d < r0 * 0.7) a = 1.0f;
            if (a < 0.02f) a = 0.0f;
        }
    CompositeSample s;
    s.h = h;
    s.w = w;
    s.alpha = std::move(alpha);
    s.bg = color_field(h, w, rng);
    s.fg = color_field(h, w, rng);
    // keep F and B visibly apart so alpha is identifiable from the composite
    for (std::size_t p = 0; p < s.fg.size(); ++p) s.fg[p] = 0.5f + 0.5f * s.fg[p];
    for (std::size_t p = 0; p < s.bg.size(); ++p) s.bg[p] = 0.4f * s.bg[p];
    s.image = compose(s.alpha, s.fg, s.bg);
    return s;
}

AugmentParams random_augment_params(std::mt19937_64& rng) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    AugmentParams p;
    p.hflip = u(rng) < 0.5;
    p.scale = 0.9 + 0.2 * u(rng);
    p.angle = -10.0 + 20.0 * u(rng);
    p.tx = -8.0 + 16.0 * u(rng);
    p.ty = -8.0 + 16.0 * u(rng);
    p.hue_shift = -18.0 + 36.0 * u(rng);
    p.sat_scale = 0.8 + 0.4 * u(rng);
    p.val_scale = 0.8 + 0.4 * u(rng);
    return p;
}

CompositeSample augment(const CompositeSample& sample, const AugmentParams& params) {
    CompositeSample out;
    out.h = sample.h;
    out.w = sample.w;
    out.alpha = sample.alpha;
    out.fg = sample.fg;
    out.bg = sample.bg;
    if (params.hflip) {
        out.alpha = hflip_plane(out.alpha, out.h, out.w, 1);
        out.fg = hflip_plane(out.fg, out.h, out.w, 3);
        out.bg = hflip_plane(out.bg, out.h, out.w, 3);
    }
    out.alpha = affine_plane(out.alpha, out.h, out.w, 1, params);
    out.fg = affine_plane(out.fg, out.h, out.w, 3, params);
    out.bg = affine_plane(out.bg, out.h, out.w, 3, params);
    color_jitter(out.fg, params);
    color_jitter(out.bg, params);
    // recomposite so the matting equation holds exactly post-augmentation
    out.image = compose(out.alpha, out.fg, out.bg);
    return out;
}

CompositeSample augment(const CompositeSample& sample, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    return augment(sample, random_augment_params(rng));
}

}  // namespace matte
