#include "matte/losses.hpp"

namespace matte {

std::vector<std::uint8_t> erode_disk(const std::vector<std::uint8_t>& mask, int h, int w,
                                     int radius) {
    if (radius <= 0) return mask;
    std::vector<std::pair<int, int>> disk;
    for (int di = -radius; di <= radius; ++di)
        for (int dj = -radius; dj <= radius; ++dj)
            if (di * di + dj * dj <= radius * radius) disk.push_back({di, dj});
    std::vector<std::uint8_t> out(mask.size(), 0);
    for (int i = 0; i < h; ++i)
        for (int j = 0; j < w; ++j) {
            if (!mask[std::size_t(i) * w + j]) continue;
            bool keep = true;
            for (const auto& [di, dj] : disk) {
                int ii = i + di, jj = j + dj;
                if (ii < 0 || ii >= h || jj < 0 || jj >= w) continue;
                if (!mask[std::size_t(ii) * w + jj]) {
                    keep = false;
                    break;
                }
            }
            if (keep) out[std::size_t(i) * w + j] = 1;
        }
    return out;
}

namespace {

TrimapTarget downsample_trimap(const TrimapTarget& full, int f) {
    TrimapTarget out;
    out.h = full.h / f;
    out.w = full.w / f;
    out.classes.assign(std::size_t(out.h) * out.w, kTrimapBg);
    for (int ci = 0; ci < out.h; ++ci)
        for (int cj = 0; cj < out.w; ++cj) {
            int fg = 0, bg = 0;
            bool uncertain = false;
            for (int di = 0; di < f && !uncertain; ++di)
                for (int dj = 0; dj < f; ++dj) {
                    auto c = full.classes[std::size_t(ci * f + di) * full.w + cj * f + dj];
                    if (c == kTrimapUncertain) {
                        uncertain = true;
                        break;
                    }
                    (c == kTrimapFg ? fg : bg)++;
                }
            out.classes[std::size_t(ci) * out.w + cj] =
                uncertain ? kTrimapUncertain : (fg >= bg ? kTrimapFg : kTrimapBg);
        }
    return out;
}

}  // namespace

TrimapPyramid make_pseudo_trimap(const std::vector<float>& alpha_gt, int h, int w,
                                 const LossConfig& cfg) {
    cfg.validate();
    std::vector<std::uint8_t> fg0(alpha_gt.size()), bg0(alpha_gt.size());
    for (std::size_t i = 0; i < alpha_gt.size(); ++i) {
        fg0[i] = alpha_gt[i] >= 0.999f;
        bg0[i] = alpha_gt[i] <= 0.001f;
    }
    auto fg = erode_disk(fg0, h, w, cfg.erode_radius);
    auto bg = erode_disk(bg0, h, w, cfg.dilate_radius);
    TrimapPyramid pyr;
    pyr.full.h = h;
    pyr.full.w = w;
    pyr.full.classes.resize(alpha_gt.size());
    for (std::size_t i = 0; i < alpha_gt.size(); ++i)
        pyr.full.classes[i] = fg[i] ? kTrimapFg : (bg[i] ? kTrimapBg : kTrimapUncertain);
    pyr.at8 = downsample_trimap(pyr.full, 8);
    pyr.at16 = downsample_trimap(pyr.full, 16);
    pyr.at32 = downsample_trimap(pyr.full, 32);
    return pyr;
}

}  // namespace matte
