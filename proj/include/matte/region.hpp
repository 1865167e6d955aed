#ifndef MATTE_REGION_HPP
#define MATTE_REGION_HPP

// Trimap-driven uncertain-region selection, exact KNN (brute force and
// KD-tree with identical tie-breaking), relative-positional-bias slots and
// crop/paste between full resolution and 8x8 region space.

#include <cstdint>
#include <vector>

#include "matte/tensor.hpp"

namespace matte {

inline constexpr int kRegionSize = 8;

struct RegionCoord {
    int row = 0;
    int col = 0;
    bool operator==(const RegionCoord&) const = default;
};

// Trimap class channel order. Ties in probability resolve toward the
// higher index, so "uncertain" wins any tie it is part of.
enum TrimapClass { kTrimapFg = 0, kTrimapBg = 1, kTrimapUncertain = 2 };

// trimap: [h,w,3] probabilities; returns cells whose argmax class is
// "uncertain", in row-major order.
std::vector<RegionCoord> select_uncertain(const std::vector<float>& trimap, int h, int w);

// For each region the k nearest others under Euclidean distance on grid
// coordinates; ties broken by (distance, row, col) lexicographic. k is
// clamped to n-1.
std::vector<std::vector<int>> knn_bruteforce(const std::vector<RegionCoord>& coords, int k);
std::vector<std::vector<int>> knn_kdtree(const std::vector<RegionCoord>& coords, int k);

// Slot of a neighbor's offset relative to the center in the
// (2s-1)^2 + 1 entry bias table; the last slot is the out-of-range bucket.
int bias_index(const RegionCoord& center, const RegionCoord& neighbor, int s);
inline int bias_table_size(int s) { return (2 * s - 1) * (2 * s - 1) + 1; }
inline int bias_center_slot(int s) { return (s - 1) * (2 * s - 1) + (s - 1); }

// rgba: [H,W,4] with H, W divisible by 8 -> [n,8,8,4] crops. Differentiable.
template <typename T>
Tensor<T> crop_regions(const Tensor<T>& rgba, const std::vector<RegionCoord>& coords) {
    if (rgba.rank() != 3) shape_error("crop_regions: expects [H,W,C]");
    int H = rgba.dim(0), W = rgba.dim(1), C = rgba.dim(2);
    if (H % kRegionSize != 0 || W % kRegionSize != 0)
        shape_error("crop_regions: dims must be divisible by 8");
    int gh = H / kRegionSize, gw = W / kRegionSize;
    std::vector<Tensor<T>> crops;
    crops.reserve(coords.size());
    for (const auto& rc : coords) {
        if (rc.row < 0 || rc.row >= gh || rc.col < 0 || rc.col >= gw)
            throw std::out_of_range("crop_regions: coordinate (" + std::to_string(rc.row) +
                                    "," + std::to_string(rc.col) + ") outside " +
                                    std::to_string(gh) + "x" + std::to_string(gw) + " grid");
        Tensor<T> c = slice(rgba, {rc.row * kRegionSize, rc.col * kRegionSize, 0},
                            {kRegionSize, kRegionSize, C});
        crops.push_back(reshape(c, {1, kRegionSize, kRegionSize, C}));
    }
    if (crops.empty()) return Tensor<T>::zeros({0, kRegionSize, kRegionSize, C});
    return concat(crops, 0);
}

// base: [H,W], refined: [n,8,8]. Pixels inside the selected regions come
// from the refined crops, all others bit-identical to base. Differentiable
// w.r.t. both inputs.
template <typename T>
Tensor<T> paste_regions(const Tensor<T>& base, const std::vector<RegionCoord>& coords,
                        const Tensor<T>& refined) {
    if (base.rank() != 2) shape_error("paste_regions: base must be [H,W]");
    if (refined.rank() != 3 || refined.dim(1) != kRegionSize || refined.dim(2) != kRegionSize)
        shape_error("paste_regions: refined must be [n,8,8]");
    if (refined.dim(0) != static_cast<int>(coords.size()))
        shape_error("paste_regions: coords/refined count mismatch");
    int H = base.dim(0), W = base.dim(1);
    if (H % kRegionSize != 0 || W % kRegionSize != 0)
        shape_error("paste_regions: dims must be divisible by 8");
    int gh = H / kRegionSize, gw = W / kRegionSize;
    std::vector<std::uint8_t> seen(static_cast<std::size_t>(gh) * gw, 0);
    for (const auto& rc : coords) {
        if (rc.row < 0 || rc.row >= gh || rc.col < 0 || rc.col >= gw)
            throw std::out_of_range("paste_regions: coordinate outside grid");
        auto& cell = seen[static_cast<std::size_t>(rc.row) * gw + rc.col];
        if (cell)
            throw std::invalid_argument("paste_regions: duplicate coordinate (" +
                                        std::to_string(rc.row) + "," + std::to_string(rc.col) +
                                        ")");
        cell = 1;
    }
    std::vector<T> out = base.values();
    const T* R = refined.values().data();
    for (std::size_t i = 0; i < coords.size(); ++i)
        for (int di = 0; di < kRegionSize; ++di)
            for (int dj = 0; dj < kRegionSize; ++dj)
                out[std::size_t(coords[i].row * kRegionSize + di) * W +
                    coords[i].col * kRegionSize + dj] =
                    R[(std::int64_t(i) * kRegionSize + di) * kRegionSize + dj];
    auto coords_copy = coords;
    return make_op<T>({H, W}, std::move(out), "paste_regions", {base, refined},
                      [coords_copy, W](const std::vector<T>& g) {
                          std::vector<T> gbase = g;
                          std::vector<T> gref(coords_copy.size() * kRegionSize * kRegionSize);
                          for (std::size_t i = 0; i < coords_copy.size(); ++i)
                              for (int di = 0; di < kRegionSize; ++di)
                                  for (int dj = 0; dj < kRegionSize; ++dj) {
                                      std::size_t src =
                                          std::size_t(coords_copy[i].row * kRegionSize + di) * W +
                                          coords_copy[i].col * kRegionSize + dj;
                                      gref[(i * kRegionSize + di) * kRegionSize + dj] = g[src];
                                      gbase[src] = T(0);
                                  }
                          return std::vector<std::vector<T>>{std::move(gbase), std::move(gref)};
                      });
}

}  // namespace matte

#endif  // MATTE_REGION_HPP
