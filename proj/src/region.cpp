#include "matte/region.hpp"

#include <algorithm>
#include <cstdint>
#include <queue>
#include <tuple>

namespace matte {

std::vector<RegionCoord> select_uncertain(const std::vector<float>& trimap, int h, int w) {
    std::vector<RegionCoord> out;
    for (int i = 0; i < h; ++i)
        for (int j = 0; j < w; ++j) {
            const float* p = trimap.data() + (std::size_t(i) * w + j) * 3;
            int best = 0;
            for (int c = 1; c < 3; ++c)
                if (p[c] >= p[best]) best = c;  // later class wins ties
            if (best == kTrimapUncertain) out.push_back({i, j});
        }
    return out;
}

namespace {

using NeighborKey = std::tuple<std::int64_t, int, int>;  // (dist^2, row, col)

inline NeighborKey key_of(const RegionCoord& center, const RegionCoord& other) {
    std::int64_t dr = other.row - center.row;
    std::int64_t dc = other.col - center.col;
    return {dr * dr + dc * dc, other.row, other.col};
}

struct KdNode {
    RegionCoord pt;
    int index;
    int left = -1, right = -1;
    int axis = 0;
};

class KdTree {
public:
    explicit KdTree(const std::vector<RegionCoord>& coords) {
        nodes_.reserve(coords.size());
        std::vector<int> idx(coords.size());
        for (std::size_t i = 0; i < coords.size(); ++i) idx[i] = static_cast<int>(i);
        root_ = build(coords, idx, 0, static_cast<int>(idx.size()), 0);
    }

    // Exact k nearest excluding `self`, ordered by (dist^2, row, col).
    std::vector<int> query(const std::vector<RegionCoord>& coords, int self, int k) const {
        // max-heap on the tie-break key; top is the current worst
        std::priority_queue<std::pair<NeighborKey, int>> heap;
        search(coords, root_, coords[static_cast<std::size_t>(self)], self, k, heap);
        std::vector<std::pair<NeighborKey, int>> items;
        items.reserve(heap.size());
        while (!heap.empty()) {
            items.push_back(heap.top());
            heap.pop();
        }
        std::sort(items.begin(), items.end());
        std::vector<int> result;
        result.reserve(items.size());
        for (auto& [key, i] : items) result.push_back(i);
        return result;
    }

private:
    int build(const std::vector<RegionCoord>& coords, std::vector<int>& idx, int lo, int hi,
              int axis) {
        if (lo >= hi) return -1;
        int mid = (lo + hi) / 2;
        std::nth_element(idx.begin() + lo, idx.begin() + mid, idx.begin() + hi,
                         [&](int a, int b) {
                             const auto &pa = coords[std::size_t(a)], &pb = coords[std::size_t(b)];
                             int va = axis == 0 ? pa.row : pa.col;
                             int vb = axis == 0 ? pb.row : pb.col;
                             if (va != vb) return va < vb;
                             if (pa.row != pb.row) return pa.row < pb.row;
                             return pa.col < pb.col;
                         });
        int node = static_cast<int>(nodes_.size());
        nodes_.push_back({coords[std::size_t(idx[std::size_t(mid)])], idx[std::size_t(mid)], -1,
                          -1, axis});
        int l = build(coords, idx, lo, mid, 1 - axis);
        int r = build(coords, idx, mid + 1, hi, 1 - axis);
        nodes_[std::size_t(node)].left = l;
        nodes_[std::size_t(node)].right = r;
        return node;
    }

    void search(const std::vector<RegionCoord>& coords, int node, const RegionCoord& q, int self,
                int k, std::priority_queue<std::pair<NeighborKey, int>>& heap) const {
        if (node < 0) return;
        const KdNode& nd = nodes_[static_cast<std::size_t>(node)];
        if (nd.index != self) {
            NeighborKey key = key_of(q, nd.pt);
            if (static_cast<int>(heap.size()) < k) {
                heap.push({key, nd.index});
            } else if (key < heap.top().first) {
                heap.pop();
                heap.push({key, nd.index});
            }
        }
        int qv = nd.axis == 0 ? q.row : q.col;
        int nv = nd.axis == 0 ? nd.pt.row : nd.pt.col;
        int near = qv < nv ? nd.left : nd.right;
        int far = qv < nv ? nd.right : nd.left;
        search(coords, near, q, self, k, heap);
        std::int64_t plane = std::int64_t(qv - nv) * (qv - nv);
        // visit the far side when the plane distance ties the current worst:
        // a tied point may still win on the (row, col) tie-break
        if (static_cast<int>(heap.size()) < k || plane <= std::get<0>(heap.top().first))
            search(coords, far, q, self, k, heap);
    }

    std::vector<KdNode> nodes_;
    int root_ = -1;
};

}  // namespace

std::vector<std::vector<int>> knn_bruteforce(const std::vector<RegionCoord>& coords, int k) {
    int n = static_cast<int>(coords.size());
    int kk = std::min(k, n - 1);
    std::vector<std::vector<int>> out(static_cast<std::size_t>(n));
    if (kk <= 0) return out;
    std::vector<std::pair<NeighborKey, int>> cand(static_cast<std::size_t>(n - 1));
    for (int i = 0; i < n; ++i) {
        std::size_t m = 0;
        for (int j = 0; j < n; ++j) {
            if (j == i) continue;
            cand[m++] = {key_of(coords[std::size_t(i)], coords[std::size_t(j)]), j};
        }
        std::partial_sort(cand.begin(), cand.begin() + kk, cand.end());
        auto& lst = out[std::size_t(i)];
        lst.reserve(static_cast<std::size_t>(kk));
        for (int t = 0; t < kk; ++t) lst.push_back(cand[std::size_t(t)].second);
    }
    return out;
}

std::vector<std::vector<int>> knn_kdtree(const std::vector<RegionCoord>& coords, int k) {
    int n = static_cast<int>(coords.size());
    int kk = std::min(k, n - 1);
    std::vector<std::vector<int>> out(static_cast<std::size_t>(n));
    if (kk <= 0) return out;
    KdTree tree(coords);
    for (int i = 0; i < n; ++i) out[std::size_t(i)] = tree.query(coords, i, kk);
    return out;
}

int bias_index(const RegionCoord& center, const RegionCoord& neighbor, int s) {
    int dr = neighbor.row - center.row;
    int dc = neighbor.col - center.col;
    int span = 2 * s - 1;
    if (dr <= -s || dr >= s || dc <= -s || dc >= s) return span * span;  // out of range
    return (dr + s - 1) * span + (dc + s - 1);
}

}  // namespace matte
