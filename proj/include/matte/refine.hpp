#ifndef MATTE_REFINE_HPP
#define MATTE_REFINE_HPP

// Refinement network: per-region conv encoder to a feature vector, two
// cross-region attention blocks over the region's k nearest neighbors with
// a learnable relative-positional-bias table, and a decoder producing the
// refined 8x8 alpha.

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "matte/layers.hpp"
#include "matte/region.hpp"
#include "matte/tensor.hpp"

namespace matte {

struct RefineConfig {
    int feat_dim = 64;
    int num_heads = 4;
    int k = 8;  // nearest neighbors
    int s = 4;  // search range for relative positional bias

    void validate() const {
        if (feat_dim % num_heads != 0)
            throw std::invalid_argument("refine: feat_dim not divisible by num_heads");
        if (k < 0 || s < 1) throw std::invalid_argument("refine: k must be >= 0 and s >= 1");
    }
};

// Pre-norm attention + residual, then MLP + residual. When central_only,
// only the central region's query attends to the k+1 keys and the MLP is
// applied to the central token alone.
template <typename T>
struct CraBlock {
    LayerNormLayer<T> norm1, norm2;
    LinearLayer<T> qkv, proj;
    MlpLayer<T> mlp;
    int dim = 0, heads = 0;
    bool central_only = false;

    CraBlock() = default;
    template <typename Rng>
    CraBlock(int dim_, int heads_, bool central_only_, Rng& rng)
        : norm1(dim_),
          norm2(dim_),
          qkv(dim_, 3 * dim_, rng),
          proj(dim_, dim_, rng),
          mlp(dim_, 2 * dim_, rng),
          dim(dim_),
          heads(heads_),
          central_only(central_only_) {}

    // neigh: [k+1,dim], row 0 the central region; bias: [k+1], one bias per
    // key position, broadcast over queries.
    Tensor<T> forward(const Tensor<T>& neigh, const Tensor<T>& bias) const {
        if (neigh.rank() != 2 || neigh.dim(1) != dim)
            shape_error("cra_block: expects [k+1," + std::to_string(dim) + "]");
        int k1 = neigh.dim(0);
        if (bias.numel() != k1) shape_error("cra_block: bias length must equal k+1");
        int nq = central_only ? 1 : k1;
        int hd = dim / heads;
        Tensor<T> y = norm1.forward(neigh);
        Tensor<T> qkv_out = qkv.forward(y);
        std::vector<Tensor<T>> head_outs;
        head_outs.reserve(std::size_t(heads));
        for (int hh = 0; hh < heads; ++hh) {
            Tensor<T> q = slice(qkv_out, {0, hh * hd}, {nq, hd});
            Tensor<T> k = slice(qkv_out, {0, dim + hh * hd}, {k1, hd});
            Tensor<T> v = slice(qkv_out, {0, 2 * dim + hh * hd}, {k1, hd});
            head_outs.push_back(attention(q, k, v, bias));
        }
        Tensor<T> attn = proj.forward(concat(head_outs, 1));
        Tensor<T> base = central_only ? slice(neigh, {0, 0}, {1, dim}) : neigh;
        Tensor<T> x1 = add(base, attn);
        return add(x1, mlp.forward(norm2.forward(x1)));
    }

    void collect(ParamMap<T>& pm, const std::string& prefix) {
        norm1.collect(pm, prefix + ".norm1");
        qkv.collect(pm, prefix + ".qkv");
        proj.collect(pm, prefix + ".proj");
        norm2.collect(pm, prefix + ".norm2");
        mlp.collect(pm, prefix + ".mlp");
    }

    static std::int64_t macs(int k1, int dim, bool central_only_) {
        int nq = central_only_ ? 1 : k1;
        return std::int64_t(k1) * dim * 3 * dim          // qkv on all tokens
               + 2 * std::int64_t(nq) * k1 * dim         // QK^T and PV over all heads
               + std::int64_t(nq) * dim * dim            // proj
               + std::int64_t(nq) * dim * 2 * dim * 2;   // mlp
    }
};

template <typename T>
class RefineNet {
public:
    RefineNet() = default;
    template <typename Rng>
    RefineNet(const RefineConfig& cfg, Rng& rng) : cfg_(cfg) {
        cfg.validate();
        int d = cfg.feat_dim;
        enc1_ = Conv2dLayer<T>(3, 3, 4, 16, 2, 1, rng);
        enc2_ = Conv2dLayer<T>(3, 3, 16, 32, 2, 1, rng);
        enc3_ = Conv2dLayer<T>(3, 3, 32, d, 2, 1, rng);
        block1_ = CraBlock<T>(d, cfg.num_heads, false, rng);
        block2_ = CraBlock<T>(d, cfg.num_heads, true, rng);
        dec2_ = Conv2dLayer<T>(3, 3, d + 32, 32, 1, 1, rng);
        dec1_ = Conv2dLayer<T>(3, 3, 32 + 16, 16, 1, 1, rng);
        dec0_ = Conv2dLayer<T>(3, 3, 16 + 4, 32, 1, 1, rng);
        dec0b_ = Conv2dLayer<T>(3, 3, 32, 32, 1, 1, rng);
        out_ = Conv2dLayer<T>(3, 3, 32, 1, 1, 1, rng);
        bias_table_ = Tensor<T>::randn({bias_table_size(cfg.s)}, rng, 0.02, true);
    }

    const RefineConfig& config() const { return cfg_; }
    Tensor<T>& bias_table() { return bias_table_; }
    const CraBlock<T>& block1() const { return block1_; }
    const CraBlock<T>& block2() const { return block2_; }

    Tensor<T> encode(const Tensor<T>& crops) const {
        return reshape(enc3_.forward(relu(enc2_.forward(relu(enc1_.forward(crops))))),
                       {crops.dim(0), cfg_.feat_dim});
    }

    // crops: [n,8,8,4]; coords/knn parallel to crops. Returns [n,8,8] in [0,1].
    Tensor<T> forward(const Tensor<T>& crops, const std::vector<RegionCoord>& coords,
                      const std::vector<std::vector<int>>& knn) const {
        int n = crops.dim(0);
        if (n == 0) return Tensor<T>::zeros({0, kRegionSize, kRegionSize});
        if (static_cast<int>(coords.size()) != n || static_cast<int>(knn.size()) != n)
            shape_error("refine_forward: coords/knn/crops count mismatch");
        Tensor<T> e1 = relu(enc1_.forward(crops));            // [n,4,4,16]
        Tensor<T> e2 = relu(enc2_.forward(e1));               // [n,2,2,32]
        Tensor<T> feats = reshape(enc3_.forward(e2), {n, cfg_.feat_dim});
        Tensor<T> table_col = reshape(bias_table_, {bias_table_size(cfg_.s), 1});
        std::vector<Tensor<T>> ctx_rows;
        ctx_rows.reserve(std::size_t(n));
        for (int i = 0; i < n; ++i) {
            std::vector<int> idx{i};
            idx.insert(idx.end(), knn[std::size_t(i)].begin(), knn[std::size_t(i)].end());
            std::vector<int> slots;
            slots.reserve(idx.size());
            for (int j : idx)
                slots.push_back(
                    bias_index(coords[std::size_t(i)], coords[std::size_t(j)], cfg_.s));
            Tensor<T> neigh = gather_rows(feats, idx);
            Tensor<T> bias =
                reshape(gather_rows(table_col, slots), {static_cast<int>(idx.size())});
            Tensor<T> b1 = block1_.forward(neigh, bias);
            ctx_rows.push_back(block2_.forward(b1, bias));
        }
        Tensor<T> ctx = reshape(concat(ctx_rows, 0), {n, 1, 1, cfg_.feat_dim});
        Tensor<T> d2 = relu(dec2_.forward(concat({bilinear_upsample(ctx, 2), e2}, 3)));
        Tensor<T> d1 = relu(dec1_.forward(concat({bilinear_upsample(d2, 2), e1}, 3)));
        Tensor<T> d0 = relu(dec0_.forward(concat({bilinear_upsample(d1, 2), crops}, 3)));
        d0 = relu(dec0b_.forward(d0));
        // residual on top of the cropped coarse alpha (channel 3), clamped
        Tensor<T> base = slice(crops, {0, 0, 0, 3}, {n, kRegionSize, kRegionSize, 1});
        Tensor<T> alpha = clamp(add(base, out_.forward(d0)), 0.0, 1.0);
        return reshape(alpha, {n, kRegionSize, kRegionSize});
    }

    void collect(ParamMap<T>& pm) {
        enc1_.collect(pm, "refine.enc1");
        enc2_.collect(pm, "refine.enc2");
        enc3_.collect(pm, "refine.enc3");
        block1_.collect(pm, "refine.block1");
        block2_.collect(pm, "refine.block2");
        pm.add("refine.bias_table", bias_table_);
        dec2_.collect(pm, "refine.dec2");
        dec1_.collect(pm, "refine.dec1");
        dec0_.collect(pm, "refine.dec0");
        dec0b_.collect(pm, "refine.dec0b");
        out_.collect(pm, "refine.out");
    }

    // Per-region nominal MACs; total refine cost is exactly linear in the
    // region count. Mirrors forward() and must stay in sync with it.
    static std::int64_t analytic_macs_per_region(const RefineConfig& cfg) {
        int d = cfg.feat_dim;
        int k1 = cfg.k + 1;
        std::int64_t m = 0;
        m += std::int64_t(4) * 4 * 9 * 4 * 16;         // enc1
        m += std::int64_t(2) * 2 * 9 * 16 * 32;        // enc2
        m += std::int64_t(1) * 1 * 9 * 32 * d;         // enc3
        m += CraBlock<T>::macs(k1, d, false);
        m += CraBlock<T>::macs(k1, d, true);
        m += std::int64_t(2) * 2 * 9 * (d + 32) * 32;  // dec2
        m += std::int64_t(4) * 4 * 9 * (32 + 16) * 16; // dec1
        m += std::int64_t(8) * 8 * 9 * (16 + 4) * 32;  // dec0
        m += std::int64_t(8) * 8 * 9 * 32 * 32;        // dec0b
        m += std::int64_t(8) * 8 * 9 * 32 * 1;         // out
        return m;
    }

private:
    RefineConfig cfg_;
    Conv2dLayer<T> enc1_, enc2_, enc3_, dec2_, dec1_, dec0_, dec0b_, out_;
    CraBlock<T> block1_, block2_;
    Tensor<T> bias_table_;
};

}  // namespace matte

#endif  // MATTE_REFINE_HPP
