#ifndef MATTE_LOWRES_HPP
#define MATTE_LOWRES_HPP

// Low resolution network: pixel-unshuffle tokenization, windowed-attention
// backbone that pads features to window multiples and masks the padding,
// and a decoder emitting coarse alpha + trimap at 1/8 with auxiliary heads
// at 1/16 and 1/32.

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "matte/layers.hpp"
#include "matte/tensor.hpp"

namespace matte {

struct BackboneConfig {
    int patch_size = 16;
    int embed_dim = 48;
    std::vector<int> depths{2, 2, 2};
    std::vector<int> num_heads{2, 4, 8};
    int window_size = 7;
    // Pre-tokenization downsample. 1 with patch 16 is the default model;
    // 2 with patch 8 realizes the alternative that gives the same x16
    // reduction. reduction() must equal 16.
    int downsample_pre = 1;

    int reduction() const { return downsample_pre * patch_size; }
    void validate() const {
        if (window_size < 1) throw std::invalid_argument("backbone: window_size must be >= 1");
        if (patch_size < 1 || (patch_size & (patch_size - 1)) != 0)
            throw std::invalid_argument("backbone: patch_size must be a power of two");
        if (depths.size() != num_heads.size())
            throw std::invalid_argument("backbone: depths and num_heads lengths differ");
        if (depths.size() < 2)
            throw std::invalid_argument("backbone: at least two stages required");
        if (reduction() != 16)
            throw std::invalid_argument(
                "backbone: downsample_pre * patch_size must equal 16, got " +
                std::to_string(reduction()));
        for (std::size_t i = 0; i < num_heads.size(); ++i) {
            int dim = i == 0 ? embed_dim : 2 * embed_dim;
            if (dim % num_heads[i] != 0)
                throw std::invalid_argument("backbone: stage dim not divisible by head count");
        }
    }
};

struct WindowMask {
    int padded_h = 0, padded_w = 0;
    std::vector<std::uint8_t> valid;  // 1 at non-padded positions
};

// Pads (shift ? window-shift : 0) at top/left, then to the smallest window
// multiple, plus `extra_h`/`extra_w` whole extra window rows/cols (used by
// the padding-invariance checks).
inline WindowMask make_window_mask(int h, int w, int window, int shift, int extra_h = 0,
                                   int extra_w = 0) {
    WindowMask m;
    int pad_top = shift > 0 ? window - shift : 0;
    int pad_left = pad_top;
    m.padded_h = ((h + pad_top + window - 1) / window + extra_h) * window;
    m.padded_w = ((w + pad_left + window - 1) / window + extra_w) * window;
    m.valid.assign(std::size_t(m.padded_h) * m.padded_w, 0);
    for (int i = 0; i < h; ++i)
        for (int j = 0; j < w; ++j)
            m.valid[std::size_t(i + pad_top) * m.padded_w + j + pad_left] = 1;
    return m;
}

template <typename T>
struct SwinBlock {
    LayerNormLayer<T> norm1, norm2;
    LinearLayer<T> qkv, proj;
    MlpLayer<T> mlp;
    Tensor<T> rel_bias;  // [(2*window-1)^2], shared across heads
    int dim = 0, heads = 0, window = 7, shift = 0;

    SwinBlock() = default;
    template <typename Rng>
    SwinBlock(int dim_, int heads_, int window_, int shift_, Rng& rng)
        : norm1(dim_),
          norm2(dim_),
          qkv(dim_, 3 * dim_, rng),
          proj(dim_, dim_, rng),
          mlp(dim_, 4 * dim_, rng),
          dim(dim_),
          heads(heads_),
          window(window_),
          shift(shift_) {
        int span = 2 * window_ - 1;
        rel_bias = Tensor<T>::randn({span * span}, rng, 0.02, true);
    }

    // x: [h,w,dim]. Pads internally, computes shifted/unshifted window
    // attention with masked padding, slices back to [h,w,dim].
    Tensor<T> forward(const Tensor<T>& x, int extra_h = 0, int extra_w = 0) const {
        int h = x.dim(0), w = x.dim(1);
        WindowMask mask = make_window_mask(h, w, window, shift, extra_h, extra_w);
        int pad_top = shift > 0 ? window - shift : 0;
        Tensor<T> xp = zero_pad(x, pad_top, mask.padded_h - h - pad_top, pad_top,
                                mask.padded_w - w - pad_top);
        Tensor<T> y = norm1.forward(xp);
        int wh = mask.padded_h / window, ww = mask.padded_w / window;
        int wsq = window * window;
        int hd = dim / heads;
        // relative-position slot per (query, key) pair inside a window
        std::vector<int> pair_slots(std::size_t(wsq) * wsq);
        int span = 2 * window - 1;
        for (int a = 0; a < wsq; ++a)
            for (int b = 0; b < wsq; ++b) {
                int dr = b / window - a / window, dc = b % window - a % window;
                pair_slots[std::size_t(a) * wsq + b] = (dr + window - 1) * span + dc + window - 1;
            }
        Tensor<T> bias_col = reshape(rel_bias, {span * span, 1});
        std::vector<Tensor<T>> row_parts;
        for (int wi = 0; wi < wh; ++wi) {
            std::vector<Tensor<T>> col_parts;
            for (int wj = 0; wj < ww; ++wj) {
                Tensor<T> tok = reshape(
                    slice(y, {wi * window, wj * window, 0}, {window, window, dim}), {wsq, dim});
                Tensor<T> qkv_out = qkv.forward(tok);
                // key mask: 0 for valid, large negative for padded
                std::vector<T> maskmat(std::size_t(wsq) * wsq, T(0));
                for (int b = 0; b < wsq; ++b) {
                    bool v = mask.valid[std::size_t(wi * window + b / window) * mask.padded_w +
                                        wj * window + b % window] != 0;
                    if (!v)
                        for (int a = 0; a < wsq; ++a)
                            maskmat[std::size_t(a) * wsq + b] = static_cast<T>(kMaskNegative);
                }
                Tensor<T> bias2d =
                    add(reshape(gather_rows(bias_col, pair_slots), {wsq, wsq}),
                        Tensor<T>({wsq, wsq}, std::move(maskmat)));
                std::vector<Tensor<T>> head_outs;
                for (int hh = 0; hh < heads; ++hh) {
                    Tensor<T> q = slice(qkv_out, {0, hh * hd}, {wsq, hd});
                    Tensor<T> k = slice(qkv_out, {0, dim + hh * hd}, {wsq, hd});
                    Tensor<T> v = slice(qkv_out, {0, 2 * dim + hh * hd}, {wsq, hd});
                    head_outs.push_back(attention(q, k, v, bias2d));
                }
                Tensor<T> merged = proj.forward(concat(head_outs, 1));
                col_parts.push_back(reshape(merged, {window, window, dim}));
            }
            row_parts.push_back(concat(col_parts, 1));
        }
        Tensor<T> attn_full = concat(row_parts, 0);
        Tensor<T> attn_valid = slice(attn_full, {pad_top, pad_top, 0}, {h, w, dim});
        Tensor<T> x1 = add(x, attn_valid);
        Tensor<T> rows = reshape(x1, {h * w, dim});
        Tensor<T> x2 = add(rows, mlp.forward(norm2.forward(rows)));
        return reshape(x2, {h, w, dim});
    }

    void collect(ParamMap<T>& pm, const std::string& prefix) {
        norm1.collect(pm, prefix + ".norm1");
        qkv.collect(pm, prefix + ".qkv");
        proj.collect(pm, prefix + ".proj");
        pm.add(prefix + ".rel_bias", rel_bias);
        norm2.collect(pm, prefix + ".norm2");
        mlp.collect(pm, prefix + ".mlp");
    }

    static std::int64_t macs(int h, int w, int dim, int window, int shift) {
        WindowMask m = make_window_mask(h, w, window, shift);
        std::int64_t nwin = std::int64_t(m.padded_h / window) * (m.padded_w / window);
        std::int64_t wsq = std::int64_t(window) * window;
        std::int64_t attn = nwin * (wsq * dim * 3 * dim     // qkv
                                    + 2 * wsq * wsq * dim   // QK^T and PV over all heads
                                    + wsq * dim * dim);     // proj
        std::int64_t mlp_macs = std::int64_t(h) * w * (std::int64_t(dim) * 4 * dim * 2);
        return attn + mlp_macs;
    }
};

// 2x2 merge: pad to even, space-to-depth, layer norm, linear 4C -> 2C.
template <typename T>
struct PatchMerge {
    LayerNormLayer<T> norm;
    LinearLayer<T> reduce;
    int dim = 0;

    PatchMerge() = default;
    template <typename Rng>
    PatchMerge(int dim_, Rng& rng) : norm(4 * dim_), reduce(4 * dim_, 2 * dim_, rng), dim(dim_) {}

    Tensor<T> forward(const Tensor<T>& x) const {
        int h = x.dim(0), w = x.dim(1);
        Tensor<T> xp = zero_pad(x, 0, h % 2, 0, w % 2);
        int h2 = (h + 1) / 2, w2 = (w + 1) / 2;
        Tensor<T> merged = reshape(pixel_unshuffle(xp, 2), {h2 * w2, 4 * dim});
        Tensor<T> out = reduce.forward(norm.forward(merged));
        return reshape(out, {h2, w2, 2 * dim});
    }
    void collect(ParamMap<T>& pm, const std::string& prefix) {
        norm.collect(pm, prefix + ".norm");
        reduce.collect(pm, prefix + ".reduce");
    }
    static std::int64_t macs(int h, int w, int dim) {
        return std::int64_t((h + 1) / 2) * ((w + 1) / 2) * 4 * dim * 2 * dim;
    }
};

template <typename T>
struct CoarseOutput {
    Tensor<T> alpha8, trimap8;    // [H/8,W/8], [H/8,W/8,3]
    Tensor<T> alpha16, trimap16;  // aux heads, discarded at inference
    Tensor<T> alpha32, trimap32;
};

template <typename T>
class LowresNet {
public:
    static constexpr int kDecDim = 64;

    LowresNet() = default;
    template <typename Rng>
    LowresNet(const BackboneConfig& cfg, Rng& rng) : cfg_(cfg) {
        cfg.validate();
        int e = cfg.embed_dim;
        int tok_ch = cfg.patch_size * cfg.patch_size * 3;
        embed_ = LinearLayer<T>(tok_ch, e, rng);
        embed_norm_ = LayerNormLayer<T>(e);
        for (std::size_t s = 0; s < cfg.depths.size(); ++s) {
            int dim = s == 0 ? e : 2 * e;
            std::vector<SwinBlock<T>> stage;
            for (int b = 0; b < cfg.depths[s]; ++b) {
                int shift = (b % 2 == 1) ? cfg.window_size / 2 : 0;
                stage.emplace_back(dim, cfg.num_heads[s], cfg.window_size, shift, rng);
            }
            stages_.push_back(std::move(stage));
        }
        merge_ = PatchMerge<T>(e, rng);
        final_norm_ = LayerNormLayer<T>(2 * e);
        aux32_head_ = Conv2dLayer<T>(1, 1, 2 * e, 4, 1, 0, rng);
        dec1_ = Conv2dLayer<T>(3, 3, 3 * e, kDecDim, 1, 1, rng);
        dec2_ = Conv2dLayer<T>(3, 3, kDecDim, kDecDim, 1, 1, rng);
        aux16_head_ = Conv2dLayer<T>(1, 1, kDecDim, 4, 1, 0, rng);
        main_head_ = Conv2dLayer<T>(1, 1, kDecDim, 16, 1, 0, rng);
    }

    const BackboneConfig& config() const { return cfg_; }

    // image: [H,W,3], normalized; H, W >= 224 and divisible by 32.
    Tensor<T> tokenize(const Tensor<T>& image) const {
        if (image.rank() != 3 || image.dim(2) != 3) shape_error("tokenize: expects [H,W,3]");
        int H = image.dim(0), W = image.dim(1);
        if (H < 224 || W < 224)
            throw std::invalid_argument("tokenize: image too small, " + std::to_string(H) + "x" +
                                        std::to_string(W) + " (minimum 224x224)");
        Tensor<T> x = image;
        if (cfg_.downsample_pre > 1) x = block_average(x, cfg_.downsample_pre);
        Tensor<T> tokens = pixel_unshuffle(x, cfg_.patch_size);
        int h = tokens.dim(0), w = tokens.dim(1), c = tokens.dim(2);
        Tensor<T> rows = reshape(tokens, {h * w, c});
        Tensor<T> out = embed_norm_.forward(embed_.forward(rows));
        return reshape(out, {h, w, cfg_.embed_dim});
    }

    CoarseOutput<T> forward(const Tensor<T>& image) const {
        int H = image.dim(0), W = image.dim(1);
        if (H % 32 != 0 || W % 32 != 0)
            throw std::invalid_argument("lowres_forward: dims must be divisible by 32");
        Tensor<T> x = tokenize(image);
        for (const auto& blk : stages_[0]) x = blk.forward(x);
        Tensor<T> f16 = x;
        x = merge_.forward(x);
        for (std::size_t s = 1; s < stages_.size(); ++s)
            for (const auto& blk : stages_[s]) x = blk.forward(x);
        Tensor<T> f32 = final_norm_.forward(x);

        int h16 = H / 16, w16 = W / 16, h32 = H / 32, w32 = W / 32;
        CoarseOutput<T> out;
        Tensor<T> a32 = aux32_head_.forward(f32);
        split_head(a32, h32, w32, out.alpha32, out.trimap32);
        Tensor<T> up = slice(bilinear_upsample(f32, 2), {0, 0, 0}, {h16, w16, 2 * cfg_.embed_dim});
        Tensor<T> d = relu(dec1_.forward(concat({up, f16}, 2)));
        d = relu(dec2_.forward(d));
        Tensor<T> a16 = aux16_head_.forward(d);
        split_head(a16, h16, w16, out.alpha16, out.trimap16);
        Tensor<T> main8 = pixel_shuffle(main_head_.forward(d), 2);
        split_head(main8, h16 * 2, w16 * 2, out.alpha8, out.trimap8);
        return out;
    }

    void collect(ParamMap<T>& pm) {
        embed_.collect(pm, "lowres.embed");
        embed_norm_.collect(pm, "lowres.embed_norm");
        for (std::size_t s = 0; s < stages_.size(); ++s)
            for (std::size_t b = 0; b < stages_[s].size(); ++b)
                stages_[s][b].collect(pm, "lowres.stage" + std::to_string(s) + ".block" +
                                              std::to_string(b));
        merge_.collect(pm, "lowres.merge");
        final_norm_.collect(pm, "lowres.final_norm");
        aux32_head_.collect(pm, "lowres.aux32_head");
        dec1_.collect(pm, "lowres.dec1");
        dec2_.collect(pm, "lowres.dec2");
        aux16_head_.collect(pm, "lowres.aux16_head");
        main_head_.collect(pm, "lowres.main_head");
    }

    // Block of the SwinBlock at stage/index, for targeted tests.
    const SwinBlock<T>& block(int stage, int index) const {
        return stages_[std::size_t(stage)][std::size_t(index)];
    }

    // Nominal multiply-add count of one forward pass; mirrors forward()
    // layer by layer and must stay in sync with it.
    static std::int64_t analytic_macs(const BackboneConfig& cfg, int H, int W) {
        int e = cfg.embed_dim;
        std::int64_t total = 0;
        int h = H / cfg.reduction(), w = W / cfg.reduction();
        if (cfg.downsample_pre > 1) {
            int d = cfg.downsample_pre;
            total += std::int64_t(H / d) * (W / d) * (d * d * 3) * 3;
        }
        total += std::int64_t(h) * w * (cfg.patch_size * cfg.patch_size * 3) * e;  // embed
        for (std::size_t s = 0; s < cfg.depths.size(); ++s) {
            int dim = s == 0 ? e : 2 * e;
            int sh = s == 0 ? h : (h + 1) / 2;
            int sw = s == 0 ? w : (w + 1) / 2;
            for (int b = 0; b < cfg.depths[s]; ++b) {
                int shift = (b % 2 == 1) ? cfg.window_size / 2 : 0;
                total += SwinBlock<T>::macs(sh, sw, dim, cfg.window_size, shift);
            }
            if (s == 0) total += PatchMerge<T>::macs(h, w, e);
        }
        int h16 = H / 16, w16 = W / 16, h32 = H / 32, w32 = W / 32;
        total += std::int64_t(h32) * w32 * (2 * e) * 4;                  // aux32 head
        total += std::int64_t(h16) * w16 * 9 * (3 * e) * kDecDim;        // dec1
        total += std::int64_t(h16) * w16 * 9 * kDecDim * kDecDim;        // dec2
        total += std::int64_t(h16) * w16 * kDecDim * 4;                  // aux16 head
        total += std::int64_t(h16) * w16 * kDecDim * 16;                 // main head
        return total;
    }

private:
    static void split_head(const Tensor<T>& head4, int h, int w, Tensor<T>& alpha,
                           Tensor<T>& trimap) {
        alpha = reshape(sigmoid(slice(head4, {0, 0, 0}, {h, w, 1})), {h, w});
        trimap = softmax(slice(head4, {0, 0, 1}, {h, w, 3}));
    }

    // d x d block average via a constant reduction matrix.
    Tensor<T> block_average(const Tensor<T>& x, int d) const {
        int C = x.dim(2);
        Tensor<T> u = pixel_unshuffle(x, d);
        int h = u.dim(0), w = u.dim(1);
        std::vector<T> m(std::size_t(d) * d * C * C, T(0));
        for (int k = 0; k < d * d; ++k)
            for (int c = 0; c < C; ++c)
                m[std::size_t(k * C + c) * C + c] = static_cast<T>(1.0 / (d * d));
        Tensor<T> red = matmul(reshape(u, {h * w, d * d * C}), Tensor<T>({d * d * C, C}, std::move(m)));
        return reshape(red, {h, w, C});
    }

    BackboneConfig cfg_;
    LinearLayer<T> embed_;
    LayerNormLayer<T> embed_norm_;
    std::vector<std::vector<SwinBlock<T>>> stages_;
    PatchMerge<T> merge_;
    LayerNormLayer<T> final_norm_;
    Conv2dLayer<T> aux32_head_, dec1_, dec2_, aux16_head_, main_head_;
};

}  // namespace matte

#endif  // MATTE_LOWRES_HPP
