#ifndef MATTE_LAYERS_HPP
#define MATTE_LAYERS_HPP

#include <random>
#include <string>
#include <utility>
#include <vector>

#include "matte/tensor.hpp"

namespace matte {

// Named parameter registry; collection order is the checkpoint order.
template <typename T>
struct ParamMap {
    std::vector<std::pair<std::string, Tensor<T>>> items;
    void add(const std::string& name, const Tensor<T>& t) { items.push_back({name, t}); }
    Tensor<T>* find(const std::string& name) {
        for (auto& [n, t] : items)
            if (n == name) return &t;
        return nullptr;
    }
};

template <typename T>
struct LinearLayer {
    Tensor<T> w, b;

    LinearLayer() = default;
    template <typename Rng>
    LinearLayer(int din, int dout, Rng& rng) {
        double bound = std::sqrt(1.0 / din);
        w = Tensor<T>::uniform({din, dout}, rng, static_cast<T>(-bound), static_cast<T>(bound),
                               true);
        b = Tensor<T>::zeros({dout}, true);
    }
    Tensor<T> forward(const Tensor<T>& x) const { return linear(x, w, b); }
    void collect(ParamMap<T>& pm, const std::string& prefix) {
        pm.add(prefix + ".w", w);
        pm.add(prefix + ".b", b);
    }
};

template <typename T>
struct Conv2dLayer {
    Tensor<T> w, b;
    int stride = 1, pad = 0;

    Conv2dLayer() = default;
    template <typename Rng>
    Conv2dLayer(int kh, int kw, int cin, int cout, int stride_, int pad_, Rng& rng)
        : stride(stride_), pad(pad_) {
        double bound = std::sqrt(1.0 / (kh * kw * cin));
        w = Tensor<T>::uniform({kh, kw, cin, cout}, rng, static_cast<T>(-bound),
                               static_cast<T>(bound), true);
        b = Tensor<T>::zeros({cout}, true);
    }
    Tensor<T> forward(const Tensor<T>& x) const { return conv2d(x, w, b, stride, pad); }
    void collect(ParamMap<T>& pm, const std::string& prefix) {
        pm.add(prefix + ".w", w);
        pm.add(prefix + ".b", b);
    }
};

template <typename T>
struct LayerNormLayer {
    Tensor<T> gamma, beta;

    LayerNormLayer() = default;
    explicit LayerNormLayer(int c) {
        gamma = Tensor<T>::full({c}, T(1), true);
        beta = Tensor<T>::zeros({c}, true);
    }
    Tensor<T> forward(const Tensor<T>& x) const { return layer_norm(x, gamma, beta); }
    void collect(ParamMap<T>& pm, const std::string& prefix) {
        pm.add(prefix + ".gamma", gamma);
        pm.add(prefix + ".beta", beta);
    }
};

// Two-layer MLP with GELU, hidden = ratio * dim.
template <typename T>
struct MlpLayer {
    LinearLayer<T> fc1, fc2;

    MlpLayer() = default;
    template <typename Rng>
    MlpLayer(int dim, int hidden, Rng& rng) : fc1(dim, hidden, rng), fc2(hidden, dim, rng) {}
    Tensor<T> forward(const Tensor<T>& x) const { return fc2.forward(gelu(fc1.forward(x))); }
    void collect(ParamMap<T>& pm, const std::string& prefix) {
        fc1.collect(pm, prefix + ".fc1");
        fc2.collect(pm, prefix + ".fc2");
    }
};

}  // namespace matte

#endif  // MATTE_LAYERS_HPP
