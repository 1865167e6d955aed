#ifndef MATTE_TENSOR_HPP
#define MATTE_TENSOR_HPP

// Dense N-d tensor with reverse-mode autodiff. Float storage for
// training/inference, double for gradient checking. Single tape per
// backward() call; leaf gradients accumulate across calls until cleared.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <memory>
#include <numeric>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

namespace matte {

using Shape = std::vector<int>;

inline std::int64_t numel_of(const Shape& s) {
    std::int64_t n = 1;
    for (int d : s) n *= d;
    return n;
}

inline std::string shape_str(const Shape& s) {
    std::ostringstream os;
    os << "[";
    for (std::size_t i = 0; i < s.size(); ++i) os << (i ? "," : "") << s[i];
    os << "]";
    return os.str();
}

[[noreturn]] inline void shape_error(const std::string& msg) {
    throw std::invalid_argument("shape error: " + msg);
}

// Multiply-add counter for FLOP accounting. Counts MACs executed inside
// matmul/linear/conv2d forward paths when enabled.
namespace macs {
inline thread_local std::int64_t count = 0;
inline thread_local bool enabled = false;
inline void add(std::int64_t m) {
    if (enabled) count += m;
}
struct Scope {
    Scope() {
        count = 0;
        enabled = true;
    }
    ~Scope() { enabled = false; }
    std::int64_t value() const { return count; }
};
}  // namespace macs

// Thread-local switch: when off, ops do not record the graph.
inline thread_local bool g_grad_enabled = true;
struct NoGradGuard {
    bool prev;
    NoGradGuard() : prev(g_grad_enabled) { g_grad_enabled = false; }
    ~NoGradGuard() { g_grad_enabled = prev; }
};

template <typename T>
struct Node {
    Shape shape;
    std::vector<T> values;
    std::vector<T> grad;  // empty until populated by backward()
    bool requires_grad = false;
    bool tracked = false;
    const char* op = "leaf";
    std::vector<std::shared_ptr<Node<T>>> parents;
    // Vector-Jacobian product: maps the output cotangent to one cotangent
    // per parent, in parent order.
    std::function<std::vector<std::vector<T>>(const std::vector<T>&)> vjp;
};

template <typename T>
class Tensor {
public:
    Tensor() : n_(std::make_shared<Node<T>>()) {}

    Tensor(Shape shape, std::vector<T> values, bool requires_grad = false)
        : n_(std::make_shared<Node<T>>()) {
        if (numel_of(shape) != static_cast<std::int64_t>(values.size()))
            shape_error("value count " + std::to_string(values.size()) +
                        " does not match shape " + shape_str(shape));
        n_->shape = std::move(shape);
        n_->values = std::move(values);
        n_->requires_grad = requires_grad;
        n_->tracked = requires_grad;
    }

    static Tensor zeros(Shape shape, bool requires_grad = false) {
        auto n = numel_of(shape);
        return Tensor(std::move(shape), std::vector<T>(n, T(0)), requires_grad);
    }
    static Tensor full(Shape shape, T v, bool requires_grad = false) {
        auto n = numel_of(shape);
        return Tensor(std::move(shape), std::vector<T>(n, v), requires_grad);
    }
    static Tensor scalar(T v) { return Tensor({1}, {v}); }

    template <typename Rng>
    static Tensor uniform(Shape shape, Rng& rng, T lo, T hi, bool requires_grad = false) {
        std::uniform_real_distribution<double> d(lo, hi);
        std::vector<T> v(numel_of(shape));
        for (auto& x : v) x = static_cast<T>(d(rng));
        return Tensor(std::move(shape), std::move(v), requires_grad);
    }
    template <typename Rng>
    static Tensor randn(Shape shape, Rng& rng, double stddev, bool requires_grad = false) {
        std::normal_distribution<double> d(0.0, stddev);
        std::vector<T> v(numel_of(shape));
        for (auto& x : v) x = static_cast<T>(d(rng));
        return Tensor(std::move(shape), std::move(v), requires_grad);
    }

    const Shape& shape() const { return n_->shape; }
    int dim(int i) const { return n_->shape[static_cast<std::size_t>(i)]; }
    int rank() const { return static_cast<int>(n_->shape.size()); }
    std::int64_t numel() const { return static_cast<std::int64_t>(n_->values.size()); }

    const std::vector<T>& values() const { return n_->values; }
    std::vector<T>& mutable_values() { return n_->values; }
    T value_at(std::int64_t i) const { return n_->values[static_cast<std::size_t>(i)]; }
    T item() const {
        if (numel() != 1) shape_error("item() on non-scalar tensor " + shape_str(shape()));
        return n_->values[0];
    }

    bool requires_grad() const { return n_->requires_grad; }
    bool tracked() const { return n_->tracked; }
    bool has_grad() const { return !n_->grad.empty(); }
    const std::vector<T>& grad() const { return n_->grad; }
    std::vector<T>& mutable_grad() {
        if (n_->grad.empty()) n_->grad.assign(n_->values.size(), T(0));
        return n_->grad;
    }
    void zero_grad() { n_->grad.clear(); }

    std::shared_ptr<Node<T>> node() const { return n_; }

private:
    std::shared_ptr<Node<T>> n_;
};

template <typename T>
Tensor<T> make_op(Shape shape, std::vector<T> values, const char* op,
                  std::vector<Tensor<T>> parents,
                  std::function<std::vector<std::vector<T>>(const std::vector<T>&)> vjp) {
    Tensor<T> out(std::move(shape), std::move(values));
    bool any_tracked = false;
    for (const auto& p : parents)
        if (p.tracked()) any_tracked = true;
    if (g_grad_enabled && any_tracked) {
        auto n = out.node();
        n->tracked = true;
        n->op = op;
        n->parents.reserve(parents.size());
        for (const auto& p : parents) n->parents.push_back(p.node());
        n->vjp = std::move(vjp);
    }
    return out;
}

// ---------------------------------------------------------------------------
// backward

template <typename T>
void backward(const Tensor<T>& loss) {
    if (loss.numel() != 1)
        throw std::invalid_argument("backward: loss must be scalar, got " +
                                    shape_str(loss.shape()));
    using NodeT = Node<T>;
    // post-order over parents
    std::vector<NodeT*> order;
    std::unordered_set<NodeT*> seen;
    std::vector<std::pair<NodeT*, std::size_t>> stack;
    stack.push_back({loss.node().get(), 0});
    seen.insert(loss.node().get());
    while (!stack.empty()) {
        auto& [node, idx] = stack.back();
        if (idx < node->parents.size()) {
            NodeT* p = node->parents[idx++].get();
            if (p->tracked && !seen.count(p)) {
                seen.insert(p);
                stack.push_back({p, 0});
            }
        } else {
            order.push_back(node);
            stack.pop_back();
        }
    }
    // pass-local cotangents so repeated backward() calls add exactly once each
    std::unordered_map<NodeT*, std::vector<T>> local;
    local[loss.node().get()] = {T(1)};
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        NodeT* node = *it;
        auto found = local.find(node);
        if (found == local.end() || !node->vjp) continue;
        auto pgrads = node->vjp(found->second);
        for (std::size_t i = 0; i < node->parents.size(); ++i) {
            NodeT* p = node->parents[i].get();
            if (!p->tracked) continue;
            auto& acc = local[p];
            auto& g = pgrads[i];
            if (acc.empty())
                acc = std::move(g);
            else
                for (std::size_t j = 0; j < acc.size(); ++j) acc[j] += g[j];
        }
    }
    for (auto& [node, g] : local) {
        if (!node->tracked) continue;
        if (node->grad.empty()) node->grad.assign(node->values.size(), T(0));
        for (std::size_t j = 0; j < g.size(); ++j) node->grad[j] += g[j];
    }
}

// ---------------------------------------------------------------------------
// elementwise helpers

template <typename T, typename F, typename DF>
Tensor<T> unary_op(const Tensor<T>& x, const char* name, F f, DF df) {
    std::vector<T> out(x.values().size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = f(x.values()[i]);
    auto xv = x.values();
    return make_op<T>(
        x.shape(), std::move(out), name, {x},
        [xv = std::move(xv), df](const std::vector<T>& g) {
            std::vector<T> gx(g.size());
            for (std::size_t i = 0; i < g.size(); ++i) gx[i] = g[i] * df(xv[i]);
            return std::vector<std::vector<T>>{std::move(gx)};
        });
}

template <typename T>
void check_same_shape(const Tensor<T>& a, const Tensor<T>& b, const char* op) {
    if (a.shape() != b.shape())
        shape_error(std::string(op) + ": shapes " + shape_str(a.shape()) + " and " +
                    shape_str(b.shape()) + " differ");
}

template <typename T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b) {
    check_same_shape(a, b, "add");
    std::vector<T> out(a.values().size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.values()[i] + b.values()[i];
    return make_op<T>(a.shape(), std::move(out), "add", {a, b},
                      [](const std::vector<T>& g) {
                          return std::vector<std::vector<T>>{g, g};
                      });
}

template <typename T>
Tensor<T> sub(const Tensor<T>& a, const Tensor<T>& b) {
    check_same_shape(a, b, "sub");
    std::vector<T> out(a.values().size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.values()[i] - b.values()[i];
    return make_op<T>(a.shape(), std::move(out), "sub", {a, b},
                      [](const std::vector<T>& g) {
                          std::vector<T> gb(g.size());
                          for (std::size_t i = 0; i < g.size(); ++i) gb[i] = -g[i];
                          return std::vector<std::vector<T>>{g, std::move(gb)};
                      });
}

template <typename T>
Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b) {
    check_same_shape(a, b, "mul");
    std::vector<T> out(a.values().size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.values()[i] * b.values()[i];
    auto av = a.values();
    auto bv = b.values();
    return make_op<T>(a.shape(), std::move(out), "mul", {a, b},
                      [av, bv](const std::vector<T>& g) {
                          std::vector<T> ga(g.size()), gb(g.size());
                          for (std::size_t i = 0; i < g.size(); ++i) {
                              ga[i] = g[i] * bv[i];
                              gb[i] = g[i] * av[i];
                          }
                          return std::vector<std::vector<T>>{std::move(ga), std::move(gb)};
                      });
}

template <typename T>
Tensor<T> scalar_mul(const Tensor<T>& a, double c) {
    std::vector<T> out(a.values().size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.values()[i] * static_cast<T>(c);
    return make_op<T>(a.shape(), std::move(out), "scalar_mul", {a},
                      [c](const std::vector<T>& g) {
                          std::vector<T> ga(g.size());
                          for (std::size_t i = 0; i < g.size(); ++i)
                              ga[i] = g[i] * static_cast<T>(c);
                          return std::vector<std::vector<T>>{std::move(ga)};
                      });
}

template <typename T>
Tensor<T> scalar_add(const Tensor<T>& a, double c) {
    std::vector<T> out(a.values().size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.values()[i] + static_cast<T>(c);
    return make_op<T>(a.shape(), std::move(out), "scalar_add", {a},
                      [](const std::vector<T>& g) {
                          return std::vector<std::vector<T>>{g};
                      });
}

template <typename T>
Tensor<T> relu(const Tensor<T>& x) {
    return unary_op(
        x, "relu", [](T v) { return v > T(0) ? v : T(0); },
        [](T v) { return v > T(0) ? T(1) : T(0); });
}

template <typename T>
Tensor<T> sigmoid(const Tensor<T>& x) {
    return unary_op(
        x, "sigmoid", [](T v) { return T(1) / (T(1) + std::exp(-v)); },
        [](T v) {
            T s = T(1) / (T(1) + std::exp(-v));
            return s * (T(1) - s);
        });
}

template <typename T>
Tensor<T> gelu(const Tensor<T>& x) {
    constexpr double inv_sqrt2 = 0.7071067811865475244;
    constexpr double inv_sqrt2pi = 0.3989422804014326779;
    return unary_op(
        x, "gelu",
        [](T v) { return static_cast<T>(0.5 * v * (1.0 + std::erf(v * inv_sqrt2))); },
        [](T v) {
            double cdf = 0.5 * (1.0 + std::erf(v * inv_sqrt2));
            double pdf = inv_sqrt2pi * std::exp(-0.5 * double(v) * double(v));
            return static_cast<T>(cdf + v * pdf);
        });
}

template <typename T>
Tensor<T> square(const Tensor<T>& x) {
    return unary_op(
        x, "square", [](T v) { return v * v; }, [](T v) { return T(2) * v; });
}

template <typename T>
Tensor<T> sqrt(const Tensor<T>& x) {
    return unary_op(
        x, "sqrt", [](T v) { return std::sqrt(v); },
        [](T v) { return T(0.5) / std::sqrt(v); });
}

template <typename T>
Tensor<T> abs(const Tensor<T>& x) {
    return unary_op(
        x, "abs", [](T v) { return std::abs(v); },
        [](T v) { return v > T(0) ? T(1) : (v < T(0) ? T(-1) : T(0)); });
}

template <typename T>
Tensor<T> log(const Tensor<T>& x) {
    return unary_op(
        x, "log", [](T v) { return std::log(v); }, [](T v) { return T(1) / v; });
}

// Gradient passes through unchanged inside [lo, hi], zero outside.
template <typename T>
Tensor<T> clamp(const Tensor<T>& x, double lo, double hi) {
    T l = static_cast<T>(lo), h = static_cast<T>(hi);
    return unary_op(
        x, "clamp", [l, h](T v) { return std::min(std::max(v, l), h); },
        [l, h](T v) { return (v >= l && v <= h) ? T(1) : T(0); });
}

// ---------------------------------------------------------------------------
// reductions

template <typename T>
Tensor<T> sum(const Tensor<T>& x) {
    T acc = 0;
    for (T v : x.values()) acc += v;
    std::int64_t n = x.numel();
    return make_op<T>({1}, {acc}, "sum", {x}, [n](const std::vector<T>& g) {
        return std::vector<std::vector<T>>{
            std::vector<T>(static_cast<std::size_t>(n), g[0])};
    });
}

template <typename T>
Tensor<T> mean(const Tensor<T>& x) {
    T acc = 0;
    for (T v : x.values()) acc += v;
    std::int64_t n = x.numel();
    T m = acc / static_cast<T>(n);
    return make_op<T>({1}, {m}, "mean", {x}, [n](const std::vector<T>& g) {
        T s = g[0] / static_cast<T>(n);
        return std::vector<std::vector<T>>{
            std::vector<T>(static_cast<std::size_t>(n), s)};
    });
}

// ---------------------------------------------------------------------------
// shape ops

template <typename T>
Tensor<T> reshape(const Tensor<T>& x, Shape shape) {
    if (numel_of(shape) != x.numel())
        shape_error("reshape: cannot view " + shape_str(x.shape()) + " as " +
                    shape_str(shape));
    return make_op<T>(std::move(shape), x.values(), "reshape", {x},
                      [](const std::vector<T>& g) {
                          return std::vector<std::vector<T>>{g};
                      });
}

template <typename T>
Tensor<T> transpose(const Tensor<T>& x) {
    if (x.rank() != 2) shape_error("transpose: expects rank-2, got " + shape_str(x.shape()));
    int n = x.dim(0), m = x.dim(1);
    std::vector<T> out(static_cast<std::size_t>(n) * m);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < m; ++j) out[std::size_t(j) * n + i] = x.values()[std::size_t(i) * m + j];
    return make_op<T>({m, n}, std::move(out), "transpose", {x},
                      [n, m](const std::vector<T>& g) {
                          std::vector<T> gx(g.size());
                          for (int i = 0; i < n; ++i)
                              for (int j = 0; j < m; ++j)
                                  gx[std::size_t(i) * m + j] = g[std::size_t(j) * n + i];
                          return std::vector<std::vector<T>>{std::move(gx)};
                      });
}

template <typename T>
Tensor<T> concat(const std::vector<Tensor<T>>& parts, int axis) {
    if (parts.empty()) shape_error("concat: empty input list");
    int r = parts[0].rank();
    if (axis < 0) axis += r;
    if (axis < 0 || axis >= r) shape_error("concat: axis out of range");
    Shape out_shape = parts[0].shape();
    int total = 0;
    for (const auto& p : parts) {
        if (p.rank() != r) shape_error("concat: rank mismatch");
        for (int d = 0; d < r; ++d)
            if (d != axis && p.dim(d) != out_shape[std::size_t(d)])
                shape_error("concat: dim " + std::to_string(d) + " mismatch");
        total += p.dim(axis);
    }
    out_shape[std::size_t(axis)] = total;
    // outer = product of dims before axis, inner = product after
    std::int64_t outer = 1, inner = 1;
    for (int d = 0; d < axis; ++d) outer *= out_shape[std::size_t(d)];
    for (int d = axis + 1; d < r; ++d) inner *= out_shape[std::size_t(d)];
    std::vector<T> out(numel_of(out_shape));
    std::vector<std::int64_t> chunk(parts.size());
    for (std::size_t p = 0; p < parts.size(); ++p)
        chunk[p] = static_cast<std::int64_t>(parts[p].dim(axis)) * inner;
    std::int64_t out_row = static_cast<std::int64_t>(total) * inner;
    for (std::int64_t o = 0; o < outer; ++o) {
        std::int64_t off = o * out_row;
        for (std::size_t p = 0; p < parts.size(); ++p) {
            const auto& src = parts[p].values();
            std::copy(src.begin() + o * chunk[p], src.begin() + (o + 1) * chunk[p],
                      out.begin() + off);
            off += chunk[p];
        }
    }
    return make_op<T>(
        out_shape, std::move(out), "concat", parts,
        [outer, inner, chunk, out_row](const std::vector<T>& g) {
            std::vector<std::vector<T>> grads(chunk.size());
            for (std::size_t p = 0; p < chunk.size(); ++p)
                grads[p].resize(static_cast<std::size_t>(outer * chunk[p]));
            for (std::int64_t o = 0; o < outer; ++o) {
                std::int64_t off = o * out_row;
                for (std::size_t p = 0; p < chunk.size(); ++p) {
                    std::copy(g.begin() + off, g.begin() + off + chunk[p],
                              grads[p].begin() + o * chunk[p]);
                    off += chunk[p];
                }
            }
            return grads;
        });
}

template <typename T>
Tensor<T> concat(std::initializer_list<Tensor<T>> parts, int axis) {
    return concat(std::vector<Tensor<T>>(parts), axis);
}

template <typename T>
Tensor<T> slice(const Tensor<T>& x, const std::vector<int>& offsets,
                const std::vector<int>& sizes) {
    int r = x.rank();
    if (static_cast<int>(offsets.size()) != r || static_cast<int>(sizes.size()) != r)
        shape_error("slice: offsets/sizes rank mismatch");
    for (int d = 0; d < r; ++d)
        if (offsets[std::size_t(d)] < 0 || sizes[std::size_t(d)] < 0 ||
            offsets[std::size_t(d)] + sizes[std::size_t(d)] > x.dim(d))
            shape_error("slice: out of bounds on axis " + std::to_string(d));
    Shape out_shape(sizes.begin(), sizes.end());
    std::vector<std::int64_t> strides(static_cast<std::size_t>(r), 1);
    for (int d = r - 2; d >= 0; --d)
        strides[std::size_t(d)] = strides[std::size_t(d) + 1] * x.dim(d + 1);
    std::vector<T> out(numel_of(out_shape));
    std::vector<int> idx(static_cast<std::size_t>(r), 0);
    Shape xshape = x.shape();
    std::int64_t n_out = static_cast<std::int64_t>(out.size());
    // map linear out index -> source index
    std::vector<std::int64_t> src_index(out.size());
    for (std::int64_t i = 0; i < n_out; ++i) {
        std::int64_t src = 0;
        for (int d = 0; d < r; ++d)
            src += strides[std::size_t(d)] * (offsets[std::size_t(d)] + idx[std::size_t(d)]);
        src_index[static_cast<std::size_t>(i)] = src;
        out[static_cast<std::size_t>(i)] = x.values()[static_cast<std::size_t>(src)];
        for (int d = r - 1; d >= 0; --d) {
            if (++idx[std::size_t(d)] < sizes[std::size_t(d)]) break;
            idx[std::size_t(d)] = 0;
        }
    }
    std::int64_t x_numel = x.numel();
    return make_op<T>(out_shape, std::move(out), "slice", {x},
                      [src_index, x_numel](const std::vector<T>& g) {
                          std::vector<T> gx(static_cast<std::size_t>(x_numel), T(0));
                          for (std::size_t i = 0; i < g.size(); ++i)
                              gx[static_cast<std::size_t>(src_index[i])] += g[i];
                          return std::vector<std::vector<T>>{std::move(gx)};
                      });
}

// Spatial zero padding for [H,W,C] or [N,H,W,C].
template <typename T>
Tensor<T> zero_pad(const Tensor<T>& x, int top, int bottom, int left, int right) {
    if (top < 0 || bottom < 0 || left < 0 || right < 0)
        shape_error("zero_pad: negative pad amount");
    bool batched = x.rank() == 4;
    if (!batched && x.rank() != 3)
        shape_error("zero_pad: expects rank 3 or 4, got " + shape_str(x.shape()));
    int N = batched ? x.dim(0) : 1;
    int H = x.dim(batched ? 1 : 0), W = x.dim(batched ? 2 : 1), C = x.dim(batched ? 3 : 2);
    int Ho = H + top + bottom, Wo = W + left + right;
    Shape out_shape = batched ? Shape{N, Ho, Wo, C} : Shape{Ho, Wo, C};
    std::vector<T> out(numel_of(out_shape), T(0));
    for (int n = 0; n < N; ++n)
        for (int i = 0; i < H; ++i) {
            const T* src = x.values().data() + ((std::int64_t(n) * H + i) * W) * C;
            T* dst = out.data() + ((std::int64_t(n) * Ho + i + top) * Wo + left) * C;
            std::copy(src, src + std::int64_t(W) * C, dst);
        }
    return make_op<T>(out_shape, std::move(out), "zero_pad", {x},
                      [=](const std::vector<T>& g) {
                          std::vector<T> gx(std::size_t(std::int64_t(N) * H * W * C));
                          for (int n = 0; n < N; ++n)
                              for (int i = 0; i < H; ++i) {
                                  const T* src =
                                      g.data() + ((std::int64_t(n) * Ho + i + top) * Wo + left) * C;
                                  T* dst = gx.data() + ((std::int64_t(n) * H + i) * W) * C;
                                  std::copy(src, src + std::int64_t(W) * C, dst);
                              }
                          return std::vector<std::vector<T>>{std::move(gx)};
                      });
}

template <typename T>
Tensor<T> gather_rows(const Tensor<T>& x, const std::vector<int>& indices) {
    if (x.rank() != 2) shape_error("gather_rows: expects rank-2, got " + shape_str(x.shape()));
    int n = x.dim(0), d = x.dim(1);
    for (int i : indices)
        if (i < 0 || i >= n) shape_error("gather_rows: index out of range");
    int m = static_cast<int>(indices.size());
    std::vector<T> out(std::size_t(m) * d);
    for (int i = 0; i < m; ++i)
        std::copy(x.values().begin() + std::int64_t(indices[std::size_t(i)]) * d,
                  x.values().begin() + std::int64_t(indices[std::size_t(i)] + 1) * d,
                  out.begin() + std::int64_t(i) * d);
    return make_op<T>({m, d}, std::move(out), "gather_rows", {x},
                      [indices, n, d](const std::vector<T>& g) {
                          std::vector<T> gx(std::size_t(n) * d, T(0));
                          for (std::size_t i = 0; i < indices.size(); ++i)
                              for (int j = 0; j < d; ++j)
                                  gx[std::size_t(indices[i]) * d + j] += g[i * d + j];
                          return std::vector<std::vector<T>>{std::move(gx)};
                      });
}

// ---------------------------------------------------------------------------
// pixel shuffle / unshuffle (space-to-depth and back), [H,W,C]

template <typename T>
Tensor<T> pixel_unshuffle(const Tensor<T>& x, int p) {
    if (x.rank() != 3) shape_error("pixel_unshuffle: expects [H,W,C]");
    if (p < 1) shape_error("pixel_unshuffle: patch size must be positive");
    int H = x.dim(0), W = x.dim(1), C = x.dim(2);
    if (H % p != 0)
        shape_error("pixel_unshuffle: height " + std::to_string(H) +
                    " not divisible by patch " + std::to_string(p));
    if (W % p != 0)
        shape_error("pixel_unshuffle: width " + std::to_string(W) +
                    " not divisible by patch " + std::to_string(p));
    int h = H / p, w = W / p, Co = p * p * C;
    std::vector<T> out(std::size_t(h) * w * Co);
    // channel order: row-major over the p x p block, original channels fastest
    for (int i = 0; i < h; ++i)
        for (int j = 0; j < w; ++j)
            for (int di = 0; di < p; ++di)
                for (int dj = 0; dj < p; ++dj)
                    for (int c = 0; c < C; ++c)
                        out[((std::int64_t(i) * w + j) * Co) + (di * p + dj) * C + c] =
                            x.values()[((std::int64_t(i) * p + di) * W + j * p + dj) * C + c];
    return make_op<T>({h, w, Co}, std::move(out), "pixel_unshuffle", {x},
                      [=](const std::vector<T>& g) {
                          std::vector<T> gx(std::size_t(H) * W * C);
                          for (int i = 0; i < h; ++i)
                              for (int j = 0; j < w; ++j)
                                  for (int di = 0; di < p; ++di)
                                      for (int dj = 0; dj < p; ++dj)
                                          for (int c = 0; c < C; ++c)
                                              gx[((std::int64_t(i) * p + di) * W + j * p + dj) * C +
                                                 c] =
                                                  g[((std::int64_t(i) * w + j) * Co) +
                                                    (di * p + dj) * C + c];
                          return std::vector<std::vector<T>>{std::move(gx)};
                      });
}

template <typename T>
Tensor<T> pixel_shuffle(const Tensor<T>& x, int p) {
    if (x.rank() != 3) shape_error("pixel_shuffle: expects [h,w,p^2*C]");
    if (p < 1) shape_error("pixel_shuffle: patch size must be positive");
    int h = x.dim(0), w = x.dim(1), Ci = x.dim(2);
    if (Ci % (p * p) != 0)
        shape_error("pixel_shuffle: channel count " + std::to_string(Ci) +
                    " not divisible by p^2 = " + std::to_string(p * p));
    int C = Ci / (p * p);
    int H = h * p, W = w * p;
    std::vector<T> out(std::size_t(H) * W * C);
    for (int i = 0; i < h; ++i)
        for (int j = 0; j < w; ++j)
            for (int di = 0; di < p; ++di)
                for (int dj = 0; dj < p; ++dj)
                    for (int c = 0; c < C; ++c)
                        out[((std::int64_t(i) * p + di) * W + j * p + dj) * C + c] =
                            x.values()[((std::int64_t(i) * w + j) * Ci) + (di * p + dj) * C + c];
    return make_op<T>({H, W, C}, std::move(out), "pixel_shuffle", {x},
                      [=](const std::vector<T>& g) {
                          std::vector<T> gx(std::size_t(h) * w * Ci);
                          for (int i = 0; i < h; ++i)
                              for (int j = 0; j < w; ++j)
                                  for (int di = 0; di < p; ++di)
                                      for (int dj = 0; dj < p; ++dj)
                                          for (int c = 0; c < C; ++c)
                                              gx[((std::int64_t(i) * w + j) * Ci) +
                                                 (di * p + dj) * C + c] =
                                                  g[((std::int64_t(i) * p + di) * W + j * p + dj) *
                                                        C +
                                                    c];
                          return std::vector<std::vector<T>>{std::move(gx)};
                      });
}

// ---------------------------------------------------------------------------
// linear algebra

template <typename T>
Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b) {
    if (a.rank() != 2 || b.rank() != 2)
        shape_error("matmul: expects rank-2 operands");
    int n = a.dim(0), k = a.dim(1), k2 = b.dim(0), m = b.dim(1);
    if (k != k2)
        shape_error("matmul: inner dims disagree, " + shape_str(a.shape()) + " x " +
                    shape_str(b.shape()));
    macs::add(std::int64_t(n) * k * m);
    std::vector<T> out(std::size_t(n) * m, T(0));
    const T* A = a.values().data();
    const T* B = b.values().data();
    for (int i = 0; i < n; ++i)
        for (int kk = 0; kk < k; ++kk) {
            T av = A[std::int64_t(i) * k + kk];
            const T* brow = B + std::int64_t(kk) * m;
            T* orow = out.data() + std::int64_t(i) * m;
            for (int j = 0; j < m; ++j) orow[j] += av * brow[j];
        }
    auto av = a.values();
    auto bv = b.values();
    return make_op<T>({n, m}, std::move(out), "matmul", {a, b},
                      [n, k, m, av, bv](const std::vector<T>& g) {
                          std::vector<T> ga(std::size_t(n) * k, T(0)), gb(std::size_t(k) * m, T(0));
                          // ga = g * b^T
                          for (int i = 0; i < n; ++i)
                              for (int j = 0; j < m; ++j) {
                                  T gv = g[std::size_t(i) * m + j];
                                  for (int kk = 0; kk < k; ++kk)
                                      ga[std::size_t(i) * k + kk] += gv * bv[std::size_t(kk) * m + j];
                              }
                          // gb = a^T * g
                          for (int i = 0; i < n; ++i)
                              for (int kk = 0; kk < k; ++kk) {
                                  T avv = av[std::size_t(i) * k + kk];
                                  for (int j = 0; j < m; ++j)
                                      gb[std::size_t(kk) * m + j] += avv * g[std::size_t(i) * m + j];
                              }
                          return std::vector<std::vector<T>>{std::move(ga), std::move(gb)};
                      });
}

// y = x W + b, x:[n,din] W:[din,dout] b:[dout]
template <typename T>
Tensor<T> linear(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& b) {
    if (x.rank() != 2 || w.rank() != 2 || b.rank() != 1)
        shape_error("linear: expects x[n,din], w[din,dout], b[dout]");
    int n = x.dim(0), din = x.dim(1), dout = w.dim(1);
    if (w.dim(0) != din || b.dim(0) != dout)
        shape_error("linear: dims disagree, x" + shape_str(x.shape()) + " w" +
                    shape_str(w.shape()) + " b" + shape_str(b.shape()));
    macs::add(std::int64_t(n) * din * dout);
    std::vector<T> out(std::size_t(n) * dout);
    const T* X = x.values().data();
    const T* W = w.values().data();
    const T* B = b.values().data();
    for (int i = 0; i < n; ++i) {
        T* orow = out.data() + std::int64_t(i) * dout;
        std::copy(B, B + dout, orow);
        for (int kk = 0; kk < din; ++kk) {
            T xv = X[std::int64_t(i) * din + kk];
            const T* wrow = W + std::int64_t(kk) * dout;
            for (int j = 0; j < dout; ++j) orow[j] += xv * wrow[j];
        }
    }
    auto xv = x.values();
    auto wv = w.values();
    return make_op<T>(
        {n, dout}, std::move(out), "linear", {x, w, b},
        [n, din, dout, xv, wv](const std::vector<T>& g) {
            std::vector<T> gx(std::size_t(n) * din, T(0)), gw(std::size_t(din) * dout, T(0)),
                gb(std::size_t(dout), T(0));
            for (int i = 0; i < n; ++i)
                for (int j = 0; j < dout; ++j) {
                    T gv = g[std::size_t(i) * dout + j];
                    gb[std::size_t(j)] += gv;
                    for (int kk = 0; kk < din; ++kk)
                        gx[std::size_t(i) * din + kk] += gv * wv[std::size_t(kk) * dout + j];
                }
            for (int i = 0; i < n; ++i)
                for (int kk = 0; kk < din; ++kk) {
                    T xvv = xv[std::size_t(i) * din + kk];
                    for (int j = 0; j < dout; ++j)
                        gw[std::size_t(kk) * dout + j] += xvv * g[std::size_t(i) * dout + j];
                }
            return std::vector<std::vector<T>>{std::move(gx), std::move(gw), std::move(gb)};
        });
}

// conv2d, cross-correlation convention (no kernel flip).
// x: [N,H,W,Ci] or [H,W,Ci]; w: [kh,kw,Ci,Co]; b: [Co]; symmetric zero pad.
template <typename T>
Tensor<T> conv2d(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& b, int stride,
                 int pad) {
    bool batched = x.rank() == 4;
    if (!batched && x.rank() != 3) shape_error("conv2d: expects rank 3 or 4 input");
    if (w.rank() != 4 || b.rank() != 1) shape_error("conv2d: expects w[kh,kw,Ci,Co], b[Co]");
    if (stride < 1) shape_error("conv2d: stride must be >= 1");
    int N = batched ? x.dim(0) : 1;
    int H = x.dim(batched ? 1 : 0), W = x.dim(batched ? 2 : 1), Ci = x.dim(batched ? 3 : 2);
    int kh = w.dim(0), kw = w.dim(1), Co = w.dim(3);
    if (w.dim(2) != Ci || b.dim(0) != Co)
        shape_error("conv2d: channel dims disagree, x" + shape_str(x.shape()) + " w" +
                    shape_str(w.shape()));
    int Ho = (H + 2 * pad - kh) / stride + 1;
    int Wo = (W + 2 * pad - kw) / stride + 1;
    if (Ho < 1 || Wo < 1) shape_error("conv2d: output would be empty");
    macs::add(std::int64_t(N) * Ho * Wo * kh * kw * Ci * Co);
    std::vector<T> out(std::size_t(std::int64_t(N) * Ho * Wo * Co));
    const T* X = x.values().data();
    const T* Wt = w.values().data();
    const T* B = b.values().data();
    for (int n = 0; n < N; ++n)
        for (int oi = 0; oi < Ho; ++oi)
            for (int oj = 0; oj < Wo; ++oj) {
                T* orow = out.data() + ((std::int64_t(n) * Ho + oi) * Wo + oj) * Co;
                std::copy(B, B + Co, orow);
                for (int ki = 0; ki < kh; ++ki) {
                    int ii = oi * stride + ki - pad;
                    if (ii < 0 || ii >= H) continue;
                    for (int kj = 0; kj < kw; ++kj) {
                        int jj = oj * stride + kj - pad;
                        if (jj < 0 || jj >= W) continue;
                        const T* xrow = X + ((std::int64_t(n) * H + ii) * W + jj) * Ci;
                        const T* wrow = Wt + (std::int64_t(ki) * kw + kj) * Ci * Co;
                        for (int c = 0; c < Ci; ++c) {
                            T xv = xrow[c];
                            const T* wc = wrow + std::int64_t(c) * Co;
                            for (int o = 0; o < Co; ++o) orow[o] += xv * wc[o];
                        }
                    }
                }
            }
    Shape out_shape = batched ? Shape{N, Ho, Wo, Co} : Shape{Ho, Wo, Co};
    auto xv = x.values();
    auto wv = w.values();
    return make_op<T>(
        out_shape, std::move(out), "conv2d", {x, w, b},
        [=](const std::vector<T>& g) {
            std::vector<T> gx(std::size_t(std::int64_t(N) * H * W * Ci), T(0));
            std::vector<T> gw(std::size_t(std::int64_t(kh) * kw * Ci * Co), T(0));
            std::vector<T> gb(std::size_t(Co), T(0));
            for (int n = 0; n < N; ++n)
                for (int oi = 0; oi < Ho; ++oi)
                    for (int oj = 0; oj < Wo; ++oj) {
                        const T* grow = g.data() + ((std::int64_t(n) * Ho + oi) * Wo + oj) * Co;
                        for (int o = 0; o < Co; ++o) gb[std::size_t(o)] += grow[o];
                        for (int ki = 0; ki < kh; ++ki) {
                            int ii = oi * stride + ki - pad;
                            if (ii < 0 || ii >= H) continue;
                            for (int kj = 0; kj < kw; ++kj) {
                                int jj = oj * stride + kj - pad;
                                if (jj < 0 || jj >= W) continue;
                                const T* xrow = xv.data() + ((std::int64_t(n) * H + ii) * W + jj) * Ci;
                                T* gxrow = gx.data() + ((std::int64_t(n) * H + ii) * W + jj) * Ci;
                                const T* wrow = wv.data() + (std::int64_t(ki) * kw + kj) * Ci * Co;
                                T* gwrow = gw.data() + (std::int64_t(ki) * kw + kj) * Ci * Co;
                                for (int c = 0; c < Ci; ++c) {
                                    T xvv = xrow[c];
                                    const T* wc = wrow + std::int64_t(c) * Co;
                                    T* gwc = gwrow + std::int64_t(c) * Co;
                                    T accx = 0;
                                    for (int o = 0; o < Co; ++o) {
                                        accx += grow[o] * wc[o];
                                        gwc[o] += grow[o] * xvv;
                                    }
                                    gxrow[c] += accx;
                                }
                            }
                        }
                    }
            return std::vector<std::vector<T>>{std::move(gx), std::move(gw), std::move(gb)};
        });
}

// layer norm over the last axis
template <typename T>
Tensor<T> layer_norm(const Tensor<T>& x, const Tensor<T>& gamma, const Tensor<T>& beta,
                     double eps = 1e-5) {
    if (x.rank() < 1) shape_error("layer_norm: scalar input");
    int C = x.dim(x.rank() - 1);
    if (gamma.rank() != 1 || gamma.dim(0) != C || beta.rank() != 1 || beta.dim(0) != C)
        shape_error("layer_norm: gamma/beta must be [C] with C = last axis of x");
    std::int64_t rows = x.numel() / C;
    std::vector<T> out(x.values().size());
    std::vector<T> xhat(x.values().size());
    std::vector<T> inv_std(static_cast<std::size_t>(rows));
    const T* X = x.values().data();
    const T* G = gamma.values().data();
    const T* Bt = beta.values().data();
    for (std::int64_t r = 0; r < rows; ++r) {
        const T* row = X + r * C;
        T mu = 0;
        for (int c = 0; c < C; ++c) mu += row[c];
        mu /= static_cast<T>(C);
        T var = 0;
        for (int c = 0; c < C; ++c) {
            T d = row[c] - mu;
            var += d * d;
        }
        var /= static_cast<T>(C);
        T is = T(1) / std::sqrt(var + static_cast<T>(eps));
        inv_std[static_cast<std::size_t>(r)] = is;
        for (int c = 0; c < C; ++c) {
            T xh = (row[c] - mu) * is;
            xhat[static_cast<std::size_t>(r * C + c)] = xh;
            out[static_cast<std::size_t>(r * C + c)] = xh * G[c] + Bt[c];
        }
    }
    auto gv = gamma.values();
    return make_op<T>(
        x.shape(), std::move(out), "layer_norm", {x, gamma, beta},
        [rows, C, xhat = std::move(xhat), inv_std = std::move(inv_std),
         gv](const std::vector<T>& g) {
            std::vector<T> gx(g.size()), gg(std::size_t(C), T(0)), gb(std::size_t(C), T(0));
            for (std::int64_t r = 0; r < rows; ++r) {
                const T* grow = g.data() + r * C;
                const T* xh = xhat.data() + r * C;
                T is = inv_std[static_cast<std::size_t>(r)];
                T m1 = 0, m2 = 0;
                for (int c = 0; c < C; ++c) {
                    T t = grow[c] * gv[std::size_t(c)];
                    m1 += t;
                    m2 += t * xh[c];
                    gg[std::size_t(c)] += grow[c] * xh[c];
                    gb[std::size_t(c)] += grow[c];
                }
                m1 /= static_cast<T>(C);
                m2 /= static_cast<T>(C);
                for (int c = 0; c < C; ++c)
                    gx[static_cast<std::size_t>(r * C + c)] =
                        (grow[c] * gv[std::size_t(c)] - m1 - xh[c] * m2) * is;
            }
            return std::vector<std::vector<T>>{std::move(gx), std::move(gg), std::move(gb)};
        });
}

// Masking sentinel used instead of -inf so gradients stay finite.
inline constexpr double kMaskNegative = -1e9;

// Softmax over the last axis of x with an optional additive bias (e.g. the
// relative positional bias of the attention formula or a key mask). The bias
// must either match x's shape or be a vector of length m (the last axis),
// broadcast over rows.
template <typename T>
Tensor<T> softmax(const Tensor<T>& x, const Tensor<T>* bias = nullptr) {
    if (x.rank() < 1) shape_error("softmax: scalar input");
    int m = x.dim(x.rank() - 1);
    std::int64_t rows = x.numel() / m;
    bool has_bias = bias != nullptr;
    bool broadcast = false;
    if (has_bias) {
        if (bias->numel() == m)
            broadcast = true;
        else if (bias->shape() == x.shape())
            broadcast = false;
        else
            shape_error("softmax: bias " + shape_str(bias->shape()) +
                        " not broadcastable to " + shape_str(x.shape()));
    }
    std::vector<T> out(x.values().size());
    const T* X = x.values().data();
    const T* B = has_bias ? bias->values().data() : nullptr;
    for (std::int64_t r = 0; r < rows; ++r) {
        const T* row = X + r * m;
        const T* brow = has_bias ? (broadcast ? B : B + r * m) : nullptr;
        T mx = -std::numeric_limits<T>::infinity();
        for (int j = 0; j < m; ++j) {
            T v = row[j] + (brow ? brow[j] : T(0));
            if (v > mx) mx = v;
        }
        T s = 0;
        for (int j = 0; j < m; ++j) {
            T v = std::exp(row[j] + (brow ? brow[j] : T(0)) - mx);
            out[static_cast<std::size_t>(r * m + j)] = v;
            s += v;
        }
        for (int j = 0; j < m; ++j) out[static_cast<std::size_t>(r * m + j)] /= s;
    }
    auto yv = out;
    auto make_vjp = [rows, m, yv = std::move(yv), has_bias, broadcast](const std::vector<T>& g) {
        std::vector<T> gx(g.size());
        for (std::int64_t r = 0; r < rows; ++r) {
            const T* grow = g.data() + r * m;
            const T* yrow = yv.data() + r * m;
            T dot = 0;
            for (int j = 0; j < m; ++j) dot += grow[j] * yrow[j];
            for (int j = 0; j < m; ++j)
                gx[static_cast<std::size_t>(r * m + j)] = yrow[j] * (grow[j] - dot);
        }
        std::vector<std::vector<T>> grads;
        if (has_bias) {
            if (broadcast) {
                std::vector<T> gb(std::size_t(m), T(0));
                for (std::int64_t r = 0; r < rows; ++r)
                    for (int j = 0; j < m; ++j)
                        gb[std::size_t(j)] += gx[static_cast<std::size_t>(r * m + j)];
                grads = {gx, std::move(gb)};
            } else {
                grads = {gx, gx};
            }
        } else {
            grads = {std::move(gx)};
        }
        return grads;
    };
    if (has_bias)
        return make_op<T>(x.shape(), std::move(out), "softmax", {x, *bias}, make_vjp);
    return make_op<T>(x.shape(), std::move(out), "softmax", {x}, make_vjp);
}

// Bilinear upsample by an integer factor, [H,W,C] or [N,H,W,C].
// Sample positions follow src = (dst + 0.5)/f - 0.5 with edge clamping.
template <typename T>
Tensor<T> bilinear_upsample(const Tensor<T>& x, int factor) {
    if (factor < 1) shape_error("bilinear_upsample: factor must be >= 1");
    bool batched = x.rank() == 4;
    if (!batched && x.rank() != 3) shape_error("bilinear_upsample: expects rank 3 or 4");
    int N = batched ? x.dim(0) : 1;
    int H = x.dim(batched ? 1 : 0), W = x.dim(batched ? 2 : 1), C = x.dim(batched ? 3 : 2);
    int Ho = H * factor, Wo = W * factor;
    struct Tap {
        int i0, i1;
        T w0, w1;
    };
    auto taps = [factor](int n, int out_n) {
        std::vector<Tap> t(static_cast<std::size_t>(out_n));
        for (int o = 0; o < out_n; ++o) {
            double src = (o + 0.5) / factor - 0.5;
            double fl = std::floor(src);
            int i0 = static_cast<int>(fl);
            double frac = src - fl;
            int i1 = i0 + 1;
            i0 = std::clamp(i0, 0, n - 1);
            i1 = std::clamp(i1, 0, n - 1);
            t[static_cast<std::size_t>(o)] = {i0, i1, static_cast<T>(1.0 - frac),
                                              static_cast<T>(frac)};
        }
        return t;
    };
    auto ty = taps(H, Ho), tx = taps(W, Wo);
    std::vector<T> out(std::size_t(std::int64_t(N) * Ho * Wo * C));
    const T* X = x.values().data();
    for (int n = 0; n < N; ++n)
        for (int oi = 0; oi < Ho; ++oi) {
            const Tap& tv = ty[static_cast<std::size_t>(oi)];
            for (int oj = 0; oj < Wo; ++oj) {
                const Tap& th = tx[static_cast<std::size_t>(oj)];
                const T* p00 = X + ((std::int64_t(n) * H + tv.i0) * W + th.i0) * C;
                const T* p01 = X + ((std::int64_t(n) * H + tv.i0) * W + th.i1) * C;
                const T* p10 = X + ((std::int64_t(n) * H + tv.i1) * W + th.i0) * C;
                const T* p11 = X + ((std::int64_t(n) * H + tv.i1) * W + th.i1) * C;
                T* orow = out.data() + ((std::int64_t(n) * Ho + oi) * Wo + oj) * C;
                for (int c = 0; c < C; ++c)
                    orow[c] = tv.w0 * (th.w0 * p00[c] + th.w1 * p01[c]) +
                              tv.w1 * (th.w0 * p10[c] + th.w1 * p11[c]);
            }
        }
    Shape out_shape = batched ? Shape{N, Ho, Wo, C} : Shape{Ho, Wo, C};
    return make_op<T>(
        out_shape, std::move(out), "bilinear_upsample", {x},
        [=](const std::vector<T>& g) {
            std::vector<T> gx(std::size_t(std::int64_t(N) * H * W * C), T(0));
            for (int n = 0; n < N; ++n)
                for (int oi = 0; oi < Ho; ++oi) {
                    const Tap& tv = ty[static_cast<std::size_t>(oi)];
                    for (int oj = 0; oj < Wo; ++oj) {
                        const Tap& th = tx[static_cast<std::size_t>(oj)];
                        const T* grow = g.data() + ((std::int64_t(n) * Ho + oi) * Wo + oj) * C;
                        T* p00 = gx.data() + ((std::int64_t(n) * H + tv.i0) * W + th.i0) * C;
                        T* p01 = gx.data() + ((std::int64_t(n) * H + tv.i0) * W + th.i1) * C;
                        T* p10 = gx.data() + ((std::int64_t(n) * H + tv.i1) * W + th.i0) * C;
                        T* p11 = gx.data() + ((std::int64_t(n) * H + tv.i1) * W + th.i1) * C;
                        for (int c = 0; c < C; ++c) {
                            p00[c] += tv.w0 * th.w0 * grow[c];
                            p01[c] += tv.w0 * th.w1 * grow[c];
                            p10[c] += tv.w1 * th.w0 * grow[c];
                            p11[c] += tv.w1 * th.w1 * grow[c];
                        }
                    }
                }
            return std::vector<std::vector<T>>{std::move(gx)};
        });
}

// Attention(Q, K, V) = Softmax(Q K^T / sqrt(d) + B) V
// Q: [n,d], K,V: [m,d], B optional, [m] or [n,m].
template <typename T>
Tensor<T> attention(const Tensor<T>& q, const Tensor<T>& k, const Tensor<T>& v,
                    const Tensor<T>* bias = nullptr) {
    if (q.rank() != 2 || k.rank() != 2 || v.rank() != 2)
        shape_error("attention: expects rank-2 Q, K, V");
    int d = q.dim(1);
    if (k.dim(1) != d) shape_error("attention: Q and K feature dims disagree");
    if (v.dim(0) != k.dim(0)) shape_error("attention: K and V row counts disagree");
    Tensor<T> scores = scalar_mul(matmul(q, transpose(k)), 1.0 / std::sqrt(double(d)));
    Tensor<T> p = softmax(scores, bias);
    return matmul(p, v);
}

template <typename T>
Tensor<T> attention(const Tensor<T>& q, const Tensor<T>& k, const Tensor<T>& v,
                    const Tensor<T>& bias) {
    return attention(q, k, v, &bias);
}

template <typename T>
bool all_finite(const Tensor<T>& x) {
    for (T v : x.values())
        if (!std::isfinite(double(v))) return false;
    return true;
}

}  // namespace matte

#endif  // MATTE_TENSOR_HPP
