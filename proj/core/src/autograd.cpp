#include "wastebench/autograd.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <unordered_set>

namespace wastebench::nn {

namespace {

using MatRM = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapRM = Eigen::Map<MatRM>;
using CMapRM = Eigen::Map<const MatRM>;

thread_local int g_no_grad_depth = 0;

bool any_requires_grad(const std::vector<NodeRef>& nodes) {
    for (const auto& n : nodes)
        if (n && n->requires_grad) return true;
    return false;
}

}  // namespace

void Node::ensure_grad() {
    if (!grad.defined()) grad = Tensor::zeros(value.shape());
}

void Node::accumulate(const Tensor& g) {
    if (!requires_grad) return;
    accumulate_raw(g.data(), g.size());
}

void Node::accumulate_raw(const Scalar* g, std::int64_t n) {
    if (!requires_grad) return;
    ensure_grad();
    Scalar* dst = grad.data();
    for (std::int64_t i = 0; i < n; ++i) dst[i] += g[i];
}

NodeRef make_leaf(Tensor value, bool requires_grad) {
    auto node = std::make_shared<Node>();
    node->value = std::move(value);
    node->requires_grad = requires_grad;
    return node;
}

NodeRef make_constant(Tensor value) { return make_leaf(std::move(value), false); }

NodeRef make_op(Tensor value, std::vector<NodeRef> parents,
                std::function<void(Node&)> backward_op) {
    if (g_no_grad_depth > 0 || !any_requires_grad(parents)) return make_constant(std::move(value));
    auto node = std::make_shared<Node>();
    node->value = std::move(value);
    node->requires_grad = true;
    node->parents = std::move(parents);
    node->backward_op = std::move(backward_op);
    return node;
}

bool grad_enabled() { return g_no_grad_depth == 0; }
NoGradGuard::NoGradGuard() { ++g_no_grad_depth; }
NoGradGuard::~NoGradGuard() { --g_no_grad_depth; }

void backward(const NodeRef& root) {
    if (!root->requires_grad)
        throw std::logic_error("backward: root does not require grad");
    // Iterative post-order DFS; `order` lists inputs before consumers.
    std::vector<Node*> order;
    std::unordered_set<Node*> visited;
    std::vector<std::pair<NodeRef, std::size_t>> stack;
    stack.emplace_back(root, 0);
    visited.insert(root.get());
    while (!stack.empty()) {
        auto& [node, next_child] = stack.back();
        if (next_child < node->parents.size()) {
            NodeRef child = node->parents[next_child++];
            if (child && child->requires_grad && visited.insert(child.get()).second)
                stack.emplace_back(std::move(child), 0);
        } else {
            order.push_back(node.get());
            stack.pop_back();
        }
    }
    root->ensure_grad();
    root->grad.fill(1.0);
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        Node* n = *it;
        if (n->backward_op && n->grad.defined()) n->backward_op(*n);
    }
}

// ---------------------------------------------------------------------------
// elementwise
// ---------------------------------------------------------------------------

template <typename F, typename DF>
static NodeRef unary_ew(const NodeRef& x, F f, DF df) {
    const std::int64_t n = x->value.size();
    Tensor out(x->value.shape());
    const Scalar* xv = x->value.data();
    Scalar* ov = out.data();
    for (std::int64_t i = 0; i < n; ++i) ov[i] = f(xv[i]);
    return make_op(std::move(out), {x}, [x, df, n](Node& node) {
        if (!x->requires_grad) return;
        x->ensure_grad();
        const Scalar* g = node.grad.data();
        const Scalar* xv = x->value.data();
        Scalar* dx = x->grad.data();
        for (std::int64_t i = 0; i < n; ++i) dx[i] += g[i] * df(xv[i]);
    });
}

NodeRef add(const NodeRef& a, const NodeRef& b) {
    if (!a->value.same_shape(b->value)) throw std::invalid_argument("add: shape mismatch");
    const std::int64_t n = a->value.size();
    Tensor out(a->value.shape());
    const Scalar* av = a->value.data();
    const Scalar* bv = b->value.data();
    Scalar* ov = out.data();
    for (std::int64_t i = 0; i < n; ++i) ov[i] = av[i] + bv[i];
    return make_op(std::move(out), {a, b}, [a, b, n](Node& node) {
        a->accumulate_raw(node.grad.data(), n);
        b->accumulate_raw(node.grad.data(), n);
    });
}

NodeRef add_broadcast0(const NodeRef& x, const NodeRef& p) {
    if (p->value.dim(0) != 1 || p->value.size() * x->value.dim(0) != x->value.size())
        throw std::invalid_argument("add_broadcast0: incompatible shapes");
    const std::int64_t batch = x->value.dim(0);
    const std::int64_t inner = p->value.size();
    Tensor out(x->value.shape());
    const Scalar* xv = x->value.data();
    const Scalar* pv = p->value.data();
    Scalar* ov = out.data();
    for (std::int64_t b = 0; b < batch; ++b)
        for (std::int64_t i = 0; i < inner; ++i) ov[b * inner + i] = xv[b * inner + i] + pv[i];
    return make_op(std::move(out), {x, p}, [x, p, batch, inner](Node& node) {
        const Scalar* g = node.grad.data();
        x->accumulate_raw(g, batch * inner);
        if (p->requires_grad) {
            p->ensure_grad();
            Scalar* dp = p->grad.data();
            for (std::int64_t b = 0; b < batch; ++b)
                for (std::int64_t i = 0; i < inner; ++i) dp[i] += g[b * inner + i];
        }
    });
}

NodeRef scale(const NodeRef& x, Scalar s) {
    return unary_ew(
        x, [s](Scalar v) { return v * s; }, [s](Scalar) { return s; });
}

NodeRef relu(const NodeRef& x) {
    return unary_ew(
        x, [](Scalar v) { return v > 0 ? v : 0; }, [](Scalar v) { return v > 0 ? 1.0 : 0.0; });
}

NodeRef relu6(const NodeRef& x) {
    return unary_ew(
        x, [](Scalar v) { return v < 0 ? 0 : (v > 6 ? 6 : v); },
        [](Scalar v) { return (v > 0 && v < 6) ? 1.0 : 0.0; });
}

NodeRef gelu(const NodeRef& x) {
    constexpr Scalar inv_sqrt2 = 0.7071067811865475244;
    constexpr Scalar inv_sqrt2pi = 0.3989422804014326779;
    return unary_ew(
        x, [=](Scalar v) { return 0.5 * v * (1.0 + std::erf(v * inv_sqrt2)); },
        [=](Scalar v) {
            return 0.5 * (1.0 + std::erf(v * inv_sqrt2)) + v * inv_sqrt2pi * std::exp(-0.5 * v * v);
        });
}

NodeRef silu(const NodeRef& x) {
    auto sigmoid = [](Scalar v) { return 1.0 / (1.0 + std::exp(-v)); };
    return unary_ew(
        x, [=](Scalar v) { return v * sigmoid(v); },
        [=](Scalar v) {
            const Scalar s = sigmoid(v);
            return s * (1.0 + v * (1.0 - s));
        });
}

NodeRef dropout(const NodeRef& x, double p, CounterRng& rng, bool training) {
    if (!training || p <= 0.0) return x;
    if (p >= 1.0) throw std::invalid_argument("dropout: p must be < 1");
    const std::int64_t n = x->value.size();
    const Scalar keep = 1.0 - p;
    auto mask = std::make_shared<std::vector<Scalar>>(static_cast<std::size_t>(n));
    Tensor out(x->value.shape());
    const Scalar* xv = x->value.data();
    Scalar* ov = out.data();
    for (std::int64_t i = 0; i < n; ++i) {
        const Scalar m = rng.bernoulli(keep) ? 1.0 / keep : 0.0;
        (*mask)[static_cast<std::size_t>(i)] = m;
        ov[i] = xv[i] * m;
    }
    return make_op(std::move(out), {x}, [x, mask, n](Node& node) {
        if (!x->requires_grad) return;
        x->ensure_grad();
        const Scalar* g = node.grad.data();
        Scalar* dx = x->grad.data();
        for (std::int64_t i = 0; i < n; ++i) dx[i] += g[i] * (*mask)[static_cast<std::size_t>(i)];
    });
}

// ---------------------------------------------------------------------------
// reductions
// ---------------------------------------------------------------------------

NodeRef sum_all(const NodeRef& x) {
    const std::int64_t n = x->value.size();
    Scalar s = 0;
    const Scalar* xv = x->value.data();
    for (std::int64_t i = 0; i < n; ++i) s += xv[i];
    return make_op(Tensor::from({1}, {s}), {x}, [x, n](Node& node) {
        if (!x->requires_grad) return;
        x->ensure_grad();
        const Scalar g = node.grad[0];
        Scalar* dx = x->grad.data();
        for (std::int64_t i = 0; i < n; ++i) dx[i] += g;
    });
}

NodeRef mean_all(const NodeRef& x) { return scale(sum_all(x), 1.0 / static_cast<Scalar>(x->value.size())); }

// ---------------------------------------------------------------------------
// shape plumbing
// ---------------------------------------------------------------------------

NodeRef reshape(const NodeRef& x, Shape shape) {
    Tensor out = x->value.reshaped(std::move(shape));
    const std::int64_t n = x->value.size();
    return make_op(std::move(out), {x},
                   [x, n](Node& node) { x->accumulate_raw(node.grad.data(), n); });
}

NodeRef concat_axis1(const std::vector<NodeRef>& xs) {
    if (xs.empty()) throw std::invalid_argument("concat_axis1: no inputs");
    const int rank = xs[0]->value.rank();
    if (rank < 2) throw std::invalid_argument("concat_axis1: rank must be >= 2");
    const std::int64_t outer = xs[0]->value.dim(0);
    std::int64_t inner = 1;
    for (int d = 2; d < rank; ++d) inner *= xs[0]->value.dim(d);
    std::int64_t total1 = 0;
    for (const auto& x : xs) {
        if (x->value.rank() != rank || x->value.dim(0) != outer)
            throw std::invalid_argument("concat_axis1: incompatible shapes");
        std::int64_t xin = 1;
        for (int d = 2; d < rank; ++d) xin *= x->value.dim(d);
        if (xin != inner) throw std::invalid_argument("concat_axis1: incompatible inner dims");
        total1 += x->value.dim(1);
    }
    Shape out_shape = xs[0]->value.shape();
    out_shape[1] = total1;
    Tensor out(out_shape);
    Scalar* ov = out.data();
    std::int64_t offset = 0;
    for (const auto& x : xs) {
        const std::int64_t block = x->value.dim(1) * inner;
        const Scalar* xv = x->value.data();
        for (std::int64_t o = 0; o < outer; ++o)
            std::copy(xv + o * block, xv + (o + 1) * block, ov + o * total1 * inner + offset);
        offset += block;
    }
    std::vector<NodeRef> parents = xs;
    return make_op(std::move(out), parents, [parents, outer, inner, total1](Node& node) {
        const Scalar* g = node.grad.data();
        std::int64_t offset = 0;
        for (const auto& x : parents) {
            const std::int64_t block = x->value.dim(1) * inner;
            if (x->requires_grad) {
                x->ensure_grad();
                Scalar* dx = x->grad.data();
                for (std::int64_t o = 0; o < outer; ++o) {
                    const Scalar* src = g + o * total1 * inner + offset;
                    Scalar* dst = dx + o * block;
                    for (std::int64_t i = 0; i < block; ++i) dst[i] += src[i];
                }
            }
            offset += block;
        }
    });
}

NodeRef slice_lastdim(const NodeRef& x, std::int64_t start, std::int64_t len) {
    const int rank = x->value.rank();
    const std::int64_t last = x->value.dim(rank - 1);
    if (start < 0 || len <= 0 || start + len > last)
        throw std::invalid_argument("slice_lastdim: out of range");
    const std::int64_t rows = x->value.size() / last;
    Shape out_shape = x->value.shape();
    out_shape[static_cast<std::size_t>(rank - 1)] = len;
    Tensor out(out_shape);
    const Scalar* xv = x->value.data();
    Scalar* ov = out.data();
    for (std::int64_t r = 0; r < rows; ++r)
        std::copy(xv + r * last + start, xv + r * last + start + len, ov + r * len);
    return make_op(std::move(out), {x}, [x, rows, last, start, len](Node& node) {
        if (!x->requires_grad) return;
        x->ensure_grad();
        const Scalar* g = node.grad.data();
        Scalar* dx = x->grad.data();
        for (std::int64_t r = 0; r < rows; ++r)
            for (std::int64_t i = 0; i < len; ++i) dx[r * last + start + i] += g[r * len + i];
    });
}

NodeRef chw_to_tokens(const NodeRef& x) {
    const std::int64_t n = x->value.dim(0), c = x->value.dim(1);
    const std::int64_t hw = x->value.dim(2) * x->value.dim(3);
    Tensor out({n, hw, c});
    const Scalar* xv = x->value.data();
    Scalar* ov = out.data();
    for (std::int64_t b = 0; b < n; ++b)
        for (std::int64_t ch = 0; ch < c; ++ch)
            for (std::int64_t t = 0; t < hw; ++t)
                ov[(b * hw + t) * c + ch] = xv[(b * c + ch) * hw + t];
    return make_op(std::move(out), {x}, [x, n, c, hw](Node& node) {
        if (!x->requires_grad) return;
        x->ensure_grad();
        const Scalar* g = node.grad.data();
        Scalar* dx = x->grad.data();
        for (std::int64_t b = 0; b < n; ++b)
            for (std::int64_t ch = 0; ch < c; ++ch)
                for (std::int64_t t = 0; t < hw; ++t)
                    dx[(b * c + ch) * hw + t] += g[(b * hw + t) * c + ch];
    });
}

NodeRef prepend_token(const NodeRef& x, const NodeRef& token) {
    const std::int64_t b = x->value.dim(0), t = x->value.dim(1), d = x->value.dim(2);
    if (token->value.size() != d) throw std::invalid_argument("prepend_token: dim mismatch");
    Tensor out({b, t + 1, d});
    const Scalar* xv = x->value.data();
    const Scalar* tv = token->value.data();
    Scalar* ov = out.data();
    for (std::int64_t i = 0; i < b; ++i) {
        std::copy(tv, tv + d, ov + i * (t + 1) * d);
        std::copy(xv + i * t * d, xv + (i + 1) * t * d, ov + i * (t + 1) * d + d);
    }
    return make_op(std::move(out), {x, token}, [x, token, b, t, d](Node& node) {
        const Scalar* g = node.grad.data();
        if (x->requires_grad) {
            x->ensure_grad();
            Scalar* dx = x->grad.data();
            for (std::int64_t i = 0; i < b; ++i)
                for (std::int64_t j = 0; j < t * d; ++j)
                    dx[i * t * d + j] += g[i * (t + 1) * d + d + j];
        }
        if (token->requires_grad) {
            token->ensure_grad();
            Scalar* dt = token->grad.data();
            for (std::int64_t i = 0; i < b; ++i)
                for (std::int64_t j = 0; j < d; ++j) dt[j] += g[i * (t + 1) * d + j];
        }
    });
}

NodeRef select_token(const NodeRef& x, std::int64_t index) {
    const std::int64_t b = x->value.dim(0), t = x->value.dim(1), d = x->value.dim(2);
    if (index < 0 || index >= t) throw std::invalid_argument("select_token: index out of range");
    Tensor out({b, d});
    const Scalar* xv = x->value.data();
    Scalar* ov = out.data();
    for (std::int64_t i = 0; i < b; ++i)
        std::copy(xv + (i * t + index) * d, xv + (i * t + index + 1) * d, ov + i * d);
    return make_op(std::move(out), {x}, [x, b, t, d, index](Node& node) {
        if (!x->requires_grad) return;
        x->ensure_grad();
        const Scalar* g = node.grad.data();
        Scalar* dx = x->grad.data();
        for (std::int64_t i = 0; i < b; ++i)
            for (std::int64_t j = 0; j < d; ++j) dx[(i * t + index) * d + j] += g[i * d + j];
    });
}

NodeRef split_heads(const NodeRef& x, int heads) {
    const std::int64_t b = x->value.dim(0), t = x->value.dim(1), d = x->value.dim(2);
    if (d % heads != 0) throw std::invalid_argument("split_heads: dim not divisible by heads");
    const std::int64_t dh = d / heads;
    Tensor out({b * heads, t, dh});
    const Scalar* xv = x->value.data();
    Scalar* ov = out.data();
    for (std::int64_t i = 0; i < b; ++i)
        for (std::int64_t h = 0; h < heads; ++h)
            for (std::int64_t j = 0; j < t; ++j)
                std::copy(xv + (i * t + j) * d + h * dh, xv + (i * t + j) * d + (h + 1) * dh,
                          ov + ((i * heads + h) * t + j) * dh);
    return make_op(std::move(out), {x}, [x, b, t, d, dh, heads](Node& node) {
        if (!x->requires_grad) return;
        x->ensure_grad();
        const Scalar* g = node.grad.data();
        Scalar* dx = x->grad.data();
        for (std::int64_t i = 0; i < b; ++i)
            for (std::int64_t h = 0; h < heads; ++h)
                for (std::int64_t j = 0; j < t; ++j)
                    for (std::int64_t k = 0; k < dh; ++k)
                        dx[(i * t + j) * d + h * dh + k] += g[((i * heads + h) * t + j) * dh + k];
    });
}

NodeRef merge_heads(const NodeRef& x, int heads) {
    const std::int64_t bh = x->value.dim(0), t = x->value.dim(1), dh = x->value.dim(2);
    if (bh % heads != 0) throw std::invalid_argument("merge_heads: batch not divisible by heads");
    const std::int64_t b = bh / heads, d = dh * heads;
    Tensor out({b, t, d});
    const Scalar* xv = x->value.data();
    Scalar* ov = out.data();
    for (std::int64_t i = 0; i < b; ++i)
        for (std::int64_t h = 0; h < heads; ++h)
            for (std::int64_t j = 0; j < t; ++j)
                std::copy(xv + ((i * heads + h) * t + j) * dh,
                          xv + ((i * heads + h) * t + j + 1) * dh,
                          ov + (i * t + j) * d + h * dh);
    return make_op(std::move(out), {x}, [x, b, t, d, dh, heads](Node& node) {
        if (!x->requires_grad) return;
        x->ensure_grad();
        const Scalar* g = node.grad.data();
        Scalar* dx = x->grad.data();
        for (std::int64_t i = 0; i < b; ++i)
            for (std::int64_t h = 0; h < heads; ++h)
                for (std::int64_t j = 0; j < t; ++j)
                    for (std::int64_t k = 0; k < dh; ++k)
                        dx[((i * heads + h) * t + j) * dh + k] += g[(i * t + j) * d + h * dh + k];
    });
}

NodeRef unfold_patches(const NodeRef& x, int patch) {
    const std::int64_t n = x->value.dim(0), c = x->value.dim(1);
    const std::int64_t h = x->value.dim(2), w = x->value.dim(3);
    const std::int64_t p = patch;
    const std::int64_t th = (h + p - 1) / p, tw = (w + p - 1) / p;
    const std::int64_t tokens = th * tw;
    Tensor out({n * p * p, tokens, c});
    const Scalar* xv = x->value.data();
    Scalar* ov = out.data();
    for (std::int64_t b = 0; b < n; ++b)
        for (std::int64_t di = 0; di < p; ++di)
            for (std::int64_t dj = 0; dj < p; ++dj) {
                const std::int64_t bp = (b * p + di) * p + dj;
                for (std::int64_t ti = 0; ti < th; ++ti)
                    for (std::int64_t tj = 0; tj < tw; ++tj) {
                        const std::int64_t y = ti * p + di, xx = tj * p + dj;
                        Scalar* dst = ov + (bp * tokens + ti * tw + tj) * c;
                        if (y < h && xx < w)
                            for (std::int64_t ch = 0; ch < c; ++ch)
                                dst[ch] = xv[((b * c + ch) * h + y) * w + xx];
                        // padded cells stay zero
                    }
            }
    return make_op(std::move(out), {x}, [x, n, c, h, w, p, th, tw, tokens](Node& node) {
        if (!x->requires_grad) return;
        x->ensure_grad();
        const Scalar* g = node.grad.data();
        Scalar* dx = x->grad.data();
        for (std::int64_t b = 0; b < n; ++b)
            for (std::int64_t di = 0; di < p; ++di)
                for (std::int64_t dj = 0; dj < p; ++dj) {
                    const std::int64_t bp = (b * p + di) * p + dj;
                    for (std::int64_t ti = 0; ti < th; ++ti)
                        for (std::int64_t tj = 0; tj < tw; ++tj) {
                            const std::int64_t y = ti * p + di, xx = tj * p + dj;
                            if (y >= h || xx >= w) continue;
                            const Scalar* src = g + (bp * tokens + ti * tw + tj) * c;
                            for (std::int64_t ch = 0; ch < c; ++ch)
                                dx[((b * c + ch) * h + y) * w + xx] += src[ch];
                        }
                }
    });
}

NodeRef fold_patches(const NodeRef& x, std::int64_t n, std::int64_t c, std::int64_t h,
                     std::int64_t w, int patch) {
    const std::int64_t p = patch;
    const std::int64_t th = (h + p - 1) / p, tw = (w + p - 1) / p;
    const std::int64_t tokens = th * tw;
    if (x->value.dim(0) != n * p * p || x->value.dim(1) != tokens || x->value.dim(2) != c)
        throw std::invalid_argument("fold_patches: shape mismatch");
    Tensor out({n, c, h, w});
    const Scalar* xv = x->value.data();
    Scalar* ov = out.data();
    for (std::int64_t b = 0; b < n; ++b)
        for (std::int64_t di = 0; di < p; ++di)
            for (std::int64_t dj = 0; dj < p; ++dj) {
                const std::int64_t bp = (b * p + di) * p + dj;
                for (std::int64_t ti = 0; ti < th; ++ti)
                    for (std::int64_t tj = 0; tj < tw; ++tj) {
                        const std::int64_t y = ti * p + di, xx = tj * p + dj;
                        if (y >= h || xx >= w) continue;
                        const Scalar* src = xv + (bp * tokens + ti * tw + tj) * c;
                        for (std::int64_t ch = 0; ch < c; ++ch)
                            ov[((b * c + ch) * h + y) * w + xx] = src[ch];
                    }
            }
    return make_op(std::move(out), {x}, [x, n, c, h, w, p, th, tw, tokens](Node& node) {
        if (!x->requires_grad) return;
        x->ensure_grad();
        const Scalar* g = node.grad.data();
        Scalar* dx = x->grad.data();
        for (std::int64_t b = 0; b < n; ++b)
            for (std::int64_t di = 0; di < p; ++di)
                for (std::int64_t dj = 0; dj < p; ++dj) {
                    const std::int64_t bp = (b * p + di) * p + dj;
                    for (std::int64_t ti = 0; ti < th; ++ti)
                        for (std::int64_t tj = 0; tj < tw; ++tj) {
                            const std::int64_t y = ti * p + di, xx = tj * p + dj;
                            if (y >= h || xx >= w) continue;
                            Scalar* dst = dx + (bp * tokens + ti * tw + tj) * c;
                            for (std::int64_t ch = 0; ch < c; ++ch)
                                dst[ch] += g[((b * c + ch) * h + y) * w + xx];
                        }
                }
    });
}

// ---------------------------------------------------------------------------
// dense algebra
// ---------------------------------------------------------------------------

NodeRef linear(const NodeRef& x, const NodeRef& w, const NodeRef& b) {
    const int rank = x->value.rank();
    const std::int64_t in = x->value.dim(rank - 1);
    const std::int64_t out_dim = w->value.dim(0);
    if (w->value.dim(1) != in) throw std::invalid_argument("linear: weight/input dim mismatch");
    if (b && b->value.size() != out_dim) throw std::invalid_argument("linear: bias dim mismatch");
    const std::int64_t rows = x->value.size() / in;
    Shape out_shape = x->value.shape();
    out_shape[static_cast<std::size_t>(rank - 1)] = out_dim;
    Tensor out(out_shape);
    {
        CMapRM X(x->value.data(), rows, in);
        CMapRM W(w->value.data(), out_dim, in);
        MapRM Y(out.data(), rows, out_dim);
        Y.noalias() = X * W.transpose();
        if (b) {
            CMapRM B(b->value.data(), 1, out_dim);
            Y.rowwise() += B.row(0);
        }
    }
    std::vector<NodeRef> parents = b ? std::vector<NodeRef>{x, w, b} : std::vector<NodeRef>{x, w};
    return make_op(std::move(out), std::move(parents), [x, w, b, rows, in, out_dim](Node& node) {
        CMapRM G(node.grad.data(), rows, out_dim);
        if (x->requires_grad) {
            x->ensure_grad();
            MapRM DX(x->grad.data(), rows, in);
            CMapRM W(w->value.data(), out_dim, in);
            DX.noalias() += G * W;
        }
        if (w->requires_grad) {
            w->ensure_grad();
            MapRM DW(w->grad.data(), out_dim, in);
            CMapRM X(x->value.data(), rows, in);
            DW.noalias() += G.transpose() * X;
        }
        if (b && b->requires_grad) {
            b->ensure_grad();
            MapRM DB(b->grad.data(), 1, out_dim);
            DB.row(0) += G.colwise().sum();
        }
    });
}

NodeRef bmm(const NodeRef& a, const NodeRef& b) {
    const std::int64_t batch = a->value.dim(0), m = a->value.dim(1), k = a->value.dim(2);
    const std::int64_t n = b->value.dim(2);
    if (b->value.dim(0) != batch || b->value.dim(1) != k)
        throw std::invalid_argument("bmm: shape mismatch");
    Tensor out({batch, m, n});
    for (std::int64_t i = 0; i < batch; ++i) {
        CMapRM A(a->value.data() + i * m * k, m, k);
        CMapRM B(b->value.data() + i * k * n, k, n);
        MapRM Y(out.data() + i * m * n, m, n);
        Y.noalias() = A * B;
    }
    return make_op(std::move(out), {a, b}, [a, b, batch, m, k, n](Node& node) {
        if (a->requires_grad) a->ensure_grad();
        if (b->requires_grad) b->ensure_grad();
        for (std::int64_t i = 0; i < batch; ++i) {
            CMapRM G(node.grad.data() + i * m * n, m, n);
            if (a->requires_grad) {
                MapRM DA(a->grad.data() + i * m * k, m, k);
                CMapRM B(b->value.data() + i * k * n, k, n);
                DA.noalias() += G * B.transpose();
            }
            if (b->requires_grad) {
                MapRM DB(b->grad.data() + i * k * n, k, n);
                CMapRM A(a->value.data() + i * m * k, m, k);
                DB.noalias() += A.transpose() * G;
            }
        }
    });
}

NodeRef bmm_nt(const NodeRef& a, const NodeRef& b) {
    const std::int64_t batch = a->value.dim(0), m = a->value.dim(1), k = a->value.dim(2);
    const std::int64_t n = b->value.dim(1);
    if (b->value.dim(0) != batch || b->value.dim(2) != k)
        throw std::invalid_argument("bmm_nt: shape mismatch");
    Tensor out({batch, m, n});
    for (std::int64_t i = 0; i < batch; ++i) {
        CMapRM A(a->value.data() + i * m * k, m, k);
        CMapRM B(b->value.data() + i * n * k, n, k);
        MapRM Y(out.data() + i * m * n, m, n);
        Y.noalias() = A * B.transpose();
    }
    return make_op(std::move(out), {a, b}, [a, b, batch, m, k, n](Node& node) {
        if (a->requires_grad) a->ensure_grad();
        if (b->requires_grad) b->ensure_grad();
        for (std::int64_t i = 0; i < batch; ++i) {
            CMapRM G(node.grad.data() + i * m * n, m, n);
            if (a->requires_grad) {
                MapRM DA(a->grad.data() + i * m * k, m, k);
                CMapRM B(b->value.data() + i * n * k, n, k);
                DA.noalias() += G * B;
            }
            if (b->requires_grad) {
                MapRM DB(b->grad.data() + i * n * k, n, k);
                CMapRM A(a->value.data() + i * m * k, m, k);
                DB.noalias() += G.transpose() * A;
            }
        }
    });
}

// ---------------------------------------------------------------------------
// convolution / pooling
// ---------------------------------------------------------------------------

namespace {

void im2col(const Scalar* x, std::int64_t c, std::int64_t h, std::int64_t w, std::int64_t kh,
            std::int64_t kw, std::int64_t stride, std::int64_t pad, std::int64_t oh,
            std::int64_t ow, Scalar* cols) {
    const std::int64_t l = oh * ow;
    std::int64_t row = 0;
    for (std::int64_t ch = 0; ch < c; ++ch)
        for (std::int64_t i = 0; i < kh; ++i)
            for (std::int64_t j = 0; j < kw; ++j, ++row) {
                Scalar* dst = cols + row * l;
                for (std::int64_t y = 0; y < oh; ++y) {
                    const std::int64_t sy = y * stride - pad + i;
                    if (sy < 0 || sy >= h) {
                        std::fill(dst + y * ow, dst + (y + 1) * ow, 0.0);
                        continue;
                    }
                    const Scalar* src = x + (ch * h + sy) * w;
                    for (std::int64_t xx = 0; xx < ow; ++xx) {
                        const std::int64_t sx = xx * stride - pad + j;
                        dst[y * ow + xx] = (sx >= 0 && sx < w) ? src[sx] : 0.0;
                    }
                }
            }
}

void col2im_add(const Scalar* cols, std::int64_t c, std::int64_t h, std::int64_t w,
                std::int64_t kh, std::int64_t kw, std::int64_t stride, std::int64_t pad,
                std::int64_t oh, std::int64_t ow, Scalar* x) {
    const std::int64_t l = oh * ow;
    std::int64_t row = 0;
    for (std::int64_t ch = 0; ch < c; ++ch)
        for (std::int64_t i = 0; i < kh; ++i)
            for (std::int64_t j = 0; j < kw; ++j, ++row) {
                const Scalar* src = cols + row * l;
                for (std::int64_t y = 0; y < oh; ++y) {
                    const std::int64_t sy = y * stride - pad + i;
                    if (sy < 0 || sy >= h) continue;
                    Scalar* dst = x + (ch * h + sy) * w;
                    for (std::int64_t xx = 0; xx < ow; ++xx) {
                        const std::int64_t sx = xx * stride - pad + j;
                        if (sx >= 0 && sx < w) dst[sx] += src[y * ow + xx];
                    }
                }
            }
}

}  // namespace

NodeRef conv2d(const NodeRef& x, const NodeRef& w, const NodeRef& b, int stride, int padding,
               int groups) {
    const std::int64_t n = x->value.dim(0), c = x->value.dim(1);
    const std::int64_t h = x->value.dim(2), wd = x->value.dim(3);
    const std::int64_t o = w->value.dim(0), cg = w->value.dim(1);
    const std::int64_t kh = w->value.dim(2), kw = w->value.dim(3);
    if (c != cg * groups || o % groups != 0)
        throw std::invalid_argument("conv2d: channel/group mismatch");
    const std::int64_t oh = (h + 2 * padding - kh) / stride + 1;
    const std::int64_t ow = (wd + 2 * padding - kw) / stride + 1;
    if (oh <= 0 || ow <= 0) throw std::invalid_argument("conv2d: output size would be empty");
    const std::int64_t og = o / groups, k = cg * kh * kw, l = oh * ow;

    Tensor out({n, o, oh, ow});
    std::vector<Scalar> cols(static_cast<std::size_t>(c * kh * kw * l));
    for (std::int64_t i = 0; i < n; ++i) {
        im2col(x->value.data() + i * c * h * wd, c, h, wd, kh, kw, stride, padding, oh, ow,
               cols.data());
        for (int g = 0; g < groups; ++g) {
            CMapRM W(w->value.data() + g * og * k, og, k);
            CMapRM Cg(cols.data() + g * k * l, k, l);
            MapRM Y(out.data() + (i * o + g * og) * l, og, l);
            Y.noalias() = W * Cg;
        }
        if (b) {
            const Scalar* bv = b->value.data();
            Scalar* ov = out.data() + i * o * l;
            for (std::int64_t ch = 0; ch < o; ++ch)
                for (std::int64_t p = 0; p < l; ++p) ov[ch * l + p] += bv[ch];
        }
    }

    std::vector<NodeRef> parents = b ? std::vector<NodeRef>{x, w, b} : std::vector<NodeRef>{x, w};
    const std::int64_t sp = stride, pp = padding, gp = groups;
    return make_op(std::move(out), std::move(parents),
                   [x, w, b, n, c, h, wd, o, og, cg, kh, kw, k, l, oh, ow, sp, pp, gp](Node& node) {
                       const Scalar* g = node.grad.data();
                       if (b && b->requires_grad) {
                           b->ensure_grad();
                           Scalar* db = b->grad.data();
                           for (std::int64_t i = 0; i < n; ++i)
                               for (std::int64_t ch = 0; ch < o; ++ch) {
                                   Scalar s = 0;
                                   const Scalar* gp0 = g + (i * o + ch) * l;
                                   for (std::int64_t p = 0; p < l; ++p) s += gp0[p];
                                   db[ch] += s;
                               }
                       }
                       const bool need_dw = w->requires_grad;
                       const bool need_dx = x->requires_grad;
                       if (!need_dw && !need_dx) return;
                       if (need_dw) w->ensure_grad();
                       if (need_dx) x->ensure_grad();
                       std::vector<Scalar> cols(static_cast<std::size_t>(c * kh * kw * l));
                       std::vector<Scalar> dcols(need_dx ? static_cast<std::size_t>(c * kh * kw * l)
                                                         : 0);
                       for (std::int64_t i = 0; i < n; ++i) {
                           if (need_dw)
                               im2col(x->value.data() + i * c * h * wd, c, h, wd, kh, kw, sp, pp,
                                      oh, ow, cols.data());
                           for (std::int64_t gi = 0; gi < gp; ++gi) {
                               CMapRM G(g + (i * o + gi * og) * l, og, l);
                               if (need_dw) {
                                   MapRM DW(w->grad.data() + gi * og * k, og, k);
                                   CMapRM Cg(cols.data() + gi * k * l, k, l);
                                   DW.noalias() += G * Cg.transpose();
                               }
                               if (need_dx) {
                                   MapRM DC(dcols.data() + gi * k * l, k, l);
                                   CMapRM W(w->value.data() + gi * og * k, og, k);
                                   DC.noalias() = W.transpose() * G;
                               }
                           }
                           if (need_dx)
                               col2im_add(dcols.data(), c, h, wd, kh, kw, sp, pp, oh, ow,
                                          x->grad.data() + i * c * h * wd);
                       }
                   });
}

NodeRef maxpool2d(const NodeRef& x, int kernel, int stride, int padding) {
    const std::int64_t n = x->value.dim(0), c = x->value.dim(1);
    const std::int64_t h = x->value.dim(2), w = x->value.dim(3);
    const std::int64_t oh = (h + 2 * padding - kernel) / stride + 1;
    const std::int64_t ow = (w + 2 * padding - kernel) / stride + 1;
    if (oh <= 0 || ow <= 0) throw std::invalid_argument("maxpool2d: output size would be empty");
    Tensor out({n, c, oh, ow});
    auto argmax = std::make_shared<std::vector<std::int64_t>>(
        static_cast<std::size_t>(n * c * oh * ow));
    const Scalar* xv = x->value.data();
    Scalar* ov = out.data();
    std::int64_t oi = 0;
    for (std::int64_t i = 0; i < n; ++i)
        for (std::int64_t ch = 0; ch < c; ++ch) {
            const Scalar* plane = xv + (i * c + ch) * h * w;
            for (std::int64_t y = 0; y < oh; ++y)
                for (std::int64_t xx = 0; xx < ow; ++xx, ++oi) {
                    Scalar best = -std::numeric_limits<Scalar>::infinity();
                    std::int64_t best_idx = -1;
                    for (std::int64_t ki = 0; ki < kernel; ++ki) {
                        const std::int64_t sy = y * stride - padding + ki;
                        if (sy < 0 || sy >= h) continue;
                        for (std::int64_t kj = 0; kj < kernel; ++kj) {
                            const std::int64_t sx = xx * stride - padding + kj;
                            if (sx < 0 || sx >= w) continue;
                            const Scalar v = plane[sy * w + sx];
                            if (v > best) {
                                best = v;
                                best_idx = (i * c + ch) * h * w + sy * w + sx;
                            }
                        }
                    }
                    ov[oi] = best;
                    (*argmax)[static_cast<std::size_t>(oi)] = best_idx;
                }
        }
    const std::int64_t total = n * c * oh * ow;
    return make_op(std::move(out), {x}, [x, argmax, total](Node& node) {
        if (!x->requires_grad) return;
        x->ensure_grad();
        const Scalar* g = node.grad.data();
        Scalar* dx = x->grad.data();
        for (std::int64_t i = 0; i < total; ++i) {
            const std::int64_t idx = (*argmax)[static_cast<std::size_t>(i)];
            if (idx >= 0) dx[idx] += g[i];
        }
    });
}

NodeRef avgpool2d(const NodeRef& x, int kernel, int stride) {
    const std::int64_t n = x->value.dim(0), c = x->value.dim(1);
    const std::int64_t h = x->value.dim(2), w = x->value.dim(3);
    const std::int64_t oh = (h - kernel) / stride + 1;
    const std::int64_t ow = (w - kernel) / stride + 1;
    if (oh <= 0 || ow <= 0) throw std::invalid_argument("avgpool2d: output size would be empty");
    const Scalar inv = 1.0 / (static_cast<Scalar>(kernel) * kernel);
    Tensor out({n, c, oh, ow});
    const Scalar* xv = x->value.data();
    Scalar* ov = out.data();
    std::int64_t oi = 0;
    for (std::int64_t i = 0; i < n * c; ++i) {
        const Scalar* plane = xv + i * h * w;
        for (std::int64_t y = 0; y < oh; ++y)
            for (std::int64_t xx = 0; xx < ow; ++xx, ++oi) {
                Scalar s = 0;
                for (std::int64_t ki = 0; ki < kernel; ++ki)
                    for (std::int64_t kj = 0; kj < kernel; ++kj)
                        s += plane[(y * stride + ki) * w + xx * stride + kj];
                ov[oi] = s * inv;
            }
    }
    return make_op(std::move(out), {x}, [x, n, c, h, w, oh, ow, kernel, stride, inv](Node& node) {
        if (!x->requires_grad) return;
        x->ensure_grad();
        const Scalar* g = node.grad.data();
        Scalar* dx = x->grad.data();
        std::int64_t oi = 0;
        for (std::int64_t i = 0; i < n * c; ++i) {
            Scalar* plane = dx + i * h * w;
            for (std::int64_t y = 0; y < oh; ++y)
                for (std::int64_t xx = 0; xx < ow; ++xx, ++oi) {
                    const Scalar gv = g[oi] * inv;
                    for (std::int64_t ki = 0; ki < kernel; ++ki)
                        for (std::int64_t kj = 0; kj < kernel; ++kj)
                            plane[(y * stride + ki) * w + xx * stride + kj] += gv;
                }
        }
    });
}

NodeRef global_avgpool(const NodeRef& x) {
    const std::int64_t n = x->value.dim(0), c = x->value.dim(1);
    const std::int64_t hw = x->value.dim(2) * x->value.dim(3);
    const Scalar inv = 1.0 / static_cast<Scalar>(hw);
    Tensor out({n, c});
    const Scalar* xv = x->value.data();
    Scalar* ov = out.data();
    for (std::int64_t i = 0; i < n * c; ++i) {
        Scalar s = 0;
        const Scalar* plane = xv + i * hw;
        for (std::int64_t p = 0; p < hw; ++p) s += plane[p];
        ov[i] = s * inv;
    }
    return make_op(std::move(out), {x}, [x, n, c, hw, inv](Node& node) {
        if (!x->requires_grad) return;
        x->ensure_grad();
        const Scalar* g = node.grad.data();
        Scalar* dx = x->grad.data();
        for (std::int64_t i = 0; i < n * c; ++i) {
            const Scalar gv = g[i] * inv;
            Scalar* plane = dx + i * hw;
            for (std::int64_t p = 0; p < hw; ++p) plane[p] += gv;
        }
    });
}

// ---------------------------------------------------------------------------
// normalization
// ---------------------------------------------------------------------------

NodeRef batchnorm2d(const NodeRef& x, const NodeRef& gamma, const NodeRef& beta,
                    BatchNormState& state, bool training, double momentum, double eps) {
    const std::int64_t n = x->value.dim(0), c = x->value.dim(1);
    const std::int64_t hw = x->value.dim(2) * x->value.dim(3);
    const std::int64_t m = n * hw;
    if (gamma->value.size() != c || beta->value.size() != c)
        throw std::invalid_argument("batchnorm2d: affine dim mismatch");

    Tensor mean({c}), invstd({c});
    if (training) {
        for (std::int64_t ch = 0; ch < c; ++ch) {
            Scalar s = 0;
            for (std::int64_t i = 0; i < n; ++i) {
                const Scalar* plane = x->value.data() + (i * c + ch) * hw;
                for (std::int64_t p = 0; p < hw; ++p) s += plane[p];
            }
            const Scalar mu = s / static_cast<Scalar>(m);
            Scalar v = 0;
            for (std::int64_t i = 0; i < n; ++i) {
                const Scalar* plane = x->value.data() + (i * c + ch) * hw;
                for (std::int64_t p = 0; p < hw; ++p) {
                    const Scalar d = plane[p] - mu;
                    v += d * d;
                }
            }
            const Scalar var = v / static_cast<Scalar>(m);
            mean[ch] = mu;
            invstd[ch] = 1.0 / std::sqrt(var + eps);
            const Scalar var_unbiased = m > 1 ? v / static_cast<Scalar>(m - 1) : var;
            state.running_mean[ch] = (1.0 - momentum) * state.running_mean[ch] + momentum * mu;
            state.running_var[ch] =
                (1.0 - momentum) * state.running_var[ch] + momentum * var_unbiased;
        }
        ++state.batches_seen;
    } else {
        for (std::int64_t ch = 0; ch < c; ++ch) {
            mean[ch] = state.running_mean[ch];
            invstd[ch] = 1.0 / std::sqrt(state.running_var[ch] + eps);
        }
    }

    Tensor out(x->value.shape());
    const Scalar* xv = x->value.data();
    Scalar* ov = out.data();
    for (std::int64_t i = 0; i < n; ++i)
        for (std::int64_t ch = 0; ch < c; ++ch) {
            const Scalar mu = mean[ch], is = invstd[ch];
            const Scalar gm = gamma->value[ch], bt = beta->value[ch];
            const Scalar* src = xv + (i * c + ch) * hw;
            Scalar* dst = ov + (i * c + ch) * hw;
            for (std::int64_t p = 0; p < hw; ++p) dst[p] = gm * (src[p] - mu) * is + bt;
        }

    return make_op(std::move(out), {x, gamma, beta},
                   [x, gamma, beta, mean, invstd, n, c, hw, m, training](Node& node) {
                       const Scalar* g = node.grad.data();
                       const Scalar* xv = x->value.data();
                       if (gamma->requires_grad) gamma->ensure_grad();
                       if (beta->requires_grad) beta->ensure_grad();
                       if (x->requires_grad) x->ensure_grad();
                       for (std::int64_t ch = 0; ch < c; ++ch) {
                           const Scalar mu = mean[ch], is = invstd[ch];
                           Scalar s1 = 0, s2 = 0;
                           for (std::int64_t i = 0; i < n; ++i) {
                               const Scalar* gp = g + (i * c + ch) * hw;
                               const Scalar* xp = xv + (i * c + ch) * hw;
                               for (std::int64_t p = 0; p < hw; ++p) {
                                   s1 += gp[p];
                                   s2 += gp[p] * (xp[p] - mu) * is;
                               }
                           }
                           if (gamma->requires_grad) gamma->grad[ch] += s2;
                           if (beta->requires_grad) beta->grad[ch] += s1;
                           if (x->requires_grad) {
                               const Scalar gm = gamma->value[ch];
                               Scalar* dxv = x->grad.data();
                               if (training) {
                                   const Scalar inv_m = 1.0 / static_cast<Scalar>(m);
                                   for (std::int64_t i = 0; i < n; ++i) {
                                       const Scalar* gp = g + (i * c + ch) * hw;
                                       const Scalar* xp = xv + (i * c + ch) * hw;
                                       Scalar* dp = dxv + (i * c + ch) * hw;
                                       for (std::int64_t p = 0; p < hw; ++p) {
                                           const Scalar xhat = (xp[p] - mu) * is;
                                           dp[p] += gm * is *
                                                    (gp[p] - s1 * inv_m - xhat * s2 * inv_m);
                                       }
                                   }
                               } else {
                                   for (std::int64_t i = 0; i < n; ++i) {
                                       const Scalar* gp = g + (i * c + ch) * hw;
                                       Scalar* dp = dxv + (i * c + ch) * hw;
                                       for (std::int64_t p = 0; p < hw; ++p)
                                           dp[p] += gm * is * gp[p];
                                   }
                               }
                           }
                       }
                   });
}

NodeRef layernorm(const NodeRef& x, const NodeRef& gamma, const NodeRef& beta, double eps) {
    const int rank = x->value.rank();
    const std::int64_t d = x->value.dim(rank - 1);
    if (gamma->value.size() != d || beta->value.size() != d)
        throw std::invalid_argument("layernorm: affine dim mismatch");
    const std::int64_t rows = x->value.size() / d;
    Tensor mean({rows}), invstd({rows});
    Tensor out(x->value.shape());
    const Scalar* xv = x->value.data();
    Scalar* ov = out.data();
    for (std::int64_t r = 0; r < rows; ++r) {
        const Scalar* src = xv + r * d;
        Scalar mu = 0;
        for (std::int64_t i = 0; i < d; ++i) mu += src[i];
        mu /= static_cast<Scalar>(d);
        Scalar v = 0;
        for (std::int64_t i = 0; i < d; ++i) {
            const Scalar dd = src[i] - mu;
            v += dd * dd;
        }
        const Scalar is = 1.0 / std::sqrt(v / static_cast<Scalar>(d) + eps);
        mean[r] = mu;
        invstd[r] = is;
        Scalar* dst = ov + r * d;
        for (std::int64_t i = 0; i < d; ++i)
            dst[i] = gamma->value[i] * (src[i] - mu) * is + beta->value[i];
    }
    return make_op(std::move(out), {x, gamma, beta},
                   [x, gamma, beta, mean, invstd, rows, d](Node& node) {
                       const Scalar* g = node.grad.data();
                       const Scalar* xv = x->value.data();
                       if (gamma->requires_grad) gamma->ensure_grad();
                       if (beta->requires_grad) beta->ensure_grad();
                       if (x->requires_grad) x->ensure_grad();
                       for (std::int64_t r = 0; r < rows; ++r) {
                           const Scalar mu = mean[r], is = invstd[r];
                           const Scalar* gp = g + r * d;
                           const Scalar* xp = xv + r * d;
                           Scalar s1 = 0, s2 = 0;
                           for (std::int64_t i = 0; i < d; ++i) {
                               const Scalar xhat = (xp[i] - mu) * is;
                               const Scalar gg = gp[i] * gamma->value[i];
                               s1 += gg;
                               s2 += gg * xhat;
                               if (gamma->requires_grad) gamma->grad[i] += gp[i] * xhat;
                               if (beta->requires_grad) beta->grad[i] += gp[i];
                           }
                           if (x->requires_grad) {
                               const Scalar inv_d = 1.0 / static_cast<Scalar>(d);
                               Scalar* dp = x->grad.data() + r * d;
                               for (std::int64_t i = 0; i < d; ++i) {
                                   const Scalar xhat = (xp[i] - mu) * is;
                                   const Scalar gg = gp[i] * gamma->value[i];
                                   dp[i] += is * (gg - s1 * inv_d - xhat * s2 * inv_d);
                               }
                           }
                       }
                   });
}

// ---------------------------------------------------------------------------
// softmax family
// ---------------------------------------------------------------------------

NodeRef softmax_lastdim(const NodeRef& x) {
    const int rank = x->value.rank();
    const std::int64_t d = x->value.dim(rank - 1);
    const std::int64_t rows = x->value.size() / d;
    Tensor out(x->value.shape());
    const Scalar* xv = x->value.data();
    Scalar* ov = out.data();
    for (std::int64_t r = 0; r < rows; ++r) {
        const Scalar* src = xv + r * d;
        Scalar* dst = ov + r * d;
        Scalar mx = src[0];
        for (std::int64_t i = 1; i < d; ++i) mx = std::max(mx, src[i]);
        Scalar z = 0;
        for (std::int64_t i = 0; i < d; ++i) {
            dst[i] = std::exp(src[i] - mx);
            z += dst[i];
        }
        const Scalar inv = 1.0 / z;
        for (std::int64_t i = 0; i < d; ++i) dst[i] *= inv;
    }
    return make_op(std::move(out), {x}, [x, rows, d](Node& node) {
        if (!x->requires_grad) return;
        x->ensure_grad();
        const Scalar* g = node.grad.data();
        const Scalar* y = node.value.data();
        Scalar* dx = x->grad.data();
        for (std::int64_t r = 0; r < rows; ++r) {
            const Scalar* gp = g + r * d;
            const Scalar* yp = y + r * d;
            Scalar dot = 0;
            for (std::int64_t i = 0; i < d; ++i) dot += gp[i] * yp[i];
            Scalar* dp = dx + r * d;
            for (std::int64_t i = 0; i < d; ++i) dp[i] += yp[i] * (gp[i] - dot);
        }
    });
}

NodeRef log_softmax_lastdim(const NodeRef& x) {
    const int rank = x->value.rank();
    const std::int64_t d = x->value.dim(rank - 1);
    const std::int64_t rows = x->value.size() / d;
    Tensor out(x->value.shape());
    const Scalar* xv = x->value.data();
    Scalar* ov = out.data();
    for (std::int64_t r = 0; r < rows; ++r) {
        const Scalar* src = xv + r * d;
        Scalar* dst = ov + r * d;
        Scalar mx = src[0];
        for (std::int64_t i = 1; i < d; ++i) mx = std::max(mx, src[i]);
        Scalar z = 0;
        for (std::int64_t i = 0; i < d; ++i) z += std::exp(src[i] - mx);
        const Scalar lse = mx + std::log(z);
        for (std::int64_t i = 0; i < d; ++i) dst[i] = src[i] - lse;
    }
    return make_op(std::move(out), {x}, [x, rows, d](Node& node) {
        if (!x->requires_grad) return;
        x->ensure_grad();
        const Scalar* g = node.grad.data();
        const Scalar* y = node.value.data();
        Scalar* dx = x->grad.data();
        for (std::int64_t r = 0; r < rows; ++r) {
            const Scalar* gp = g + r * d;
            const Scalar* yp = y + r * d;
            Scalar gsum = 0;
            for (std::int64_t i = 0; i < d; ++i) gsum += gp[i];
            Scalar* dp = dx + r * d;
            for (std::int64_t i = 0; i < d; ++i) dp[i] += gp[i] - std::exp(yp[i]) * gsum;
        }
    });
}

}  // namespace wastebench::nn
