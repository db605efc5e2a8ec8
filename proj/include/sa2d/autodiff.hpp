#pragma once

#include <cmath>
#include <cstddef>
#include <deque>
#include <functional>
#include <vector>

#include "sa2d/errors.hpp"
#include "sa2d/image.hpp"

namespace sa2d {

// First-order dual number. Running the whole forward+reverse pass with
// Dual scalars yields exact Hessian-vector products (forward-over-reverse).
struct Dual {
    double v = 0.0;
    double d = 0.0;

    Dual() = default;
    Dual(double value) : v(value) {}  // NOLINT: implicit by design
    Dual(double value, double dot) : v(value), d(dot) {}

    Dual& operator+=(const Dual& o) {
        v += o.v;
        d += o.d;
        return *this;
    }
    Dual& operator-=(const Dual& o) {
        v -= o.v;
        d -= o.d;
        return *this;
    }
};

inline Dual operator+(Dual a, const Dual& b) { return {a.v + b.v, a.d + b.d}; }
inline Dual operator-(Dual a, const Dual& b) { return {a.v - b.v, a.d - b.d}; }
inline Dual operator-(Dual a) { return {-a.v, -a.d}; }
inline Dual operator*(const Dual& a, const Dual& b) {
    return {a.v * b.v, a.d * b.v + a.v * b.d};
}
inline Dual operator/(const Dual& a, const Dual& b) {
    const double q = a.v / b.v;
    return {q, (a.d - q * b.d) / b.v};
}
inline bool operator<(const Dual& a, const Dual& b) { return a.v < b.v; }
inline bool operator>(const Dual& a, const Dual& b) { return a.v > b.v; }
inline bool operator==(const Dual& a, const Dual& b) { return a.v == b.v; }

inline Dual tanh(const Dual& x) {
    const double t = std::tanh(x.v);
    return {t, (1.0 - t * t) * x.d};
}
inline Dual exp(const Dual& x) {
    const double e = std::exp(x.v);
    return {e, e * x.d};
}
inline Dual abs(const Dual& x) {
    if (x.v > 0.0) return x;
    if (x.v < 0.0) return {-x.v, -x.d};
    return {0.0, 0.0};  // subgradient pinned to 0 at ties
}
inline Dual pow(const Dual& x, double p) {
    return {std::pow(x.v, p), p * std::pow(x.v, p - 1.0) * x.d};
}
inline Dual max(const Dual& x, double c) { return x.v >= c ? x : Dual{c, 0.0}; }

// scalar shims so templated code reads the same for double and Dual
inline double value_of(double x) { return x; }
inline double value_of(const Dual& x) { return x.v; }
inline double tanh_s(double x) { return std::tanh(x); }
inline Dual tanh_s(const Dual& x) { return tanh(x); }
inline double exp_s(double x) { return std::exp(x); }
inline Dual exp_s(const Dual& x) { return exp(x); }
inline double abs_s(double x) { return std::fabs(x); }
inline Dual abs_s(const Dual& x) { return abs(x); }
inline double pow_s(double x, double p) { return std::pow(x, p); }
inline Dual pow_s(const Dual& x, double p) { return pow(x, p); }
inline double max_s(double x, double c) { return x >= c ? x : c; }
inline Dual max_s(const Dual& x, double c) { return max(x, c); }
inline double sign_or_zero(double x) { return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0); }
inline double sign_or_zero(const Dual& x) { return sign_or_zero(x.v); }

// Reverse-mode tape over (channels, height, width) arrays. Nodes are created
// in evaluation order; backward() walks them in reverse. Only leaves created
// with param() accumulate gradients worth reading back.
template <typename S>
class Graph {
public:
    using Id = int;

    struct Node {
        int c = 1, h = 1, w = 1;
        bool needs_grad = false;
        std::vector<S> val;
        std::vector<S> grad;
        std::function<void(Graph&)> back;  // accumulates into parents
    };

    Id input(int c, int h, int w) {
        nodes_.push_back(Node{c, h, w, false,
                              std::vector<S>(static_cast<std::size_t>(c) * h * w, S{}), {}, {}});
        return static_cast<Id>(nodes_.size()) - 1;
    }

    Id input_image(const Image& img) {
        Id id = input(1, img.h, img.w);
        auto& v = nodes_[id].val;
        for (std::size_t i = 0; i < img.px.size(); ++i) v[i] = S{img.px[i]};
        return id;
    }

    Id param(const S* data, std::size_t n) {
        nodes_.push_back(Node{static_cast<int>(n), 1, 1, true, std::vector<S>(data, data + n),
                              {}, {}});
        return static_cast<Id>(nodes_.size()) - 1;
    }

    Node& node(Id id) { return nodes_[static_cast<std::size_t>(id)]; }
    const Node& node(Id id) const { return nodes_[static_cast<std::size_t>(id)]; }
    std::vector<S>& val(Id id) { return node(id).val; }
    std::vector<S>& grad(Id id) { return node(id).grad; }

    S scalar(Id id) const { return node(id).val[0]; }

    // ---- elementwise / structural ops -------------------------------------

    Id add(Id a, Id b) { return binary(a, b, [](S x, S y) { return x + y; },
                                       [](S, S, S g) { return std::pair<S, S>{g, g}; }); }
    Id sub(Id a, Id b) { return binary(a, b, [](S x, S y) { return x - y; },
                                       [](S, S, S g) { return std::pair<S, S>{g, -g}; }); }
    Id mul(Id a, Id b) {
        return binary(a, b, [](S x, S y) { return x * y; },
                      [](S x, S y, S g) { return std::pair<S, S>{g * y, g * x}; });
    }
    Id div(Id a, Id b) {
        return binary(a, b, [](S x, S y) { return x / y; },
                      [](S x, S y, S g) {
                          S inv = S{1.0} / y;
                          return std::pair<S, S>{g * inv, -g * x * inv * inv};
                      });
    }

    // y = scale * x + shift
    Id affine(Id x, double scale, double shift) {
        return unary(x, [=](S v) { return S{scale} * v + S{shift}; },
                     [=](S, S, S g) { return S{scale} * g; });
    }

    Id tanh_op(Id x) {
        return unary(x, [](S v) { return tanh_s(v); },
                     [](S, S y, S g) { return g * (S{1.0} - y * y); });
    }

    Id sigmoid_op(Id x) {
        return unary(x, [](S v) { return S{1.0} / (S{1.0} + exp_s(-v)); },
                     [](S, S y, S g) { return g * y * (S{1.0} - y); });
    }

    Id abs_op(Id x) {
        return unary(x, [](S v) { return abs_s(v); },
                     [](S v, S, S g) { return g * S{sign_or_zero(v)}; });
    }

    // y = max(x, floor); subgradient passes only on the open side
    Id clamp_min(Id x, double floor) {
        return unary(x, [=](S v) { return max_s(v, floor); },
                     [=](S v, S, S g) { return value_of(v) >= floor ? g : S{0.0}; });
    }

    Id pow_const(Id x, double p) {
        return unary(x, [=](S v) { return pow_s(v, p); },
                     [=](S v, S, S g) { return g * S{p} * pow_s(v, p - 1.0); });
    }

    Id concat_channels(Id a, Id b) {
        const Node& na = node(a);
        const Node& nb = node(b);
        if (na.h != nb.h || na.w != nb.w) throw Error(ErrorKind::ShapeMismatch, "concat");
        Id out = input(na.c + nb.c, na.h, na.w);
        auto& v = val(out);
        std::copy(na.val.begin(), na.val.end(), v.begin());
        std::copy(nb.val.begin(), nb.val.end(), v.begin() + na.val.size());
        node(out).needs_grad = na.needs_grad || nb.needs_grad;
        node(out).back = [a, b, out](Graph& g) {
            auto& go = g.grad(out);
            auto& ga = g.grad(a);
            auto& gb = g.grad(b);
            for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += go[i];
            for (std::size_t i = 0; i < gb.size(); ++i) gb[i] += go[ga.size() + i];
        };
        return out;
    }

    // 3x3 convolution, stride 1, zero padding 1; weights laid out
    // [out][in][3][3], biases [out]
    Id conv3x3(Id x, Id weight, Id bias, int out_ch) {
        const Node& nx = node(x);
        const int ci = nx.c, h = nx.h, w = nx.w;
        if (node(weight).val.size() != static_cast<std::size_t>(out_ch) * ci * 9 ||
            node(bias).val.size() != static_cast<std::size_t>(out_ch))
            throw Error(ErrorKind::ShapeMismatch, "conv3x3 weights");
        Id out = input(out_ch, h, w);
        auto& y = val(out);
        const auto& xv = nx.val;
        const auto& wv = node(weight).val;
        const auto& bv = node(bias).val;
        for (int o = 0; o < out_ch; ++o) {
            for (int i = 0; i < h; ++i) {
                for (int j = 0; j < w; ++j) {
                    S acc = bv[static_cast<std::size_t>(o)];
                    for (int c = 0; c < ci; ++c) {
                        const std::size_t wbase =
                            (static_cast<std::size_t>(o) * ci + c) * 9;
                        const std::size_t xbase = static_cast<std::size_t>(c) * h * w;
                        for (int di = -1; di <= 1; ++di) {
                            const int ii = i + di;
                            if (ii < 0 || ii >= h) continue;
                            for (int dj = -1; dj <= 1; ++dj) {
                                const int jj = j + dj;
                                if (jj < 0 || jj >= w) continue;
                                acc += wv[wbase + static_cast<std::size_t>(di + 1) * 3 +
                                          (dj + 1)] *
                                       xv[xbase + static_cast<std::size_t>(ii) * w + jj];
                            }
                        }
                    }
                    y[(static_cast<std::size_t>(o) * h + i) * w + j] = acc;
                }
            }
        }
        node(out).needs_grad = true;
        node(out).back = [x, weight, bias, out, out_ch, ci, h, w](Graph& g) {
            const auto& go = g.grad(out);
            const auto& xv = g.val(x);
            const auto& wv = g.val(weight);
            auto& gx = g.grad(x);
            auto& gw = g.grad(weight);
            auto& gb = g.grad(bias);
            const bool want_gx = g.node(x).needs_grad;
            for (int o = 0; o < out_ch; ++o) {
                for (int i = 0; i < h; ++i) {
                    for (int j = 0; j < w; ++j) {
                        const S gy = go[(static_cast<std::size_t>(o) * h + i) * w + j];
                        gb[static_cast<std::size_t>(o)] += gy;
                        for (int c = 0; c < ci; ++c) {
                            const std::size_t wbase =
                                (static_cast<std::size_t>(o) * ci + c) * 9;
                            const std::size_t xbase = static_cast<std::size_t>(c) * h * w;
                            for (int di = -1; di <= 1; ++di) {
                                const int ii = i + di;
                                if (ii < 0 || ii >= h) continue;
                                for (int dj = -1; dj <= 1; ++dj) {
                                    const int jj = j + dj;
                                    if (jj < 0 || jj >= w) continue;
                                    const std::size_t wi =
                                        wbase + static_cast<std::size_t>(di + 1) * 3 + (dj + 1);
                                    const std::size_t xi =
                                        xbase + static_cast<std::size_t>(ii) * w + jj;
                                    gw[wi] += gy * xv[xi];
                                    if (want_gx) gx[xi] += gy * wv[wi];
                                }
                            }
                        }
                    }
                }
            }
        };
        return out;
    }

    Id avg_pool2(Id x) {
        const Node& nx = node(x);
        const int c = nx.c, h = nx.h, w = nx.w;
        if (h % 2 != 0 || w % 2 != 0) throw Error(ErrorKind::ShapeMismatch, "avg_pool2 odd size");
        Id out = input(c, h / 2, w / 2);
        auto& y = val(out);
        const auto& xv = nx.val;
        for (int cc = 0; cc < c; ++cc)
            for (int i = 0; i < h / 2; ++i)
                for (int j = 0; j < w / 2; ++j) {
                    const std::size_t b = (static_cast<std::size_t>(cc) * h + 2 * i) * w + 2 * j;
                    y[(static_cast<std::size_t>(cc) * (h / 2) + i) * (w / 2) + j] =
                        (xv[b] + xv[b + 1] + xv[b + w] + xv[b + w + 1]) * S{0.25};
                }
        node(out).needs_grad = nx.needs_grad;
        node(out).back = [x, out, c, h, w](Graph& g) {
            if (!g.node(x).needs_grad) return;
            const auto& go = g.grad(out);
            auto& gx = g.grad(x);
            for (int cc = 0; cc < c; ++cc)
                for (int i = 0; i < h / 2; ++i)
                    for (int j = 0; j < w / 2; ++j) {
                        const S q =
                            go[(static_cast<std::size_t>(cc) * (h / 2) + i) * (w / 2) + j] *
                            S{0.25};
                        const std::size_t b =
                            (static_cast<std::size_t>(cc) * h + 2 * i) * w + 2 * j;
                        gx[b] += q;
                        gx[b + 1] += q;
                        gx[b + w] += q;
                        gx[b + w + 1] += q;
                    }
        };
        return out;
    }

    Id upsample2(Id x) {
        const Node& nx = node(x);
        const int c = nx.c, h = nx.h, w = nx.w;
        Id out = input(c, 2 * h, 2 * w);
        auto& y = val(out);
        const auto& xv = nx.val;
        for (int cc = 0; cc < c; ++cc)
            for (int i = 0; i < 2 * h; ++i)
                for (int j = 0; j < 2 * w; ++j)
                    y[(static_cast<std::size_t>(cc) * 2 * h + i) * 2 * w + j] =
                        xv[(static_cast<std::size_t>(cc) * h + i / 2) * w + j / 2];
        node(out).needs_grad = nx.needs_grad;
        node(out).back = [x, out, c, h, w](Graph& g) {
            if (!g.node(x).needs_grad) return;
            const auto& go = g.grad(out);
            auto& gx = g.grad(x);
            for (int cc = 0; cc < c; ++cc)
                for (int i = 0; i < 2 * h; ++i)
                    for (int j = 0; j < 2 * w; ++j)
                        gx[(static_cast<std::size_t>(cc) * h + i / 2) * w + j / 2] +=
                            go[(static_cast<std::size_t>(cc) * 2 * h + i) * 2 * w + j];
        };
        return out;
    }

    // valid-mode correlation with a fixed (constant) kernel, per channel
    Id filter_valid(Id x, const std::vector<double>& kernel, int k) {
        const Node& nx = node(x);
        const int c = nx.c, h = nx.h, w = nx.w;
        if (h < k || w < k) throw Error(ErrorKind::ShapeMismatch, "filter_valid");
        const int oh = h - k + 1, ow = w - k + 1;
        Id out = input(c, oh, ow);
        auto& y = val(out);
        const auto& xv = nx.val;
        for (int cc = 0; cc < c; ++cc)
            for (int i = 0; i < oh; ++i)
                for (int j = 0; j < ow; ++j) {
                    S acc{};
                    for (int di = 0; di < k; ++di)
                        for (int dj = 0; dj < k; ++dj)
                            acc += S{kernel[static_cast<std::size_t>(di) * k + dj]} *
                                   xv[(static_cast<std::size_t>(cc) * h + i + di) * w + j + dj];
                    y[(static_cast<std::size_t>(cc) * oh + i) * ow + j] = acc;
                }
        node(out).needs_grad = nx.needs_grad;
        node(out).back = [x, out, kernel, k, c, h, w, oh, ow](Graph& g) {
            if (!g.node(x).needs_grad) return;
            const auto& go = g.grad(out);
            auto& gx = g.grad(x);
            for (int cc = 0; cc < c; ++cc)
                for (int i = 0; i < oh; ++i)
                    for (int j = 0; j < ow; ++j) {
                        const S gy = go[(static_cast<std::size_t>(cc) * oh + i) * ow + j];
                        for (int di = 0; di < k; ++di)
                            for (int dj = 0; dj < k; ++dj)
                                gx[(static_cast<std::size_t>(cc) * h + i + di) * w + j + dj] +=
                                    gy * S{kernel[static_cast<std::size_t>(di) * k + dj]};
                    }
        };
        return out;
    }

    // forward differences along rows / columns
    Id diff_h(Id x) {
        const Node& nx = node(x);
        const int c = nx.c, h = nx.h, w = nx.w;
        if (w < 2) throw Error(ErrorKind::ShapeMismatch, "diff_h");
        Id out = input(c, h, w - 1);
        auto& y = val(out);
        const auto& xv = nx.val;
        for (int cc = 0; cc < c; ++cc)
            for (int i = 0; i < h; ++i)
                for (int j = 0; j + 1 < w; ++j)
                    y[(static_cast<std::size_t>(cc) * h + i) * (w - 1) + j] =
                        xv[(static_cast<std::size_t>(cc) * h + i) * w + j + 1] -
                        xv[(static_cast<std::size_t>(cc) * h + i) * w + j];
        node(out).needs_grad = nx.needs_grad;
        node(out).back = [x, out, c, h, w](Graph& g) {
            if (!g.node(x).needs_grad) return;
            const auto& go = g.grad(out);
            auto& gx = g.grad(x);
            for (int cc = 0; cc < c; ++cc)
                for (int i = 0; i < h; ++i)
                    for (int j = 0; j + 1 < w; ++j) {
                        const S gy = go[(static_cast<std::size_t>(cc) * h + i) * (w - 1) + j];
                        gx[(static_cast<std::size_t>(cc) * h + i) * w + j + 1] += gy;
                        gx[(static_cast<std::size_t>(cc) * h + i) * w + j] -= gy;
                    }
        };
        return out;
    }

    Id diff_v(Id x) {
        const Node& nx = node(x);
        const int c = nx.c, h = nx.h, w = nx.w;
        if (h < 2) throw Error(ErrorKind::ShapeMismatch, "diff_v");
        Id out = input(c, h - 1, w);
        auto& y = val(out);
        const auto& xv = nx.val;
        for (int cc = 0; cc < c; ++cc)
            for (int i = 0; i + 1 < h; ++i)
                for (int j = 0; j < w; ++j)
                    y[(static_cast<std::size_t>(cc) * (h - 1) + i) * w + j] =
                        xv[(static_cast<std::size_t>(cc) * h + i + 1) * w + j] -
                        xv[(static_cast<std::size_t>(cc) * h + i) * w + j];
        node(out).needs_grad = nx.needs_grad;
        node(out).back = [x, out, c, h, w](Graph& g) {
            if (!g.node(x).needs_grad) return;
            const auto& go = g.grad(out);
            auto& gx = g.grad(x);
            for (int cc = 0; cc < c; ++cc)
                for (int i = 0; i + 1 < h; ++i)
                    for (int j = 0; j < w; ++j) {
                        const S gy = go[(static_cast<std::size_t>(cc) * (h - 1) + i) * w + j];
                        gx[(static_cast<std::size_t>(cc) * h + i + 1) * w + j] += gy;
                        gx[(static_cast<std::size_t>(cc) * h + i) * w + j] -= gy;
                    }
        };
        return out;
    }

    // keeps the top-left new_h x new_w window (used to even out odd sizes
    // before pooling)
    Id crop(Id x, int new_h, int new_w) {
        const Node& nx = node(x);
        const int c = nx.c, h = nx.h, w = nx.w;
        if (new_h > h || new_w > w) throw Error(ErrorKind::ShapeMismatch, "crop");
        Id out = input(c, new_h, new_w);
        auto& y = val(out);
        const auto& xv = nx.val;
        for (int cc = 0; cc < c; ++cc)
            for (int i = 0; i < new_h; ++i)
                for (int j = 0; j < new_w; ++j)
                    y[(static_cast<std::size_t>(cc) * new_h + i) * new_w + j] =
                        xv[(static_cast<std::size_t>(cc) * h + i) * w + j];
        node(out).needs_grad = nx.needs_grad;
        node(out).back = [x, out, c, h, w, new_h, new_w](Graph& g) {
            if (!g.node(x).needs_grad) return;
            const auto& go = g.grad(out);
            auto& gx = g.grad(x);
            for (int cc = 0; cc < c; ++cc)
                for (int i = 0; i < new_h; ++i)
                    for (int j = 0; j < new_w; ++j)
                        gx[(static_cast<std::size_t>(cc) * h + i) * w + j] +=
                            go[(static_cast<std::size_t>(cc) * new_h + i) * new_w + j];
        };
        return out;
    }

    Id sum_all(Id x) {
        Id out = input(1, 1, 1);
        const auto& xv = node(x).val;
        S acc{};
        for (const S& v : xv) acc += v;
        val(out)[0] = acc;
        node(out).needs_grad = node(x).needs_grad;
        node(out).back = [x, out](Graph& g) {
            if (!g.node(x).needs_grad) return;
            const S gy = g.grad(out)[0];
            for (S& gv : g.grad(x)) gv += gy;
        };
        return out;
    }

    Id mean_all(Id x) {
        const double n = static_cast<double>(node(x).val.size());
        return affine(sum_all(x), 1.0 / n, 0.0);
    }

    void backward(Id root) {
        for (auto& n : nodes_) n.grad.assign(n.val.size(), S{});
        node(root).grad[0] = S{1.0};
        for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it)
            if (it->back && it->needs_grad) it->back(*this);
    }

private:
    template <typename F, typename B>
    Id unary(Id x, F fwd, B bwd) {
        const Node& nx = node(x);
        Id out = input(nx.c, nx.h, nx.w);
        auto& y = val(out);
        for (std::size_t i = 0; i < nx.val.size(); ++i) y[i] = fwd(nx.val[i]);
        node(out).needs_grad = nx.needs_grad;
        node(out).back = [x, out, bwd](Graph& g) {
            if (!g.node(x).needs_grad) return;
            const auto& xv = g.val(x);
            const auto& yv = g.val(out);
            const auto& go = g.grad(out);
            auto& gx = g.grad(x);
            for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += bwd(xv[i], yv[i], go[i]);
        };
        return out;
    }

    template <typename F, typename B>
    Id binary(Id a, Id b, F fwd, B bwd) {
        const Node& na = node(a);
        const Node& nb = node(b);
        if (na.val.size() != nb.val.size()) throw Error(ErrorKind::ShapeMismatch, "binary op");
        Id out = input(na.c, na.h, na.w);
        auto& y = val(out);
        for (std::size_t i = 0; i < na.val.size(); ++i) y[i] = fwd(na.val[i], nb.val[i]);
        node(out).needs_grad = na.needs_grad || nb.needs_grad;
        node(out).back = [a, b, out, bwd](Graph& g) {
            const auto& av = g.val(a);
            const auto& bv = g.val(b);
            const auto& go = g.grad(out);
            const bool ga_on = g.node(a).needs_grad;
            const bool gb_on = g.node(b).needs_grad;
            auto& ga = g.grad(a);
            auto& gb = g.grad(b);
            for (std::size_t i = 0; i < go.size(); ++i) {
                auto [da, db] = bwd(av[i], bv[i], go[i]);
                if (ga_on) ga[i] += da;
                if (gb_on) gb[i] += db;
            }
        };
        return out;
    }

    // deque keeps node references stable while ops append their outputs
    std::deque<Node> nodes_;
};

}  // namespace sa2d
