// Copyright 2026 The simtrace Authors
// SPDX-License-Identifier: Apache-2.0

#include "simtrace/tensor/ops.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "simtrace/wire/distribution.hpp"

namespace simtrace::nn {

namespace {

using ImplPtr = std::shared_ptr<TensorImpl>;

Tensor output(Shape shape, bool track) {
    Tensor t(std::move(shape));
    t.set_requires_grad(track);
    return t;
}

// Gradient sink for an input, or nullptr when the input needs none.
double* sink(const ImplPtr& p) {
    if (!p->requires_grad) return nullptr;
    p->ensure_grad();
    return p->grad.data();
}

void require(bool ok, const std::string& what) {
    if (!ok) throw ShapeError(what);
}

std::size_t rows_of(const Tensor& t) { return t.rank() == 1 ? 1 : t.numel() / t.shape().back(); }
std::size_t cols_of(const Tensor& t) { return t.shape().back(); }

template <class F, class DF>
Tensor unary(const char* name, const Tensor& a, F f, DF df) {
    const bool track = tracking({&a});
    Tensor out = output(a.shape(), track);
    const auto& x = a.vec();
    auto& y = out.vec();
    for (std::size_t i = 0; i < x.size(); ++i) y[i] = f(x[i]);
    if (track) {
        ImplPtr ai = a.impl(), oi = out.impl();
        Tape::active()->record(name, out, [ai, oi, df] {
            double* ga = sink(ai);
            if (!ga) return;
            for (std::size_t i = 0; i < ai->data.size(); ++i) ga[i] += oi->grad[i] * df(ai->data[i], oi->data[i]);
        });
    }
    return out;
}

template <class F>
Tensor binary(const char* name, const Tensor& a, const Tensor& b, F f, double sa, double sb, bool product) {
    require(a.shape() == b.shape(),
            std::string(name) + ": shape mismatch " + shape_string(a.shape()) + " vs " + shape_string(b.shape()));
    const bool track = tracking({&a, &b});
    Tensor out = output(a.shape(), track);
    for (std::size_t i = 0; i < a.numel(); ++i) out.vec()[i] = f(a[i], b[i]);
    if (track) {
        ImplPtr ai = a.impl(), bi = b.impl(), oi = out.impl();
        Tape::active()->record(name, out, [ai, bi, oi, sa, sb, product] {
            double* ga = sink(ai);
            double* gb = sink(bi);
            const auto& g = oi->grad;
            for (std::size_t i = 0; i < g.size(); ++i) {
                if (product) {
                    if (ga) ga[i] += g[i] * bi->data[i];
                    if (gb) gb[i] += g[i] * ai->data[i];
                } else {
                    if (ga) ga[i] += sa * g[i];
                    if (gb) gb[i] += sb * g[i];
                }
            }
        });
    }
    return out;
}

double stable_softplus(double x) { return x > 0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x)); }
double stable_sigmoid(double x) {
    if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) {
    return binary("add", a, b, [](double x, double y) { return x + y; }, 1.0, 1.0, false);
}
Tensor sub(const Tensor& a, const Tensor& b) {
    return binary("sub", a, b, [](double x, double y) { return x - y; }, 1.0, -1.0, false);
}
Tensor mul(const Tensor& a, const Tensor& b) {
    return binary("mul", a, b, [](double x, double y) { return x * y; }, 0.0, 0.0, true);
}

Tensor scale(const Tensor& a, double s) {
    return unary("scale", a, [s](double x) { return s * x; }, [s](double, double) { return s; });
}

Tensor add_scalar(const Tensor& a, double s) {
    return unary("add_scalar", a, [s](double x) { return x + s; }, [](double, double) { return 1.0; });
}

Tensor tanh(const Tensor& a) {
    return unary("tanh", a, [](double x) { return std::tanh(x); }, [](double, double y) { return 1.0 - y * y; });
}

Tensor sigmoid(const Tensor& a) {
    return unary("sigmoid", a, stable_sigmoid, [](double, double y) { return y * (1.0 - y); });
}

Tensor relu(const Tensor& a) {
    return unary("relu", a, [](double x) { return x > 0 ? x : 0.0; },
                 [](double x, double) { return x > 0 ? 1.0 : 0.0; });
}

Tensor softplus(const Tensor& a) {
    return unary("softplus", a, stable_softplus, [](double x, double) { return stable_sigmoid(x); });
}

Tensor exp(const Tensor& a) {
    return unary("exp", a, [](double x) { return std::exp(x); }, [](double, double y) { return y; });
}

Tensor matmul(const Tensor& a, const Tensor& b) {
    require(a.rank() == 2 && b.rank() == 2 && a.dim(1) == b.dim(0),
            "matmul: incompatible shapes " + shape_string(a.shape()) + " x " + shape_string(b.shape()));
    const std::size_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
    const bool track = tracking({&a, &b});
    Tensor out = output({m, n}, track);
    const double* A = a.vec().data();
    const double* B = b.vec().data();
    double* C = out.vec().data();
    for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t p = 0; p < k; ++p) {
            const double av = A[i * k + p];
            for (std::size_t j = 0; j < n; ++j) C[i * n + j] += av * B[p * n + j];
        }
    }
    if (track) {
        ImplPtr ai = a.impl(), bi = b.impl(), oi = out.impl();
        Tape::active()->record("matmul", out, [ai, bi, oi, m, k, n] {
            const double* G = oi->grad.data();
            if (double* ga = sink(ai)) {
                for (std::size_t i = 0; i < m; ++i)
                    for (std::size_t p = 0; p < k; ++p) {
                        double s = 0;
                        for (std::size_t j = 0; j < n; ++j) s += G[i * n + j] * bi->data[p * n + j];
                        ga[i * k + p] += s;
                    }
            }
            if (double* gb = sink(bi)) {
                for (std::size_t i = 0; i < m; ++i)
                    for (std::size_t p = 0; p < k; ++p) {
                        const double av = ai->data[i * k + p];
                        for (std::size_t j = 0; j < n; ++j) gb[p * n + j] += av * G[i * n + j];
                    }
            }
        });
    }
    return out;
}

Tensor linear(const Tensor& x, const Tensor& w, const Tensor& bias) {
    require(x.rank() == 2 && w.rank() == 2 && x.dim(1) == w.dim(1),
            "linear: incompatible shapes " + shape_string(x.shape()) + " and weight " + shape_string(w.shape()));
    const bool has_bias = bias.numel() > 0;
    require(!has_bias || bias.numel() == w.dim(0), "linear: bias length mismatch");
    const std::size_t rows = x.dim(0), k = x.dim(1), n = w.dim(0);
    const bool track = tracking({&x, &w, &bias});
    Tensor out = output({rows, n}, track);
    const double* X = x.vec().data();
    const double* W = w.vec().data();
    double* Y = out.vec().data();
    for (std::size_t r = 0; r < rows; ++r) {
        for (std::size_t j = 0; j < n; ++j) {
            double s = has_bias ? bias[j] : 0.0;
            const double* wr = W + j * k;
            const double* xr = X + r * k;
            for (std::size_t p = 0; p < k; ++p) s += xr[p] * wr[p];
            Y[r * n + j] = s;
        }
    }
    if (track) {
        ImplPtr xi = x.impl(), wi = w.impl(), bi = bias.impl(), oi = out.impl();
        Tape::active()->record("linear", out, [xi, wi, bi, oi, rows, k, n, has_bias] {
            const double* G = oi->grad.data();
            if (double* gx = sink(xi)) {
                for (std::size_t r = 0; r < rows; ++r)
                    for (std::size_t j = 0; j < n; ++j) {
                        const double g = G[r * n + j];
                        if (g == 0.0) continue;
                        const double* wr = wi->data.data() + j * k;
                        for (std::size_t p = 0; p < k; ++p) gx[r * k + p] += g * wr[p];
                    }
            }
            if (double* gw = sink(wi)) {
                for (std::size_t r = 0; r < rows; ++r)
                    for (std::size_t j = 0; j < n; ++j) {
                        const double g = G[r * n + j];
                        if (g == 0.0) continue;
                        const double* xr = xi->data.data() + r * k;
                        for (std::size_t p = 0; p < k; ++p) gw[j * k + p] += g * xr[p];
                    }
            }
            if (has_bias) {
                if (double* gb = sink(bi)) {
                    for (std::size_t r = 0; r < rows; ++r)
                        for (std::size_t j = 0; j < n; ++j) gb[j] += G[r * n + j];
                }
            }
        });
    }
    return out;
}

Tensor add_bias(const Tensor& x, const Tensor& b) {
    require(x.rank() == 2 && b.numel() == x.dim(1), "add_bias: bias length mismatch");
    const std::size_t rows = x.dim(0), n = x.dim(1);
    const bool track = tracking({&x, &b});
    Tensor out = output(x.shape(), track);
    for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t j = 0; j < n; ++j) out.vec()[r * n + j] = x[r * n + j] + b[j];
    if (track) {
        ImplPtr xi = x.impl(), bi = b.impl(), oi = out.impl();
        Tape::active()->record("add_bias", out, [xi, bi, oi, rows, n] {
            double* gx = sink(xi);
            double* gb = sink(bi);
            for (std::size_t r = 0; r < rows; ++r)
                for (std::size_t j = 0; j < n; ++j) {
                    const double g = oi->grad[r * n + j];
                    if (gx) gx[r * n + j] += g;
                    if (gb) gb[j] += g;
                }
        });
    }
    return out;
}

Tensor softmax(const Tensor& a) {
    const std::size_t rows = rows_of(a), n = cols_of(a);
    const bool track = tracking({&a});
    Tensor out = output(a.shape(), track);
    for (std::size_t r = 0; r < rows; ++r) {
        const double* x = a.vec().data() + r * n;
        double* y = out.vec().data() + r * n;
        const double mx = *std::max_element(x, x + n);
        double s = 0;
        for (std::size_t j = 0; j < n; ++j) s += (y[j] = std::exp(x[j] - mx));
        for (std::size_t j = 0; j < n; ++j) y[j] /= s;
    }
    if (track) {
        ImplPtr ai = a.impl(), oi = out.impl();
        Tape::active()->record("softmax", out, [ai, oi, rows, n] {
            double* ga = sink(ai);
            if (!ga) return;
            for (std::size_t r = 0; r < rows; ++r) {
                const double* y = oi->data.data() + r * n;
                const double* g = oi->grad.data() + r * n;
                double dot = 0;
                for (std::size_t j = 0; j < n; ++j) dot += g[j] * y[j];
                for (std::size_t j = 0; j < n; ++j) ga[r * n + j] += y[j] * (g[j] - dot);
            }
        });
    }
    return out;
}

Tensor log_softmax(const Tensor& a) {
    const std::size_t rows = rows_of(a), n = cols_of(a);
    const bool track = tracking({&a});
    Tensor out = output(a.shape(), track);
    for (std::size_t r = 0; r < rows; ++r) {
        const double* x = a.vec().data() + r * n;
        double* y = out.vec().data() + r * n;
        const double mx = *std::max_element(x, x + n);
        double s = 0;
        for (std::size_t j = 0; j < n; ++j) s += std::exp(x[j] - mx);
        const double lse = mx + std::log(s);
        for (std::size_t j = 0; j < n; ++j) y[j] = x[j] - lse;
    }
    if (track) {
        ImplPtr ai = a.impl(), oi = out.impl();
        Tape::active()->record("log_softmax", out, [ai, oi, rows, n] {
            double* ga = sink(ai);
            if (!ga) return;
            for (std::size_t r = 0; r < rows; ++r) {
                const double* y = oi->data.data() + r * n;
                const double* g = oi->grad.data() + r * n;
                double gs = 0;
                for (std::size_t j = 0; j < n; ++j) gs += g[j];
                for (std::size_t j = 0; j < n; ++j) ga[r * n + j] += g[j] - std::exp(y[j]) * gs;
            }
        });
    }
    return out;
}

Tensor logsumexp(const Tensor& a) {
    const std::size_t rows = rows_of(a), n = cols_of(a);
    const bool track = tracking({&a});
    Tensor out = output({rows}, track);
    for (std::size_t r = 0; r < rows; ++r) {
        const double* x = a.vec().data() + r * n;
        const double mx = *std::max_element(x, x + n);
        if (std::isinf(mx)) {
            out.vec()[r] = mx;
            continue;
        }
        double s = 0;
        for (std::size_t j = 0; j < n; ++j) s += std::exp(x[j] - mx);
        out.vec()[r] = mx + std::log(s);
    }
    if (track) {
        ImplPtr ai = a.impl(), oi = out.impl();
        Tape::active()->record("logsumexp", out, [ai, oi, rows, n] {
            double* ga = sink(ai);
            if (!ga) return;
            for (std::size_t r = 0; r < rows; ++r) {
                const double l = oi->data[r];
                if (std::isinf(l)) continue;
                for (std::size_t j = 0; j < n; ++j) ga[r * n + j] += oi->grad[r] * std::exp(ai->data[r * n + j] - l);
            }
        });
    }
    return out;
}

Tensor sum(const Tensor& a) {
    const bool track = tracking({&a});
    Tensor out = output({1}, track);
    double s = 0;
    for (double x : a.vec()) s += x;
    out.vec()[0] = s;
    if (track) {
        ImplPtr ai = a.impl(), oi = out.impl();
        Tape::active()->record("sum", out, [ai, oi] {
            if (double* ga = sink(ai))
                for (std::size_t i = 0; i < ai->data.size(); ++i) ga[i] += oi->grad[0];
        });
    }
    return out;
}

Tensor mean(const Tensor& a) {
    require(a.numel() > 0, "mean of empty tensor");
    return scale(sum(a), 1.0 / static_cast<double>(a.numel()));
}

Tensor concat(const std::vector<Tensor>& parts) {
    require(!parts.empty(), "concat: no inputs");
    const std::size_t rows = parts[0].rank() == 2 ? parts[0].dim(0) : 0;
    std::size_t total = 0;
    bool track = false;
    for (const auto& p : parts) {
        require(p.rank() == 2 && p.dim(0) == rows, "concat: inputs must be [B,*] with equal B, got " +
                                                       shape_string(p.shape()));
        total += p.dim(1);
        track = track || tracking({&p});
    }
    Tensor out = output({rows, total}, track);
    std::size_t off = 0;
    for (const auto& p : parts) {
        const std::size_t w = p.dim(1);
        for (std::size_t r = 0; r < rows; ++r)
            std::copy_n(p.vec().data() + r * w, w, out.vec().data() + r * total + off);
        off += w;
    }
    if (track) {
        std::vector<ImplPtr> ins;
        for (const auto& p : parts) ins.push_back(p.impl());
        ImplPtr oi = out.impl();
        Tape::active()->record("concat", out, [ins, oi, rows, total] {
            std::size_t off = 0;
            for (const auto& in : ins) {
                const std::size_t w = in->shape[1];
                if (double* g = sink(in)) {
                    for (std::size_t r = 0; r < rows; ++r)
                        for (std::size_t j = 0; j < w; ++j) g[r * w + j] += oi->grad[r * total + off + j];
                }
                off += w;
            }
        });
    }
    return out;
}

Tensor slice_cols(const Tensor& x, std::size_t start, std::size_t len) {
    require(x.rank() == 2 && start + len <= x.dim(1), "slice_cols: range out of bounds");
    const std::size_t rows = x.dim(0), n = x.dim(1);
    const bool track = tracking({&x});
    Tensor out = output({rows, len}, track);
    for (std::size_t r = 0; r < rows; ++r)
        std::copy_n(x.vec().data() + r * n + start, len, out.vec().data() + r * len);
    if (track) {
        ImplPtr xi = x.impl(), oi = out.impl();
        Tape::active()->record("slice_cols", out, [xi, oi, rows, n, start, len] {
            if (double* g = sink(xi))
                for (std::size_t r = 0; r < rows; ++r)
                    for (std::size_t j = 0; j < len; ++j) g[r * n + start + j] += oi->grad[r * len + j];
        });
    }
    return out;
}

Tensor embedding(const Tensor& table, const std::vector<std::size_t>& ids) {
    require(table.rank() == 2, "embedding: table must be [V,E]");
    const std::size_t v = table.dim(0), e = table.dim(1);
    for (auto id : ids) require(id < v, "embedding: id out of range");
    const bool track = tracking({&table});
    Tensor out = output({ids.size(), e}, track);
    for (std::size_t r = 0; r < ids.size(); ++r)
        std::copy_n(table.vec().data() + ids[r] * e, e, out.vec().data() + r * e);
    if (track) {
        ImplPtr ti = table.impl(), oi = out.impl();
        Tape::active()->record("embedding", out, [ti, oi, ids, e] {
            if (double* g = sink(ti))
                for (std::size_t r = 0; r < ids.size(); ++r)
                    for (std::size_t j = 0; j < e; ++j) g[ids[r] * e + j] += oi->grad[r * e + j];
        });
    }
    return out;
}

Tensor gather_cols(const Tensor& x, const std::vector<std::size_t>& idx) {
    require(x.rank() == 2 && idx.size() == x.dim(0), "gather_cols: index count must equal rows");
    const std::size_t n = x.dim(1);
    for (auto i : idx) require(i < n, "gather_cols: index out of range");
    const bool track = tracking({&x});
    Tensor out = output({idx.size()}, track);
    for (std::size_t r = 0; r < idx.size(); ++r) out.vec()[r] = x[r * n + idx[r]];
    if (track) {
        ImplPtr xi = x.impl(), oi = out.impl();
        Tape::active()->record("gather_cols", out, [xi, oi, idx, n] {
            if (double* g = sink(xi))
                for (std::size_t r = 0; r < idx.size(); ++r) g[r * n + idx[r]] += oi->grad[r];
        });
    }
    return out;
}

Tensor reshape(const Tensor& x, Shape shape) {
    require(shape_numel(shape) == x.numel(),
            "reshape: " + shape_string(x.shape()) + " to " + shape_string(shape) + " changes element count");
    const bool track = tracking({&x});
    Tensor out(std::move(shape), x.vec(), track);
    if (track) {
        ImplPtr xi = x.impl(), oi = out.impl();
        Tape::active()->record("reshape", out, [xi, oi] {
            if (double* g = sink(xi))
                for (std::size_t i = 0; i < oi->grad.size(); ++i) g[i] += oi->grad[i];
        });
    }
    return out;
}

Tensor conv3d(const Tensor& input, const Tensor& kernel, const Tensor& bias, std::size_t stride,
              std::size_t padding) {
    require(input.rank() == 5 && kernel.rank() == 5 && input.dim(1) == kernel.dim(1),
            "conv3d: input " + shape_string(input.shape()) + " incompatible with kernel " +
                shape_string(kernel.shape()));
    require(stride >= 1, "conv3d: stride must be positive");
    const std::size_t N = input.dim(0), C = input.dim(1), D = input.dim(2), H = input.dim(3), W = input.dim(4);
    const std::size_t Co = kernel.dim(0), kd = kernel.dim(2), kh = kernel.dim(3), kw = kernel.dim(4);
    require(D + 2 * padding >= kd && H + 2 * padding >= kh && W + 2 * padding >= kw,
            "conv3d: kernel larger than padded input");
    const bool has_bias = bias.numel() > 0;
    require(!has_bias || bias.numel() == Co, "conv3d: bias length mismatch");
    const std::size_t Do = (D + 2 * padding - kd) / stride + 1;
    const std::size_t Ho = (H + 2 * padding - kh) / stride + 1;
    const std::size_t Wo = (W + 2 * padding - kw) / stride + 1;
    const bool track = tracking({&input, &kernel, &bias});
    Tensor out = output({N, Co, Do, Ho, Wo}, track);

    struct Geo {
        std::size_t N, C, D, H, W, Co, kd, kh, kw, Do, Ho, Wo, stride, padding;
    };
    const Geo g{N, C, D, H, W, Co, kd, kh, kw, Do, Ho, Wo, stride, padding};

    // Visits every (output, input, kernel) triple inside the padded volume.
    auto for_each = [](const Geo& g, auto&& f) {
        for (std::size_t n = 0; n < g.N; ++n)
            for (std::size_t o = 0; o < g.Co; ++o)
                for (std::size_t z = 0; z < g.Do; ++z)
                    for (std::size_t y = 0; y < g.Ho; ++y)
                        for (std::size_t x = 0; x < g.Wo; ++x) {
                            const std::size_t oidx = (((n * g.Co + o) * g.Do + z) * g.Ho + y) * g.Wo + x;
                            for (std::size_t c = 0; c < g.C; ++c)
                                for (std::size_t a = 0; a < g.kd; ++a) {
                                    const std::ptrdiff_t iz = static_cast<std::ptrdiff_t>(z * g.stride + a) -
                                                              static_cast<std::ptrdiff_t>(g.padding);
                                    if (iz < 0 || iz >= static_cast<std::ptrdiff_t>(g.D)) continue;
                                    for (std::size_t b = 0; b < g.kh; ++b) {
                                        const std::ptrdiff_t iy = static_cast<std::ptrdiff_t>(y * g.stride + b) -
                                                                  static_cast<std::ptrdiff_t>(g.padding);
                                        if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(g.H)) continue;
                                        for (std::size_t d = 0; d < g.kw; ++d) {
                                            const std::ptrdiff_t ix =
                                                static_cast<std::ptrdiff_t>(x * g.stride + d) -
                                                static_cast<std::ptrdiff_t>(g.padding);
                                            if (ix < 0 || ix >= static_cast<std::ptrdiff_t>(g.W)) continue;
                                            const std::size_t iidx =
                                                (((n * g.C + c) * g.D + iz) * g.H + iy) * g.W + ix;
                                            const std::size_t kidx = (((o * g.C + c) * g.kd + a) * g.kh + b) * g.kw + d;
                                            f(oidx, iidx, kidx);
                                        }
                                    }
                                }
                        }
    };

    const double* I = input.vec().data();
    const double* K = kernel.vec().data();
    double* O = out.vec().data();
    if (has_bias) {
        const std::size_t plane = Do * Ho * Wo;
        for (std::size_t n = 0; n < N; ++n)
            for (std::size_t o = 0; o < Co; ++o) std::fill_n(O + (n * Co + o) * plane, plane, bias[o]);
    }
    for_each(g, [&](std::size_t oi, std::size_t ii, std::size_t ki) { O[oi] += I[ii] * K[ki]; });

    if (track) {
        ImplPtr in = input.impl(), ki = kernel.impl(), bi = bias.impl(), oi = out.impl();
        Tape::active()->record("conv3d", out, [in, ki, bi, oi, g, has_bias, for_each] {
            double* gi = sink(in);
            double* gk = sink(ki);
            const double* G = oi->grad.data();
            if (gi || gk) {
                for_each(g, [&](std::size_t o, std::size_t i, std::size_t k) {
                    if (gi) gi[i] += G[o] * ki->data[k];
                    if (gk) gk[k] += G[o] * in->data[i];
                });
            }
            if (has_bias) {
                if (double* gb = sink(bi)) {
                    const std::size_t plane = g.Do * g.Ho * g.Wo;
                    for (std::size_t n = 0; n < g.N; ++n)
                        for (std::size_t o = 0; o < g.Co; ++o)
                            for (std::size_t p = 0; p < plane; ++p) gb[o] += G[(n * g.Co + o) * plane + p];
                }
            }
        });
    }
    return out;
}

Tensor maxpool3d(const Tensor& input, std::size_t k) {
    require(input.rank() == 5 && k >= 1, "maxpool3d: input must be [N,C,D,H,W]");
    const std::size_t N = input.dim(0), C = input.dim(1), D = input.dim(2), H = input.dim(3), W = input.dim(4);
    const std::size_t Do = D / k, Ho = H / k, Wo = W / k;
    require(Do > 0 && Ho > 0 && Wo > 0, "maxpool3d: window larger than input");
    const bool track = tracking({&input});
    Tensor out = output({N, C, Do, Ho, Wo}, track);
    std::vector<std::size_t> argmax(out.numel());
    std::size_t oidx = 0;
    for (std::size_t nc = 0; nc < N * C; ++nc)
        for (std::size_t z = 0; z < Do; ++z)
            for (std::size_t y = 0; y < Ho; ++y)
                for (std::size_t x = 0; x < Wo; ++x, ++oidx) {
                    double best = -std::numeric_limits<double>::infinity();
                    std::size_t where = 0;
                    for (std::size_t a = 0; a < k; ++a)
                        for (std::size_t b = 0; b < k; ++b)
                            for (std::size_t c = 0; c < k; ++c) {
                                const std::size_t i = ((nc * D + z * k + a) * H + y * k + b) * W + x * k + c;
                                if (input[i] > best || (a == 0 && b == 0 && c == 0)) {
                                    best = input[i];
                                    where = i;
                                }
                            }
                    out.vec()[oidx] = best;
                    argmax[oidx] = where;
                }
    if (track) {
        ImplPtr in = input.impl(), oi = out.impl();
        Tape::active()->record("maxpool3d", out, [in, oi, argmax = std::move(argmax)] {
            if (double* g = sink(in))
                for (std::size_t o = 0; o < argmax.size(); ++o) g[argmax[o]] += oi->grad[o];
        });
    }
    return out;
}

LstmState lstm_cell(const Tensor& x, const Tensor& h, const Tensor& c, const Tensor& w, const Tensor& u,
                    const Tensor& b) {
    require(h.rank() == 2 && c.shape() == h.shape(), "lstm_cell: h and c must be [B,H] of equal shape");
    const std::size_t hidden = h.dim(1);
    require(w.rank() == 2 && w.dim(0) == 4 * hidden && u.rank() == 2 && u.dim(0) == 4 * hidden &&
                u.dim(1) == hidden && b.numel() == 4 * hidden && x.rank() == 2 && x.dim(0) == h.dim(0),
            "lstm_cell: weight shapes do not agree with hidden size " + std::to_string(hidden));
    const Tensor gates = add(linear(x, w, b), linear(h, u, Tensor()));
    const Tensor i = sigmoid(slice_cols(gates, 0, hidden));
    const Tensor f = sigmoid(slice_cols(gates, hidden, hidden));
    const Tensor g = tanh(slice_cols(gates, 2 * hidden, hidden));
    const Tensor o = sigmoid(slice_cols(gates, 3 * hidden, hidden));
    Tensor c2 = add(mul(f, c), mul(i, g));
    Tensor h2 = mul(o, tanh(c2));
    return {h2, c2};
}

Tensor truncated_normal_mixture_log_prob(const Tensor& logits, const Tensor& means, const Tensor& stds,
                                         const std::vector<double>& values, const std::vector<double>& low,
                                         const std::vector<double>& high) {
    require(logits.rank() == 2 && means.shape() == logits.shape() && stds.shape() == logits.shape(),
            "mixture: logits, means and stds must share a [B,K] shape");
    const std::size_t rows = logits.dim(0), K = logits.dim(1);
    require(values.size() == rows && low.size() == rows && high.size() == rows,
            "mixture: values and bounds need one entry per row");
    const bool track = tracking({&logits, &means, &stds});
    Tensor out = output({rows}, track);

    // Per-component partials of the log density, kept for backward.
    std::vector<double> resp(rows * K), soft(rows * K), d_mu(rows * K), d_sigma(rows * K);
    std::vector<double> terms(K);
    for (std::size_t r = 0; r < rows; ++r) {
        const double* L = logits.vec().data() + r * K;
        const double lmax = *std::max_element(L, L + K);
        double ls = 0;
        for (std::size_t k = 0; k < K; ++k) ls += std::exp(L[k] - lmax);
        const double lse_logits = lmax + std::log(ls);
        const double v = values[r];
        const bool inside = v >= low[r] && v <= high[r];
        for (std::size_t k = 0; k < K; ++k) {
            const std::size_t j = r * K + k;
            const double mu = means[j], sigma = stds[j];
            const double z = (v - mu) / sigma;
            const double alpha = (low[r] - mu) / sigma, beta = (high[r] - mu) / sigma;
            const double log_z = math::log_normal_mass(alpha, beta);
            soft[j] = std::exp(L[k] - lse_logits);
            terms[k] = inside ? (L[k] - lse_logits) - 0.5 * z * z - std::log(sigma) - math::kLogSqrt2Pi - log_z
                              : -std::numeric_limits<double>::infinity();
            // phi(alpha)/Z and phi(beta)/Z, zero at infinite bounds
            const double ra = std::isinf(alpha) ? 0.0 : std::exp(-0.5 * alpha * alpha - math::kLogSqrt2Pi - log_z);
            const double rb = std::isinf(beta) ? 0.0 : std::exp(-0.5 * beta * beta - math::kLogSqrt2Pi - log_z);
            const double a_ra = std::isinf(alpha) ? 0.0 : alpha * ra;
            const double b_rb = std::isinf(beta) ? 0.0 : beta * rb;
            d_mu[j] = z / sigma - (ra - rb) / sigma;
            d_sigma[j] = (z * z - 1.0) / sigma - (a_ra - b_rb) / sigma;
        }
        const double tmax = *std::max_element(terms.begin(), terms.end());
        if (std::isinf(tmax)) {
            out.vec()[r] = tmax;
            for (std::size_t k = 0; k < K; ++k) resp[r * K + k] = 0.0;
            continue;
        }
        double s = 0;
        for (std::size_t k = 0; k < K; ++k) s += std::exp(terms[k] - tmax);
        const double total = tmax + std::log(s);
        out.vec()[r] = total;
        for (std::size_t k = 0; k < K; ++k) resp[r * K + k] = std::exp(terms[k] - total);
    }

    if (track) {
        ImplPtr li = logits.impl(), mi = means.impl(), si = stds.impl(), oi = out.impl();
        Tape::active()->record(
            "tn_mixture_log_prob", out,
            [li, mi, si, oi, rows, K, resp = std::move(resp), soft = std::move(soft), d_mu = std::move(d_mu),
             d_sigma = std::move(d_sigma)] {
                double* gl = sink(li);
                double* gm = sink(mi);
                double* gs = sink(si);
                for (std::size_t r = 0; r < rows; ++r) {
                    const double g = oi->grad[r];
                    if (g == 0.0 || std::isinf(oi->data[r])) continue;
                    for (std::size_t k = 0; k < K; ++k) {
                        const std::size_t j = r * K + k;
                        if (gl) gl[j] += g * (resp[j] - soft[j]);
                        if (gm) gm[j] += g * resp[j] * d_mu[j];
                        if (gs) gs[j] += g * resp[j] * d_sigma[j];
                    }
                }
            });
    }
    return out;
}

}  // namespace simtrace::nn
