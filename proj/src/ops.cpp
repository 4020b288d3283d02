#include "dmlab/nn/ops.hpp"

#include "dmlab/errors.hpp"

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <memory>

namespace dmlab::nn {

namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstMap = Eigen::Map<const RowMat>;
using MutMap = Eigen::Map<RowMat>;

void require_rank(const Tensor& t, std::size_t r, const char* op) {
    if (!t.defined()) throw InvalidParameter(std::string(op) + ": undefined tensor");
    if (t.rank() != r) {
        throw ShapeMismatch(std::string(op) + ": expected rank " + std::to_string(r) + ", got " +
                            shape_str(t.shape()));
    }
}

// Input gradient slot, or nullptr when that input does not take gradients.
double* grad_of(Node& self, std::size_t k) {
    Node& in = *self.inputs[k];
    if (!in.requires_grad) return nullptr;
    in.ensure_grad();
    return in.grad.data();
}

struct Geometry {
    int n, c, h, w;
};

Geometry nchw(const Tensor& t, const char* op) {
    require_rank(t, 4, op);
    return {t.dim(0), t.dim(1), t.dim(2), t.dim(3)};
}

struct ConvDims {
    int c, h, w, k, stride, pad, ho, wo;
    int kk() const { return c * k * k; }
    int p() const { return ho * wo; }
    bool trivial() const { return k == 1 && stride == 1 && pad == 0; }
};

void im2col(const double* x, const ConvDims& d, double* cols) {
    const int p = d.p();
    for (int c = 0; c < d.c; ++c) {
        for (int ki = 0; ki < d.k; ++ki) {
            for (int kj = 0; kj < d.k; ++kj) {
                double* row = cols + static_cast<std::size_t>((c * d.k + ki) * d.k + kj) * p;
                for (int oy = 0; oy < d.ho; ++oy) {
                    const int iy = oy * d.stride - d.pad + ki;
                    double* dst = row + static_cast<std::size_t>(oy) * d.wo;
                    if (iy < 0 || iy >= d.h) {
                        std::fill(dst, dst + d.wo, 0.0);
                        continue;
                    }
                    const double* src = x + (static_cast<std::size_t>(c) * d.h + iy) * d.w;
                    for (int ox = 0; ox < d.wo; ++ox) {
                        const int ix = ox * d.stride - d.pad + kj;
                        dst[ox] = (ix >= 0 && ix < d.w) ? src[ix] : 0.0;
                    }
                }
            }
        }
    }
}

void col2im_add(const double* cols, const ConvDims& d, double* dx) {
    const int p = d.p();
    for (int c = 0; c < d.c; ++c) {
        for (int ki = 0; ki < d.k; ++ki) {
            for (int kj = 0; kj < d.k; ++kj) {
                const double* row = cols + static_cast<std::size_t>((c * d.k + ki) * d.k + kj) * p;
                for (int oy = 0; oy < d.ho; ++oy) {
                    const int iy = oy * d.stride - d.pad + ki;
                    if (iy < 0 || iy >= d.h) continue;
                    const double* src = row + static_cast<std::size_t>(oy) * d.wo;
                    double* dst = dx + (static_cast<std::size_t>(c) * d.h + iy) * d.w;
                    for (int ox = 0; ox < d.wo; ++ox) {
                        const int ix = ox * d.stride - d.pad + kj;
                        if (ix >= 0 && ix < d.w) dst[ix] += src[ox];
                    }
                }
            }
        }
    }
}

// Index into `b` for every element of `a` under size-1 broadcasting, or empty when shapes match.
std::shared_ptr<std::vector<std::size_t>> broadcast_map(const Shape& a, const Shape& b, const char* op) {
    if (a == b) return nullptr;
    if (a.size() != b.size()) {
        throw ShapeMismatch(std::string(op) + ": cannot broadcast " + shape_str(b) + " to " + shape_str(a));
    }
    for (std::size_t i = 0; i < a.size(); ++i) {
        if (b[i] != a[i] && b[i] != 1) {
            throw ShapeMismatch(std::string(op) + ": cannot broadcast " + shape_str(b) + " to " +
                                shape_str(a));
        }
    }
    const std::size_t r = a.size();
    std::vector<std::size_t> bstride(r, 0);
    std::size_t s = 1;
    for (std::size_t i = r; i-- > 0;) {
        bstride[i] = b[i] == 1 ? 0 : s;
        s *= static_cast<std::size_t>(b[i]);
    }
    auto map = std::make_shared<std::vector<std::size_t>>(numel(a));
    std::vector<int> idx(r, 0);
    std::size_t bi = 0;
    for (std::size_t i = 0; i < map->size(); ++i) {
        (*map)[i] = bi;
        for (std::size_t d = r; d-- > 0;) {
            if (++idx[d] < a[d]) {
                bi += bstride[d];
                break;
            }
            bi -= bstride[d] * static_cast<std::size_t>(a[d] - 1);
            idx[d] = 0;
        }
    }
    return map;
}

enum class BinOp { Add, Sub, Mul };

Tensor binary(const Tensor& a, const Tensor& b, BinOp op, const char* name) {
    if (!a.defined() || !b.defined()) throw InvalidParameter(std::string(name) + ": undefined tensor");
    auto map = broadcast_map(a.shape(), b.shape(), name);
    const auto av = a.values();
    const auto bv = b.values();
    std::vector<double> out(av.size());
    for (std::size_t i = 0; i < out.size(); ++i) {
        const double y = bv[map ? (*map)[i] : i];
        switch (op) {
            case BinOp::Add: out[i] = av[i] + y; break;
            case BinOp::Sub: out[i] = av[i] - y; break;
            case BinOp::Mul: out[i] = av[i] * y; break;
        }
    }
    return make_result(a.shape(), std::move(out), {a, b}, [map, op](Node& self) {
        const auto& g = self.grad;
        const auto& av = self.inputs[0]->value;
        const auto& bv = self.inputs[1]->value;
        if (double* ga = grad_of(self, 0)) {
            for (std::size_t i = 0; i < g.size(); ++i)
                ga[i] += op == BinOp::Mul ? g[i] * bv[map ? (*map)[i] : i] : g[i];
        }
        if (double* gb = grad_of(self, 1)) {
            for (std::size_t i = 0; i < g.size(); ++i) {
                const std::size_t j = map ? (*map)[i] : i;
                gb[j] += op == BinOp::Add ? g[i] : op == BinOp::Sub ? -g[i] : g[i] * av[i];
            }
        }
    });
}

}  // namespace

Tensor conv2d(const Tensor& x, const Tensor& weight, const Tensor& bias, int stride, int pad) {
    const auto g = nchw(x, "conv2d");
    require_rank(weight, 4, "conv2d weight");
    if (stride < 1 || pad < 0) throw InvalidParameter("conv2d: stride must be >= 1 and pad >= 0");
    const int f = weight.dim(0);
    const int k = weight.dim(2);
    if (weight.dim(1) != g.c || weight.dim(3) != k) {
        throw ShapeMismatch("conv2d: weight " + shape_str(weight.shape()) + " incompatible with input " +
                            shape_str(x.shape()));
    }
    if (!bias.defined() || bias.numel() != static_cast<std::size_t>(f)) {
        throw ShapeMismatch("conv2d: bias must have one entry per filter");
    }
    ConvDims d{g.c, g.h, g.w, k, stride, pad, 0, 0};
    d.ho = (g.h + 2 * pad - k) / stride + 1;
    d.wo = (g.w + 2 * pad - k) / stride + 1;
    if (g.h + 2 * pad < k || g.w + 2 * pad < k) throw ShapeMismatch("conv2d: kernel larger than padded input");

    const std::size_t kk = static_cast<std::size_t>(d.kk());
    const std::size_t p = static_cast<std::size_t>(d.p());
    const std::size_t in_stride = static_cast<std::size_t>(g.c) * g.h * g.w;
    std::vector<double> out(static_cast<std::size_t>(g.n) * f * p);
    std::vector<double> cols(d.trivial() ? 0 : kk * p);
    const ConstMap wm(weight.values().data(), f, static_cast<Eigen::Index>(kk));
    const auto bv = bias.values();
    for (int n = 0; n < g.n; ++n) {
        const double* xn = x.values().data() + n * in_stride;
        const double* cp = xn;
        if (!d.trivial()) {
            im2col(xn, d, cols.data());
            cp = cols.data();
        }
        MutMap on(out.data() + static_cast<std::size_t>(n) * f * p, f, static_cast<Eigen::Index>(p));
        on.noalias() = wm * ConstMap(cp, static_cast<Eigen::Index>(kk), static_cast<Eigen::Index>(p));
        for (int fi = 0; fi < f; ++fi) on.row(fi).array() += bv[static_cast<std::size_t>(fi)];
    }

    // Columns are rebuilt in backward rather than kept, trading time for memory.
    return make_result({g.n, f, d.ho, d.wo}, std::move(out), {x, weight, bias},
                       [d, g, f, kk, p, in_stride](Node& self) {
        const auto& xv = self.inputs[0]->value;
        const auto& wv = self.inputs[1]->value;
        double* gx = grad_of(self, 0);
        double* gw = grad_of(self, 1);
        double* gb = grad_of(self, 2);
        const ConstMap wm(wv.data(), f, static_cast<Eigen::Index>(kk));
        std::vector<double> cols(d.trivial() || !gw ? 0 : kk * p);
        std::vector<double> dcols(gx && !d.trivial() ? kk * p : 0);
        for (int n = 0; n < g.n; ++n) {
            const ConstMap go(self.grad.data() + static_cast<std::size_t>(n) * f * p, f,
                              static_cast<Eigen::Index>(p));
            const double* xn = xv.data() + n * in_stride;
            if (gw) {
                const double* cp = xn;
                if (!d.trivial()) {
                    im2col(xn, d, cols.data());
                    cp = cols.data();
                }
                MutMap(gw, f, static_cast<Eigen::Index>(kk)).noalias() +=
                    go * ConstMap(cp, static_cast<Eigen::Index>(kk), static_cast<Eigen::Index>(p)).transpose();
            }
            if (gb) {
                for (int fi = 0; fi < f; ++fi) gb[fi] += go.row(fi).sum();
            }
            if (gx) {
                double* gxn = gx + n * in_stride;
                if (d.trivial()) {
                    MutMap(gxn, static_cast<Eigen::Index>(kk), static_cast<Eigen::Index>(p)).noalias() +=
                        wm.transpose() * go;
                } else {
                    MutMap(dcols.data(), static_cast<Eigen::Index>(kk), static_cast<Eigen::Index>(p)).noalias() =
                        wm.transpose() * go;
                    col2im_add(dcols.data(), d, gxn);
                }
            }
        }
    });
}

Tensor linear(const Tensor& x, const Tensor& weight, const Tensor& bias) {
    require_rank(x, 2, "linear");
    require_rank(weight, 2, "linear weight");
    const int n = x.dim(0);
    const int in = x.dim(1);
    const int out_f = weight.dim(0);
    if (weight.dim(1) != in) {
        throw ShapeMismatch("linear: weight " + shape_str(weight.shape()) + " incompatible with input " +
                            shape_str(x.shape()));
    }
    if (!bias.defined() || bias.numel() != static_cast<std::size_t>(out_f)) {
        throw ShapeMismatch("linear: bias must have one entry per output");
    }
    std::vector<double> out(static_cast<std::size_t>(n) * out_f);
    MutMap om(out.data(), n, out_f);
    om.noalias() = ConstMap(x.values().data(), n, in) * ConstMap(weight.values().data(), out_f, in).transpose();
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < out_f; ++j) om(i, j) += bias.values()[static_cast<std::size_t>(j)];
    return make_result({n, out_f}, std::move(out), {x, weight, bias}, [n, in, out_f](Node& self) {
        const ConstMap go(self.grad.data(), n, out_f);
        const ConstMap xm(self.inputs[0]->value.data(), n, in);
        const ConstMap wm(self.inputs[1]->value.data(), out_f, in);
        if (double* gx = grad_of(self, 0)) MutMap(gx, n, in).noalias() += go * wm;
        if (double* gw = grad_of(self, 1)) MutMap(gw, out_f, in).noalias() += go.transpose() * xm;
        if (double* gb = grad_of(self, 2)) {
            for (int j = 0; j < out_f; ++j) gb[j] += go.col(j).sum();
        }
    });
}

Tensor relu(const Tensor& x) {
    const auto xv = x.values();
    std::vector<double> out(xv.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = xv[i] > 0.0 ? xv[i] : 0.0;
    return make_result(x.shape(), std::move(out), {x}, [](Node& self) {
        const auto& xv = self.inputs[0]->value;
        if (double* gx = grad_of(self, 0)) {
            for (std::size_t i = 0; i < xv.size(); ++i)
                if (xv[i] > 0.0) gx[i] += self.grad[i];
        }
    });
}

Tensor sigmoid(const Tensor& x) {
    const auto xv = x.values();
    std::vector<double> out(xv.size());
    for (std::size_t i = 0; i < out.size(); ++i) {
        // Split by sign so exp never overflows.
        const double v = xv[i];
        out[i] = v >= 0.0 ? 1.0 / (1.0 + std::exp(-v)) : std::exp(v) / (1.0 + std::exp(v));
    }
    return make_result(x.shape(), std::move(out), {x}, [](Node& self) {
        if (double* gx = grad_of(self, 0)) {
            for (std::size_t i = 0; i < self.value.size(); ++i) {
                const double s = self.value[i];
                gx[i] += self.grad[i] * s * (1.0 - s);
            }
        }
    });
}

Tensor avgpool2d(const Tensor& x, int k) {
    const auto g = nchw(x, "avgpool2d");
    if (k < 1 || g.h < k || g.w < k) throw InvalidParameter("avgpool2d: window must fit the input");
    const int ho = g.h / k;
    const int wo = g.w / k;
    const double inv = 1.0 / (k * k);
    const auto xv = x.values();
    std::vector<double> out(static_cast<std::size_t>(g.n) * g.c * ho * wo, 0.0);
    for (int nc = 0; nc < g.n * g.c; ++nc)
        for (int oy = 0; oy < ho; ++oy)
            for (int ox = 0; ox < wo; ++ox) {
                double s = 0.0;
                for (int i = 0; i < k; ++i)
                    for (int j = 0; j < k; ++j)
                        s += xv[(static_cast<std::size_t>(nc) * g.h + oy * k + i) * g.w + ox * k + j];
                out[(static_cast<std::size_t>(nc) * ho + oy) * wo + ox] = s * inv;
            }
    return make_result({g.n, g.c, ho, wo}, std::move(out), {x}, [g, k, ho, wo, inv](Node& self) {
        double* gx = grad_of(self, 0);
        if (!gx) return;
        for (int nc = 0; nc < g.n * g.c; ++nc)
            for (int oy = 0; oy < ho; ++oy)
                for (int ox = 0; ox < wo; ++ox) {
                    const double v = self.grad[(static_cast<std::size_t>(nc) * ho + oy) * wo + ox] * inv;
                    for (int i = 0; i < k; ++i)
                        for (int j = 0; j < k; ++j)
                            gx[(static_cast<std::size_t>(nc) * g.h + oy * k + i) * g.w + ox * k + j] += v;
                }
    });
}

Tensor maxpool2d(const Tensor& x, int k) {
    const auto g = nchw(x, "maxpool2d");
    if (k < 1 || g.h < k || g.w < k) throw InvalidParameter("maxpool2d: window must fit the input");
    const int ho = g.h / k;
    const int wo = g.w / k;
    const auto xv = x.values();
    const std::size_t total = static_cast<std::size_t>(g.n) * g.c * ho * wo;
    std::vector<double> out(total);
    auto arg = std::make_shared<std::vector<std::size_t>>(total);
    for (int nc = 0; nc < g.n * g.c; ++nc)
        for (int oy = 0; oy < ho; ++oy)
            for (int ox = 0; ox < wo; ++ox) {
                std::size_t best = (static_cast<std::size_t>(nc) * g.h + oy * k) * g.w + ox * k;
                for (int i = 0; i < k; ++i)
                    for (int j = 0; j < k; ++j) {
                        const std::size_t idx = (static_cast<std::size_t>(nc) * g.h + oy * k + i) * g.w + ox * k + j;
                        if (xv[idx] > xv[best]) best = idx;
                    }
                const std::size_t o = (static_cast<std::size_t>(nc) * ho + oy) * wo + ox;
                out[o] = xv[best];
                (*arg)[o] = best;
            }
    return make_result({g.n, g.c, ho, wo}, std::move(out), {x}, [arg](Node& self) {
        if (double* gx = grad_of(self, 0)) {
            for (std::size_t o = 0; o < arg->size(); ++o) gx[(*arg)[o]] += self.grad[o];
        }
    });
}

Tensor upsample_nearest(const Tensor& x, int factor) {
    const auto g = nchw(x, "upsample_nearest");
    if (factor < 1) throw InvalidParameter("upsample_nearest: factor must be >= 1");
    const int ho = g.h * factor;
    const int wo = g.w * factor;
    const auto xv = x.values();
    std::vector<double> out(static_cast<std::size_t>(g.n) * g.c * ho * wo);
    for (int nc = 0; nc < g.n * g.c; ++nc)
        for (int y = 0; y < ho; ++y)
            for (int xo = 0; xo < wo; ++xo)
                out[(static_cast<std::size_t>(nc) * ho + y) * wo + xo] =
                    xv[(static_cast<std::size_t>(nc) * g.h + y / factor) * g.w + xo / factor];
    return make_result({g.n, g.c, ho, wo}, std::move(out), {x}, [g, factor, ho, wo](Node& self) {
        double* gx = grad_of(self, 0);
        if (!gx) return;
        for (int nc = 0; nc < g.n * g.c; ++nc)
            for (int y = 0; y < ho; ++y)
                for (int xo = 0; xo < wo; ++xo)
                    gx[(static_cast<std::size_t>(nc) * g.h + y / factor) * g.w + xo / factor] +=
                        self.grad[(static_cast<std::size_t>(nc) * ho + y) * wo + xo];
    });
}

Tensor add(const Tensor& a, const Tensor& b) { return binary(a, b, BinOp::Add, "add"); }
Tensor sub(const Tensor& a, const Tensor& b) { return binary(a, b, BinOp::Sub, "sub"); }
Tensor mul(const Tensor& a, const Tensor& b) { return binary(a, b, BinOp::Mul, "mul"); }

Tensor scale(const Tensor& x, double s) {
    const auto xv = x.values();
    std::vector<double> out(xv.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = s * xv[i];
    return make_result(x.shape(), std::move(out), {x}, [s](Node& self) {
        if (double* gx = grad_of(self, 0)) {
            for (std::size_t i = 0; i < self.grad.size(); ++i) gx[i] += s * self.grad[i];
        }
    });
}

Tensor concat_channels(const std::vector<Tensor>& xs) {
    if (xs.empty()) throw InvalidParameter("concat_channels: no inputs");
    const auto g0 = nchw(xs[0], "concat_channels");
    int total_c = 0;
    std::vector<int> chans;
    for (const auto& t : xs) {
        const auto g = nchw(t, "concat_channels");
        if (g.n != g0.n || g.h != g0.h || g.w != g0.w) {
            throw ShapeMismatch("concat_channels: " + shape_str(t.shape()) + " does not match " +
                                shape_str(xs[0].shape()));
        }
        chans.push_back(g.c);
        total_c += g.c;
    }
    const std::size_t plane = static_cast<std::size_t>(g0.h) * g0.w;
    std::vector<double> out(static_cast<std::size_t>(g0.n) * total_c * plane);
    for (int n = 0; n < g0.n; ++n) {
        std::size_t off = static_cast<std::size_t>(n) * total_c * plane;
        for (std::size_t t = 0; t < xs.size(); ++t) {
            const std::size_t len = static_cast<std::size_t>(chans[t]) * plane;
            const double* src = xs[t].values().data() + n * len;
            std::copy(src, src + len, out.begin() + static_cast<std::ptrdiff_t>(off));
            off += len;
        }
    }
    return make_result({g0.n, total_c, g0.h, g0.w}, std::move(out), xs, [chans, total_c, plane, n = g0.n](Node& self) {
        for (int b = 0; b < n; ++b) {
            std::size_t off = static_cast<std::size_t>(b) * total_c * plane;
            for (std::size_t t = 0; t < chans.size(); ++t) {
                const std::size_t len = static_cast<std::size_t>(chans[t]) * plane;
                if (double* gx = grad_of(self, t)) {
                    for (std::size_t i = 0; i < len; ++i) gx[b * len + i] += self.grad[off + i];
                }
                off += len;
            }
        }
    });
}

Tensor reshape(const Tensor& x, Shape shape) {
    if (numel(shape) != x.numel()) {
        throw ShapeMismatch("reshape: " + shape_str(x.shape()) + " to " + shape_str(shape));
    }
    std::vector<double> out(x.values().begin(), x.values().end());
    return make_result(std::move(shape), std::move(out), {x}, [](Node& self) {
        if (double* gx = grad_of(self, 0)) {
            for (std::size_t i = 0; i < self.grad.size(); ++i) gx[i] += self.grad[i];
        }
    });
}

Tensor sum(const Tensor& x) {
    double s = 0.0;
    for (double v : x.values()) s += v;
    return make_result({1}, {s}, {x}, [](Node& self) {
        if (double* gx = grad_of(self, 0)) {
            const std::size_t n = self.inputs[0]->value.size();
            for (std::size_t i = 0; i < n; ++i) gx[i] += self.grad[0];
        }
    });
}

Tensor mean(const Tensor& x) {
    if (x.numel() == 0) throw InvalidParameter("mean of empty tensor");
    return scale(sum(x), 1.0 / static_cast<double>(x.numel()));
}

Tensor mse(const Tensor& a, const Tensor& b) {
    if (a.shape() != b.shape()) {
        throw ShapeMismatch("mse: " + shape_str(a.shape()) + " vs " + shape_str(b.shape()));
    }
    if (a.numel() == 0) throw InvalidParameter("mse of empty tensors");
    const auto av = a.values();
    const auto bv = b.values();
    double s = 0.0;
    for (std::size_t i = 0; i < av.size(); ++i) s += (av[i] - bv[i]) * (av[i] - bv[i]);
    const double inv = 1.0 / static_cast<double>(av.size());
    return make_result({1}, {s * inv}, {a, b}, [inv](Node& self) {
        const auto& av = self.inputs[0]->value;
        const auto& bv = self.inputs[1]->value;
        const double g = 2.0 * inv * self.grad[0];
        double* ga = grad_of(self, 0);
        double* gb = grad_of(self, 1);
        for (std::size_t i = 0; i < av.size(); ++i) {
            const double d = g * (av[i] - bv[i]);
            if (ga) ga[i] += d;
            if (gb) gb[i] -= d;
        }
    });
}

Tensor global_avg_pool(const Tensor& x) {
    const auto g = nchw(x, "global_avg_pool");
    const std::size_t plane = static_cast<std::size_t>(g.h) * g.w;
    const auto xv = x.values();
    std::vector<double> out(static_cast<std::size_t>(g.n) * g.c);
    for (std::size_t nc = 0; nc < out.size(); ++nc) {
        double s = 0.0;
        for (std::size_t i = 0; i < plane; ++i) s += xv[nc * plane + i];
        out[nc] = s / static_cast<double>(plane);
    }
    return make_result({g.n, g.c, 1, 1}, std::move(out), {x}, [plane](Node& self) {
        if (double* gx = grad_of(self, 0)) {
            for (std::size_t nc = 0; nc < self.grad.size(); ++nc) {
                const double v = self.grad[nc] / static_cast<double>(plane);
                for (std::size_t i = 0; i < plane; ++i) gx[nc * plane + i] += v;
            }
        }
    });
}

Tensor channel_mean(const Tensor& x) {
    const auto g = nchw(x, "channel_mean");
    const std::size_t plane = static_cast<std::size_t>(g.h) * g.w;
    const auto xv = x.values();
    std::vector<double> out(static_cast<std::size_t>(g.n) * plane, 0.0);
    for (int n = 0; n < g.n; ++n)
        for (int c = 0; c < g.c; ++c)
            for (std::size_t i = 0; i < plane; ++i)
                out[n * plane + i] += xv[(static_cast<std::size_t>(n) * g.c + c) * plane + i] / g.c;
    return make_result({g.n, 1, g.h, g.w}, std::move(out), {x}, [g, plane](Node& self) {
        double* gx = grad_of(self, 0);
        if (!gx) return;
        for (int n = 0; n < g.n; ++n)
            for (int c = 0; c < g.c; ++c)
                for (std::size_t i = 0; i < plane; ++i)
                    gx[(static_cast<std::size_t>(n) * g.c + c) * plane + i] += self.grad[n * plane + i] / g.c;
    });
}

Tensor channel_max(const Tensor& x) {
    const auto g = nchw(x, "channel_max");
    const std::size_t plane = static_cast<std::size_t>(g.h) * g.w;
    const auto xv = x.values();
    std::vector<double> out(static_cast<std::size_t>(g.n) * plane);
    auto arg = std::make_shared<std::vector<std::size_t>>(out.size());
    for (int n = 0; n < g.n; ++n)
        for (std::size_t i = 0; i < plane; ++i) {
            std::size_t best = static_cast<std::size_t>(n) * g.c * plane + i;
            for (int c = 1; c < g.c; ++c) {
                const std::size_t idx = (static_cast<std::size_t>(n) * g.c + c) * plane + i;
                if (xv[idx] > xv[best]) best = idx;
            }
            out[n * plane + i] = xv[best];
            (*arg)[n * plane + i] = best;
        }
    return make_result({g.n, 1, g.h, g.w}, std::move(out), {x}, [arg](Node& self) {
        if (double* gx = grad_of(self, 0)) {
            for (std::size_t o = 0; o < arg->size(); ++o) gx[(*arg)[o]] += self.grad[o];
        }
    });
}

Tensor channel_attention(const Tensor& x, const Tensor& w1, const Tensor& b1, const Tensor& w2,
                         const Tensor& b2, int reduction) {
    const auto g = nchw(x, "channel_attention");
    if (reduction < 1 || g.c < reduction) {
        throw InvalidParameter("channel_attention: needs at least " + std::to_string(reduction) +
                               " channels, got " + std::to_string(g.c));
    }
    require_rank(w1, 2, "channel_attention squeeze weight");
    if (w1.dim(0) != g.c / reduction) {
        throw ShapeMismatch("channel_attention: bottleneck width must be channels / reduction");
    }
    auto z = reshape(global_avg_pool(x), {g.n, g.c});
    z = relu(linear(z, w1, b1));
    z = sigmoid(linear(z, w2, b2));
    if (z.dim(1) != g.c) throw ShapeMismatch("channel_attention: output width must equal channel count");
    return mul(x, reshape(z, {g.n, g.c, 1, 1}));
}

Tensor spatial_attention(const Tensor& x, const Tensor& weight, const Tensor& bias) {
    nchw(x, "spatial_attention");
    require_rank(weight, 4, "spatial_attention weight");
    if (weight.dim(0) != 1 || weight.dim(1) != 2 || weight.dim(2) % 2 == 0) {
        throw ShapeMismatch("spatial_attention: weight must be [1, 2, k, k] with odd k");
    }
    auto s = concat_channels({channel_mean(x), channel_max(x)});
    s = sigmoid(conv2d(s, weight, bias, 1, weight.dim(2) / 2));
    return mul(x, s);
}

}  // namespace dmlab::nn
