// Copyright Contributors to the a1o project
// SPDX-License-Identifier: Apache-2.0

#include "a1o/ops.hpp"

#include "autodiff_internal.hpp"

#include <algorithm>
#include <cmath>

namespace a1o::ops {

namespace {

[[noreturn]] void dim_error(const std::string& op, const Shape& a, const Shape& b)
{
    throw DimensionError(op + ": incompatible shapes " + shape_to_string(a) + " and " + shape_to_string(b));
}

struct ConvGeometry {
    std::size_t batch, in_c, in_h, in_w, out_c, kh, kw, out_h, out_w;
    long stride, pad;
};

ConvGeometry conv_geometry(const Shape& x, const Shape& k, long stride, long pad)
{
    if (x.size() != 4 || k.size() != 4 || x[1] != k[1]) dim_error("conv2d", x, k);
    if (stride <= 0 || pad < 0) throw DimensionError("conv2d: stride must be positive and pad non-negative");
    const long ph = static_cast<long>(x[2]) + 2 * pad;
    const long pw = static_cast<long>(x[3]) + 2 * pad;
    if (ph < static_cast<long>(k[2]) || pw < static_cast<long>(k[3])) dim_error("conv2d: kernel larger than padded input", x, k);
    return {x[0],
            x[1],
            x[2],
            x[3],
            k[0],
            k[2],
            k[3],
            static_cast<std::size_t>((ph - static_cast<long>(k[2])) / stride + 1),
            static_cast<std::size_t>((pw - static_cast<long>(k[3])) / stride + 1),
            stride,
            pad};
}

// Range of output columns whose input column ox*stride + kx - pad is valid.
inline void valid_range(long offset, long stride, long in_extent, long out_extent, long& lo, long& hi)
{
    // need 0 <= o*stride + offset < in_extent
    lo = offset >= 0 ? 0 : (-offset + stride - 1) / stride;
    const long last = in_extent - 1 - offset;
    hi = last < 0 ? -1 : std::min(out_extent - 1, last / stride);
}

Tensor conv_forward(const Tensor& x, const Tensor& k, const Tensor* bias, const ConvGeometry& c)
{
    Tensor y(Shape{c.batch, c.out_c, c.out_h, c.out_w});
    auto out = y.mutable_data();
    const double* in = x.data().data();
    const double* ker = k.data().data();
    const std::size_t in_plane = c.in_h * c.in_w;
    const std::size_t out_plane = c.out_h * c.out_w;
    for (std::size_t b = 0; b < c.batch; ++b) {
        for (std::size_t o = 0; o < c.out_c; ++o) {
            double* op = out.data() + (b * c.out_c + o) * out_plane;
            if (bias) std::fill(op, op + out_plane, (*bias)[o]);
            for (std::size_t ci = 0; ci < c.in_c; ++ci) {
                const double* ip = in + (b * c.in_c + ci) * in_plane;
                for (std::size_t ky = 0; ky < c.kh; ++ky) {
                    long ylo, yhi;
                    valid_range(static_cast<long>(ky) - c.pad, c.stride, static_cast<long>(c.in_h),
                                static_cast<long>(c.out_h), ylo, yhi);
                    for (std::size_t kx = 0; kx < c.kw; ++kx) {
                        const double w = ker[((o * c.in_c + ci) * c.kh + ky) * c.kw + kx];
                        long xlo, xhi;
                        valid_range(static_cast<long>(kx) - c.pad, c.stride, static_cast<long>(c.in_w),
                                    static_cast<long>(c.out_w), xlo, xhi);
                        for (long oy = ylo; oy <= yhi; ++oy) {
                            const long iy = oy * c.stride + static_cast<long>(ky) - c.pad;
                            const double* irow = ip + iy * static_cast<long>(c.in_w) + static_cast<long>(kx) - c.pad;
                            double* orow = op + oy * static_cast<long>(c.out_w);
                            if (c.stride == 1) {
                                for (long ox = xlo; ox <= xhi; ++ox) orow[ox] += w * irow[ox];
                            } else {
                                for (long ox = xlo; ox <= xhi; ++ox) orow[ox] += w * irow[ox * c.stride];
                            }
                        }
                    }
                }
            }
        }
    }
    return y;
}

void conv_backward(const Tensor& x, const Tensor& k, const ConvGeometry& c, const std::vector<double>& gout,
                   std::vector<double>* gx, std::vector<double>* gk, std::vector<double>* gb)
{
    const double* in = x.data().data();
    const double* ker = k.data().data();
    const std::size_t in_plane = c.in_h * c.in_w;
    const std::size_t out_plane = c.out_h * c.out_w;
    for (std::size_t b = 0; b < c.batch; ++b) {
        for (std::size_t o = 0; o < c.out_c; ++o) {
            const double* gp = gout.data() + (b * c.out_c + o) * out_plane;
            if (gb) {
                double s = 0.0;
                for (std::size_t i = 0; i < out_plane; ++i) s += gp[i];
                (*gb)[o] += s;
            }
            for (std::size_t ci = 0; ci < c.in_c; ++ci) {
                const double* ip = in + (b * c.in_c + ci) * in_plane;
                double* gip = gx ? gx->data() + (b * c.in_c + ci) * in_plane : nullptr;
                for (std::size_t ky = 0; ky < c.kh; ++ky) {
                    long ylo, yhi;
                    valid_range(static_cast<long>(ky) - c.pad, c.stride, static_cast<long>(c.in_h),
                                static_cast<long>(c.out_h), ylo, yhi);
                    for (std::size_t kx = 0; kx < c.kw; ++kx) {
                        const std::size_t widx = ((o * c.in_c + ci) * c.kh + ky) * c.kw + kx;
                        const double w = ker[widx];
                        long xlo, xhi;
                        valid_range(static_cast<long>(kx) - c.pad, c.stride, static_cast<long>(c.in_w),
                                    static_cast<long>(c.out_w), xlo, xhi);
                        double acc = 0.0;
                        for (long oy = ylo; oy <= yhi; ++oy) {
                            const long ioff = (oy * c.stride + static_cast<long>(ky) - c.pad) * static_cast<long>(c.in_w) +
                                              static_cast<long>(kx) - c.pad;
                            const double* irow = ip + ioff;
                            const double* grow = gp + oy * static_cast<long>(c.out_w);
                            if (c.stride == 1) {
                                for (long ox = xlo; ox <= xhi; ++ox) acc += grow[ox] * irow[ox];
                                if (gip) {
                                    double* girow = gip + ioff;
                                    for (long ox = xlo; ox <= xhi; ++ox) girow[ox] += w * grow[ox];
                                }
                            } else {
                                for (long ox = xlo; ox <= xhi; ++ox) acc += grow[ox] * irow[ox * c.stride];
                                if (gip) {
                                    double* girow = gip + ioff;
                                    for (long ox = xlo; ox <= xhi; ++ox) girow[ox * c.stride] += w * grow[ox];
                                }
                            }
                        }
                        if (gk) (*gk)[widx] += acc;
                    }
                }
            }
        }
    }
}

struct AxisSplit {
    std::size_t outer, extent, inner;
};

AxisSplit split_axis(const Shape& s, std::size_t axis)
{
    AxisSplit r{1, s[axis], 1};
    for (std::size_t i = 0; i < axis; ++i) r.outer *= s[i];
    for (std::size_t i = axis + 1; i < s.size(); ++i) r.inner *= s[i];
    return r;
}

double stable_sigmoid(double z)
{
    if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
    const double e = std::exp(z);
    return e / (1.0 + e);
}

}  // namespace

NodeId fully_connected(Graph& g, NodeId x, NodeId w, NodeId b)
{
    const Tensor& xv = g.value(x);
    const Tensor& wv = g.value(w);
    const Tensor& bv = g.value(b);
    if (xv.rank() != 2 || wv.rank() != 2 || xv.extent(1) != wv.extent(1)) dim_error("fully_connected", xv.shape(), wv.shape());
    if (bv.rank() != 1 || bv.extent(0) != wv.extent(0)) dim_error("fully_connected bias", bv.shape(), wv.shape());
    const std::size_t batch = xv.extent(0), in = xv.extent(1), out = wv.extent(0);
    Tensor y(Shape{batch, out});
    for (std::size_t i = 0; i < batch; ++i) {
        const double* xr = xv.data().data() + i * in;
        for (std::size_t j = 0; j < out; ++j) {
            const double* wr = wv.data().data() + j * in;
            double s = bv[j];
            for (std::size_t k = 0; k < in; ++k) s += xr[k] * wr[k];
            y[i * out + j] = s;
        }
    }
    Node n;
    n.op = OpKind::FullyConnected;
    n.inputs = {x, w, b};
    n.value = std::move(y);
    return g.record(std::move(n));
}

NodeId conv2d(Graph& g, NodeId x, NodeId k, int stride, int pad)
{
    const auto geom = conv_geometry(g.value(x).shape(), g.value(k).shape(), stride, pad);
    Node n;
    n.op = OpKind::Conv2d;
    n.inputs = {x, k};
    n.attr = {stride, pad, 0, 0};
    n.value = conv_forward(g.value(x), g.value(k), nullptr, geom);
    return g.record(std::move(n));
}

NodeId conv2d(Graph& g, NodeId x, NodeId k, NodeId b, int stride, int pad)
{
    const auto geom = conv_geometry(g.value(x).shape(), g.value(k).shape(), stride, pad);
    const Tensor& bv = g.value(b);
    if (bv.rank() != 1 || bv.extent(0) != geom.out_c) dim_error("conv2d bias", bv.shape(), g.value(k).shape());
    Node n;
    n.op = OpKind::Conv2d;
    n.inputs = {x, k, b};
    n.attr = {stride, pad, 0, 0};
    n.value = conv_forward(g.value(x), g.value(k), &bv, geom);
    return g.record(std::move(n));
}

NodeId maxpool2d(Graph& g, NodeId x, int window, int stride)
{
    const Tensor& xv = g.value(x);
    if (xv.rank() != 4) throw DimensionError("maxpool2d: expected rank-4 input, got " + shape_to_string(xv.shape()));
    if (window <= 0 || stride <= 0) throw DimensionError("maxpool2d: window and stride must be positive");
    const auto w = static_cast<std::size_t>(window);
    const auto s = static_cast<std::size_t>(stride);
    const std::size_t B = xv.extent(0), C = xv.extent(1), H = xv.extent(2), W = xv.extent(3);
    if (w > H || w > W)
        throw DimensionError("maxpool2d: window " + std::to_string(window) + " exceeds input " + shape_to_string(xv.shape()));
    const std::size_t OH = (H - w) / s + 1, OW = (W - w) / s + 1;
    Tensor y(Shape{B, C, OH, OW});
    std::vector<std::size_t> argmax(y.size());
    for (std::size_t p = 0; p < B * C; ++p) {
        const double* ip = xv.data().data() + p * H * W;
        for (std::size_t oy = 0; oy < OH; ++oy) {
            for (std::size_t ox = 0; ox < OW; ++ox) {
                std::size_t best = (oy * s) * W + ox * s;
                for (std::size_t dy = 0; dy < w; ++dy)
                    for (std::size_t dx = 0; dx < w; ++dx) {
                        const std::size_t idx = (oy * s + dy) * W + ox * s + dx;
                        if (ip[idx] > ip[best]) best = idx;
                    }
                const std::size_t o = (p * OH + oy) * OW + ox;
                y[o] = ip[best];
                argmax[o] = p * H * W + best;
            }
        }
    }
    Node n;
    n.op = OpKind::MaxPool2d;
    n.inputs = {x};
    n.attr = {window, stride, 0, 0};
    n.index = std::move(argmax);
    n.value = std::move(y);
    return g.record(std::move(n));
}

NodeId prelu(Graph& g, NodeId x, NodeId a)
{
    const Tensor& xv = g.value(x);
    const Tensor& av = g.value(a);
    if (xv.rank() < 2 || av.rank() != 1 || av.extent(0) != xv.extent(1)) dim_error("prelu", xv.shape(), av.shape());
    const auto split = split_axis(xv.shape(), 1);
    Tensor y(xv.shape());
    for (std::size_t o = 0; o < split.outer; ++o)
        for (std::size_t c = 0; c < split.extent; ++c)
            for (std::size_t i = 0; i < split.inner; ++i) {
                const std::size_t idx = (o * split.extent + c) * split.inner + i;
                const double v = xv[idx];
                y[idx] = v >= 0.0 ? v : av[c] * v;
            }
    Node n;
    n.op = OpKind::PRelu;
    n.inputs = {x, a};
    n.value = std::move(y);
    return g.record(std::move(n));
}

NodeId softmax(Graph& g, NodeId x)
{
    const Tensor& xv = g.value(x);
    if (xv.rank() != 2) throw DimensionError("softmax: expected [batch, classes], got " + shape_to_string(xv.shape()));
    const std::size_t B = xv.extent(0), C = xv.extent(1);
    Tensor y(xv.shape());
    for (std::size_t i = 0; i < B; ++i) {
        const double* r = xv.data().data() + i * C;
        const double m = *std::max_element(r, r + C);
        double z = 0.0;
        for (std::size_t j = 0; j < C; ++j) z += std::exp(r[j] - m);
        for (std::size_t j = 0; j < C; ++j) y[i * C + j] = std::exp(r[j] - m) / z;
    }
    Node n;
    n.op = OpKind::Softmax;
    n.inputs = {x};
    n.value = std::move(y);
    return g.record(std::move(n));
}

NodeId sigmoid(Graph& g, NodeId x)
{
    const Tensor& xv = g.value(x);
    Tensor y(xv.shape());
    for (std::size_t i = 0; i < xv.size(); ++i) y[i] = stable_sigmoid(xv[i]);
    Node n;
    n.op = OpKind::Sigmoid;
    n.inputs = {x};
    n.value = std::move(y);
    return g.record(std::move(n));
}

NodeId concat(Graph& g, std::span<const NodeId> xs, int axis)
{
    if (xs.empty()) throw DimensionError("concat: no inputs");
    const Shape& first = g.value(xs[0]).shape();
    if (axis < 0 || static_cast<std::size_t>(axis) >= first.size())
        throw DimensionError("concat: axis " + std::to_string(axis) + " out of range for " + shape_to_string(first));
    const auto ax = static_cast<std::size_t>(axis);
    Shape out = first;
    out[ax] = 0;
    for (auto id : xs) {
        const Shape& s = g.value(id).shape();
        if (s.size() != first.size()) dim_error("concat", first, s);
        for (std::size_t i = 0; i < s.size(); ++i)
            if (i != ax && s[i] != first[i]) dim_error("concat", first, s);
        out[ax] += s[ax];
    }
    Tensor y(out);
    const auto outer = split_axis(out, ax).outer;
    const auto inner = split_axis(out, ax).inner;
    std::size_t offset = 0;
    for (auto id : xs) {
        const Tensor& v = g.value(id);
        const std::size_t e = v.extent(ax);
        for (std::size_t o = 0; o < outer; ++o)
            std::copy_n(v.data().data() + o * e * inner, e * inner, y.mutable_data().data() + (o * out[ax] + offset) * inner);
        offset += e;
    }
    Node n;
    n.op = OpKind::Concat;
    n.inputs.assign(xs.begin(), xs.end());
    n.attr = {axis, 0, 0, 0};
    n.value = std::move(y);
    return g.record(std::move(n));
}

NodeId reshape(Graph& g, NodeId x, Shape shape)
{
    Node n;
    n.op = OpKind::Reshape;
    n.inputs = {x};
    n.value = g.value(x).reshaped(std::move(shape));
    return g.record(std::move(n));
}

NodeId affine(Graph& g, NodeId x, double scale, double shift)
{
    const Tensor& xv = g.value(x);
    Tensor y(xv.shape());
    for (std::size_t i = 0; i < xv.size(); ++i) y[i] = scale * xv[i] + shift;
    Node n;
    n.op = OpKind::Affine;
    n.inputs = {x};
    n.aux = {scale, shift};
    n.value = std::move(y);
    return g.record(std::move(n));
}

NodeId inner_product(Graph& g, NodeId x, const Tensor& weights)
{
    const Tensor& xv = g.value(x);
    if (xv.size() != weights.size()) dim_error("inner_product", xv.shape(), weights.shape());
    double s = 0.0;
    for (std::size_t i = 0; i < xv.size(); ++i) s += weights[i] * xv[i];
    Node n;
    n.op = OpKind::InnerProduct;
    n.inputs = {x};
    n.aux = weights.values();
    n.value = Tensor::scalar(s);
    return g.record(std::move(n));
}

}  // namespace a1o::ops

namespace a1o::detail {

void backward_node(const Graph& graph, NodeId id, const std::vector<double>& gout, GradBuffers& grads)
{
    const Node& n = graph.node(id);
    switch (n.op) {
    case OpKind::Input:
    case OpKind::Parameter:
        return;
    case OpKind::FullyConnected: {
        const Tensor& x = graph.value(n.inputs[0]);
        const Tensor& w = graph.value(n.inputs[1]);
        const std::size_t batch = x.extent(0), in = x.extent(1), out = w.extent(0);
        auto& gx = grads.at(n.inputs[0]);
        auto& gw = grads.at(n.inputs[1]);
        auto& gb = grads.at(n.inputs[2]);
        for (std::size_t i = 0; i < batch; ++i) {
            const double* xr = x.data().data() + i * in;
            double* gxr = gx.data() + i * in;
            for (std::size_t j = 0; j < out; ++j) {
                const double d = gout[i * out + j];
                if (d == 0.0) continue;
                const double* wr = w.data().data() + j * in;
                double* gwr = gw.data() + j * in;
                for (std::size_t k = 0; k < in; ++k) {
                    gxr[k] += d * wr[k];
                    gwr[k] += d * xr[k];
                }
                gb[j] += d;
            }
        }
        return;
    }
    case OpKind::Conv2d: {
        const Tensor& x = graph.value(n.inputs[0]);
        const Tensor& k = graph.value(n.inputs[1]);
        const auto c = ops::conv_geometry(x.shape(), k.shape(), n.attr[0], n.attr[1]);
        std::vector<double>* gb = n.inputs.size() > 2 ? &grads.at(n.inputs[2]) : nullptr;
        ops::conv_backward(x, k, c, gout, &grads.at(n.inputs[0]), &grads.at(n.inputs[1]), gb);
        return;
    }
    case OpKind::MaxPool2d: {
        auto& gx = grads.at(n.inputs[0]);
        for (std::size_t o = 0; o < gout.size(); ++o) gx[n.index[o]] += gout[o];
        return;
    }
    case OpKind::PRelu: {
        const Tensor& x = graph.value(n.inputs[0]);
        const Tensor& a = graph.value(n.inputs[1]);
        auto& gx = grads.at(n.inputs[0]);
        auto& ga = grads.at(n.inputs[1]);
        const auto split = ops::split_axis(x.shape(), 1);
        for (std::size_t o = 0; o < split.outer; ++o)
            for (std::size_t c = 0; c < split.extent; ++c)
                for (std::size_t i = 0; i < split.inner; ++i) {
                    const std::size_t idx = (o * split.extent + c) * split.inner + i;
                    const double v = x[idx];
                    if (v >= 0.0) {
                        gx[idx] += gout[idx];
                    } else {
                        gx[idx] += a[c] * gout[idx];
                        ga[c] += v * gout[idx];
                    }
                }
        return;
    }
    case OpKind::Softmax: {
        const Tensor& y = n.value;
        const std::size_t B = y.extent(0), C = y.extent(1);
        auto& gx = grads.at(n.inputs[0]);
        for (std::size_t i = 0; i < B; ++i) {
            double dot = 0.0;
            for (std::size_t j = 0; j < C; ++j) dot += gout[i * C + j] * y[i * C + j];
            for (std::size_t j = 0; j < C; ++j) gx[i * C + j] += y[i * C + j] * (gout[i * C + j] - dot);
        }
        return;
    }
    case OpKind::Sigmoid: {
        auto& gx = grads.at(n.inputs[0]);
        for (std::size_t i = 0; i < gout.size(); ++i) gx[i] += gout[i] * n.value[i] * (1.0 - n.value[i]);
        return;
    }
    case OpKind::Concat: {
        const auto ax = static_cast<std::size_t>(n.attr[0]);
        const Shape& out = n.value.shape();
        const auto split = ops::split_axis(out, ax);
        std::size_t offset = 0;
        for (auto in : n.inputs) {
            const std::size_t e = graph.value(in).extent(ax);
            auto& gi = grads.at(in);
            for (std::size_t o = 0; o < split.outer; ++o) {
                const double* src = gout.data() + (o * out[ax] + offset) * split.inner;
                double* dst = gi.data() + o * e * split.inner;
                for (std::size_t i = 0; i < e * split.inner; ++i) dst[i] += src[i];
            }
            offset += e;
        }
        return;
    }
    case OpKind::Reshape: {
        auto& gx = grads.at(n.inputs[0]);
        for (std::size_t i = 0; i < gout.size(); ++i) gx[i] += gout[i];
        return;
    }
    case OpKind::Affine: {
        auto& gx = grads.at(n.inputs[0]);
        for (std::size_t i = 0; i < gout.size(); ++i) gx[i] += n.aux[0] * gout[i];
        return;
    }
    case OpKind::InnerProduct: {
        auto& gx = grads.at(n.inputs[0]);
        for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += n.aux[i] * gout[0];
        return;
    }
    default:
        backward_loss_node(graph, id, gout, grads);
    }
}

}  // namespace a1o::detail
