// Copyright Contributors to the a1o project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "a1o/graph.hpp"

#include <span>

/// Differentiable operations recorded on a Graph.
///
/// Layouts: images are [batch, channels, height, width], feature rows are
/// [batch, features]. Every op validates extents and throws DimensionError
/// naming the offending shapes.
namespace a1o::ops {

/// y[i,j] = sum_k x[i,k] * w[j,k] + b[j]
NodeId fully_connected(Graph& g, NodeId x, NodeId w, NodeId b);

/// Cross-correlation of x[B,C,H,W] with k[O,C,KH,KW]; output extent per
/// axis is floor((H + 2*pad - KH) / stride) + 1.
NodeId conv2d(Graph& g, NodeId x, NodeId k, int stride, int pad);
/// As above with a per-output-channel bias b[O].
NodeId conv2d(Graph& g, NodeId x, NodeId k, NodeId b, int stride, int pad);

/// Window maxima; ties go to the first position in row-major scan order.
NodeId maxpool2d(Graph& g, NodeId x, int window, int stride);

/// y = x for x >= 0, a[c] * x otherwise; channel axis is 1.
NodeId prelu(Graph& g, NodeId x, NodeId a);

/// Row-wise softmax over [batch, classes].
NodeId softmax(Graph& g, NodeId x);

NodeId sigmoid(Graph& g, NodeId x);

NodeId concat(Graph& g, std::span<const NodeId> xs, int axis);

NodeId reshape(Graph& g, NodeId x, Shape shape);

/// y = scale * x + shift with constant scale and shift.
NodeId affine(Graph& g, NodeId x, double scale, double shift);

/// Scalar sum_i weights[i] * x[i]; weights are constants.
NodeId inner_product(Graph& g, NodeId x, const Tensor& weights);

}  // namespace a1o::ops
