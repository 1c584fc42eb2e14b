// Copyright (c) 2026, The ConvVRNN Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <vector>

#include "cvrnn/autograd.hpp"

/// Differentiable tensor operations recorded on a Tape.
///
/// Elementwise binary ops require identical shapes; there is no broadcasting.
/// Scalars are shape [1]. Image ops take NCHW tensors.
namespace cvrnn::ops {

Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var mul(const Var& a, const Var& b);
Var div(const Var& a, const Var& b);
Var add_scalar(const Var& a, double s);
Var scale(const Var& a, double s);

Var exp(const Var& a);
Var sigmoid(const Var& a);
Var tanh(const Var& a);
Var leaky_relu(const Var& a, double slope);
/// Subgradient 0 at exactly 0.
Var abs(const Var& a);
/// a^p for a >= 0; the gradient is taken as 0 where a == 0.
Var pow(const Var& a, double p);
/// max(a, lo) with zero gradient on the clamped side.
Var clamp_min(const Var& a, double lo);

/// Sum / mean of all elements, shape [1].
Var sum(const Var& a);
Var mean(const Var& a);

Var reshape(const Var& a, Shape shape);
/// Concatenation along dim 1 of 4-D tensors (channels).
Var concat_channels(const std::vector<Var>& parts);
/// Channels [begin, end) of a 4-D tensor.
Var slice_channels(const Var& a, int begin, int end);

/// x [N,Cin,H,W], weight [Cout,Cin,k,k], bias [Cout].
Var conv2d(const Var& x, const Var& weight, const Var& bias, int stride, int pad);
/// x [N,Cin,H,W], weight [Cin,Cout,k,k], bias [Cout]; output side (H-1)*stride - 2*pad + k.
Var conv_transpose2d(const Var& x, const Var& weight, const Var& bias, int stride, int pad);
/// x [N,in], weight [out,in], bias [out].
Var linear(const Var& x, const Var& weight, const Var& bias);

/// Applies a fixed k x k kernel to every (n, c) plane with no padding.
Var filter2d_valid(const Var& x, const Tensor& kernel);
/// 2x2 average pooling with stride 2; odd trailing rows/columns are dropped.
Var avg_pool2(const Var& x);
/// Forward differences x[.., w+1] - x[.., w] (width) and x[.., h+1, :] - x[.., h, :] (height).
Var diff_w(const Var& x);
Var diff_h(const Var& x);

/// Closed-form KL(q || p) between diagonal Gaussians given as [N,D] means and
/// log-variances. Returns [N].
Var kl_diag_gauss(const Var& mean_q, const Var& log_var_q, const Var& mean_p, const Var& log_var_p);

/// mean + exp(0.5 * log_var) * noise; noise has the same shape and is not differentiated.
Var reparameterize(const Var& mean, const Var& log_var, const Tensor& noise);

}  // namespace cvrnn::ops
