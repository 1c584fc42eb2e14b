// Copyright (c) 2026, The ConvVRNN Authors
// SPDX-License-Identifier: Apache-2.0

#include "cvrnn/ops.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <memory>
#include <string>

#include "cvrnn/errors.hpp"

namespace cvrnn::ops {
namespace {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatMap = Eigen::Map<RowMatrix>;
using ConstMatMap = Eigen::Map<const RowMatrix>;

void same_shape(const Var& a, const Var& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw DimensionError(std::string(op) + ": shape mismatch " + shape_str(a.shape()) + " vs " +
                         shape_str(b.shape()));
  }
}

void require_rank(const Var& a, int rank, const char* op) {
  if (a.value().rank() != rank) {
    throw DimensionError(std::string(op) + ": expected rank " + std::to_string(rank) + ", got " +
                         shape_str(a.shape()));
  }
}

template <typename F, typename G>
Var unary(const Var& a, F f, G dfdx) {
  const Tensor& x = a.value();
  Tensor y(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) y[i] = f(x[i]);
  return a.tape().record(std::move(y), {a}, [a, dfdx](Tape& t, const Tensor& g) {
    const Tensor& x = a.value();
    Tensor& ga = t.grad_buffer(a);
    for (std::size_t i = 0; i < x.size(); ++i) ga[i] += g[i] * dfdx(x[i]);
  });
}

// Convolution geometry for a single image plane stack.
struct Geometry {
  int channels, height, width, kernel, stride, pad, out_h, out_w;
};

void im2col(const double* img, const Geometry& g, double* cols) {
  const int out_area = g.out_h * g.out_w;
  for (int c = 0; c < g.channels; ++c) {
    for (int ki = 0; ki < g.kernel; ++ki) {
      for (int kj = 0; kj < g.kernel; ++kj) {
        double* row = cols + static_cast<std::ptrdiff_t>((c * g.kernel + ki) * g.kernel + kj) * out_area;
        for (int oh = 0; oh < g.out_h; ++oh) {
          const int ih = oh * g.stride - g.pad + ki;
          double* dst = row + oh * g.out_w;
          if (ih < 0 || ih >= g.height) {
            for (int ow = 0; ow < g.out_w; ++ow) dst[ow] = 0.0;
            continue;
          }
          const double* src = img + (static_cast<std::ptrdiff_t>(c) * g.height + ih) * g.width;
          for (int ow = 0; ow < g.out_w; ++ow) {
            const int iw = ow * g.stride - g.pad + kj;
            dst[ow] = (iw >= 0 && iw < g.width) ? src[iw] : 0.0;
          }
        }
      }
    }
  }
}

void col2im(const double* cols, const Geometry& g, double* img) {
  const int out_area = g.out_h * g.out_w;
  for (int c = 0; c < g.channels; ++c) {
    for (int ki = 0; ki < g.kernel; ++ki) {
      for (int kj = 0; kj < g.kernel; ++kj) {
        const double* row =
            cols + static_cast<std::ptrdiff_t>((c * g.kernel + ki) * g.kernel + kj) * out_area;
        for (int oh = 0; oh < g.out_h; ++oh) {
          const int ih = oh * g.stride - g.pad + ki;
          if (ih < 0 || ih >= g.height) continue;
          const double* src = row + oh * g.out_w;
          double* dst = img + (static_cast<std::ptrdiff_t>(c) * g.height + ih) * g.width;
          for (int ow = 0; ow < g.out_w; ++ow) {
            const int iw = ow * g.stride - g.pad + kj;
            if (iw >= 0 && iw < g.width) dst[iw] += src[ow];
          }
        }
      }
    }
  }
}

}  // namespace

Var add(const Var& a, const Var& b) {
  same_shape(a, b, "add");
  Tensor y = a.value();
  y += b.value();
  return a.tape().record(std::move(y), {a, b}, [a, b](Tape& t, const Tensor& g) {
    if (t.requires_grad(a)) t.grad_buffer(a) += g;
    if (t.requires_grad(b)) t.grad_buffer(b) += g;
  });
}

Var sub(const Var& a, const Var& b) {
  same_shape(a, b, "sub");
  const Tensor& x = a.value();
  const Tensor& z = b.value();
  Tensor y(x.shape());
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = x[i] - z[i];
  return a.tape().record(std::move(y), {a, b}, [a, b](Tape& t, const Tensor& g) {
    if (t.requires_grad(a)) t.grad_buffer(a) += g;
    if (t.requires_grad(b)) {
      Tensor& gb = t.grad_buffer(b);
      for (std::size_t i = 0; i < g.size(); ++i) gb[i] -= g[i];
    }
  });
}

Var mul(const Var& a, const Var& b) {
  same_shape(a, b, "mul");
  const Tensor& x = a.value();
  const Tensor& z = b.value();
  Tensor y(x.shape());
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = x[i] * z[i];
  return a.tape().record(std::move(y), {a, b}, [a, b](Tape& t, const Tensor& g) {
    const Tensor& x = a.value();
    const Tensor& z = b.value();
    if (t.requires_grad(a)) {
      Tensor& ga = t.grad_buffer(a);
      for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * z[i];
    }
    if (t.requires_grad(b)) {
      Tensor& gb = t.grad_buffer(b);
      for (std::size_t i = 0; i < g.size(); ++i) gb[i] += g[i] * x[i];
    }
  });
}

Var div(const Var& a, const Var& b) {
  same_shape(a, b, "div");
  const Tensor& x = a.value();
  const Tensor& z = b.value();
  Tensor y(x.shape());
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = x[i] / z[i];
  return a.tape().record(std::move(y), {a, b}, [a, b](Tape& t, const Tensor& g) {
    const Tensor& x = a.value();
    const Tensor& z = b.value();
    if (t.requires_grad(a)) {
      Tensor& ga = t.grad_buffer(a);
      for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] / z[i];
    }
    if (t.requires_grad(b)) {
      Tensor& gb = t.grad_buffer(b);
      for (std::size_t i = 0; i < g.size(); ++i) gb[i] -= g[i] * x[i] / (z[i] * z[i]);
    }
  });
}

Var add_scalar(const Var& a, double s) {
  return unary(a, [s](double x) { return x + s; }, [](double) { return 1.0; });
}

Var scale(const Var& a, double s) {
  return unary(a, [s](double x) { return x * s; }, [s](double) { return s; });
}

Var exp(const Var& a) {
  return unary(a, [](double x) { return std::exp(x); }, [](double x) { return std::exp(x); });
}

Var sigmoid(const Var& a) {
  auto f = [](double x) { return 1.0 / (1.0 + std::exp(-x)); };
  return unary(a, f, [f](double x) {
    const double s = f(x);
    return s * (1.0 - s);
  });
}

Var tanh(const Var& a) {
  return unary(a, [](double x) { return std::tanh(x); },
               [](double x) {
                 const double y = std::tanh(x);
                 return 1.0 - y * y;
               });
}

Var leaky_relu(const Var& a, double slope) {
  return unary(a, [slope](double x) { return x > 0.0 ? x : slope * x; },
               [slope](double x) { return x > 0.0 ? 1.0 : slope; });
}

Var abs(const Var& a) {
  return unary(a, [](double x) { return std::abs(x); },
               [](double x) { return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0); });
}

Var pow(const Var& a, double p) {
  if (p == 1.0) {
    return unary(a, [](double x) { return x; }, [](double) { return 1.0; });
  }
  return unary(a, [p](double x) { return std::pow(x, p); },
               [p](double x) { return x == 0.0 ? 0.0 : p * std::pow(x, p - 1.0); });
}

Var clamp_min(const Var& a, double lo) {
  return unary(a, [lo](double x) { return x < lo ? lo : x; },
               [lo](double x) { return x < lo ? 0.0 : 1.0; });
}

Var sum(const Var& a) {
  return a.tape().record(Tensor::scalar(a.value().sum()), {a}, [a](Tape& t, const Tensor& g) {
    Tensor& ga = t.grad_buffer(a);
    for (double& v : ga.values()) v += g[0];
  });
}

Var mean(const Var& a) {
  const double n = static_cast<double>(a.value().size());
  if (n == 0) throw DimensionError("mean of an empty tensor");
  return a.tape().record(Tensor::scalar(a.value().sum() / n), {a},
                         [a, n](Tape& t, const Tensor& g) {
                           Tensor& ga = t.grad_buffer(a);
                           const double d = g[0] / n;
                           for (double& v : ga.values()) v += d;
                         });
}

Var reshape(const Var& a, Shape shape) {
  return a.tape().record(a.value().reshaped(std::move(shape)), {a},
                         [a](Tape& t, const Tensor& g) {
                           Tensor& ga = t.grad_buffer(a);
                           for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
                         });
}

Var concat_channels(const std::vector<Var>& parts) {
  if (parts.empty()) throw DimensionError("concat_channels: no inputs");
  for (const Var& p : parts) require_rank(p, 4, "concat_channels");
  const Shape& s0 = parts.front().shape();
  int total = 0;
  for (const Var& p : parts) {
    const Shape& s = p.shape();
    if (s[0] != s0[0] || s[2] != s0[2] || s[3] != s0[3]) {
      throw DimensionError("concat_channels: incompatible shapes " + shape_str(s0) + " and " +
                           shape_str(s));
    }
    total += s[1];
  }
  const int n = s0[0];
  const std::size_t plane = static_cast<std::size_t>(s0[2]) * s0[3];
  Tensor y({n, total, s0[2], s0[3]});
  for (int b = 0; b < n; ++b) {
    double* dst = y.data() + static_cast<std::size_t>(b) * total * plane;
    for (const Var& p : parts) {
      const std::size_t chunk = static_cast<std::size_t>(p.shape()[1]) * plane;
      const double* src = p.value().data() + b * chunk;
      std::copy(src, src + chunk, dst);
      dst += chunk;
    }
  }
  return parts.front().tape().record(
      std::move(y), parts, [parts, n, total, plane](Tape& t, const Tensor& g) {
        for (int b = 0; b < n; ++b) {
          const double* src = g.data() + static_cast<std::size_t>(b) * total * plane;
          for (const Var& p : parts) {
            const std::size_t chunk = static_cast<std::size_t>(p.shape()[1]) * plane;
            if (t.requires_grad(p)) {
              double* dst = t.grad_buffer(p).data() + b * chunk;
              for (std::size_t i = 0; i < chunk; ++i) dst[i] += src[i];
            }
            src += chunk;
          }
        }
      });
}

Var slice_channels(const Var& a, int begin, int end) {
  require_rank(a, 4, "slice_channels");
  const Shape& s = a.shape();
  if (begin < 0 || end > s[1] || begin >= end) {
    throw DimensionError("slice_channels: bad range [" + std::to_string(begin) + ", " +
                         std::to_string(end) + ") for " + shape_str(s));
  }
  const std::size_t plane = static_cast<std::size_t>(s[2]) * s[3];
  const int c = end - begin;
  Tensor y({s[0], c, s[2], s[3]});
  for (int b = 0; b < s[0]; ++b) {
    const double* src = a.value().data() + (static_cast<std::size_t>(b) * s[1] + begin) * plane;
    std::copy(src, src + c * plane, y.data() + static_cast<std::size_t>(b) * c * plane);
  }
  return a.tape().record(std::move(y), {a}, [a, begin, c, plane](Tape& t, const Tensor& g) {
    const Shape& s = a.shape();
    Tensor& ga = t.grad_buffer(a);
    for (int b = 0; b < s[0]; ++b) {
      double* dst = ga.data() + (static_cast<std::size_t>(b) * s[1] + begin) * plane;
      const double* src = g.data() + static_cast<std::size_t>(b) * c * plane;
      for (std::size_t i = 0; i < c * plane; ++i) dst[i] += src[i];
    }
  });
}

Var conv2d(const Var& x, const Var& weight, const Var& bias, int stride, int pad) {
  require_rank(x, 4, "conv2d");
  require_rank(weight, 4, "conv2d weight");
  const Shape& xs = x.shape();
  const Shape& ws = weight.shape();
  if (ws[1] != xs[1] || ws[2] != ws[3] || bias.shape() != Shape{ws[0]}) {
    throw DimensionError("conv2d: input " + shape_str(xs) + " incompatible with weight " +
                         shape_str(ws) + " / bias " + shape_str(bias.shape()));
  }
  const int n = xs[0];
  const int cout = ws[0];
  Geometry geo{xs[1], xs[2], xs[3], ws[2], stride, pad, 0, 0};
  geo.out_h = (geo.height + 2 * pad - geo.kernel) / stride + 1;
  geo.out_w = (geo.width + 2 * pad - geo.kernel) / stride + 1;
  if (geo.out_h <= 0 || geo.out_w <= 0) throw DimensionError("conv2d: input too small");
  const int patch = geo.channels * geo.kernel * geo.kernel;
  const int area = geo.out_h * geo.out_w;
  const std::size_t in_stride = static_cast<std::size_t>(geo.channels) * geo.height * geo.width;

  Tensor y({n, cout, geo.out_h, geo.out_w});
  auto cols = std::make_shared<std::vector<Tensor>>();
  cols->reserve(static_cast<std::size_t>(n));
  ConstMatMap w(weight.value().data(), cout, patch);
  const Tensor& bv = bias.value();
  for (int b = 0; b < n; ++b) {
    Tensor col({patch, area});
    im2col(x.value().data() + b * in_stride, geo, col.data());
    MatMap out(y.data() + static_cast<std::size_t>(b) * cout * area, cout, area);
    out.noalias() = w * ConstMatMap(col.data(), patch, area);
    for (int o = 0; o < cout; ++o) out.row(o).array() += bv[static_cast<std::size_t>(o)];
    cols->push_back(std::move(col));
  }
  return x.tape().record(
      std::move(y), {x, weight, bias},
      [x, weight, bias, geo, cols, cout, patch, area, in_stride](Tape& t, const Tensor& g) {
        const int n = x.shape()[0];
        ConstMatMap w(weight.value().data(), cout, patch);
        const bool gx = t.requires_grad(x);
        const bool gw = t.requires_grad(weight);
        const bool gb = t.requires_grad(bias);
        Tensor dcol({patch, area});
        for (int b = 0; b < n; ++b) {
          ConstMatMap dy(g.data() + static_cast<std::size_t>(b) * cout * area, cout, area);
          ConstMatMap col((*cols)[static_cast<std::size_t>(b)].data(), patch, area);
          if (gw) MatMap(t.grad_buffer(weight).data(), cout, patch).noalias() += dy * col.transpose();
          if (gb) {
            Tensor& dbias = t.grad_buffer(bias);
            for (int o = 0; o < cout; ++o) dbias[static_cast<std::size_t>(o)] += dy.row(o).sum();
          }
          if (gx) {
            MatMap(dcol.data(), patch, area).noalias() = w.transpose() * dy;
            col2im(dcol.data(), geo, t.grad_buffer(x).data() + b * in_stride);
          }
        }
      });
}

Var conv_transpose2d(const Var& x, const Var& weight, const Var& bias, int stride, int pad) {
  require_rank(x, 4, "conv_transpose2d");
  require_rank(weight, 4, "conv_transpose2d weight");
  const Shape& xs = x.shape();
  const Shape& ws = weight.shape();
  if (ws[0] != xs[1] || ws[2] != ws[3] || bias.shape() != Shape{ws[1]}) {
    throw DimensionError("conv_transpose2d: input " + shape_str(xs) + " incompatible with weight " +
                         shape_str(ws) + " / bias " + shape_str(bias.shape()));
  }
  const int n = xs[0];
  const int cin = xs[1];
  const int cout = ws[1];
  const int k = ws[2];
  const int out_h = (xs[2] - 1) * stride - 2 * pad + k;
  const int out_w = (xs[3] - 1) * stride - 2 * pad + k;
  // The output plays the role of a conv input that maps back onto x's grid.
  Geometry geo{cout, out_h, out_w, k, stride, pad, xs[2], xs[3]};
  const int patch = cout * k * k;
  const int area = xs[2] * xs[3];
  const std::size_t out_stride = static_cast<std::size_t>(cout) * out_h * out_w;

  Tensor y({n, cout, out_h, out_w});
  ConstMatMap w(weight.value().data(), cin, patch);
  Tensor col({patch, area});
  for (int b = 0; b < n; ++b) {
    ConstMatMap xin(x.value().data() + static_cast<std::size_t>(b) * cin * area, cin, area);
    MatMap(col.data(), patch, area).noalias() = w.transpose() * xin;
    double* out = y.data() + b * out_stride;
    col2im(col.data(), geo, out);
    const std::size_t plane = static_cast<std::size_t>(out_h) * out_w;
    for (int o = 0; o < cout; ++o) {
      const double bo = bias.value()[static_cast<std::size_t>(o)];
      for (std::size_t i = 0; i < plane; ++i) out[o * plane + i] += bo;
    }
  }
  return x.tape().record(
      std::move(y), {x, weight, bias},
      [x, weight, bias, geo, cin, cout, patch, area, out_stride](Tape& t, const Tensor& g) {
        const int n = x.shape()[0];
        ConstMatMap w(weight.value().data(), cin, patch);
        const bool gx = t.requires_grad(x);
        const bool gw = t.requires_grad(weight);
        const bool gb = t.requires_grad(bias);
        Tensor col({patch, area});
        const std::size_t plane = static_cast<std::size_t>(geo.height) * geo.width;
        for (int b = 0; b < n; ++b) {
          const double* dy = g.data() + b * out_stride;
          if (gb) {
            Tensor& dbias = t.grad_buffer(bias);
            for (int o = 0; o < cout; ++o) {
              double s = 0.0;
              for (std::size_t i = 0; i < plane; ++i) s += dy[o * plane + i];
              dbias[static_cast<std::size_t>(o)] += s;
            }
          }
          if (!gx && !gw) continue;
          im2col(dy, geo, col.data());
          ConstMatMap dcol(col.data(), patch, area);
          if (gx) {
            MatMap(t.grad_buffer(x).data() + static_cast<std::size_t>(b) * cin * area, cin, area)
                .noalias() += w * dcol;
          }
          if (gw) {
            ConstMatMap xin(x.value().data() + static_cast<std::size_t>(b) * cin * area, cin, area);
            MatMap(t.grad_buffer(weight).data(), cin, patch).noalias() += xin * dcol.transpose();
          }
        }
      });
}

Var linear(const Var& x, const Var& weight, const Var& bias) {
  require_rank(x, 2, "linear");
  require_rank(weight, 2, "linear weight");
  const int n = x.shape()[0];
  const int in = x.shape()[1];
  const int out = weight.shape()[0];
  if (weight.shape()[1] != in || bias.shape() != Shape{out}) {
    throw DimensionError("linear: input " + shape_str(x.shape()) + " incompatible with weight " +
                         shape_str(weight.shape()) + " / bias " + shape_str(bias.shape()));
  }
  Tensor y({n, out});
  MatMap ym(y.data(), n, out);
  ym.noalias() = ConstMatMap(x.value().data(), n, in) *
                 ConstMatMap(weight.value().data(), out, in).transpose();
  for (int b = 0; b < n; ++b) {
    for (int o = 0; o < out; ++o) ym(b, o) += bias.value()[static_cast<std::size_t>(o)];
  }
  return x.tape().record(std::move(y), {x, weight, bias},
                         [x, weight, bias, n, in, out](Tape& t, const Tensor& g) {
                           ConstMatMap dy(g.data(), n, out);
                           if (t.requires_grad(x)) {
                             MatMap(t.grad_buffer(x).data(), n, in).noalias() +=
                                 dy * ConstMatMap(weight.value().data(), out, in);
                           }
                           if (t.requires_grad(weight)) {
                             MatMap(t.grad_buffer(weight).data(), out, in).noalias() +=
                                 dy.transpose() * ConstMatMap(x.value().data(), n, in);
                           }
                           if (t.requires_grad(bias)) {
                             Tensor& db = t.grad_buffer(bias);
                             for (int o = 0; o < out; ++o) db[static_cast<std::size_t>(o)] += dy.col(o).sum();
                           }
                         });
}

Var filter2d_valid(const Var& x, const Tensor& kernel) {
  require_rank(x, 4, "filter2d_valid");
  if (kernel.rank() != 2 || kernel.dim(0) != kernel.dim(1)) {
    throw DimensionError("filter2d_valid: kernel must be square, got " + shape_str(kernel.shape()));
  }
  const Shape& s = x.shape();
  const int k = kernel.dim(0);
  const int oh = s[2] - k + 1;
  const int ow = s[3] - k + 1;
  if (oh <= 0 || ow <= 0) {
    throw DimensionError("filter2d_valid: " + std::to_string(k) + "x" + std::to_string(k) +
                         " window larger than image " + shape_str(s));
  }
  const int planes = s[0] * s[1];
  Tensor y({s[0], s[1], oh, ow});
  for (int p = 0; p < planes; ++p) {
    const double* src = x.value().data() + static_cast<std::size_t>(p) * s[2] * s[3];
    double* dst = y.data() + static_cast<std::size_t>(p) * oh * ow;
    for (int i = 0; i < oh; ++i) {
      for (int j = 0; j < ow; ++j) {
        double acc = 0.0;
        for (int a = 0; a < k; ++a) {
          const double* row = src + (i + a) * s[3] + j;
          for (int b = 0; b < k; ++b) acc += kernel[static_cast<std::size_t>(a * k + b)] * row[b];
        }
        dst[i * ow + j] = acc;
      }
    }
  }
  return x.tape().record(std::move(y), {x}, [x, kernel, k, oh, ow, planes](Tape& t, const Tensor& g) {
    const Shape& s = x.shape();
    Tensor& gx = t.grad_buffer(x);
    for (int p = 0; p < planes; ++p) {
      double* dst = gx.data() + static_cast<std::size_t>(p) * s[2] * s[3];
      const double* src = g.data() + static_cast<std::size_t>(p) * oh * ow;
      for (int i = 0; i < oh; ++i) {
        for (int j = 0; j < ow; ++j) {
          const double gv = src[i * ow + j];
          for (int a = 0; a < k; ++a) {
            double* row = dst + (i + a) * s[3] + j;
            for (int b = 0; b < k; ++b) row[b] += kernel[static_cast<std::size_t>(a * k + b)] * gv;
          }
        }
      }
    }
  });
}

Var avg_pool2(const Var& x) {
  require_rank(x, 4, "avg_pool2");
  const Shape& s = x.shape();
  const int oh = s[2] / 2;
  const int ow = s[3] / 2;
  if (oh == 0 || ow == 0) throw DimensionError("avg_pool2: image too small " + shape_str(s));
  const int planes = s[0] * s[1];
  Tensor y({s[0], s[1], oh, ow});
  for (int p = 0; p < planes; ++p) {
    const double* src = x.value().data() + static_cast<std::size_t>(p) * s[2] * s[3];
    double* dst = y.data() + static_cast<std::size_t>(p) * oh * ow;
    for (int i = 0; i < oh; ++i) {
      for (int j = 0; j < ow; ++j) {
        const double* r0 = src + 2 * i * s[3] + 2 * j;
        const double* r1 = r0 + s[3];
        dst[i * ow + j] = 0.25 * (r0[0] + r0[1] + r1[0] + r1[1]);
      }
    }
  }
  return x.tape().record(std::move(y), {x}, [x, oh, ow, planes](Tape& t, const Tensor& g) {
    const Shape& s = x.shape();
    Tensor& gx = t.grad_buffer(x);
    for (int p = 0; p < planes; ++p) {
      double* dst = gx.data() + static_cast<std::size_t>(p) * s[2] * s[3];
      const double* src = g.data() + static_cast<std::size_t>(p) * oh * ow;
      for (int i = 0; i < oh; ++i) {
        for (int j = 0; j < ow; ++j) {
          const double v = 0.25 * src[i * ow + j];
          double* r0 = dst + 2 * i * s[3] + 2 * j;
          double* r1 = r0 + s[3];
          r0[0] += v;
          r0[1] += v;
          r1[0] += v;
          r1[1] += v;
        }
      }
    }
  });
}

Var diff_w(const Var& x) {
  require_rank(x, 4, "diff_w");
  const Shape& s = x.shape();
  if (s[3] < 2) throw DimensionError("diff_w: width < 2");
  const int planes = s[0] * s[1];
  const int rows = s[2];
  const int w = s[3];
  Tensor y({s[0], s[1], rows, w - 1});
  for (int p = 0; p < planes; ++p) {
    for (int i = 0; i < rows; ++i) {
      const double* src = x.value().data() + (static_cast<std::size_t>(p) * rows + i) * w;
      double* dst = y.data() + (static_cast<std::size_t>(p) * rows + i) * (w - 1);
      for (int j = 0; j + 1 < w; ++j) dst[j] = src[j + 1] - src[j];
    }
  }
  return x.tape().record(std::move(y), {x}, [x, planes, rows, w](Tape& t, const Tensor& g) {
    Tensor& gx = t.grad_buffer(x);
    for (int p = 0; p < planes; ++p) {
      for (int i = 0; i < rows; ++i) {
        double* dst = gx.data() + (static_cast<std::size_t>(p) * rows + i) * w;
        const double* src = g.data() + (static_cast<std::size_t>(p) * rows + i) * (w - 1);
        for (int j = 0; j + 1 < w; ++j) {
          dst[j + 1] += src[j];
          dst[j] -= src[j];
        }
      }
    }
  });
}

Var diff_h(const Var& x) {
  require_rank(x, 4, "diff_h");
  const Shape& s = x.shape();
  if (s[2] < 2) throw DimensionError("diff_h: height < 2");
  const int planes = s[0] * s[1];
  const int h = s[2];
  const int w = s[3];
  Tensor y({s[0], s[1], h - 1, w});
  for (int p = 0; p < planes; ++p) {
    const double* src = x.value().data() + static_cast<std::size_t>(p) * h * w;
    double* dst = y.data() + static_cast<std::size_t>(p) * (h - 1) * w;
    for (int i = 0; i + 1 < h; ++i) {
      for (int j = 0; j < w; ++j) dst[i * w + j] = src[(i + 1) * w + j] - src[i * w + j];
    }
  }
  return x.tape().record(std::move(y), {x}, [x, planes, h, w](Tape& t, const Tensor& g) {
    Tensor& gx = t.grad_buffer(x);
    for (int p = 0; p < planes; ++p) {
      double* dst = gx.data() + static_cast<std::size_t>(p) * h * w;
      const double* src = g.data() + static_cast<std::size_t>(p) * (h - 1) * w;
      for (int i = 0; i + 1 < h; ++i) {
        for (int j = 0; j < w; ++j) {
          dst[(i + 1) * w + j] += src[i * w + j];
          dst[i * w + j] -= src[i * w + j];
        }
      }
    }
  });
}

Var kl_diag_gauss(const Var& mean_q, const Var& log_var_q, const Var& mean_p,
                  const Var& log_var_p) {
  require_rank(mean_q, 2, "kl_diag_gauss");
  same_shape(mean_q, log_var_q, "kl_diag_gauss");
  same_shape(mean_q, mean_p, "kl_diag_gauss");
  same_shape(mean_q, log_var_p, "kl_diag_gauss");
  const int n = mean_q.shape()[0];
  const int d = mean_q.shape()[1];
  Tensor y({n});
  const Tensor& mq = mean_q.value();
  const Tensor& lq = log_var_q.value();
  const Tensor& mp = mean_p.value();
  const Tensor& lp = log_var_p.value();
  for (int b = 0; b < n; ++b) {
    double acc = 0.0;
    for (int j = 0; j < d; ++j) {
      const std::size_t i = static_cast<std::size_t>(b) * d + j;
      const double dm = mq[i] - mp[i];
      acc += 0.5 * (lp[i] - lq[i]) + (std::exp(lq[i]) + dm * dm) / (2.0 * std::exp(lp[i])) - 0.5;
    }
    y[static_cast<std::size_t>(b)] = acc;
  }
  return mean_q.tape().record(
      std::move(y), {mean_q, log_var_q, mean_p, log_var_p},
      [mean_q, log_var_q, mean_p, log_var_p, n, d](Tape& t, const Tensor& g) {
        const Tensor& mq = mean_q.value();
        const Tensor& lq = log_var_q.value();
        const Tensor& mp = mean_p.value();
        const Tensor& lp = log_var_p.value();
        Tensor* gmq = t.requires_grad(mean_q) ? &t.grad_buffer(mean_q) : nullptr;
        Tensor* glq = t.requires_grad(log_var_q) ? &t.grad_buffer(log_var_q) : nullptr;
        Tensor* gmp = t.requires_grad(mean_p) ? &t.grad_buffer(mean_p) : nullptr;
        Tensor* glp = t.requires_grad(log_var_p) ? &t.grad_buffer(log_var_p) : nullptr;
        for (int b = 0; b < n; ++b) {
          const double gb = g[static_cast<std::size_t>(b)];
          for (int j = 0; j < d; ++j) {
            const std::size_t i = static_cast<std::size_t>(b) * d + j;
            const double inv_vp = std::exp(-lp[i]);
            const double vq = std::exp(lq[i]);
            const double dm = mq[i] - mp[i];
            if (gmq) (*gmq)[i] += gb * dm * inv_vp;
            if (gmp) (*gmp)[i] -= gb * dm * inv_vp;
            if (glq) (*glq)[i] += gb * (-0.5 + 0.5 * vq * inv_vp);
            if (glp) (*glp)[i] += gb * (0.5 - 0.5 * (vq + dm * dm) * inv_vp);
          }
        }
      });
}

Var reparameterize(const Var& mean, const Var& log_var, const Tensor& noise) {
  same_shape(mean, log_var, "reparameterize");
  if (noise.shape() != mean.shape()) {
    throw DimensionError("reparameterize: noise shape " + shape_str(noise.shape()) +
                         " does not match " + shape_str(mean.shape()));
  }
  const Tensor& m = mean.value();
  const Tensor& lv = log_var.value();
  Tensor y(m.shape());
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = m[i] + std::exp(0.5 * lv[i]) * noise[i];
  return mean.tape().record(std::move(y), {mean, log_var}, [mean, log_var, noise](Tape& t, const Tensor& g) {
    if (t.requires_grad(mean)) t.grad_buffer(mean) += g;
    if (t.requires_grad(log_var)) {
      const Tensor& lv = log_var.value();
      Tensor& gl = t.grad_buffer(log_var);
      for (std::size_t i = 0; i < g.size(); ++i) gl[i] += g[i] * 0.5 * std::exp(0.5 * lv[i]) * noise[i];
    }
  });
}

}  // namespace cvrnn::ops
