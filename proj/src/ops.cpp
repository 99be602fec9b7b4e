#include "pimc/ops.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <limits>

#include "pimc/errors.hpp"

namespace pimc::ops {
namespace {

using NodePtr = std::shared_ptr<TensorNode>;
using RowMat = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapMat = Eigen::Map<RowMat>;
using ConstMapMat = Eigen::Map<const RowMat>;

std::span<float> grad_of(const NodePtr& n) {
  if (n->grad.empty()) n->grad.assign(n->data.size(), 0.0f);
  return n->grad;
}

void require_rank(const Tensor& t, std::size_t rank, const char* op) {
  if (!t.defined() || t.rank() != rank) {
    throw DimensionError(std::string(op) + ": expected rank " + std::to_string(rank) + " tensor, got " +
                         (t.defined() ? shape_str(t.shape()) : std::string("undefined")));
  }
}

// Output columns [lo, hi) whose input column oj * stride + k - pad is in range.
void valid_span(std::size_t k, std::size_t stride, std::size_t pad, std::size_t w, std::size_t ow, std::size_t& lo,
                std::size_t& hi) {
  lo = k >= pad ? 0 : (pad - k + stride - 1) / stride;
  const std::ptrdiff_t last = static_cast<std::ptrdiff_t>(w) - 1 + static_cast<std::ptrdiff_t>(pad) -
                              static_cast<std::ptrdiff_t>(k);
  hi = last < 0 ? 0 : std::min(ow, static_cast<std::size_t>(last) / stride + 1);
  if (hi < lo) hi = lo;
}

// Sums in 16 fixed lanes with unaligned loads, so the order of additions
// does not depend on where the buffers happen to be allocated.
using Lanes = Eigen::Array<double, 16, 1>;
using LaneMap = Eigen::Map<const Eigen::Array<float, 16, 1>, Eigen::Unaligned>;

double lane_sum(const float* p, std::size_t n) {
  Lanes acc = Lanes::Zero();
  std::size_t i = 0;
  for (; i + 16 <= n; i += 16) acc += LaneMap(p + i).cast<double>();
  double s = acc.sum();
  for (; i < n; ++i) s += p[i];
  return s;
}

double lane_sum_sq_dev(const float* p, std::size_t n, float mu) {
  Lanes acc = Lanes::Zero();
  std::size_t i = 0;
  for (; i + 16 <= n; i += 16) acc += (LaneMap(p + i).cast<double>() - double(mu)).square();
  double s = acc.sum();
  for (; i < n; ++i) s += (double(p[i]) - mu) * (double(p[i]) - mu);
  return s;
}

double lane_dot(const float* a, const float* b, std::size_t n) {
  Lanes acc = Lanes::Zero();
  std::size_t i = 0;
  for (; i + 16 <= n; i += 16) acc += LaneMap(a + i).cast<double>() * LaneMap(b + i).cast<double>();
  double s = acc.sum();
  for (; i < n; ++i) s += double(a[i]) * b[i];
  return s;
}

void im2col(const float* x, std::size_t c, std::size_t h, std::size_t w, std::size_t kh, std::size_t kw,
            std::size_t stride, std::size_t pad, std::size_t oh, std::size_t ow, float* col) {
  const std::size_t plane = oh * ow;
  for (std::size_t ci = 0; ci < c; ++ci) {
    const float* xc = x + ci * h * w;
    for (std::size_t ki = 0; ki < kh; ++ki) {
      for (std::size_t kj = 0; kj < kw; ++kj) {
        float* row = col + ((ci * kh + ki) * kw + kj) * plane;
        std::size_t lo, hi;
        valid_span(kj, stride, pad, w, ow, lo, hi);
        for (std::size_t oi = 0; oi < oh; ++oi) {
          const auto yi = static_cast<std::ptrdiff_t>(oi * stride + ki) - static_cast<std::ptrdiff_t>(pad);
          float* dst = row + oi * ow;
          if (yi < 0 || yi >= static_cast<std::ptrdiff_t>(h)) {
            std::fill(dst, dst + ow, 0.0f);
            continue;
          }
          std::fill(dst, dst + lo, 0.0f);
          std::fill(dst + hi, dst + ow, 0.0f);
          const float* src = xc + static_cast<std::size_t>(yi) * w + lo * stride + kj - pad;
          if (stride == 1) {
            std::copy(src, src + (hi - lo), dst + lo);
          } else {
            for (std::size_t oj = lo; oj < hi; ++oj, src += stride) dst[oj] = *src;
          }
        }
      }
    }
  }
}

void col2im_add(const float* col, std::size_t c, std::size_t h, std::size_t w, std::size_t kh, std::size_t kw,
                std::size_t stride, std::size_t pad, std::size_t oh, std::size_t ow, float* x) {
  const std::size_t plane = oh * ow;
  for (std::size_t ci = 0; ci < c; ++ci) {
    float* xc = x + ci * h * w;
    for (std::size_t ki = 0; ki < kh; ++ki) {
      for (std::size_t kj = 0; kj < kw; ++kj) {
        const float* row = col + ((ci * kh + ki) * kw + kj) * plane;
        std::size_t lo, hi;
        valid_span(kj, stride, pad, w, ow, lo, hi);
        for (std::size_t oi = 0; oi < oh; ++oi) {
          const auto yi = static_cast<std::ptrdiff_t>(oi * stride + ki) - static_cast<std::ptrdiff_t>(pad);
          if (yi < 0 || yi >= static_cast<std::ptrdiff_t>(h)) continue;
          float* dst = xc + static_cast<std::size_t>(yi) * w + lo * stride + kj - pad;
          const float* src = row + oi * ow;
          for (std::size_t oj = lo; oj < hi; ++oj, dst += stride) *dst += src[oj];
        }
      }
    }
  }
}

}  // namespace

Tensor matmul(const Tensor& a, const Tensor& b) {
  require_rank(a, 2, "matmul");
  require_rank(b, 2, "matmul");
  const auto m = a.dim(0), k = a.dim(1), p = b.dim(1);
  if (b.dim(0) != k) {
    throw DimensionError("matmul: inner dimensions differ: " + shape_str(a.shape()) + " x " + shape_str(b.shape()));
  }
  std::vector<float> out(m * p);
  MapMat(out.data(), m, p).noalias() = ConstMapMat(a.data().data(), m, k) * ConstMapMat(b.data().data(), k, p);
  const bool rec = autograd::should_record({&a, &b});
  Tensor y = make_result({m, p}, std::move(out), rec);
  if (rec) {
    autograd::record([an = a.node(), bn = b.node(), yn = y.node(), m, k, p] {
      if (yn->grad.empty()) return;
      ConstMapMat dy(yn->grad.data(), m, p);
      if (an->requires_grad) MapMat(grad_of(an).data(), m, k).noalias() += dy * ConstMapMat(bn->data.data(), k, p).transpose();
      if (bn->requires_grad) MapMat(grad_of(bn).data(), k, p).noalias() += ConstMapMat(an->data.data(), m, k).transpose() * dy;
    });
  }
  return y;
}

Tensor linear(const Tensor& x, const Tensor& weight, const Tensor& bias) {
  require_rank(x, 2, "linear");
  require_rank(weight, 2, "linear");
  const auto n = x.dim(0), in = x.dim(1), out = weight.dim(0);
  if (weight.dim(1) != in) {
    throw DimensionError("linear: input " + shape_str(x.shape()) + " vs weight " + shape_str(weight.shape()));
  }
  if (bias.defined() && bias.numel() != out) {
    throw DimensionError("linear: bias " + shape_str(bias.shape()) + " vs " + std::to_string(out) + " outputs");
  }
  std::vector<float> values(n * out);
  MapMat y(values.data(), n, out);
  y.noalias() = ConstMapMat(x.data().data(), n, in) * ConstMapMat(weight.data().data(), out, in).transpose();
  if (bias.defined()) {
    y.rowwise() += Eigen::Map<const Eigen::RowVectorXf>(bias.data().data(), out);
  }
  const bool rec = autograd::should_record({&x, &weight, &bias});
  Tensor result = make_result({n, out}, std::move(values), rec);
  if (rec) {
    autograd::record([xn = x.node(), wn = weight.node(), bn = bias.defined() ? bias.node() : NodePtr{},
                      yn = result.node(), n, in, out] {
      if (yn->grad.empty()) return;
      ConstMapMat dy(yn->grad.data(), n, out);
      if (xn->requires_grad) MapMat(grad_of(xn).data(), n, in).noalias() += dy * ConstMapMat(wn->data.data(), out, in);
      if (wn->requires_grad) MapMat(grad_of(wn).data(), out, in).noalias() += dy.transpose() * ConstMapMat(xn->data.data(), n, in);
      if (bn && bn->requires_grad) {
        auto db = grad_of(bn);
        for (std::size_t j = 0; j < out; ++j) {
          double s = 0.0;
          for (std::size_t i = 0; i < n; ++i) s += dy(i, j);
          db[j] += static_cast<float>(s);
        }
      }
    });
  }
  return result;
}

Tensor add(const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) {
    throw DimensionError("add: shapes differ: " + shape_str(a.shape()) + " vs " + shape_str(b.shape()));
  }
  std::vector<float> out(a.numel());
  const auto av = a.data(), bv = b.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] + bv[i];
  const bool rec = autograd::should_record({&a, &b});
  Tensor y = make_result(a.shape(), std::move(out), rec);
  if (rec) {
    autograd::record([an = a.node(), bn = b.node(), yn = y.node()] {
      if (yn->grad.empty()) return;
      for (const auto& in : {an, bn}) {
        if (!in->requires_grad) continue;
        auto g = grad_of(in);
        for (std::size_t i = 0; i < g.size(); ++i) g[i] += yn->grad[i];
      }
    });
  }
  return y;
}

Tensor relu(const Tensor& x) {
  std::vector<float> out(x.numel());
  const auto xv = x.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = xv[i] > 0.0f ? xv[i] : 0.0f;
  const bool rec = autograd::should_record({&x});
  Tensor y = make_result(x.shape(), std::move(out), rec);
  if (rec) {
    autograd::record([xn = x.node(), yn = y.node()] {
      if (yn->grad.empty()) return;
      auto g = grad_of(xn);
      for (std::size_t i = 0; i < g.size(); ++i) {
        if (xn->data[i] > 0.0f) g[i] += yn->grad[i];
      }
    });
  }
  return y;
}

Tensor mul_scalar(const Tensor& x, float s) {
  std::vector<float> out(x.numel());
  const auto xv = x.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = xv[i] * s;
  const bool rec = autograd::should_record({&x});
  Tensor y = make_result(x.shape(), std::move(out), rec);
  if (rec) {
    autograd::record([xn = x.node(), yn = y.node(), s] {
      if (yn->grad.empty()) return;
      auto g = grad_of(xn);
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += yn->grad[i] * s;
    });
  }
  return y;
}

Tensor scale_by(const Tensor& x, const Tensor& s) {
  if (s.numel() != 1) throw DimensionError("scale_by: scale must hold one value, got " + shape_str(s.shape()));
  const float sv = s.item();
  std::vector<float> out(x.numel());
  const auto xv = x.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = xv[i] * sv;
  const bool rec = autograd::should_record({&x, &s});
  Tensor y = make_result(x.shape(), std::move(out), rec);
  if (rec) {
    autograd::record([xn = x.node(), sn = s.node(), yn = y.node()] {
      if (yn->grad.empty()) return;
      const float sv = sn->data[0];
      if (xn->requires_grad) {
        auto g = grad_of(xn);
        for (std::size_t i = 0; i < g.size(); ++i) g[i] += yn->grad[i] * sv;
      }
      if (sn->requires_grad) {
        double acc = 0.0;
        for (std::size_t i = 0; i < xn->data.size(); ++i) acc += static_cast<double>(yn->grad[i]) * xn->data[i];
        grad_of(sn)[0] += static_cast<float>(acc);
      }
    });
  }
  return y;
}

Tensor exp(const Tensor& x) {
  std::vector<float> out(x.numel());
  const auto xv = x.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::exp(xv[i]);
  const bool rec = autograd::should_record({&x});
  Tensor y = make_result(x.shape(), std::move(out), rec);
  if (rec) {
    autograd::record([xn = x.node(), yn = y.node()] {
      if (yn->grad.empty()) return;
      auto g = grad_of(xn);
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += yn->grad[i] * yn->data[i];
    });
  }
  return y;
}

Tensor transpose(const Tensor& x) {
  require_rank(x, 2, "transpose");
  const auto r = x.dim(0), c = x.dim(1);
  std::vector<float> out(r * c);
  MapMat(out.data(), c, r) = ConstMapMat(x.data().data(), r, c).transpose();
  const bool rec = autograd::should_record({&x});
  Tensor y = make_result({c, r}, std::move(out), rec);
  if (rec) {
    autograd::record([xn = x.node(), yn = y.node(), r, c] {
      if (yn->grad.empty()) return;
      MapMat(grad_of(xn).data(), r, c) += ConstMapMat(yn->grad.data(), c, r).transpose();
    });
  }
  return y;
}

Tensor reshape(const Tensor& x, Shape shape) {
  if (shape_numel(shape) != x.numel()) {
    throw DimensionError("reshape: " + shape_str(x.shape()) + " -> " + shape_str(shape));
  }
  const bool rec = autograd::should_record({&x});
  Tensor y = make_result(std::move(shape), std::vector<float>(x.data().begin(), x.data().end()), rec);
  if (rec) {
    autograd::record([xn = x.node(), yn = y.node()] {
      if (yn->grad.empty()) return;
      auto g = grad_of(xn);
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += yn->grad[i];
    });
  }
  return y;
}

Tensor sum(const Tensor& x) {
  double acc = 0.0;
  for (float v : x.data()) acc += v;
  const bool rec = autograd::should_record({&x});
  Tensor y = make_result({1}, {static_cast<float>(acc)}, rec);
  if (rec) {
    autograd::record([xn = x.node(), yn = y.node()] {
      if (yn->grad.empty()) return;
      const float g0 = yn->grad[0];
      for (auto& g : grad_of(xn)) g += g0;
    });
  }
  return y;
}

Tensor mean(const Tensor& x) {
  if (x.numel() == 0) throw DomainError("mean of empty tensor");
  const double n = static_cast<double>(x.numel());
  double acc = 0.0;
  for (float v : x.data()) acc += v;
  const bool rec = autograd::should_record({&x});
  Tensor y = make_result({1}, {static_cast<float>(acc / n)}, rec);
  if (rec) {
    autograd::record([xn = x.node(), yn = y.node(), n] {
      if (yn->grad.empty()) return;
      const float g0 = static_cast<float>(yn->grad[0] / n);
      for (auto& g : grad_of(xn)) g += g0;
    });
  }
  return y;
}

Tensor conv2d(const Tensor& x, const Tensor& kernel, Conv2dOptions opt) {
  require_rank(x, 4, "conv2d");
  require_rank(kernel, 4, "conv2d");
  if (opt.stride == 0) throw DomainError("conv2d: stride must be positive");
  const auto b = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
  const auto o = kernel.dim(0), kh = kernel.dim(2), kw = kernel.dim(3);
  if (kernel.dim(1) != c) {
    throw DimensionError("conv2d: input channels " + std::to_string(c) + " vs kernel " + shape_str(kernel.shape()));
  }
  if (kh > h + 2 * opt.padding || kw > w + 2 * opt.padding) {
    throw DimensionError("conv2d: kernel " + shape_str(kernel.shape()) + " larger than padded input " +
                         shape_str(x.shape()));
  }
  const auto oh = (h + 2 * opt.padding - kh) / opt.stride + 1;
  const auto ow = (w + 2 * opt.padding - kw) / opt.stride + 1;
  const auto K = c * kh * kw, P = oh * ow;
  const bool direct = kh == 1 && kw == 1 && opt.stride == 1 && opt.padding == 0;

  std::vector<float> out(b * o * P);
  std::vector<float> col(direct ? 0 : K * P);
  ConstMapMat wmat(kernel.data().data(), o, K);
  for (std::size_t n = 0; n < b; ++n) {
    const float* xn = x.data().data() + n * c * h * w;
    const float* src = xn;
    if (!direct) {
      im2col(xn, c, h, w, kh, kw, opt.stride, opt.padding, oh, ow, col.data());
      src = col.data();
    }
    MapMat(out.data() + n * o * P, o, P).noalias() = wmat * ConstMapMat(src, K, P);
  }

  const bool rec = autograd::should_record({&x, &kernel});
  Tensor y = make_result({b, o, oh, ow}, std::move(out), rec);
  if (rec) {
    autograd::record([xn = x.node(), kn = kernel.node(), yn = y.node(), b, c, h, w, o, kh, kw, oh, ow, K, P, direct,
                      opt] {
      if (yn->grad.empty()) return;
      std::vector<float> col(direct ? 0 : K * P);
      std::vector<float> dcol(K * P);
      ConstMapMat wmat(kn->data.data(), o, K);
      float* dw = kn->requires_grad ? grad_of(kn).data() : nullptr;
      float* dx = xn->requires_grad ? grad_of(xn).data() : nullptr;
      for (std::size_t n = 0; n < b; ++n) {
        ConstMapMat dy(yn->grad.data() + n * o * P, o, P);
        const float* xs = xn->data.data() + n * c * h * w;
        if (dw != nullptr) {
          const float* src = xs;
          if (!direct) {
            im2col(xs, c, h, w, kh, kw, opt.stride, opt.padding, oh, ow, col.data());
            src = col.data();
          }
          MapMat(dw, o, K).noalias() += dy * ConstMapMat(src, K, P).transpose();
        }
        if (dx != nullptr) {
          if (direct) {
            MapMat(dx + n * c * h * w, K, P).noalias() += wmat.transpose() * dy;
          } else {
            MapMat(dcol.data(), K, P).noalias() = wmat.transpose() * dy;
            col2im_add(dcol.data(), c, h, w, kh, kw, opt.stride, opt.padding, oh, ow, dx + n * c * h * w);
          }
        }
      }
    });
  }
  return y;
}

Tensor batch_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta, Tensor& running_mean,
                  Tensor& running_var, BatchNormOptions opt) {
  if (x.rank() < 2) throw DimensionError("batch_norm: input must be at least rank 2, got " + shape_str(x.shape()));
  const auto b = x.dim(0), c = x.dim(1);
  const auto spatial = x.numel() / std::max<std::size_t>(b * c, 1);
  for (const Tensor* t : {&gamma, &beta, static_cast<const Tensor*>(&running_mean),
                          static_cast<const Tensor*>(&running_var)}) {
    if (t->numel() != c) throw DimensionError("batch_norm: per-channel tensor " + shape_str(t->shape()) +
                                              " vs " + std::to_string(c) + " channels");
  }
  const std::size_t count = b * spatial;
  if (opt.training && count == 0) throw DomainError("batch_norm: empty batch");
  // Each (sample, channel) row is reduced in float lanes; rows are
  // accumulated in double.
  using Row = Eigen::Map<const Eigen::ArrayXf>;
  using MutRow = Eigen::Map<Eigen::ArrayXf>;
  const auto xv = x.data();
  std::vector<float> xhat(x.numel());
  std::vector<float> invstd(c);
  std::vector<float> out(x.numel());
  for (std::size_t ch = 0; ch < c; ++ch) {
    double mu, var;
    if (opt.training) {
      double s = 0.0;
      for (std::size_t n = 0; n < b; ++n) s += lane_sum(xv.data() + (n * c + ch) * spatial, spatial);
      mu = s / static_cast<double>(count);
      double ss = 0.0;
      const float muf = static_cast<float>(mu);
      for (std::size_t n = 0; n < b; ++n) {
        ss += lane_sum_sq_dev(xv.data() + (n * c + ch) * spatial, spatial, muf);
      }
      var = ss / static_cast<double>(count);
      auto rm = running_mean.mutable_data();
      auto rv = running_var.mutable_data();
      const double unbiased = count > 1 ? var * static_cast<double>(count) / static_cast<double>(count - 1) : var;
      rm[ch] = static_cast<float>((1.0 - opt.momentum) * rm[ch] + opt.momentum * mu);
      rv[ch] = static_cast<float>((1.0 - opt.momentum) * rv[ch] + opt.momentum * unbiased);
    } else {
      mu = running_mean.data()[ch];
      var = running_var.data()[ch];
    }
    const double is = 1.0 / std::sqrt(var + opt.eps);
    invstd[ch] = static_cast<float>(is);
    const float g = gamma.data()[ch], bt = beta.data()[ch];
    const float muf = static_cast<float>(mu), isf = static_cast<float>(is);
    for (std::size_t n = 0; n < b; ++n) {
      const std::size_t off = (n * c + ch) * spatial;
      MutRow xh(xhat.data() + off, spatial);
      xh = (Row(xv.data() + off, spatial) - muf) * isf;
      MutRow(out.data() + off, spatial) = g * xh + bt;
    }
  }
  const bool rec = autograd::should_record({&x, &gamma, &beta});
  Tensor y = make_result(x.shape(), std::move(out), rec);
  if (rec) {
    autograd::record([xn = x.node(), gn = gamma.node(), bn = beta.node(), yn = y.node(), xhat = std::move(xhat),
                      invstd = std::move(invstd), b, c, spatial, count, training = opt.training] {
      if (yn->grad.empty()) return;
      const auto& dy = yn->grad;
      float* dx = xn->requires_grad ? grad_of(xn).data() : nullptr;
      for (std::size_t ch = 0; ch < c; ++ch) {
        double sum_dy = 0.0, sum_dy_xhat = 0.0;
        for (std::size_t n = 0; n < b; ++n) {
          const std::size_t off = (n * c + ch) * spatial;
          sum_dy += lane_sum(dy.data() + off, spatial);
          sum_dy_xhat += lane_dot(dy.data() + off, xhat.data() + off, spatial);
        }
        if (gn->requires_grad) grad_of(gn)[ch] += static_cast<float>(sum_dy_xhat);
        if (bn->requires_grad) grad_of(bn)[ch] += static_cast<float>(sum_dy);
        if (dx == nullptr) continue;
        const float scale = static_cast<float>(static_cast<double>(gn->data[ch]) * invstd[ch]);
        const double nn = static_cast<double>(count);
        const float mean_dy = training ? static_cast<float>(sum_dy / nn) : 0.0f;
        const float mean_dy_xhat = training ? static_cast<float>(sum_dy_xhat / nn) : 0.0f;
        for (std::size_t n = 0; n < b; ++n) {
          const std::size_t off = (n * c + ch) * spatial;
          MutRow out_dx(dx + off, spatial);
          if (training) {
            out_dx += scale * (Row(dy.data() + off, spatial) - mean_dy - Row(xhat.data() + off, spatial) * mean_dy_xhat);
          } else {
            out_dx += scale * Row(dy.data() + off, spatial);
          }
        }
      }
    });
  }
  return y;
}

Tensor adaptive_avg_pool2d(const Tensor& x, std::size_t oh, std::size_t ow) {
  require_rank(x, 4, "adaptive_avg_pool2d");
  if (oh == 0 || ow == 0) throw DomainError("adaptive_avg_pool2d: output size must be positive");
  const auto b = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
  auto bin = [](std::size_t i, std::size_t in, std::size_t outn) {
    const std::size_t lo = (i * in) / outn;
    const std::size_t hi = ((i + 1) * in + outn - 1) / outn;
    return std::pair{lo, hi};
  };
  std::vector<float> out(b * c * oh * ow);
  const auto xv = x.data();
  for (std::size_t plane = 0; plane < b * c; ++plane) {
    const float* p = xv.data() + plane * h * w;
    for (std::size_t i = 0; i < oh; ++i) {
      const auto [r0, r1] = bin(i, h, oh);
      for (std::size_t j = 0; j < ow; ++j) {
        const auto [c0, c1] = bin(j, w, ow);
        double s = 0.0;
        for (std::size_t r = r0; r < r1; ++r)
          for (std::size_t q = c0; q < c1; ++q) s += p[r * w + q];
        out[(plane * oh + i) * ow + j] = static_cast<float>(s / static_cast<double>((r1 - r0) * (c1 - c0)));
      }
    }
  }
  const bool rec = autograd::should_record({&x});
  Tensor y = make_result({b, c, oh, ow}, std::move(out), rec);
  if (rec) {
    autograd::record([xn = x.node(), yn = y.node(), b, c, h, w, oh, ow, bin] {
      if (yn->grad.empty()) return;
      auto g = grad_of(xn);
      for (std::size_t plane = 0; plane < b * c; ++plane) {
        float* p = g.data() + plane * h * w;
        for (std::size_t i = 0; i < oh; ++i) {
          const auto [r0, r1] = bin(i, h, oh);
          for (std::size_t j = 0; j < ow; ++j) {
            const auto [c0, c1] = bin(j, w, ow);
            const float share =
                yn->grad[(plane * oh + i) * ow + j] / static_cast<float>((r1 - r0) * (c1 - c0));
            for (std::size_t r = r0; r < r1; ++r)
              for (std::size_t q = c0; q < c1; ++q) p[r * w + q] += share;
          }
        }
      }
    });
  }
  return y;
}

Tensor l2_normalize_rows(const Tensor& x, float eps, std::size_t* guarded_rows) {
  require_rank(x, 2, "l2_normalize_rows");
  const auto n = x.dim(0), d = x.dim(1);
  std::vector<float> out(n * d);
  std::vector<float> norms(n);
  std::size_t guarded = 0;
  const auto xv = x.data();
  for (std::size_t i = 0; i < n; ++i) {
    double ss = 0.0;
    for (std::size_t j = 0; j < d; ++j) ss += static_cast<double>(xv[i * d + j]) * xv[i * d + j];
    double norm = std::sqrt(ss);
    if (norm < eps) {
      norm = eps;
      ++guarded;
    }
    norms[i] = static_cast<float>(norm);
    for (std::size_t j = 0; j < d; ++j) out[i * d + j] = static_cast<float>(xv[i * d + j] / norm);
  }
  if (guarded_rows != nullptr) *guarded_rows = guarded;
  const bool rec = autograd::should_record({&x});
  Tensor y = make_result({n, d}, std::move(out), rec);
  if (rec) {
    autograd::record([xn = x.node(), yn = y.node(), norms = std::move(norms), n, d, eps] {
      if (yn->grad.empty()) return;
      auto g = grad_of(xn);
      for (std::size_t i = 0; i < n; ++i) {
        const float* dy = yn->grad.data() + i * d;
        const float* yr = yn->data.data() + i * d;
        if (norms[i] <= eps) {
          for (std::size_t j = 0; j < d; ++j) g[i * d + j] += dy[j] / norms[i];
          continue;
        }
        double dot = 0.0;
        for (std::size_t j = 0; j < d; ++j) dot += static_cast<double>(dy[j]) * yr[j];
        for (std::size_t j = 0; j < d; ++j) {
          g[i * d + j] += static_cast<float>((dy[j] - yr[j] * dot) / norms[i]);
        }
      }
    });
  }
  return y;
}

Tensor softmax_cross_entropy_rows(const Tensor& logits, std::span<const std::size_t> targets) {
  require_rank(logits, 2, "softmax_cross_entropy_rows");
  const auto n = logits.dim(0), k = logits.dim(1);
  if (n == 0 || k == 0) throw DomainError("softmax_cross_entropy_rows: empty batch");
  if (targets.size() != n) {
    throw DimensionError("softmax_cross_entropy_rows: " + std::to_string(targets.size()) + " targets for " +
                         std::to_string(n) + " rows");
  }
  const auto lv = logits.data();
  std::vector<float> probs(n * k);
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    if (targets[i] >= k) throw DomainError("softmax_cross_entropy_rows: target out of range");
    const float* row = lv.data() + i * k;
    const double mx = *std::max_element(row, row + k);
    double z = 0.0;
    for (std::size_t j = 0; j < k; ++j) z += std::exp(static_cast<double>(row[j]) - mx);
    const double lse = mx + std::log(z);
    total += lse - row[targets[i]];
    for (std::size_t j = 0; j < k; ++j) probs[i * k + j] = static_cast<float>(std::exp(row[j] - lse));
  }
  const bool rec = autograd::should_record({&logits});
  Tensor y = make_result({1}, {static_cast<float>(total / static_cast<double>(n))}, rec);
  if (rec) {
    autograd::record([ln = logits.node(), yn = y.node(), probs = std::move(probs),
                      tg = std::vector<std::size_t>(targets.begin(), targets.end()), n, k] {
      if (yn->grad.empty()) return;
      const float scale = yn->grad[0] / static_cast<float>(n);
      auto g = grad_of(ln);
      for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < k; ++j) {
          const float indicator = j == tg[i] ? 1.0f : 0.0f;
          g[i * k + j] += scale * (probs[i * k + j] - indicator);
        }
      }
    });
  }
  return y;
}

Tensor mse_loss(const Tensor& prediction, const Tensor& target) {
  if (prediction.shape() != target.shape()) {
    throw DimensionError("mse_loss: " + shape_str(prediction.shape()) + " vs " + shape_str(target.shape()));
  }
  if (prediction.numel() == 0) throw DomainError("mse_loss: empty input");
  const auto pv = prediction.data(), tv = target.data();
  double acc = 0.0;
  for (std::size_t i = 0; i < pv.size(); ++i) {
    const double d = static_cast<double>(pv[i]) - tv[i];
    acc += d * d;
  }
  const double count = static_cast<double>(pv.size());
  const bool rec = autograd::should_record({&prediction});
  Tensor y = make_result({1}, {static_cast<float>(acc / count)}, rec);
  if (rec) {
    autograd::record([pn = prediction.node(), tn = target.node(), yn = y.node(), count] {
      if (yn->grad.empty()) return;
      const double scale = 2.0 * yn->grad[0] / count;
      auto g = grad_of(pn);
      for (std::size_t i = 0; i < g.size(); ++i) {
        g[i] += static_cast<float>(scale * (static_cast<double>(pn->data[i]) - tn->data[i]));
      }
    });
  }
  return y;
}

}  // namespace pimc::ops
