#pragma once

#include <Eigen/Dense>

#include <cmath>

#include "svs/autodiff.hpp"

namespace svs {

template <class Scalar>
using MatrixRM =
    Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

enum class Act { relu, logistic, tanh, softplus };
enum class Ew { add, mul };

namespace detail {

// Gathers conv patches: row ((b*OH+oy)*OW+ox), col ((ky*kw+kx)*Cin+ci).
// Out-of-bounds taps are zero (zero padding).
template <class Scalar>
MatrixRM<Scalar> im2col(const Tensor<Scalar>& in, Index kh, Index kw,
                        Index stride, Index pad, Index oh, Index ow) {
  const Shape s = in.shape();
  MatrixRM<Scalar> cols = MatrixRM<Scalar>::Zero(s.b * oh * ow, kh * kw * s.c);
  for (Index b = 0; b < s.b; ++b)
    for (Index oy = 0; oy < oh; ++oy)
      for (Index ox = 0; ox < ow; ++ox) {
        const Index row = (b * oh + oy) * ow + ox;
        for (Index ky = 0; ky < kh; ++ky) {
          const Index iy = oy * stride - pad + ky;
          if (iy < 0 || iy >= s.h) continue;
          for (Index kx = 0; kx < kw; ++kx) {
            const Index ix = ox * stride - pad + kx;
            if (ix < 0 || ix >= s.w) continue;
            cols.block(row, (ky * kw + kx) * s.c, 1, s.c) =
                Eigen::Map<const Eigen::Matrix<Scalar, 1, Eigen::Dynamic>>(
                    in.data() + in.offset(b, iy, ix, 0), s.c);
          }
        }
      }
  return cols;
}

// Scatter-adds patch gradients back onto the input grid.
template <class Scalar>
void col2im_add(const MatrixRM<Scalar>& cols, Tensor<Scalar>& dst, Index kh,
                Index kw, Index stride, Index pad, Index oh, Index ow) {
  const Shape s = dst.shape();
  for (Index b = 0; b < s.b; ++b)
    for (Index oy = 0; oy < oh; ++oy)
      for (Index ox = 0; ox < ow; ++ox) {
        const Index row = (b * oh + oy) * ow + ox;
        for (Index ky = 0; ky < kh; ++ky) {
          const Index iy = oy * stride - pad + ky;
          if (iy < 0 || iy >= s.h) continue;
          for (Index kx = 0; kx < kw; ++kx) {
            const Index ix = ox * stride - pad + kx;
            if (ix < 0 || ix >= s.w) continue;
            Eigen::Map<Eigen::Matrix<Scalar, 1, Eigen::Dynamic>>(
                dst.data() + dst.offset(b, iy, ix, 0), s.c) +=
                cols.block(row, (ky * kw + kx) * s.c, 1, s.c);
          }
        }
      }
}

}  // namespace detail

// 2D convolution, zero padding. Kernel shape is (kh,kw,Cin,Cout), bias
// (1,1,1,Cout). Forward and both weight gradients go through one GEMM each.
template <class Scalar>
Var<Scalar> conv2d(Tape<Scalar>& tape, const Var<Scalar>& input,
                   const Var<Scalar>& kernel, const Var<Scalar>& bias,
                   Index stride = 1, Index pad = 0) {
  const Shape is = input->value.shape();
  const Shape ks = kernel->value.shape();
  const Index kh = ks.b, kw = ks.h, cin = ks.w, cout = ks.c;
  require(is.c == cin, "conv2d: input channels ", to_string(is),
          " do not match kernel ", to_string(ks));
  require(bias->value.shape() == Shape{1, 1, 1, cout},
          "conv2d: bias shape ", to_string(bias->value.shape()),
          " does not match kernel ", to_string(ks));
  require(stride >= 1, "conv2d: stride must be >= 1, got ", stride);
  require(pad >= 0, "conv2d: padding must be >= 0, got ", pad);
  require_finite(input->value, "conv2d input");
  require_finite(kernel->value, "conv2d kernel");
  require_finite(bias->value, "conv2d bias");

  const Index oh = (is.h + 2 * pad - kh) / stride + 1;
  const Index ow = (is.w + 2 * pad - kw) / stride + 1;
  require(is.h + 2 * pad >= kh && is.w + 2 * pad >= kw,
          "conv2d: kernel ", to_string(ks), " larger than padded input ",
          to_string(is));

  MatrixRM<Scalar> cols = detail::im2col(input->value, kh, kw, stride, pad, oh, ow);
  Eigen::Map<const MatrixRM<Scalar>> kmat(kernel->value.data(), kh * kw * cin,
                                          cout);
  Eigen::Map<const Eigen::Matrix<Scalar, 1, Eigen::Dynamic>> brow(
      bias->value.data(), cout);

  Tensor<Scalar> out(Shape{is.b, oh, ow, cout});
  Eigen::Map<MatrixRM<Scalar>> omat(out.data(), is.b * oh * ow, cout);
  omat.noalias() = cols * kmat;
  omat.rowwise() += brow;
  require_finite(out, "conv2d output");

  const bool req =
      input->requires_grad || kernel->requires_grad || bias->requires_grad;
  return tape.record(
      std::move(out), req,
      [input, kernel, bias, kh, kw, stride, pad, oh, ow](Node<Scalar>& self) {
        const Shape is = input->value.shape();
        const Index cin = is.c, cout = self.value.shape().c;
        Eigen::Map<const MatrixRM<Scalar>> g(self.grad.data(),
                                             is.b * oh * ow, cout);
        if (bias->requires_grad) {
          Eigen::Map<Eigen::Matrix<Scalar, 1, Eigen::Dynamic>> db(
              bias->grad.data(), cout);
          db += g.colwise().sum();
        }
        if (kernel->requires_grad) {
          MatrixRM<Scalar> cols =
              detail::im2col(input->value, kh, kw, stride, pad, oh, ow);
          Eigen::Map<MatrixRM<Scalar>> dk(kernel->grad.data(), kh * kw * cin,
                                          cout);
          dk.noalias() += cols.transpose() * g;
        }
        if (input->requires_grad) {
          Eigen::Map<const MatrixRM<Scalar>> kmat(kernel->value.data(),
                                                  kh * kw * cin, cout);
          MatrixRM<Scalar> dcols = g * kmat.transpose();
          detail::col2im_add(dcols, input->grad, kh, kw, stride, pad, oh, ow);
        }
      });
}

namespace detail {

template <class Scalar>
Scalar logistic_fn(Scalar x) {
  if (x >= Scalar(0)) return Scalar(1) / (Scalar(1) + std::exp(-x));
  const Scalar e = std::exp(x);
  return e / (Scalar(1) + e);
}

template <class Scalar>
Scalar softplus_fn(Scalar x) {
  // max(x,0) + log1p(exp(-|x|)) never overflows
  return std::max(x, Scalar(0)) + std::log1p(std::exp(-std::abs(x)));
}

}  // namespace detail

template <class Scalar>
Var<Scalar> pointwise(Tape<Scalar>& tape, const Var<Scalar>& x, Act kind) {
  require_finite(x->value, "pointwise input");
  Tensor<Scalar> out(x->value.shape());
  switch (kind) {
    case Act::relu:
      out.array() = x->value.array().max(Scalar(0));
      break;
    case Act::logistic:
      out.array() = x->value.array().unaryExpr(
          [](Scalar v) { return detail::logistic_fn(v); });
      break;
    case Act::tanh:
      out.array() = x->value.array().tanh();
      break;
    case Act::softplus:
      out.array() = x->value.array().unaryExpr(
          [](Scalar v) { return detail::softplus_fn(v); });
      break;
  }
  return tape.record(std::move(out), x->requires_grad,
                     [x, kind](Node<Scalar>& self) {
                       if (!x->requires_grad) return;
                       auto& dx = x->grad.array();
                       const auto& dy = self.grad.array();
                       const auto& y = self.value.array();
                       switch (kind) {
                         case Act::relu:
                           dx += dy * (x->value.array() > Scalar(0))
                                          .template cast<Scalar>();
                           break;
                         case Act::logistic:
                           dx += dy * y * (Scalar(1) - y);
                           break;
                         case Act::tanh:
                           dx += dy * (Scalar(1) - y * y);
                           break;
                         case Act::softplus:
                           dx += dy * x->value.array().unaryExpr([](Scalar v) {
                             return detail::logistic_fn(v);
                           });
                           break;
                       }
                     });
}

template <class Scalar>
Var<Scalar> elementwise(Tape<Scalar>& tape, const Var<Scalar>& a,
                        const Var<Scalar>& b, Ew kind) {
  require(a->value.shape() == b->value.shape(), "elementwise: shapes ",
          to_string(a->value.shape()), " and ", to_string(b->value.shape()),
          " differ");
  require_finite(a->value, "elementwise lhs");
  require_finite(b->value, "elementwise rhs");
  Tensor<Scalar> out(a->value.shape());
  if (kind == Ew::add)
    out.array() = a->value.array() + b->value.array();
  else
    out.array() = a->value.array() * b->value.array();
  const bool req = a->requires_grad || b->requires_grad;
  return tape.record(std::move(out), req, [a, b, kind](Node<Scalar>& self) {
    const auto& dy = self.grad.array();
    if (kind == Ew::add) {
      if (a->requires_grad) a->grad.array() += dy;
      if (b->requires_grad) b->grad.array() += dy;
    } else {
      if (a->requires_grad) a->grad.array() += dy * b->value.array();
      if (b->requires_grad) b->grad.array() += dy * a->value.array();
    }
  });
}

template <class Scalar>
Var<Scalar> add(Tape<Scalar>& tape, const Var<Scalar>& a, const Var<Scalar>& b) {
  return elementwise(tape, a, b, Ew::add);
}
template <class Scalar>
Var<Scalar> mul(Tape<Scalar>& tape, const Var<Scalar>& a, const Var<Scalar>& b) {
  return elementwise(tape, a, b, Ew::mul);
}

// Nearest-neighbor 2x upsample; backward sums each 2x2 block.
template <class Scalar>
Var<Scalar> upsample2x(Tape<Scalar>& tape, const Var<Scalar>& x) {
  const Shape s = x->value.shape();
  Tensor<Scalar> out(Shape{s.b, s.h * 2, s.w * 2, s.c});
  for (Index b = 0; b < s.b; ++b)
    for (Index y = 0; y < s.h * 2; ++y)
      for (Index xx = 0; xx < s.w * 2; ++xx)
        for (Index c = 0; c < s.c; ++c)
          out.at(b, y, xx, c) = x->value.at(b, y / 2, xx / 2, c);
  return tape.record(std::move(out), x->requires_grad,
                     [x, s](Node<Scalar>& self) {
                       if (!x->requires_grad) return;
                       for (Index b = 0; b < s.b; ++b)
                         for (Index y = 0; y < s.h * 2; ++y)
                           for (Index xx = 0; xx < s.w * 2; ++xx)
                             for (Index c = 0; c < s.c; ++c)
                               x->grad.at(b, y / 2, xx / 2, c) +=
                                   self.grad.at(b, y, xx, c);
                     });
}

// Channel concatenation, a's channels first.
template <class Scalar>
Var<Scalar> concat_channels(Tape<Scalar>& tape, const Var<Scalar>& a,
                            const Var<Scalar>& b) {
  const Shape sa = a->value.shape(), sb = b->value.shape();
  require(sa.b == sb.b && sa.h == sb.h && sa.w == sb.w,
          "concat_channels: spatial shapes ", to_string(sa), " and ",
          to_string(sb), " differ");
  Tensor<Scalar> out(Shape{sa.b, sa.h, sa.w, sa.c + sb.c});
  for (Index i = 0; i < sa.b * sa.h * sa.w; ++i) {
    for (Index c = 0; c < sa.c; ++c)
      out.data()[i * (sa.c + sb.c) + c] = a->value.data()[i * sa.c + c];
    for (Index c = 0; c < sb.c; ++c)
      out.data()[i * (sa.c + sb.c) + sa.c + c] = b->value.data()[i * sb.c + c];
  }
  const bool req = a->requires_grad || b->requires_grad;
  return tape.record(std::move(out), req, [a, b, sa, sb](Node<Scalar>& self) {
    for (Index i = 0; i < sa.b * sa.h * sa.w; ++i) {
      if (a->requires_grad)
        for (Index c = 0; c < sa.c; ++c)
          a->grad.data()[i * sa.c + c] +=
              self.grad.data()[i * (sa.c + sb.c) + c];
      if (b->requires_grad)
        for (Index c = 0; c < sb.c; ++c)
          b->grad.data()[i * sb.c + c] +=
              self.grad.data()[i * (sa.c + sb.c) + sa.c + c];
    }
  });
}

inline constexpr double kCrossEntropyEps = 1e-7;

// Mean binary cross entropy; predictions are clipped to [eps, 1-eps] before
// the log, and the clip has zero gradient outside that band.
template <class Scalar>
Var<Scalar> cross_entropy(Tape<Scalar>& tape, const Var<Scalar>& pred,
                          const Var<Scalar>& target) {
  require(pred->value.shape() == target->value.shape(),
          "cross_entropy: shapes ", to_string(pred->value.shape()), " and ",
          to_string(target->value.shape()), " differ");
  require_finite(pred->value, "cross_entropy pred");
  for (Index i = 0; i < target->value.size(); ++i) {
    const Scalar t = target->value.data()[i];
    require(t == Scalar(0) || t == Scalar(1),
            "cross_entropy: target value ", t, " at flat index ", i,
            " is not binary");
  }
  const Scalar eps = Scalar(kCrossEntropyEps);
  const Scalar n = Scalar(pred->value.size());
  const auto pc = pred->value.array().min(Scalar(1) - eps).max(eps);
  const auto y = target->value.array();
  const Scalar loss =
      (-(y * pc.log() + (Scalar(1) - y) * (Scalar(1) - pc).log())).sum() / n;
  return tape.record(
      Tensor<Scalar>::scalar(loss), pred->requires_grad,
      [pred, target, eps, n](Node<Scalar>& self) {
        if (!pred->requires_grad) return;
        const Scalar g = self.grad.array()[0] / n;
        const auto& p = pred->value.array();
        const auto pc = p.min(Scalar(1) - eps).max(eps);
        const auto y = target->value.array();
        const auto inside =
            (p >= eps && p <= Scalar(1) - eps).template cast<Scalar>();
        pred->grad.array() +=
            g * inside * (-y / pc + (Scalar(1) - y) / (Scalar(1) - pc));
      });
}

template <class Scalar>
Var<Scalar> reduce_sum(Tape<Scalar>& tape, const Var<Scalar>& x) {
  require_finite(x->value, "reduce_sum input");
  return tape.record(Tensor<Scalar>::scalar(x->value.array().sum()),
                     x->requires_grad, [x](Node<Scalar>& self) {
                       if (!x->requires_grad) return;
                       x->grad.array() += self.grad.array()[0];
                     });
}

template <class Scalar>
Var<Scalar> scale(Tape<Scalar>& tape, const Var<Scalar>& x, Scalar alpha) {
  Tensor<Scalar> out(x->value.shape());
  out.array() = x->value.array() * alpha;
  return tape.record(std::move(out), x->requires_grad,
                     [x, alpha](Node<Scalar>& self) {
                       if (!x->requires_grad) return;
                       x->grad.array() += self.grad.array() * alpha;
                     });
}

}  // namespace svs
