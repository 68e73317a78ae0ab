#pragma once

#include <cmath>
#include <limits>
#include <numbers>

#include "svs/ops.hpp"

namespace svs {

// Constraint constants of the per-pixel Gaussian parameter map.
struct gauss {
  static constexpr double sigma_min = 0.1;    // floor on sigma_x, sigma_y (px)
  static constexpr double rho_max = 0.99;     // correlation stays below 1
  static constexpr double center_range = 2.0; // max |mu - source pixel| (px)
  static constexpr double conf_skip = 1e-3;   // truncated mode drops sources below this
  static constexpr double rho_floor = 1e-30;  // keeps rho > 0 at float saturation
};

// Channel layout of a (B,H,W,6) parameter map, raw and activated alike.
enum GaussChannel : Index {
  kConf = 0,
  kMuX = 1,
  kMuY = 2,
  kSigmaX = 3,
  kSigmaY = 4,
  kRho = 5,
};

struct RenderOptions {
  bool truncated = true;
  double cutoff_k = 5.0;    // include sources within cutoff_k*max(sx,sy)+center_range
  bool verification = false;  // additionally permits rho = 0 in hand-built maps
  bool operator==(const RenderOptions&) const = default;
};

template <class Scalar>
struct RenderResult {
  Tensor<Scalar> sum;        // pre-squash confidence-weighted density sum S
  Tensor<Scalar> attention;  // tanh(S), in [0,1)
  RenderOptions opts;
};

// Maps raw head output to constrained parameters:
//   c  = logistic(ch0)
//   mu = pixel coordinate + center_range * tanh(ch)
//   s  = sigma_min + softplus(ch)
//   rho = rho_max * logistic(ch5), floored away from exact zero
template <class Scalar>
Tensor<Scalar> activate_param_map(const Tensor<Scalar>& raw) {
  const Shape s = raw.shape();
  require(s.c == 6, "activate_param_map: raw map must have 6 channels, got ",
          to_string(s));
  require_finite(raw, "activate_param_map input");
  Tensor<Scalar> out(s);
  for (Index b = 0; b < s.b; ++b)
    for (Index i = 0; i < s.h; ++i)
      for (Index j = 0; j < s.w; ++j) {
        out.at(b, i, j, kConf) =
            detail::logistic_fn(raw.at(b, i, j, kConf));
        out.at(b, i, j, kMuX) =
            Scalar(j) + Scalar(gauss::center_range) *
                            std::tanh(raw.at(b, i, j, kMuX));
        out.at(b, i, j, kMuY) =
            Scalar(i) + Scalar(gauss::center_range) *
                            std::tanh(raw.at(b, i, j, kMuY));
        out.at(b, i, j, kSigmaX) =
            Scalar(gauss::sigma_min) +
            detail::softplus_fn(raw.at(b, i, j, kSigmaX));
        out.at(b, i, j, kSigmaY) =
            Scalar(gauss::sigma_min) +
            detail::softplus_fn(raw.at(b, i, j, kSigmaY));
        out.at(b, i, j, kRho) =
            std::max(Scalar(gauss::rho_max) *
                         detail::logistic_fn(raw.at(b, i, j, kRho)),
                     Scalar(gauss::rho_floor));
      }
  return out;
}

// Chain rule through the activation maps; upstream is d(loss)/d(params).
template <class Scalar>
Tensor<Scalar> activate_param_map_backward(const Tensor<Scalar>& raw,
                                           const Tensor<Scalar>& upstream) {
  const Shape s = raw.shape();
  require(upstream.shape() == s, "activate backward: upstream shape ",
          to_string(upstream.shape()), " does not match raw ", to_string(s));
  Tensor<Scalar> d(s);
  const Scalar range = Scalar(gauss::center_range);
  const Scalar rmax = Scalar(gauss::rho_max);
  for (Index n = 0; n < s.b * s.h * s.w; ++n) {
    const Scalar* r = raw.data() + n * 6;
    const Scalar* u = upstream.data() + n * 6;
    Scalar* g = d.data() + n * 6;
    const Scalar lc = detail::logistic_fn(r[kConf]);
    g[kConf] = u[kConf] * lc * (Scalar(1) - lc);
    const Scalar tx = std::tanh(r[kMuX]);
    g[kMuX] = u[kMuX] * range * (Scalar(1) - tx * tx);
    const Scalar ty = std::tanh(r[kMuY]);
    g[kMuY] = u[kMuY] * range * (Scalar(1) - ty * ty);
    g[kSigmaX] = u[kSigmaX] * detail::logistic_fn(r[kSigmaX]);
    g[kSigmaY] = u[kSigmaY] * detail::logistic_fn(r[kSigmaY]);
    const Scalar lr = detail::logistic_fn(r[kRho]);
    g[kRho] = u[kRho] * rmax * lr * (Scalar(1) - lr);
  }
  return d;
}

template <class Scalar>
void validate_param_map(const Tensor<Scalar>& params, bool verification) {
  const Shape s = params.shape();
  require(s.c == 6, "parameter map must have 6 channels, got ", to_string(s));
  require_finite(params, "gaussian parameter map");
  for (Index n = 0; n < s.b * s.h * s.w; ++n) {
    const Scalar* p = params.data() + n * 6;
    require(p[kConf] >= Scalar(0) && p[kConf] <= Scalar(1),
            "confidence ", p[kConf], " outside [0,1] at flat pixel ", n);
    require(p[kSigmaX] >= Scalar(gauss::sigma_min) &&
                p[kSigmaY] >= Scalar(gauss::sigma_min),
            "sigma (", p[kSigmaX], ",", p[kSigmaY], ") below ",
            gauss::sigma_min, " at flat pixel ", n,
            " (was activate_param_map bypassed?)");
    const bool rho_ok = verification ? p[kRho] >= Scalar(0)
                                     : p[kRho] > Scalar(0);
    require(rho_ok && p[kRho] <= Scalar(gauss::rho_max), "rho ", p[kRho],
            " outside the permitted range at flat pixel ", n,
            " (was activate_param_map bypassed?)");
  }
}

namespace detail {

// Bivariate normal density and its six partials at (x,y). E is the quadratic
// form u^2/sx^2 + v^2/sy^2 - 2 rho u v/(sx sy), positive definite for rho<1.
template <class Scalar>
struct GaussEval {
  Scalar phi;
  Scalar d_mux, d_muy, d_sx, d_sy, d_rho;  // partials of phi itself
};

template <class Scalar>
GaussEval<Scalar> gauss_eval(Scalar x, Scalar y, Scalar mux, Scalar muy,
                             Scalar sx, Scalar sy, Scalar rho) {
  const Scalar one = Scalar(1);
  const Scalar u = x - mux, v = y - muy;
  const Scalar omr2 = one - rho * rho;
  const Scalar norm =
      one / (Scalar(2) * Scalar(std::numbers::pi) * sx * sy * std::sqrt(omr2));
  const Scalar e = u * u / (sx * sx) + v * v / (sy * sy) -
                   Scalar(2) * rho * u * v / (sx * sy);
  const Scalar phi = norm * std::exp(-e / (Scalar(2) * omr2));

  GaussEval<Scalar> out;
  out.phi = phi;
  out.d_mux = phi * (u / (sx * sx) - rho * v / (sx * sy)) / omr2;
  out.d_muy = phi * (v / (sy * sy) - rho * u / (sx * sy)) / omr2;
  out.d_sx = phi * (-one / sx +
                    (u * u / (sx * sx * sx) - rho * u * v / (sx * sx * sy)) /
                        omr2);
  out.d_sy = phi * (-one / sy +
                    (v * v / (sy * sy * sy) - rho * u * v / (sy * sy * sx)) /
                        omr2);
  out.d_rho = phi * (rho / omr2 + u * v / (sx * sy * omr2) -
                     rho * e / (omr2 * omr2));
  return out;
}

// Visits every (output pixel, source pixel) pair the render mode includes,
// in a fixed source-major order shared by forward and backward.
template <class Scalar, class Fn>
void for_each_contribution(const Tensor<Scalar>& params, Index b,
                           const RenderOptions& opts, Fn&& fn) {
  const Shape s = params.shape();
  const bool exact = !opts.truncated || std::isinf(opts.cutoff_k);
  for (Index si = 0; si < s.h; ++si)
    for (Index sj = 0; sj < s.w; ++sj) {
      const Scalar* p = params.data() + params.offset(b, si, sj, 0);
      const Scalar c = p[kConf];
      if (!exact && c < Scalar(gauss::conf_skip)) continue;
      const Scalar mux = p[kMuX], muy = p[kMuY];
      const Scalar sx = p[kSigmaX], sy = p[kSigmaY];
      const Scalar rho = p[kRho];
      Index y0 = 0, y1 = s.h - 1, x0 = 0, x1 = s.w - 1;
      Scalar rad2 = Scalar(0);
      if (!exact) {
        const Scalar rad = Scalar(opts.cutoff_k) * std::max(sx, sy) +
                           Scalar(gauss::center_range);
        rad2 = rad * rad;
        y0 = std::max<Index>(0, Index(std::ceil(muy - rad)));
        y1 = std::min<Index>(s.h - 1, Index(std::floor(muy + rad)));
        x0 = std::max<Index>(0, Index(std::ceil(mux - rad)));
        x1 = std::min<Index>(s.w - 1, Index(std::floor(mux + rad)));
      }
      for (Index y = y0; y <= y1; ++y)
        for (Index x = x0; x <= x1; ++x) {
          if (!exact) {
            const Scalar dx = Scalar(x) - mux, dy = Scalar(y) - muy;
            if (dx * dx + dy * dy > rad2) continue;
          }
          fn(si, sj, y, x, c, mux, muy, sx, sy, rho);
        }
    }
}

}  // namespace detail

// Confidence-weighted sum of per-pixel bivariate Gaussians, squashed by tanh.
// Exact mode sums every source; truncated mode drops far and near-zero-
// confidence sources. An infinite cutoff falls through to the exact path so
// the truncated family converges to it bitwise.
template <class Scalar>
RenderResult<Scalar> render_attention(const Tensor<Scalar>& params,
                                      const RenderOptions& opts = {}) {
  validate_param_map(params, opts.verification);
  require(!opts.truncated || opts.cutoff_k >= 3.0,
          "render_attention: truncation cutoff must be >= 3, got ",
          opts.cutoff_k);
  const Shape s = params.shape();
  RenderResult<Scalar> out;
  out.opts = opts;
  out.sum = Tensor<Scalar>(Shape{s.b, s.h, s.w, 1});
  out.attention = Tensor<Scalar>(Shape{s.b, s.h, s.w, 1});
  for (Index b = 0; b < s.b; ++b) {
    detail::for_each_contribution<Scalar>(
        params, b, opts,
        [&](Index, Index, Index y, Index x, Scalar c, Scalar mux, Scalar muy,
            Scalar sx, Scalar sy, Scalar rho) {
          out.sum.at(b, y, x, 0) +=
              c * detail::gauss_eval<Scalar>(Scalar(x), Scalar(y), mux, muy,
                                             sx, sy, rho)
                      .phi;
        });
  }
  require_finite(out.sum, "attention pre-squash sum");
  // tanh can round to 1 at float saturation; keep A < 1 as promised
  const Scalar below_one =
      std::nextafter(Scalar(1), Scalar(0));
  out.attention.array() = out.sum.array().tanh().min(below_one);
  if ((out.attention.array() < Scalar(0)).any())
    throw numeric_error("attention map left [0,1)");
  return out;
}

// d(loss)/d(params) for a recorded render; upstream is d(loss)/d(attention).
// The mode must match the forward pass so both visit the same contributions.
template <class Scalar>
Tensor<Scalar> attention_backward(const Tensor<Scalar>& params,
                                  const RenderResult<Scalar>& fwd,
                                  const Tensor<Scalar>& upstream,
                                  const RenderOptions& opts) {
  require(opts == fwd.opts,
          "attention_backward: render mode does not match the forward pass");
  const Shape s = params.shape();
  require(upstream.shape() == fwd.attention.shape(),
          "attention_backward: upstream shape ", to_string(upstream.shape()),
          " does not match attention ", to_string(fwd.attention.shape()));
  Tensor<Scalar> grad(s);
  for (Index b = 0; b < s.b; ++b) {
    detail::for_each_contribution<Scalar>(
        params, b, opts,
        [&](Index si, Index sj, Index y, Index x, Scalar c, Scalar mux,
            Scalar muy, Scalar sx, Scalar sy, Scalar rho) {
          const Scalar a = fwd.attention.at(b, y, x, 0);
          const Scalar g = upstream.at(b, y, x, 0) * (Scalar(1) - a * a);
          if (g == Scalar(0)) return;
          const auto e = detail::gauss_eval<Scalar>(Scalar(x), Scalar(y), mux,
                                                    muy, sx, sy, rho);
          Scalar* d = grad.data() + grad.offset(b, si, sj, 0);
          d[kConf] += g * e.phi;
          d[kMuX] += g * c * e.d_mux;
          d[kMuY] += g * c * e.d_muy;
          d[kSigmaX] += g * c * e.d_sx;
          d[kSigmaY] += g * c * e.d_sy;
          d[kRho] += g * c * e.d_rho;
        });
  }
  return grad;
}

// --- tape-recorded versions -------------------------------------------------

template <class Scalar>
Var<Scalar> activate_params(Tape<Scalar>& tape, const Var<Scalar>& raw) {
  Tensor<Scalar> out = activate_param_map(raw->value);
  return tape.record(std::move(out), raw->requires_grad,
                     [raw](Node<Scalar>& self) {
                       if (!raw->requires_grad) return;
                       Tensor<Scalar> d =
                           activate_param_map_backward(raw->value, self.grad);
                       raw->grad.array() += d.array();
                     });
}

template <class Scalar>
Var<Scalar> render_attention_node(Tape<Scalar>& tape, const Var<Scalar>& params,
                                  const RenderOptions& opts = {}) {
  RenderResult<Scalar> r = render_attention(params->value, opts);
  Tensor<Scalar> att = r.attention;
  return tape.record(
      std::move(att), params->requires_grad, [params, opts](Node<Scalar>& self) {
        if (!params->requires_grad) return;
        RenderResult<Scalar> fwd;
        fwd.attention = self.value;
        fwd.opts = opts;
        Tensor<Scalar> d =
            attention_backward(params->value, fwd, self.grad, opts);
        params->grad.array() += d.array();
      });
}

// Final probability: backbone probability gated by the attention map.
template <class Scalar>
Var<Scalar> apply_attention(Tape<Scalar>& tape, const Var<Scalar>& prob,
                            const Var<Scalar>& attention) {
  require(prob->value.shape() == attention->value.shape(),
          "apply_attention: shapes ", to_string(prob->value.shape()), " and ",
          to_string(attention->value.shape()), " differ");
  return mul(tape, prob, attention);
}

}  // namespace svs
