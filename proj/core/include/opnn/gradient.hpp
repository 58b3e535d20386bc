#pragma once

#include <functional>
#include <span>
#include <vector>

#include "opnn/architecture.hpp"

namespace opnn {

/// One partial derivative per weight, in the same layout as WeightVector.
using GradientVector = WeightVector;

/// Scratch buffers reused across gradient evaluations of one network shape.
/// Activations of every (subnet, sample) pair are cached between the forward
/// and backward sweep when they fit in `cache_limit` doubles; otherwise they
/// are recomputed per subnet.
struct GradientWorkspace {
  std::size_t cache_limit = std::size_t{1} << 25;
  std::vector<double> outputs;
  std::vector<double> coef;
  std::vector<double> values;
  std::vector<double> slopes;
  bool cached = false;
  std::size_t samples = 0;
};

/// outputs[s] += f_w(X_s) for every sample, summed over subnets in ascending
/// order. Leaves the activations in `ws` for accumulate_gradient.
void accumulate_outputs(const WeightLayout& layout, std::span<const double> w,
                        const Dataset& data, std::span<double> outputs, GradientWorkspace& ws);

/// grad = sum_s coef[s] * d f_w(X_s) / d w, samples in ascending order.
/// Must follow accumulate_outputs on the same (w, data, ws).
void accumulate_gradient(const WeightLayout& layout, std::span<const double> w,
                         const Dataset& data, std::span<const double> coef,
                         std::span<double> grad, GradientWorkspace& ws);

/// coef[s] = (2/n)(outputs[s] - Y_s); returns (1/n) sum (outputs[s] - Y_s)^2.
double risk_coefficients(const Dataset& data, std::span<const double> outputs,
                         std::span<double> coef);

/// Empirical risk F_n(w) and its exact gradient by reverse accumulation.
///
/// Per-sample contributions are added in ascending sample order and network
/// outputs are summed in ascending subnet order, so the result is
/// bit-reproducible. `grad` must have layout.size() entries; it is overwritten.
double risk_and_gradient(const WeightLayout& layout, std::span<const double> w,
                         const Dataset& data, std::span<double> grad,
                         GradientWorkspace& ws);

GradientVector grad_risk(const WeightVector& w, const Dataset& data);

/// d f_w(x) / d w for a single input, by reverse accumulation.
GradientVector grad_output(const WeightVector& w, std::span<const double> x);

/// d f_w(x) / d w^{(l)}_{k,i,j} by literal evaluation of the closed-form path
/// sum over s_{l+2}, ..., s_{L-1}. Exponential in L; used as an oracle.
/// Throws std::domain_error when r^{L-2} > 10^6.
double grad_formula_direct(const WeightVector& w, std::span<const double> x,
                           const WeightIndex& target);

/// Central differences with per-coordinate step max(h_floor, 1e-8 |w_i|).
std::vector<double> fd_gradient(const std::function<double(std::span<const double>)>& f,
                                std::span<const double> w, double h_floor = 1e-6);

/// Central differences of the empirical risk with step h max(1, |w_i|),
/// evaluated in quad precision (long double where __float128 is missing).
/// Double-precision differences cannot resolve 1e-5 relative accuracy once
/// weights reach magnitude 10: truncation and cancellation both bite.
GradientVector fd_grad(const WeightVector& w, const Dataset& data, double h = 1e-10);

/// max_i |a_i - b_i| / max(|a_i|, |b_i|), skipping coordinates where both
/// magnitudes are below `abs_floor`.
double max_relative_error(std::span<const double> a, std::span<const double> b,
                          double abs_floor = 1e-10);

double euclidean_norm(std::span<const double> v);

}  // namespace opnn
