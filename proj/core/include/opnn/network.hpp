#pragma once

#include <cmath>
#include <span>
#include <vector>

#include "opnn/architecture.hpp"

namespace opnn {

/// e^{-|z|}. Past |z| = 746 the result is exactly 0 and std::exp would take
/// its slow underflow path.
inline double saturated_exp(double z) {
  const double a = std::abs(z);
  return a < 746.0 ? std::exp(-a) : 0.0;
}

/// Logistic squasher 1/(1+e^{-z}), evaluated without ever forming e^{+|z|}.
/// Saturates to exactly 0 or 1 in floating point for large |z|.
inline double sigmoid(double z) {
  const double e = saturated_exp(z);
  return z >= 0.0 ? 1.0 / (1.0 + e) : e / (1.0 + e);
}

struct SigmoidEval {
  double value;
  double slope;  // sigma'(z) = e^{-|z|} / (1 + e^{-|z|})^2
};

inline SigmoidEval sigmoid_with_slope(double z) {
  const double e = saturated_exp(z);
  const double inv = 1.0 / (1.0 + e);
  return {z >= 0.0 ? inv : e * inv, e * inv * inv};
}

/// T_beta z = max(-beta, min(beta, z)).
double truncate(double beta, double z);

/// f_w(x) = sum_k w^{(L)}_{1,1,k} f^{(L)}_{k,1}(x).
double forward(const WeightVector& w, std::span<const double> x);
double forward(const WeightLayout& layout, std::span<const double> w,
               std::span<const double> x);

/// f^{(L)}_{k,1}(x), the output of subnetwork k before the outer weight.
double subnet_output(const WeightLayout& layout, std::span<const double> w, std::size_t k,
                     std::span<const double> x);
double subnet_output(const WeightVector& w, std::size_t k, std::span<const double> x);

/// All activations f^{(l)}_{k,i}(x), i = 1..rows, for 1 <= l <= L.
/// Layer L has a single neuron.
std::vector<double> hidden_outputs(const WeightVector& w, std::size_t k, std::size_t l,
                                   std::span<const double> x);

/// F_n(w) = (1/n) sum_i |f_w(X_i) - Y_i|^2, summed in ascending i.
double empirical_risk(const WeightVector& w, const Dataset& data);
double empirical_risk(const WeightLayout& layout, std::span<const double> w,
                      const Dataset& data);

/// Trained network plus truncation level: m_n(x) = T_beta f_w(x).
struct Estimator {
  WeightVector weights;
  double beta = 1.0;

  const Architecture& arch() const { return weights.arch(); }
};

double predict(const Estimator& est, std::span<const double> x);

}  // namespace opnn
