#pragma once

#include <cstdint>
#include <random>
#include <string>

#include "opnn/architecture.hpp"

namespace opnn {

using Rng = std::mt19937_64;

struct RngSeed {
  std::uint64_t value = 0;
};

/// Independent child stream for (seed, stream, index), e.g. one per
/// Monte Carlo repetition and purpose. Streams never share state.
Rng make_rng(RngSeed seed, std::uint64_t stream = 0, std::uint64_t index = 0);

/// Half-widths of the uniform initialization intervals.
struct InitBounds {
  double layer0 = 0.0;  // 8 d (log n)^2 n^tau
  double hidden = 0.0;  // 20 d (log n)^2, layers 1..L-1
};

/// Bounds for the plain estimator. `hidden_dim` and `layer0_dim` are both d
/// there; the interaction model uses d* for the hidden layers.
InitBounds init_bounds(std::size_t hidden_dim, std::size_t layer0_dim, std::size_t n, double tau);

/// Outer weights exactly zero; inner weights i.i.d. uniform within `bounds`,
/// drawn subnet-major, layer-major, row-major. Requires n >= 3.
WeightVector init_weights(const Architecture& arch, std::size_t n, double tau, Rng& rng);
WeightVector init_weights(const Architecture& arch, const InitBounds& bounds, Rng& rng);

/// A positive number kept as its natural logarithm, for values like n^{6d+r+2}.
struct ExtendedReal {
  double log_value = 0.0;

  double value() const;  // +inf when out of double range
  std::string to_string() const;
  bool exceeds(double limit) const;
};

enum class TheoryVariant {
  consistency,  // L_n >= K^{3/2} (log n)^{6L+5}
  rate,         // L_n >= K^{3/2} (log n)^{6L+2}
};

enum class ParamMode { theory, desk };

struct TheoryRequest {
  std::size_t d = 1;
  std::size_t r = 2;
  std::size_t L = 2;
  std::size_t n = 100;
  double c1 = 4.0;
  double c2 = 1.0;
  TheoryVariant variant = TheoryVariant::rate;
  ParamMode mode = ParamMode::desk;
  std::size_t desk_K = 0;     // 0 selects max(8n, 512)
  std::size_t desk_t = 2000;
  double K_budget = 1e6;
  double t_budget = 1e8;
};

/// Literal theory-scale parameters next to the values a run actually uses.
///
/// In desk mode `K` and `t_n` are the desk substitutes. In theory mode they
/// are the theory values when both fit the budgets; otherwise `feasible` is
/// false and the desk substitutes are used. Always lambda = 1 / t_n.
struct TheoryParams {
  double tau = 0.0;
  double beta = 0.0;
  ExtendedReal K_theory;
  ExtendedReal L_theory;
  ExtendedReal t_theory;
  int log_exponent = 0;  // exponent of log n inside L_n
  std::size_t K = 0;
  std::size_t t_n = 0;
  double lambda = 0.0;
  double c1 = 0.0;
  double c2 = 0.0;
  bool feasible = false;
  ParamMode mode = ParamMode::desk;
};

TheoryParams theory_params(const TheoryRequest& req);

/// Desk default K(n) = max(8n, 512).
std::size_t desk_subnet_count(std::size_t n);

}  // namespace opnn
