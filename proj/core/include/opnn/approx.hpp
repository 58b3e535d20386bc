#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "opnn/architecture.hpp"
#include "opnn/initialization.hpp"

namespace opnn {

/// Bias of the AND neuron is -8 (log n)^2 (2d - margin). The literal
/// margin 1/n leaves a pre-activation gap of only 8 (log n)^2 / n inside the
/// cube; 1/2 keeps the gate saturated under weight perturbations.
enum class GateMargin { literal, robust };

double gate_margin_value(GateMargin margin, std::size_t n);

/// Equidistant cubes of side 2/K covering [-K-2/K, K]^d, shifted per
/// coordinate by shift_steps[j] * 2/K^2.
struct GridSpec {
  std::size_t K = 2;
  std::size_t d = 1;
  std::vector<std::size_t> shift_steps;  // each in 0..K-1
  std::size_t repetitions = 1;  // N_n

  static GridSpec make(std::size_t K, std::size_t d, std::size_t repetitions = 1);

  double cube_side() const { return 2.0 / static_cast<double>(K); }
  double delta() const { return 1.0 / static_cast<double>(K * K); }
  double shift(std::size_t j) const;
  double origin(std::size_t j) const;  // -K - 2/K + shift(j)
  std::size_t cells_per_axis() const { return K * K + 1; }
  std::size_t cube_count() const;  // (K^2+1)^d
  /// Lower corner u of cube `index` (row-major over coordinates, first fastest).
  std::vector<double> corner(std::size_t index) const;
  /// Within delta of a grid line in coordinate j.
  bool in_band(std::size_t j, double xj) const;
  bool in_band(std::span<const double> x) const;
  /// Index of the half-open cube containing x, or cube_count() if outside.
  std::size_t locate(std::span<const double> x) const;
  void validate() const;
};

/// Subnetwork weights of the indicator of [u, u + 2/K)^d, in the layout of
/// `arch` for a single subnet (outer weight excluded).
std::vector<double> build_indicator_subnet(const Architecture& arch, std::span<const double> u,
                                           double side, std::size_t n,
                                           GateMargin margin = GateMargin::literal);

struct ApproxTarget {
  std::function<double(std::span<const double>)> m;
  double sup_norm = 0.0;  // ||m||_inf on the evaluation domain
  double lipschitz = 0.0;
};

struct ApproxPlan {
  GridSpec grid;
  std::size_t n = 3;
  GateMargin margin = GateMargin::literal;
  WeightVector weights;
  std::vector<std::size_t> hosts;  // physical subnet of construction slot s
  std::vector<double> alphas;  // slot s, repetition-major
  double target_sup = 0.0;

  const Architecture& arch() const { return weights.arch(); }
  double alpha_square_sum() const;
};

/// Requires N_n (K^2+1)^d <= arch.subnets, r >= 2d, L >= 2 and
/// n >= max(8d, e^{r+1}). Slot s goes to subnet hosts[s] (identity when
/// empty); every other subnet is all zero.
ApproxPlan build_plan(const ApproxTarget& target, const GridSpec& grid, std::size_t n,
                      const Architecture& arch, GateMargin margin = GateMargin::literal,
                      std::vector<std::size_t> hosts = {});

/// Per coordinate, the shift step whose band holds the fewest sample
/// points; ties go to the smallest step.
GridSpec choose_shift(const GridSpec& grid, std::span<const double> sample_x);

/// Fraction of the row-major sample inside the band.
double band_mass(const GridSpec& grid, std::span<const double> sample_x);

struct EvalOptions {
  double lo = 0.0;  // evaluation domain [lo, hi]^d
  double hi = 1.0;
  std::size_t grid_points = 20001;  // d = 1
  std::size_t mc_points = 100000;  // d >= 2
  std::uint64_t seed = 7;
};

struct PlanError {
  double l2_error = 0.0;  // mean |f - m|^2 over the domain
  double sup_offband = 0.0;  // max |f - m| outside the band
  double sup_norm = 0.0;  // max |f| over the domain and the whole grid box
  double sup_bound = 0.0;  // ||m||_inf (3^d + (K^2+1)^d / n)
  double band_mass = 0.0;  // fraction of domain points inside the band
  double indicator_deviation = 0.0;  // max |f_k - 1{x in cube k}| off the band
  bool sup_ok() const { return sup_norm <= sup_bound; }
};

PlanError eval_plan_error(const ApproxPlan& plan, const ApproxTarget& target,
                          const EvalOptions& opts = {});
PlanError eval_plan_error(const ApproxPlan& plan, const WeightVector& weights,
                          const ApproxTarget& target, const EvalOptions& opts = {});

struct PerturbReport {
  std::size_t trials = 0;
  double magnitude = 0.0;
  PlanError baseline;
  PlanError worst;  // componentwise maxima over trials
  std::size_t sup_failures = 0;  // trials breaking the sup-norm bound
};

/// Adds independent U[-magnitude, magnitude] noise to every inner weight of
/// every hosting subnet, per trial.
PerturbReport perturb_and_check(const ApproxPlan& plan, const ApproxTarget& target,
                                double magnitude, std::size_t trials, Rng& rng,
                                const EvalOptions& opts = {});

/// Indented JSON text: grid, arch, hosts, alphas and the inner weight block
/// of every host.
std::string plan_json(const ApproxPlan& plan);
std::string plan_error_json(const PlanError& err);

}  // namespace opnn
