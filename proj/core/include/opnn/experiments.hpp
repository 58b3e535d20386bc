#pragma once

#include <functional>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "opnn/initialization.hpp"
#include "opnn/interaction.hpp"
#include "opnn/network.hpp"
#include "opnn/trainer.hpp"

namespace opnn {

/// A regression function m on [0,1]^d with the constants the experiments
/// need. Interaction targets also carry their d*-dimensional components,
/// one per subset in lexicographic order.
struct TargetSpec {
  std::string name;
  std::size_t d = 1;
  std::function<double(std::span<const double>)> m;
  double smoothness = 1.0;  // p
  double holder_constant = 1.0;  // C
  double sup_norm = 1.0;  // bound on |m| over [0,1]^d
  std::optional<double> lipschitz;
  std::size_t d_star = 0;  // 0: plain target
  std::function<double(std::span<const double>)> component;

  bool is_interaction() const { return d_star > 0; }
  double operator()(std::span<const double> x) const { return m(x); }
};

/// Names: abs1d, sqrt1d, product2d, additive3d, pairwise3d.
TargetSpec shipped_target(const std::string& name);
std::vector<std::string> shipped_target_names();

/// X uniform on [0,1]^d, Y = m(X) + noise_sd * N(0,1). X is drawn first,
/// then the noise, sample by sample.
Dataset generate(const TargetSpec& target, std::size_t n, double noise_sd, Rng& rng);

struct McEstimate {
  double value = 0.0;
  double std_error = 0.0;
};

/// (1/eval_n) sum |predictor(x_j) - m(x_j)|^2 over fresh uniform x_j.
McEstimate mc_l2_error(const std::function<double(std::span<const double>)>& predictor,
                       const TargetSpec& target, std::size_t eval_n, Rng& rng);

/// Desk-scale choice of (K, t_n) as a function of n.
struct DeskScaling {
  double K_coef = 8.0;  // K(n) = max(ceil(K_coef * n^K_exponent), K_min), capped at K_max
  double K_exponent = 1.0;
  std::size_t K_min = 512;
  std::size_t K_max = 0;  // 0: no cap
  std::size_t t_fixed = 2000;  // t_n = max(t_fixed, ceil(t_per_K * K(n)))
  double t_per_K = 0.0;

  std::size_t subnets(std::size_t n) const;
  std::size_t steps(std::size_t n) const;
};

struct ExperimentConfig {
  std::string target = "abs1d";
  std::vector<std::size_t> n_values{100, 200, 400, 800, 1600, 3200};
  std::size_t reps = 20;
  double noise_sd = 0.25;
  DeskScaling scaling;
  std::size_t depth = 2;
  std::size_t width = 2;  // raised to 2 * input dimension where needed
  double c1 = 4.0;
  std::size_t eval_points = 10000;
  std::uint64_t seed = 1;
  std::size_t d_star = 0;  // interaction sweeps: 0 takes the target's d*

  void validate() const;
};

/// Seed streams; every (stream, n index, rep) triple is independent.
enum class SeedStream : std::uint64_t { data = 1, init = 2, eval = 3 };

struct RateRow {
  std::size_t n = 0;
  std::size_t rep = 0;
  double l2_error = 0.0;
  double train_risk_final = 0.0;
  bool diverged = false;
};

struct RateCell {
  std::size_t n = 0;
  std::size_t K = 0;
  std::size_t t_n = 0;
  std::size_t used = 0;
  std::size_t diverged = 0;
  double mean = 0.0;
  double std_error = 0.0;
};

struct SlopeFit {
  double slope = 0.0;
  double intercept = 0.0;
  double half_width = 0.0;  // 95% delta-method half-width
};

/// Unweighted least squares of log(mean) on log(n); cells with zero or
/// non-positive means are rejected.
SlopeFit fit_log_log_slope(std::span<const RateCell> cells);

struct RateReport {
  std::string label;
  std::vector<RateRow> rows;
  std::vector<RateCell> cells;
  SlopeFit fit;
  double theory_slope = 0.0;  // -1/(1+d) or -1/(1+d*)
  double beta_warning_max_abs_y = 0.0;  // largest |Y| that exceeded beta, 0 if none

  /// mean[i+1] <= mean[i] + sqrt(se_i^2 + se_{i+1}^2) for consecutive cells.
  bool monotone_within_pooled_se() const;
};

RateReport rate_sweep(const ExperimentConfig& cfg);

struct PairedRow {
  std::size_t n = 0;
  std::size_t rep = 0;
  double plain_error = 0.0;
  double interaction_error = 0.0;
  bool plain_diverged = false;
  bool interaction_diverged = false;
};

struct InteractionReport {
  RateReport plain;
  RateReport interaction;
  std::vector<PairedRow> pairs;
  double plain_median = 0.0;
  double interaction_median = 0.0;
};

/// Plain d-dimensional and interaction estimators on identical data and
/// initialization seeds.
InteractionReport interaction_sweep(const ExperimentConfig& cfg);

/// Columns: n,rep,l2_error,train_risk_final,diverged.
void write_rates_csv(std::ostream& out, std::span<const RateRow> rows);

double median(std::vector<double> v);

}  // namespace opnn
