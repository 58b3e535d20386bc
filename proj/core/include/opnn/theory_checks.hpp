#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "opnn/architecture.hpp"
#include "opnn/initialization.hpp"

namespace opnn {

struct BoundParams {
  double B = 1.0;  // |w^{(l)}| <= B for l = 1..L-1
  double A = 1.0;  // |w^{(0)}| <= A; sampling only, the bounds never use it
  double gamma_star = 1.0;  // |outer| <= gamma*
  double alpha = 1.0;  // inputs in [-alpha, alpha]^d
  double M = 0.0;  // L2 bound on the outer block, 0 when unused
  double D = 0.0;

  void validate() const;  // B, gamma*, alpha >= 1
};

struct LayerLipschitz {
  double lhs = 0.0;  // max over subnets and neurons |f^{(l)} - fbar^{(l)}|
  double rhs = 0.0;  // (2r+1)^l B^l alpha max|w - v| for the same subnet
  bool ok = true;
};

/// Compares layer-l activations of w and v at x, subnet by subnet, against
/// max{(1/4)^l, 1} (2r+1)^l B^l alpha max|w_k - v_k| max{1, 1}, where the max
/// runs over the inner weights of subnet k. Reports the subnet with the
/// largest lhs/rhs ratio. Throws when w, v or x break the bounds.
LayerLipschitz layer_lipschitz_check(const WeightVector& w, const WeightVector& v,
                                     std::span<const double> x, std::size_t l,
                                     const BoundParams& bounds);

/// Layer 0 uniform on +-A, hidden layers on +-B, outer on +-gamma*.
WeightVector sample_bounded(const Architecture& arch, const BoundParams& bounds, Rng& rng);

struct ProbeReport {
  std::vector<std::size_t> sweep;
  std::vector<double> max_values;
  double slope = 0.0;
  double threshold = 1.75;
  bool pass() const { return slope <= threshold; }
};

/// Least-squares slope of log y on log x.
double log_log_slope(std::span<const double> x, std::span<const double> y);

struct ProbeOptions {
  std::size_t data_points = 20;  // X uniform on [-alpha, alpha]^d, Y uniform on [-1, 1]
  std::size_t samples = 20;  // weight draws (pairs for the Lipschitz probe) per K
  double pair_radius = 0.05;  // sup-norm distance between paired weights
  double threshold = 1.75;
};

/// Per K: max ||grad F_n(w)|| over sampled w. Sweep must hold >= 4 values in
/// geometric progression.
ProbeReport grad_scaling_probe(const Architecture& base, std::span<const std::size_t> K_sweep,
                               const BoundParams& bounds, const ProbeOptions& opts, Rng& rng);

/// Per K: max ||grad F_n(w1) - grad F_n(w2)|| / ||w1 - w2|| over sampled pairs.
ProbeReport lipschitz_scaling_probe(const Architecture& base,
                                    std::span<const std::size_t> K_sweep,
                                    const BoundParams& bounds, const ProbeOptions& opts,
                                    Rng& rng);

struct FunctionClassSpec {
  Architecture arch;  // per group when d_star > 0
  double A = 1.0;
  double B = 1.0;
  double C = 1.0;  // sum |outer| <= C, per group
  double beta = 1.0;
  double alpha = 1.0;
  std::size_t d = 0;  // ambient dimension; 0 means arch.input_dim
  std::size_t d_star = 0;  // > 0: sum over all d*-subsets of per-group networks

  void validate() const;
  std::size_t ambient_dim() const { return d ? d : arch.input_dim; }
};

struct CoverResult {
  std::vector<std::size_t> centers;
  bool valid = false;  // every function within epsilon of some center
  std::size_t size() const { return centers.size(); }
};

/// (1/P sum |f(x_j) - g(x_j)|^p)^{1/p} between rows of a row-major table.
double empirical_lp_distance(std::span<const double> f, std::span<const double> g, double p);

/// Greedy internal cover of the rows of `values` (rows x points): pick the
/// uncovered row covering the most uncovered rows, ties to the lowest index.
CoverResult greedy_cover(std::span<const double> values, std::size_t rows, double epsilon,
                         double p);

/// Values of T_beta f 1_{[-alpha,alpha]^d} at x_points for M sampled members
/// of the class, row-major.
std::vector<double> sample_class_values(const FunctionClassSpec& cls, std::size_t M,
                                        std::span<const double> x_points, Rng& rng);

struct CoveringEstimate {
  std::size_t N = 0;
  bool valid = false;
  double log_bound = 0.0;  // natural log of the unit-constant class bound
  bool within_bound() const;
};

/// Requires 0 < epsilon < beta and M >= 2.
CoveringEstimate covering_estimate(const FunctionClassSpec& cls, std::size_t M,
                                   std::span<const double> x_points, double epsilon, double p,
                                   Rng& rng, std::size_t smoothness_k = 2);

/// log of (beta^p/eps^p)^{alpha^d B^{(L-1)d} A^d (C/eps)^{d/k} + 1}. For
/// interaction classes, G groups at input dimension d* and accuracy eps/G
/// each, summed.
double covering_log_bound(const FunctionClassSpec& cls, double epsilon, double p,
                          std::size_t smoothness_k = 2);

/// {sweep, max_values, slope, threshold, pass} as indented JSON text.
std::string probe_json(const ProbeReport& report);

}  // namespace opnn
