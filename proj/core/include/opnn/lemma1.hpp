#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "opnn/initialization.hpp"

namespace opnn {

/// A nonnegative objective F(u, v), convex in u, with its gradient and the
/// constants of the descent bound. D_n and L_n start at 0 and are filled
/// by certify().
struct Lemma1Instance {
  using Objective = std::function<double(std::span<const double> u, std::span<const double> v)>;
  using Gradient = std::function<void(std::span<const double> u, std::span<const double> v,
                                      std::span<double> grad_u, std::span<double> grad_v)>;

  std::string name;
  std::size_t dim_u = 1;
  std::size_t dim_v = 1;
  Objective F;
  Gradient grad;
  std::vector<double> u0, v0, u_star;
  double D_n = 0.0;
  double L_n = 0.0;

  double F0() const { return F(u0, v0); }
  /// Radius of the region A around (u0, v0): 2 sqrt(F0) + 1.
  double region_radius() const;
};

struct Certification {
  double grad_max = 0.0;  // max ||grad F|| over the grid on A
  double hessian_max = 0.0;  // max Frobenius norm of the FD Hessian over A
  double difference_max = 0.0;  // max |F(u*,v)-F(u*,v0)| / (||u*|| ||v-v0||)
  /// False when ||u*|| = 0 while F(u*, .) varies on the v-ball: no finite
  /// D_n satisfies the hypothesis.
  bool d_certified = true;
  std::size_t grid_points = 0;
};

/// Dense-grid maximization over A (pitch `pitch` per axis, points inside
/// the ball only), inflated by `inflation`. Writes inst.L_n and inst.D_n.
/// Throws std::invalid_argument when the grid would exceed 5e7 points.
Certification certify(Lemma1Instance& inst, double pitch = 1e-2, double inflation = 1.05);

struct Lemma1Report {
  std::size_t t_n = 0;
  double lambda = 0.0;
  double F0 = 0.0;
  double F_final = 0.0;
  double F_star = 0.0;  // F(u*, v0)
  double rhs = 0.0;  // right-hand side of the conclusion
  double displacement_bound = 0.0;  // sqrt(2 F0)
  double max_u_displacement = 0.0;
  double max_v_displacement = 0.0;
  std::vector<std::size_t> monotone_violations;  // t with F_{t+1} > F_t + tolerance
  bool hypotheses_certified = true;  // the D_n hypothesis holds on the v-ball
  bool conclusion_ok = false;  // (a)
  bool displacement_ok = false;  // (b)
  bool monotone_ok = false;  // (c)

  /// (b) and (c) always; (a) only where the D_n hypothesis was certified.
  bool ok() const { return displacement_ok && monotone_ok && (conclusion_ok || !hypotheses_certified); }
};

/// Joint gradient descent on (u, v) with lambda = 1/t_n for t_n steps.
/// Requires t_n >= inst.L_n > 0.
Lemma1Report lemma1_run(const Lemma1Instance& inst, std::size_t t_n, bool d_certified = true,
                        double tolerance = 1e-12);

/// F(u,v) = (u - sin v)^2, u0 = 1, v0 = 0, u* = 0.
Lemma1Instance sine_instance();
/// F(u,v) = u^2 + v^2 started at its minimizer.
Lemma1Instance fixed_point_instance();
/// F(u,v) = (u - M v)^2 + alpha (v - v0)^2 with M, u0, v0 uniform on [-1,1],
/// alpha uniform on [0.1,1], and u* = M v0.
Lemma1Instance random_quadratic_instance(Rng& rng);

}  // namespace opnn
