#pragma once

#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <vector>

#include "opnn/initialization.hpp"
#include "opnn/model.hpp"
#include "opnn/network.hpp"

namespace opnn {

struct TrainConfig {
  std::size_t steps = 2000;       // t_n
  double step_size = 1.0 / 2000;  // lambda
  double beta = 1.0;              // truncation level of the fitted estimate
  bool record_trace = true;
  double monitor_tolerance = 1e-9;
  bool theory_faithful = true;  // requires step_size == 1 / steps

  /// lambda = 1 / t_n.
  static TrainConfig faithful(std::size_t steps, double beta);
  void validate() const;
};

/// Per-step record of a gradient-descent run. Index t refers to w^{(t)}.
struct TrainingTrace {
  std::vector<double> risk;  // F_n(w^{(t)}), t = 0..t_n
  std::vector<double> grad_norm;
  std::vector<double> inner_displacement;  // ||inner(w^{(t)}) - inner(w^{(0)})||
  std::vector<double> outer_displacement;
  std::vector<std::size_t> monotone_violations;      // t with F(w^{(t)}) > F(w^{(t-1)})
  std::vector<std::size_t> displacement_violations;  // t exceeding the bound
  double displacement_bound = 0.0;                   // sqrt(2 F_n(w^{(0)}))
  double tolerance = 0.0;

  bool monotone() const { return monotone_violations.empty(); }
  double initial_risk() const { return risk.front(); }
  double final_risk() const { return risk.back(); }
};

/// Thrown when the risk or gradient becomes non-finite.
class DivergenceError : public std::runtime_error {
 public:
  DivergenceError(std::size_t step, const std::string& what)
      : std::runtime_error(what), step_(step) {}
  std::size_t step() const { return step_; }

 private:
  std::size_t step_;
};

struct TrainResult {
  std::vector<double> weights;  // w^{(t_n)}
  TrainingTrace trace;
};

/// Exactly cfg.steps full-batch steps w <- w - lambda grad F_n(w).
TrainResult train(RiskModel& model, const Dataset& data, std::span<const double> init,
                  const TrainConfig& cfg);

std::pair<WeightVector, TrainingTrace> train(const WeightVector& init, const Dataset& data,
                                             const TrainConfig& cfg);

/// init_weights -> train -> truncate at cfg.beta.
Estimator fit_estimator(const Architecture& arch, const Dataset& data, double tau,
                        const TrainConfig& cfg, RngSeed seed, TrainingTrace* trace = nullptr);

/// Columns: step,risk,grad_norm,inner_disp,outer_disp,monotone_ok,disp_ok.
void write_trace_csv(std::ostream& out, const TrainingTrace& trace);

/// Shortest decimal form that round-trips a double.
std::string format_double(double v);

}  // namespace opnn
