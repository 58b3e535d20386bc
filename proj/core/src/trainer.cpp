#include "opnn/trainer.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <ostream>
#include <string>

namespace opnn {
namespace {

bool all_finite(std::span<const double> v) {
  return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
}

}  // namespace

TrainConfig TrainConfig::faithful(std::size_t steps, double beta) {
  TrainConfig cfg;
  cfg.steps = steps;
  cfg.step_size = steps == 0 ? 1.0 : 1.0 / static_cast<double>(steps);
  cfg.beta = beta;
  return cfg;
}

void TrainConfig::validate() const {
  if (!(step_size > 0.0) || !std::isfinite(step_size))
    throw std::invalid_argument("train: step size must be positive");
  if (!(beta > 0.0)) throw std::invalid_argument("train: beta must be positive");
  if (!(monitor_tolerance >= 0.0))
    throw std::invalid_argument("train: monitor tolerance must be nonnegative");
  if (theory_faithful && steps > 0 && step_size != 1.0 / static_cast<double>(steps))
    throw std::invalid_argument("train: theory-faithful mode requires lambda = 1/t_n");
}

TrainResult train(RiskModel& model, const Dataset& data, std::span<const double> init,
                  const TrainConfig& cfg) {
  cfg.validate();
  if (data.size() == 0) throw std::invalid_argument("train: empty dataset");
  if (data.dim() != model.input_dim())
    throw std::invalid_argument("train: dataset dimension does not match the model");
  const std::size_t P = model.parameter_count();
  if (init.size() != P) throw std::invalid_argument("train: initial weight size mismatch");

  TrainResult result;
  result.weights.assign(init.begin(), init.end());
  std::vector<double>& w = result.weights;
  std::vector<double> grad(P);
  TrainingTrace& trace = result.trace;
  trace.tolerance = cfg.monitor_tolerance;

  std::vector<std::size_t> inner_idx, outer_idx;
  for (std::size_t i = 0; i < P; ++i) (model.is_outer(i) ? outer_idx : inner_idx).push_back(i);

  auto displacement = [&](const std::vector<std::size_t>& idx) {
    double sum = 0.0;
    for (std::size_t i : idx) {
      const double d = w[i] - init[i];
      sum += d * d;
    }
    return std::sqrt(sum);
  };

  double previous = 0.0;
  for (std::size_t t = 0; t <= cfg.steps; ++t) {
    const double risk = model.risk_and_gradient(w, data, grad);
    if (!std::isfinite(risk) || !all_finite(grad))
      throw DivergenceError(t, "train: non-finite risk or gradient at step " + std::to_string(t));

    if (t == 0) trace.displacement_bound = std::sqrt(2.0 * risk);
    if (t > 0 && risk > previous) trace.monotone_violations.push_back(t);
    previous = risk;

    if (cfg.record_trace || t == 0 || t == cfg.steps) {
      trace.risk.push_back(risk);
      trace.grad_norm.push_back(euclidean_norm(grad));
      const double inner = displacement(inner_idx), outer = displacement(outer_idx);
      trace.inner_displacement.push_back(inner);
      trace.outer_displacement.push_back(outer);
      const double limit = trace.displacement_bound + cfg.monitor_tolerance;
      if (inner > limit || outer > limit) trace.displacement_violations.push_back(t);
    }
    if (t == cfg.steps) break;
    for (std::size_t i = 0; i < P; ++i) w[i] -= cfg.step_size * grad[i];
  }
  return result;
}

std::pair<WeightVector, TrainingTrace> train(const WeightVector& init, const Dataset& data,
                                             const TrainConfig& cfg) {
  NetworkModel model(init.arch());
  TrainResult r = train(model, data, init.values(), cfg);
  return {WeightVector(init.arch(), std::move(r.weights)), std::move(r.trace)};
}

Estimator fit_estimator(const Architecture& arch, const Dataset& data, double tau,
                        const TrainConfig& cfg, RngSeed seed, TrainingTrace* trace) {
  Rng rng = make_rng(seed);
  WeightVector init = init_weights(arch, data.size(), tau, rng);
  auto [weights, tr] = train(init, data, cfg);
  if (trace) *trace = std::move(tr);
  return Estimator{std::move(weights), cfg.beta};
}

std::string format_double(double v) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, end);
}

void write_trace_csv(std::ostream& out, const TrainingTrace& trace) {
  out << "step,risk,grad_norm,inner_disp,outer_disp,monotone_ok,disp_ok\n";
  const double limit = trace.displacement_bound + trace.tolerance;
  for (std::size_t t = 0; t < trace.risk.size(); ++t) {
    const bool mono = t == 0 || trace.risk[t] <= trace.risk[t - 1];
    const bool disp =
        trace.inner_displacement[t] <= limit && trace.outer_displacement[t] <= limit;
    out << t << ',' << format_double(trace.risk[t]) << ',' << format_double(trace.grad_norm[t])
        << ',' << format_double(trace.inner_displacement[t]) << ','
        << format_double(trace.outer_displacement[t]) << ',' << (mono ? 1 : 0) << ','
        << (disp ? 1 : 0) << '\n';
  }
}

}  // namespace opnn
