#include "opnn/experiments.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <ostream>
#include <stdexcept>

namespace opnn {
namespace {

std::uint64_t cell_index(std::size_t n, std::size_t rep) {
  return (static_cast<std::uint64_t>(n) << 20) | static_cast<std::uint64_t>(rep);
}

RateCell summarize(std::size_t n, std::size_t K, std::size_t t, std::span<const RateRow> rows) {
  RateCell cell{n, K, t, 0, 0, 0.0, 0.0};
  double sum = 0.0;
  for (const RateRow& r : rows) {
    if (r.diverged) {
      ++cell.diverged;
      continue;
    }
    ++cell.used;
    sum += r.l2_error;
  }
  if (cell.used == 0) {
    cell.mean = std::numeric_limits<double>::quiet_NaN();
    return cell;
  }
  cell.mean = sum / static_cast<double>(cell.used);
  if (cell.used > 1) {
    double ss = 0.0;
    for (const RateRow& r : rows)
      if (!r.diverged) ss += (r.l2_error - cell.mean) * (r.l2_error - cell.mean);
    cell.std_error = std::sqrt(ss / static_cast<double>(cell.used - 1) /
                               static_cast<double>(cell.used));
  }
  return cell;
}

}  // namespace

std::vector<std::string> shipped_target_names() {
  return {"abs1d", "sqrt1d", "product2d", "additive3d", "pairwise3d"};
}

TargetSpec shipped_target(const std::string& name) {
  using std::numbers::pi;
  TargetSpec t;
  t.name = name;
  if (name == "abs1d") {
    t.d = 1;
    t.m = [](std::span<const double> x) { return std::abs(x[0] - 0.5); };
    t.smoothness = 1.0;
    t.holder_constant = 1.0;
    t.sup_norm = 0.5;
    t.lipschitz = 1.0;
  } else if (name == "sqrt1d") {
    t.d = 1;
    t.m = [](std::span<const double> x) { return std::sqrt(std::abs(x[0] - 0.5)); };
    t.smoothness = 0.5;
    t.holder_constant = 1.0;
    t.sup_norm = std::sqrt(0.5);
  } else if (name == "product2d") {
    t.d = 2;
    t.m = [](std::span<const double> x) { return std::sin(pi * x[0]) * std::sin(pi * x[1]); };
    t.smoothness = 1.0;
    t.holder_constant = pi * std::sqrt(2.0);
    t.sup_norm = 1.0;
    t.lipschitz = pi * std::sqrt(2.0);
  } else if (name == "additive3d") {
    t.d = 3;
    t.d_star = 1;
    t.component = [](std::span<const double> x) { return std::sin(2.0 * pi * x[0]); };
    t.m = [](std::span<const double> x) {
      return std::sin(2.0 * pi * x[0]) + std::sin(2.0 * pi * x[1]) + std::sin(2.0 * pi * x[2]);
    };
    t.smoothness = 1.0;
    t.holder_constant = 2.0 * pi;
    t.sup_norm = 3.0;
    t.lipschitz = 2.0 * pi * std::sqrt(3.0);
  } else if (name == "pairwise3d") {
    t.d = 3;
    t.d_star = 2;
    t.component = [](std::span<const double> x) { return x[0] * x[1]; };
    t.m = [](std::span<const double> x) { return x[0] * x[1] + x[0] * x[2] + x[1] * x[2]; };
    t.smoothness = 1.0;
    t.holder_constant = std::sqrt(2.0);
    t.sup_norm = 3.0;
    t.lipschitz = 2.0 * std::sqrt(3.0);
  } else {
    throw std::invalid_argument("unknown target '" + name + "'");
  }
  return t;
}

Dataset generate(const TargetSpec& target, std::size_t n, double noise_sd, Rng& rng) {
  if (n < 1) throw std::invalid_argument("generate: need n >= 1");
  if (!(noise_sd >= 0.0)) throw std::invalid_argument("generate: noise_sd must be >= 0");
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<double> xs(n * target.d), ys(n);
  for (std::size_t i = 0; i < n; ++i) {
    std::span<double> x(xs.data() + i * target.d, target.d);
    for (double& v : x) v = unif(rng);
    const double noise = noise_sd > 0.0 ? noise_sd * normal(rng) : 0.0;
    ys[i] = target(x) + noise;
  }
  return Dataset(target.d, std::move(xs), std::move(ys));
}

McEstimate mc_l2_error(const std::function<double(std::span<const double>)>& predictor,
                       const TargetSpec& target, std::size_t eval_n, Rng& rng) {
  if (eval_n < 1) throw std::invalid_argument("mc_l2_error: need eval_n >= 1");
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  std::vector<double> x(target.d);
  double sum = 0.0, sum_sq = 0.0;
  for (std::size_t j = 0; j < eval_n; ++j) {
    for (double& v : x) v = unif(rng);
    const double e = predictor(x) - target(x);
    sum += e * e;
    sum_sq += e * e * e * e;
  }
  const double n = static_cast<double>(eval_n);
  const double mean = sum / n;
  const double var = eval_n > 1 ? std::max(0.0, (sum_sq - n * mean * mean) / (n - 1.0)) : 0.0;
  return {mean, std::sqrt(var / n)};
}

std::size_t DeskScaling::subnets(std::size_t n) const {
  const double grown = std::ceil(K_coef * std::pow(static_cast<double>(n), K_exponent));
  std::size_t K = std::max(static_cast<std::size_t>(grown), K_min);
  if (K_max > 0) K = std::min(K, K_max);
  return std::max<std::size_t>(K, 1);
}

std::size_t DeskScaling::steps(std::size_t n) const {
  const double prop = std::ceil(t_per_K * static_cast<double>(subnets(n)));
  return std::max(t_fixed, static_cast<std::size_t>(prop));
}

void ExperimentConfig::validate() const {
  if (n_values.empty()) throw std::invalid_argument("config: n_values is empty");
  for (std::size_t i = 0; i < n_values.size(); ++i) {
    if (n_values[i] < 3) throw std::invalid_argument("config: every n must be >= 3");
    if (i > 0 && n_values[i] <= n_values[i - 1])
      throw std::invalid_argument("config: n_values must be strictly increasing");
  }
  if (reps < 1) throw std::invalid_argument("config: reps must be >= 1");
  if (!(noise_sd >= 0.0)) throw std::invalid_argument("config: noise_sd must be >= 0");
  if (eval_points < 1) throw std::invalid_argument("config: eval_points must be >= 1");
  if (depth < 2) throw std::invalid_argument("config: depth must be >= 2");
  if (!(c1 > 0.0)) throw std::invalid_argument("config: c1 must be positive");
  if (!(scaling.K_coef >= 0.0) || !(scaling.K_exponent >= 0.0) || !(scaling.t_per_K >= 0.0) ||
      !std::isfinite(scaling.K_coef) || !std::isfinite(scaling.K_exponent) ||
      !std::isfinite(scaling.t_per_K))
    throw std::invalid_argument("config: scaling coefficients must be finite and >= 0");
  if (scaling.steps(n_values.front()) < 1) throw std::invalid_argument("config: t_n must be >= 1");
  (void)shipped_target(target);
}

SlopeFit fit_log_log_slope(std::span<const RateCell> cells) {
  std::vector<double> lx, ly, rel_se;
  for (const RateCell& c : cells) {
    if (c.used == 0 || !(c.mean > 0.0)) continue;
    lx.push_back(std::log(static_cast<double>(c.n)));
    ly.push_back(std::log(c.mean));
    rel_se.push_back(c.std_error / c.mean);
  }
  if (lx.size() < 2) throw std::invalid_argument("slope fit: need at least two usable cells");
  const double m = static_cast<double>(lx.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < lx.size(); ++i) {
    mx += lx[i];
    my += ly[i];
  }
  mx /= m;
  my /= m;
  double sxx = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < lx.size(); ++i) {
    sxx += (lx[i] - mx) * (lx[i] - mx);
    sxy += (lx[i] - mx) * (ly[i] - my);
  }
  SlopeFit fit;
  fit.slope = sxy / sxx;
  fit.intercept = my - fit.slope * mx;
  double var = 0.0;
  for (std::size_t i = 0; i < lx.size(); ++i) {
    const double c = (lx[i] - mx) / sxx;
    var += c * c * rel_se[i] * rel_se[i];
  }
  fit.half_width = 1.96 * std::sqrt(var);
  return fit;
}

bool RateReport::monotone_within_pooled_se() const {
  for (std::size_t i = 1; i < cells.size(); ++i) {
    const RateCell& a = cells[i - 1];
    const RateCell& b = cells[i];
    const double pooled = std::sqrt(a.std_error * a.std_error + b.std_error * b.std_error);
    if (!(b.mean <= a.mean + pooled)) return false;
  }
  return true;
}

RateReport rate_sweep(const ExperimentConfig& cfg) {
  cfg.validate();
  const TargetSpec target = shipped_target(cfg.target);
  RateReport report;
  report.label = "plain";
  report.theory_slope = -1.0 / (1.0 + static_cast<double>(target.d));
  const double tau = 1.0 / (1.0 + static_cast<double>(target.d));

  for (std::size_t n : cfg.n_values) {
    const std::size_t K = cfg.scaling.subnets(n), t = cfg.scaling.steps(n);
    const Architecture arch{target.d, cfg.depth, std::max(cfg.width, 2 * target.d), K};
    TrainConfig tc = TrainConfig::faithful(t, cfg.c1 * std::log(static_cast<double>(n)));
    tc.record_trace = false;
    const std::size_t first = report.rows.size();
    for (std::size_t rep = 0; rep < cfg.reps; ++rep) {
      const std::uint64_t idx = cell_index(n, rep);
      Rng data_rng = make_rng(RngSeed{cfg.seed}, static_cast<std::uint64_t>(SeedStream::data), idx);
      const Dataset data = generate(target, n, cfg.noise_sd, data_rng);
      for (double y : data.ys())
        if (std::abs(y) > tc.beta)
          report.beta_warning_max_abs_y = std::max(report.beta_warning_max_abs_y, std::abs(y));

      Rng init_rng = make_rng(RngSeed{cfg.seed}, static_cast<std::uint64_t>(SeedStream::init), idx);
      const WeightVector init = init_weights(arch, n, tau, init_rng);
      RateRow row{n, rep, 0.0, 0.0, false};
      try {
        auto [weights, trace] = train(init, data, tc);
        const Estimator est{std::move(weights), tc.beta};
        Rng eval_rng = make_rng(RngSeed{cfg.seed}, static_cast<std::uint64_t>(SeedStream::eval), idx);
        row.l2_error = mc_l2_error([&](std::span<const double> x) { return predict(est, x); },
                                   target, cfg.eval_points, eval_rng)
                           .value;
        row.train_risk_final = trace.final_risk();
      } catch (const DivergenceError&) {
        row.diverged = true;
        row.l2_error = std::numeric_limits<double>::quiet_NaN();
        row.train_risk_final = std::numeric_limits<double>::quiet_NaN();
      }
      report.rows.push_back(row);
    }
    report.cells.push_back(
        summarize(n, K, t, std::span<const RateRow>(report.rows).subspan(first)));
  }
  report.fit = fit_log_log_slope(report.cells);
  return report;
}

InteractionReport interaction_sweep(const ExperimentConfig& cfg) {
  cfg.validate();
  const TargetSpec target = shipped_target(cfg.target);
  const std::size_t d_star = cfg.d_star > 0 ? cfg.d_star : target.d_star;
  if (d_star == 0)
    throw std::invalid_argument("interaction sweep: target has no interaction structure");
  if (d_star > target.d) throw std::invalid_argument("interaction sweep: d* exceeds d");

  InteractionReport report;
  report.plain.label = "plain";
  report.interaction.label = "interaction";
  report.plain.theory_slope = -1.0 / (1.0 + static_cast<double>(target.d));
  report.interaction.theory_slope = -1.0 / (1.0 + static_cast<double>(d_star));
  const double tau = 1.0 / (1.0 + static_cast<double>(target.d));

  for (std::size_t n : cfg.n_values) {
    const std::size_t K = cfg.scaling.subnets(n), t = cfg.scaling.steps(n);
    const Architecture arch{target.d, cfg.depth, std::max(cfg.width, 2 * target.d), K};
    const InteractionArchitecture iarch = InteractionArchitecture::make(
        target.d, d_star, cfg.depth, std::max(cfg.width, 2 * d_star), K);
    TrainConfig tc = TrainConfig::faithful(t, cfg.c1 * std::log(static_cast<double>(n)));
    tc.record_trace = false;
    const std::size_t first = report.plain.rows.size();
    for (std::size_t rep = 0; rep < cfg.reps; ++rep) {
      const std::uint64_t idx = cell_index(n, rep);
      Rng data_rng = make_rng(RngSeed{cfg.seed}, static_cast<std::uint64_t>(SeedStream::data), idx);
      const Dataset data = generate(target, n, cfg.noise_sd, data_rng);

      RateRow plain{n, rep, 0.0, 0.0, false}, inter{n, rep, 0.0, 0.0, false};
      auto run_arm = [&](RiskModel& model, std::vector<double> init, RateRow& row) {
        try {
          TrainResult r = train(model, data, init, tc);
          Rng eval_rng =
              make_rng(RngSeed{cfg.seed}, static_cast<std::uint64_t>(SeedStream::eval), idx);
          row.l2_error =
              mc_l2_error([&](std::span<const double> x) {
                return truncate(tc.beta, model.output(r.weights, x));
              }, target, cfg.eval_points, eval_rng).value;
          row.train_risk_final = r.trace.final_risk();
        } catch (const DivergenceError&) {
          row.diverged = true;
          row.l2_error = std::numeric_limits<double>::quiet_NaN();
          row.train_risk_final = std::numeric_limits<double>::quiet_NaN();
        }
      };
      {
        Rng init_rng = make_rng(RngSeed{cfg.seed}, static_cast<std::uint64_t>(SeedStream::init), idx);
        WeightVector init = init_weights(arch, n, tau, init_rng);
        NetworkModel model(arch);
        run_arm(model, std::vector<double>(init.values().begin(), init.values().end()), plain);
      }
      {
        Rng init_rng = make_rng(RngSeed{cfg.seed}, static_cast<std::uint64_t>(SeedStream::init), idx);
        InteractionModel model(iarch);
        run_arm(model, interaction_init(iarch, n, init_rng), inter);
      }
      report.plain.rows.push_back(plain);
      report.interaction.rows.push_back(inter);
      report.pairs.push_back({n, rep, plain.l2_error, inter.l2_error, plain.diverged, inter.diverged});
    }
    report.plain.cells.push_back(
        summarize(n, K, t, std::span<const RateRow>(report.plain.rows).subspan(first)));
    report.interaction.cells.push_back(
        summarize(n, K, t, std::span<const RateRow>(report.interaction.rows).subspan(first)));
  }
  if (cfg.n_values.size() >= 2) {
    report.plain.fit = fit_log_log_slope(report.plain.cells);
    report.interaction.fit = fit_log_log_slope(report.interaction.cells);
  }
  std::vector<double> pe, ie;
  for (const PairedRow& p : report.pairs) {
    if (!p.plain_diverged) pe.push_back(p.plain_error);
    if (!p.interaction_diverged) ie.push_back(p.interaction_error);
  }
  report.plain_median = pe.empty() ? std::numeric_limits<double>::quiet_NaN() : median(pe);
  report.interaction_median = ie.empty() ? std::numeric_limits<double>::quiet_NaN() : median(ie);
  return report;
}

void write_rates_csv(std::ostream& out, std::span<const RateRow> rows) {
  out << "n,rep,l2_error,train_risk_final,diverged\n";
  for (const RateRow& r : rows) {
    out << r.n << ',' << r.rep << ',' << format_double(r.l2_error) << ','
        << format_double(r.train_risk_final) << ',' << (r.diverged ? 1 : 0) << '\n';
  }
}

double median(std::vector<double> v) {
  if (v.empty()) throw std::invalid_argument("median of empty sequence");
  std::sort(v.begin(), v.end());
  const std::size_t m = v.size() / 2;
  return v.size() % 2 ? v[m] : 0.5 * (v[m - 1] + v[m]);
}

}  // namespace opnn
