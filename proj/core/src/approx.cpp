#include "opnn/approx.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>

#include "json.hpp"

#include "opnn/network.hpp"

namespace opnn {

double gate_margin_value(GateMargin margin, std::size_t n) {
  return margin == GateMargin::robust ? 0.5 : 1.0 / static_cast<double>(n);
}

GridSpec GridSpec::make(std::size_t K, std::size_t d, std::size_t repetitions) {
  GridSpec g;
  g.K = K;
  g.d = d;
  g.shift_steps.assign(d, 0);
  g.repetitions = repetitions;
  g.validate();
  return g;
}

void GridSpec::validate() const {
  if (K < 2) throw std::invalid_argument("grid: K must be >= 2");
  if (d < 1) throw std::invalid_argument("grid: d must be >= 1");
  if (repetitions < 1) throw std::invalid_argument("grid: N_n must be >= 1");
  if (shift_steps.size() != d) throw std::invalid_argument("grid: one shift per coordinate");
  for (std::size_t s : shift_steps)
    if (s >= K) throw std::invalid_argument("grid: shift step must be < K");
  if (std::pow(static_cast<double>(cells_per_axis()), static_cast<double>(d)) > 1e8)
    throw std::invalid_argument("grid: too many cubes");
}

double GridSpec::shift(std::size_t j) const {
  return static_cast<double>(shift_steps[j]) * 2.0 / static_cast<double>(K * K);
}

double GridSpec::origin(std::size_t j) const {
  const double k = static_cast<double>(K);
  return -k - 2.0 / k + shift(j);
}

std::size_t GridSpec::cube_count() const {
  std::size_t c = 1;
  for (std::size_t j = 0; j < d; ++j) c *= cells_per_axis();
  return c;
}

std::vector<double> GridSpec::corner(std::size_t index) const {
  std::vector<double> u(d);
  for (std::size_t j = 0; j < d; ++j) {
    const std::size_t i = index % cells_per_axis();
    index /= cells_per_axis();
    u[j] = origin(j) + static_cast<double>(i) * cube_side();
  }
  return u;
}

bool GridSpec::in_band(std::size_t j, double xj) const {
  const double t = (xj - origin(j)) / cube_side();
  const double i = std::clamp(std::round(t), 0.0, static_cast<double>(cells_per_axis()));
  return std::abs(xj - (origin(j) + i * cube_side())) < delta();
}

bool GridSpec::in_band(std::span<const double> x) const {
  for (std::size_t j = 0; j < d; ++j)
    if (in_band(j, x[j])) return true;
  return false;
}

std::size_t GridSpec::locate(std::span<const double> x) const {
  std::size_t index = 0, stride = 1;
  for (std::size_t j = 0; j < d; ++j) {
    const double t = std::floor((x[j] - origin(j)) / cube_side());
    if (t < 0.0 || t >= static_cast<double>(cells_per_axis())) return cube_count();
    index += static_cast<std::size_t>(t) * stride;
    stride *= cells_per_axis();
  }
  return index;
}

std::vector<double> build_indicator_subnet(const Architecture& arch, std::span<const double> u,
                                           double side, std::size_t n, GateMargin margin) {
  arch.validate();
  const std::size_t d = arch.input_dim, r = arch.width, L = arch.depth;
  if (u.size() != d) throw std::invalid_argument("indicator: corner dimension mismatch");
  if (n < 3 || static_cast<double>(n) < 8.0 * static_cast<double>(d) ||
      static_cast<double>(n) < std::exp(static_cast<double>(r) + 1.0))
    throw std::invalid_argument("indicator: need n >= max(8d, e^{r+1})");
  if (!(side > 0.0)) throw std::invalid_argument("indicator: side must be positive");

  const double K = 2.0 / side;
  const double c = std::log(static_cast<double>(n)) * std::log(static_cast<double>(n));
  const double a = 4.0 * static_cast<double>(d) * K * K * c;
  WeightVector w(Architecture{d, L, r, 1});
  for (std::size_t j = 0; j < d; ++j) {
    w.at({0, 0, j, j + 1}) = a;
    w.at({0, 0, j, 0}) = -a * u[j];
    w.at({0, 0, j + d, j + 1}) = -a;
    w.at({0, 0, j + d, 0}) = a * (u[j] + side);
  }
  for (std::size_t t = 1; t <= 2 * d; ++t) w.at({1, 0, 0, t}) = 8.0 * c;
  w.at({1, 0, 0, 0}) = -8.0 * c * (2.0 * static_cast<double>(d) - gate_margin_value(margin, n));
  for (std::size_t l = 2; l < L; ++l) {
    w.at({l, 0, 0, 1}) = 6.0 * c;
    w.at({l, 0, 0, 0}) = -3.0 * c;
  }
  const auto inner = w.values().subspan(w.layout().subnet_begin(0));
  return {inner.begin(), inner.end()};
}

double ApproxPlan::alpha_square_sum() const {
  double s = 0.0;
  for (double a : alphas) s += a * a;
  return s;
}

ApproxPlan build_plan(const ApproxTarget& target, const GridSpec& grid, std::size_t n,
                      const Architecture& arch, GateMargin margin,
                      std::vector<std::size_t> hosts) {
  grid.validate();
  arch.validate();
  if (arch.input_dim != grid.d) throw std::invalid_argument("plan: dimension mismatch");
  if (!(target.sup_norm >= 0.0)) throw std::invalid_argument("plan: sup_norm must be >= 0");
  const std::size_t slots = grid.repetitions * grid.cube_count();
  if (slots > arch.subnets)
    throw std::invalid_argument("plan: N_n (K^2+1)^d = " + std::to_string(slots) +
                                " exceeds the subnet count " + std::to_string(arch.subnets));
  if (hosts.empty()) {
    hosts.resize(slots);
    std::iota(hosts.begin(), hosts.end(), std::size_t{0});
  }
  if (hosts.size() != slots) throw std::invalid_argument("plan: one host per slot");
  std::vector<bool> used(arch.subnets, false);
  for (std::size_t h : hosts) {
    if (h >= arch.subnets || used[h]) throw std::invalid_argument("plan: hosts must be distinct");
    used[h] = true;
  }

  ApproxPlan plan;
  plan.grid = grid;
  plan.n = n;
  plan.margin = margin;
  plan.weights = WeightVector(arch);
  plan.hosts = std::move(hosts);
  plan.target_sup = target.sup_norm;
  const double N = static_cast<double>(grid.repetitions);
  const double cap = target.sup_norm / N;
  const WeightLayout& layout = plan.weights.layout();
  for (std::size_t s = 0; s < slots; ++s) {
    const std::size_t cube = s % grid.cube_count();
    std::vector<double> u = grid.corner(cube);
    std::vector<double> block = build_indicator_subnet(arch, u, grid.cube_side(), n, margin);
    std::copy(block.begin(), block.end(),
              plan.weights.values().begin() +
                  static_cast<std::ptrdiff_t>(layout.subnet_begin(plan.hosts[s])));
    std::vector<double> center(u);
    for (double& v : center) v += 0.5 * grid.cube_side();
    const double alpha = std::clamp(target.m(center) / N, -cap, cap);
    plan.alphas.push_back(alpha);
    plan.weights.outer(plan.hosts[s]) = alpha;
  }
  return plan;
}

double band_mass(const GridSpec& grid, std::span<const double> sample_x) {
  if (sample_x.empty() || sample_x.size() % grid.d)
    throw std::invalid_argument("band_mass: sample must hold whole points");
  const std::size_t m = sample_x.size() / grid.d;
  std::size_t inside = 0;
  for (std::size_t i = 0; i < m; ++i)
    if (grid.in_band(sample_x.subspan(i * grid.d, grid.d))) ++inside;
  return static_cast<double>(inside) / static_cast<double>(m);
}

GridSpec choose_shift(const GridSpec& grid, std::span<const double> sample_x) {
  if (sample_x.empty() || sample_x.size() % grid.d)
    throw std::invalid_argument("choose_shift: sample must hold whole points");
  GridSpec out = grid;
  const std::size_t m = sample_x.size() / grid.d;
  for (std::size_t j = 0; j < grid.d; ++j) {
    std::size_t best = 0, best_count = m + 1;
    for (std::size_t s = 0; s < grid.K; ++s) {
      out.shift_steps[j] = s;
      std::size_t count = 0;
      for (std::size_t i = 0; i < m; ++i)
        if (out.in_band(j, sample_x[i * grid.d + j])) ++count;
      if (count < best_count) {
        best = s;
        best_count = count;
      }
    }
    out.shift_steps[j] = best;
  }
  return out;
}

namespace {

struct PointSet {
  std::vector<double> x;  // row-major
  std::size_t count = 0;
};

PointSet domain_points(std::size_t d, double lo, double hi, const EvalOptions& opts,
                       std::uint64_t stream) {
  PointSet p;
  if (d == 1) {
    const std::size_t m = std::max<std::size_t>(opts.grid_points, 2);
    p.count = m;
    p.x.resize(m);
    for (std::size_t i = 0; i < m; ++i)
      p.x[i] = lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(m - 1);
    return p;
  }
  Rng rng = make_rng(RngSeed{opts.seed}, stream);
  std::uniform_real_distribution<double> unif(lo, hi);
  p.count = opts.mc_points;
  p.x.resize(p.count * d);
  for (double& v : p.x) v = unif(rng);
  return p;
}

}  // namespace

PlanError eval_plan_error(const ApproxPlan& plan, const ApproxTarget& target,
                          const EvalOptions& opts) {
  return eval_plan_error(plan, plan.weights, target, opts);
}

PlanError eval_plan_error(const ApproxPlan& plan, const WeightVector& weights,
                          const ApproxTarget& target, const EvalOptions& opts) {
  if (!(opts.lo < opts.hi)) throw std::invalid_argument("eval: need lo < hi");
  const GridSpec& g = plan.grid;
  const std::size_t d = g.d;
  const WeightLayout& layout = weights.layout();
  PlanError err;
  const double K = static_cast<double>(g.K);
  err.sup_bound = plan.target_sup * (std::pow(3.0, static_cast<double>(d)) +
                                     static_cast<double>(g.cube_count()) /
                                         static_cast<double>(plan.n));

  std::vector<double> sub(plan.hosts.size());
  auto evaluate = [&](std::span<const double> x) {
    double f = 0.0;
    for (std::size_t s = 0; s < plan.hosts.size(); ++s) {
      const std::size_t k = plan.hosts[s];
      sub[s] = subnet_output(layout, weights.values(), k, x);
      f += weights.outer(k) * sub[s];
    }
    return f;
  };

  const PointSet dom = domain_points(d, opts.lo, opts.hi, opts, 1);
  std::size_t in_band = 0;
  double sq = 0.0;
  for (std::size_t i = 0; i < dom.count; ++i) {
    std::span<const double> x(dom.x.data() + i * d, d);
    const double f = evaluate(x);
    const double e = f - target.m(x);
    sq += e * e;
    err.sup_norm = std::max(err.sup_norm, std::abs(f));
    if (g.in_band(x)) {
      ++in_band;
      continue;
    }
    err.sup_offband = std::max(err.sup_offband, std::abs(e));
    const std::size_t cube = g.locate(x);
    for (std::size_t s = 0; s < plan.hosts.size(); ++s) {
      const double ind = (s % g.cube_count()) == cube ? 1.0 : 0.0;
      err.indicator_deviation = std::max(err.indicator_deviation, std::abs(sub[s] - ind));
    }
  }
  err.l2_error = sq / static_cast<double>(dom.count);
  err.band_mass = static_cast<double>(in_band) / static_cast<double>(dom.count);

  // Sup over the whole grid box plus a unit margin, where the bound must also hold.
  const PointSet box = domain_points(d, -K - 2.0 / K - 1.0, K + 1.0, opts, 2);
  for (std::size_t i = 0; i < box.count; ++i)
    err.sup_norm = std::max(err.sup_norm, std::abs(evaluate({box.x.data() + i * d, d})));
  return err;
}

PerturbReport perturb_and_check(const ApproxPlan& plan, const ApproxTarget& target,
                                double magnitude, std::size_t trials, Rng& rng,
                                const EvalOptions& opts) {
  if (!(magnitude >= 0.0)) throw std::invalid_argument("perturb: magnitude must be >= 0");
  PerturbReport rep;
  rep.trials = trials;
  rep.magnitude = magnitude;
  rep.baseline = eval_plan_error(plan, target, opts);
  rep.worst = rep.baseline;
  rep.sup_failures = 0;
  const WeightLayout& layout = plan.weights.layout();
  std::uniform_real_distribution<double> noise(-magnitude, magnitude);
  for (std::size_t t = 0; t < trials; ++t) {
    WeightVector w = plan.weights;
    if (magnitude > 0.0) {
      for (std::size_t k : plan.hosts) {
        const std::size_t begin = layout.subnet_begin(k);
        for (std::size_t i = 0; i < layout.inner_per_subnet(); ++i) w[begin + i] += noise(rng);
      }
    }
    const PlanError e = eval_plan_error(plan, w, target, opts);
    if (!e.sup_ok()) ++rep.sup_failures;
    rep.worst.l2_error = std::max(rep.worst.l2_error, e.l2_error);
    rep.worst.sup_offband = std::max(rep.worst.sup_offband, e.sup_offband);
    rep.worst.sup_norm = std::max(rep.worst.sup_norm, e.sup_norm);
    rep.worst.indicator_deviation = std::max(rep.worst.indicator_deviation, e.indicator_deviation);
  }
  return rep;
}

std::string plan_json(const ApproxPlan& plan) {
  const WeightLayout& layout = plan.weights.layout();
  nlohmann::json blocks = nlohmann::json::array();
  for (std::size_t k : plan.hosts) {
    const auto inner =
        plan.weights.values().subspan(layout.subnet_begin(k), layout.inner_per_subnet());
    blocks.push_back(std::vector<double>(inner.begin(), inner.end()));
  }
  const Architecture& a = plan.arch();
  const nlohmann::json doc = {
      {"grid",
       {{"K", plan.grid.K},
        {"d", plan.grid.d},
        {"repetitions", plan.grid.repetitions},
        {"shift_steps", plan.grid.shift_steps},
        {"cube_side", plan.grid.cube_side()},
        {"delta", plan.grid.delta()}}},
      {"arch", {{"d", a.input_dim}, {"L", a.depth}, {"r", a.width}, {"K", a.subnets}}},
      {"n", plan.n},
      {"gate_margin", plan.margin == GateMargin::robust ? "robust" : "literal"},
      {"target_sup", plan.target_sup},
      {"hosts", plan.hosts},
      {"alphas", plan.alphas},
      {"blocks", blocks},
  };
  return doc.dump(2);
}

std::string plan_error_json(const PlanError& err) {
  const nlohmann::json doc = {{"l2_error", err.l2_error},       {"sup_offband", err.sup_offband},
          {"sup_norm", err.sup_norm},       {"sup_bound", err.sup_bound},
          {"band_mass", err.band_mass},     {"indicator_deviation", err.indicator_deviation},
          {"sup_ok", err.sup_ok()}};
  return doc.dump(2);
}

}  // namespace opnn
