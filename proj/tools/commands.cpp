#include "commands.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "opnn/approx.hpp"
#include "opnn/experiments.hpp"
#include "opnn/gradient.hpp"
#include "opnn/interaction.hpp"
#include "opnn/lemma1.hpp"
#include "opnn/network.hpp"
#include "opnn/theory_checks.hpp"
#include "opnn/trainer.hpp"

namespace opnn {

NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(DeskScaling, K_coef, K_exponent, K_min, K_max,
                                                t_fixed, t_per_K)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(ExperimentConfig, target, n_values, reps,
                                                noise_sd, scaling, depth, width, c1, eval_points,
                                                d_star)

}  // namespace opnn

namespace opnn::cli {
namespace {

using nlohmann::json;

// Streams by purpose; a command's draws never share a stream.
enum Stream : std::uint64_t { kData = 1, kInit = 2, kEval = 3, kAux = 4 };

class Checks {
 public:
  void add(const std::string& name, bool pass, double value, double limit) {
    list_.push_back({{"name", name}, {"pass", pass}, {"value", value}, {"limit", limit}});
    all_ = all_ && pass;
  }
  bool all() const { return all_; }
  const json& doc() const { return list_; }

 private:
  json list_ = json::array();
  bool all_ = true;
};

int finish(const RunContext& ctx, json report, const Checks& checks) {
  report["checks"] = checks.doc();
  report["pass"] = checks.all();
  write_json(ctx.out, "report.json", report);
  return checks.all() ? 0 : 1;
}

template <class P>
P start(const std::string& command, const json& given, const RunContext& ctx) {
  P params = parse_params<P>(given);
  try {
    params.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  write_json(ctx.out, "config.json", effective_config(command, ctx.seed, json(params)));
  return params;
}

json theory_json(const TheoryParams& p) {
  return {{"tau", p.tau},
          {"beta", p.beta},
          {"K_theory", p.K_theory.to_string()},
          {"L_theory", p.L_theory.to_string()},
          {"t_theory", p.t_theory.to_string()},
          {"log_exponent", p.log_exponent},
          {"feasible", p.feasible},
          {"K_used", p.K},
          {"t_used", p.t_n},
          {"lambda", p.lambda}};
}

// ---------------------------------------------------------------- train

struct TrainParams {
  std::string target = "abs1d";
  std::size_t n = 50;
  double noise_sd = 0.25;
  std::size_t depth = 2;
  std::size_t width = 2;
  std::size_t subnets = 256;  // 0: max(8n, 512)
  std::size_t steps = 2000;
  double c1 = 4.0;
  std::size_t eval_points = 10000;
  double monitor_tolerance = 1e-9;

  void validate() const {
    (void)shipped_target(target);
    if (n < 3) throw std::invalid_argument("n must be >= 3");
    if (steps < 1) throw std::invalid_argument("steps must be >= 1");
    if (!(noise_sd >= 0.0) || !(c1 > 0.0) || !(monitor_tolerance >= 0.0))
      throw std::invalid_argument("noise_sd, c1 and monitor_tolerance must be nonnegative");
    if (eval_points < 1) throw std::invalid_argument("eval_points must be >= 1");
  }
};
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(TrainParams, target, n, noise_sd, depth, width,
                                                subnets, steps, c1, eval_points,
                                                monitor_tolerance)

int run_train(const json& given, const RunContext& ctx) {
  const auto p = start<TrainParams>("train", given, ctx);
  const TargetSpec target = shipped_target(p.target);
  const std::size_t K = p.subnets ? p.subnets : desk_subnet_count(p.n);
  const Architecture arch{target.d, p.depth, std::max(p.width, 2 * target.d), K};
  try {
    arch.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  TheoryRequest req;
  req.d = arch.input_dim;
  req.r = arch.width;
  req.L = arch.depth;
  req.n = p.n;
  req.c1 = p.c1;
  req.desk_K = K;
  req.desk_t = p.steps;
  const TheoryParams theory = theory_params(req);

  Rng data_rng = make_rng(RngSeed{ctx.seed}, kData);
  const Dataset data = generate(target, p.n, p.noise_sd, data_rng);
  Rng init_rng = make_rng(RngSeed{ctx.seed}, kInit);
  const WeightVector init = init_weights(arch, p.n, theory.tau, init_rng);
  TrainConfig cfg = TrainConfig::faithful(p.steps, theory.beta);
  cfg.monitor_tolerance = p.monitor_tolerance;

  json report = {{"command", "train"}, {"seed", ctx.seed}, {"theory", theory_json(theory)},
                 {"weight_count", weight_count(arch)}};
  Checks checks;
  try {
    auto [weights, trace] = train(init, data, cfg);
    std::ostringstream csv;
    write_trace_csv(csv, trace);
    write_text(ctx.out, "trace.csv", csv.str());
    const Estimator est{std::move(weights), cfg.beta};
    Rng eval_rng = make_rng(RngSeed{ctx.seed}, kEval);
    const McEstimate l2 = mc_l2_error([&](std::span<const double> x) { return predict(est, x); },
                                      target, p.eval_points, eval_rng);
    report["initial_risk"] = trace.initial_risk();
    report["final_risk"] = trace.final_risk();
    report["displacement_bound"] = trace.displacement_bound;
    report["monotone_violations"] = trace.monotone_violations;
    report["displacement_violations"] = trace.displacement_violations;
    report["l2_error"] = {{"value", l2.value}, {"std_error", l2.std_error}};
    // Desk runs sit far below the step counts the descent bound needs, so
    // monitor hits are warnings here.
    report["warnings"] = {{"monotone", trace.monotone()},
                          {"displacement", trace.displacement_violations.empty()}};
    checks.add("finite", true, 1.0, 1.0);
    checks.add("risk_decreased", trace.final_risk() < trace.initial_risk(), trace.final_risk(),
               trace.initial_risk());
  } catch (const DivergenceError& e) {
    report["diverged_at_step"] = e.step();
    checks.add("finite", false, static_cast<double>(e.step()), 0.0);
  }
  return finish(ctx, report, checks);
}

// ------------------------------------------------------------ grad-check

struct GradCheckParams {
  std::size_t instances = 100;
  std::size_t max_input_dim = 3;
  std::size_t max_depth = 3;
  std::size_t max_width = 6;
  std::size_t max_subnets = 8;
  std::size_t samples = 5;
  double weight_bound = 10.0;
  double fd_tolerance = 1e-5;
  double formula_tolerance = 1e-12;
  double fd_step = 1e-10;

  void validate() const {
    if (instances < 1 || samples < 1) throw std::invalid_argument("instances and samples must be >= 1");
    if (max_input_dim < 1 || max_depth < 2 || max_subnets < 1)
      throw std::invalid_argument("max_input_dim >= 1, max_depth >= 2, max_subnets >= 1");
    if (max_width < 2) throw std::invalid_argument("max_width must be >= 2");
    if (!(weight_bound > 0.0) || !(fd_step > 0.0)) throw std::invalid_argument("bounds must be positive");
  }
};
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(GradCheckParams, instances, max_input_dim,
                                                max_depth, max_width, max_subnets, samples,
                                                weight_bound, fd_tolerance, formula_tolerance,
                                                fd_step)

int run_grad_check(const json& given, const RunContext& ctx) {
  const auto p = start<GradCheckParams>("grad-check", given, ctx);
  Rng rng = make_rng(RngSeed{ctx.seed}, kAux);
  auto pick = [&](std::size_t lo, std::size_t hi) {
    return std::uniform_int_distribution<std::size_t>(lo, hi)(rng);
  };
  std::uniform_real_distribution<double> weight(-p.weight_bound, p.weight_bound), unit(0.0, 1.0),
      sym(-1.0, 1.0);
  double fd_worst = 0.0, formula_worst = 0.0;
  std::size_t formula_instances = 0;
  json rows = json::array();
  for (std::size_t i = 0; i < p.instances; ++i) {
    const std::size_t d = pick(1, p.max_input_dim);
    const std::size_t r = pick(std::min(2 * d, p.max_width), std::max(2 * d, p.max_width));
    const Architecture arch{d, pick(2, p.max_depth), std::max(r, 2 * d), pick(1, p.max_subnets)};
    WeightVector w(arch);
    for (double& v : w.values()) v = weight(rng);
    std::vector<double> xs(p.samples * d), ys(p.samples);
    for (double& v : xs) v = unit(rng);
    for (double& v : ys) v = sym(rng);
    const Dataset data(d, xs, ys);

    const GradientVector g = grad_risk(w, data);
    const double fd_err = max_relative_error(g.values(), fd_grad(w, data, p.fd_step).values());
    fd_worst = std::max(fd_worst, fd_err);

    double formula_err = std::numeric_limits<double>::quiet_NaN();
    if (std::pow(static_cast<double>(arch.width), static_cast<double>(arch.depth - 2)) <= 1e6) {
      ++formula_instances;
      formula_err = 0.0;
      const WeightLayout& layout = w.layout();
      for (std::size_t s = 0; s < data.size(); ++s) {
        const GradientVector gx = grad_output(w, data.x(s));
        std::vector<double> direct(layout.size());
        for (std::size_t off = 0; off < layout.size(); ++off)
          direct[off] = grad_formula_direct(w, data.x(s), layout.index_of(off));
        formula_err = std::max(formula_err, max_relative_error(gx.values(), direct));
      }
      formula_worst = std::max(formula_worst, formula_err);
    }
    rows.push_back({{"d", d}, {"L", arch.depth}, {"r", arch.width}, {"K", arch.subnets},
                    {"fd_error", fd_err}, {"formula_error", formula_err}});
  }
  Checks checks;
  checks.add("fd_relative_error", fd_worst <= p.fd_tolerance, fd_worst, p.fd_tolerance);
  checks.add("formula_relative_error", formula_worst <= p.formula_tolerance, formula_worst,
             p.formula_tolerance);
  json report = {{"command", "grad-check"}, {"seed", ctx.seed}, {"instances", rows},
                 {"formula_instances", formula_instances}};
  return finish(ctx, report, checks);
}

// ---------------------------------------------------------------- lemma1

struct Lemma1Params {
  std::size_t quadratic_instances = 50;
  bool include_sine = true;
  bool include_fixed_point = true;
  double pitch = 1e-2;
  double inflation = 1.05;
  double step_multiplier = 1.0;  // t_n = ceil(step_multiplier * L_n)
  double tolerance = 1e-12;

  void validate() const {
    if (!(pitch > 0.0) || !(inflation >= 1.0) || !(step_multiplier >= 1.0) || !(tolerance >= 0.0))
      throw std::invalid_argument("need pitch > 0, inflation >= 1, step_multiplier >= 1");
  }
};
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(Lemma1Params, quadratic_instances, include_sine,
                                                include_fixed_point, pitch, inflation,
                                                step_multiplier, tolerance)

int run_lemma1(const json& given, const RunContext& ctx) {
  const auto p = start<Lemma1Params>("lemma1", given, ctx);
  std::vector<Lemma1Instance> instances;
  if (p.include_sine) instances.push_back(sine_instance());
  if (p.include_fixed_point) instances.push_back(fixed_point_instance());
  Rng rng = make_rng(RngSeed{ctx.seed}, kAux);
  for (std::size_t i = 0; i < p.quadratic_instances; ++i)
    instances.push_back(random_quadratic_instance(rng));

  json rows = json::array();
  std::size_t failures = 0, uncertified = 0;
  for (Lemma1Instance& inst : instances) {
    const Certification cert = certify(inst, p.pitch, p.inflation);
    const auto t_n = static_cast<std::size_t>(
        std::max(1.0, std::ceil(p.step_multiplier * inst.L_n)));
    const Lemma1Report r = lemma1_run(inst, t_n, cert.d_certified, p.tolerance);
    if (!r.ok()) ++failures;
    if (!cert.d_certified) ++uncertified;
    rows.push_back({{"name", inst.name},
                    {"F0", r.F0},
                    {"L_n", inst.L_n},
                    {"D_n", cert.d_certified ? json(inst.D_n) : json(nullptr)},
                    {"t_n", t_n},
                    {"F_final", r.F_final},
                    {"rhs", r.rhs},
                    {"conclusion_ok", r.conclusion_ok},
                    {"hypotheses_certified", cert.d_certified},
                    {"displacement_bound", r.displacement_bound},
                    {"max_u_displacement", r.max_u_displacement},
                    {"max_v_displacement", r.max_v_displacement},
                    {"monotone_violations", r.monotone_violations},
                    {"ok", r.ok()}});
  }
  Checks checks;
  checks.add("instances_ok", failures == 0, static_cast<double>(failures), 0.0);
  json report = {{"command", "lemma1"}, {"seed", ctx.seed}, {"instances", rows},
                 {"uncertified", uncertified}};
  return finish(ctx, report, checks);
}

// -------------------------------------------------------- lipschitz-check

struct LipschitzParams {
  std::size_t pairs = 1000;
  std::vector<std::size_t> input_dims{1, 2};
  std::vector<std::size_t> depths{2, 3};
  std::size_t width = 4;
  std::size_t subnets = 2;
  double B = 2.0;
  double A = 5.0;
  double alpha = 1.0;
  double min_log10_step = -6.0;  // |w - v| per coordinate up to 10^U(min, max)
  double max_log10_step = 0.0;

  void validate() const {
    if (pairs < 1 || input_dims.empty() || depths.empty() || subnets < 1)
      throw std::invalid_argument("pairs, input_dims, depths and subnets must be nonempty");
    BoundParams{B, A, 1.0, alpha}.validate();
    for (std::size_t L : depths)
      if (L < 2) throw std::invalid_argument("depths must be >= 2");
    for (std::size_t d : input_dims)
      if (d < 1) throw std::invalid_argument("input_dims must be >= 1");
    if (!(min_log10_step <= max_log10_step)) throw std::invalid_argument("step range is empty");
  }
};
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(LipschitzParams, pairs, input_dims, depths, width,
                                                subnets, B, A, alpha, min_log10_step,
                                                max_log10_step)

int run_lipschitz_check(const json& given, const RunContext& ctx) {
  const auto p = start<LipschitzParams>("lipschitz-check", given, ctx);
  const BoundParams bounds{p.B, p.A, 1.0, p.alpha};
  Rng rng = make_rng(RngSeed{ctx.seed}, kAux);
  std::uniform_real_distribution<double> log_step(p.min_log10_step, p.max_log10_step),
      unit(-1.0, 1.0);
  std::size_t checked = 0, violations = 0;
  double worst_ratio = 0.0;
  json first_violations = json::array();
  for (std::size_t i = 0; i < p.pairs; ++i) {
    const std::size_t d = p.input_dims[i % p.input_dims.size()];
    const std::size_t L = p.depths[(i / p.input_dims.size()) % p.depths.size()];
    const Architecture arch{d, L, std::max(p.width, 2 * d), p.subnets};
    const WeightVector w = sample_bounded(arch, bounds, rng);
    WeightVector v = w;
    const double eps = std::pow(10.0, log_step(rng));
    const WeightLayout& layout = v.layout();
    for (std::size_t k = 0; k < arch.subnets; ++k) {
      for (std::size_t l = 0; l < L; ++l) {
        const double cap = l == 0 ? p.A : p.B;
        const std::size_t begin = layout.layer_begin(k, l);
        for (std::size_t j = 0; j < layout.layer_rows(l) * layout.layer_cols(l); ++j)
          v[begin + j] = std::clamp(v[begin + j] + eps * unit(rng), -cap, cap);
      }
    }
    std::vector<double> x(d);
    for (double& xi : x) xi = p.alpha * unit(rng);
    for (std::size_t l = 1; l <= L; ++l) {
      const LayerLipschitz res = layer_lipschitz_check(w, v, x, l, bounds);
      ++checked;
      if (res.rhs > 0.0) worst_ratio = std::max(worst_ratio, res.lhs / res.rhs);
      if (!res.ok) {
        ++violations;
        if (first_violations.size() < 10)
          first_violations.push_back({{"pair", i}, {"layer", l}, {"lhs", res.lhs}, {"rhs", res.rhs}});
      }
    }
  }
  Checks checks;
  checks.add("violations", violations == 0, static_cast<double>(violations), 0.0);
  json report = {{"command", "lipschitz-check"}, {"seed", ctx.seed}, {"checked", checked},
                 {"worst_ratio", worst_ratio}, {"violations", first_violations}};
  return finish(ctx, report, checks);
}

// ---------------------------------------------------------- scaling-probe

struct ScalingParams {
  std::size_t input_dim = 1;
  std::size_t depth = 2;
  std::size_t width = 2;
  std::vector<std::size_t> K_sweep{4, 16, 64, 256};
  double B = 1.0;
  double A = 1.0;
  double gamma_star = 1.0;
  double alpha = 1.0;
  std::size_t samples = 20;
  std::size_t data_points = 20;
  double pair_radius = 0.05;
  double threshold = 1.75;

  void validate() const {
    Architecture{input_dim, depth, std::max(width, 2 * input_dim), 1}.validate();
    BoundParams{B, A, gamma_star, alpha}.validate();
    if (K_sweep.size() < 4) throw std::invalid_argument("K_sweep needs at least 4 values");
    if (samples < 1 || data_points < 1) throw std::invalid_argument("samples and data_points must be >= 1");
    if (!(pair_radius > 0.0)) throw std::invalid_argument("pair_radius must be positive");
  }
};
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(ScalingParams, input_dim, depth, width, K_sweep, B,
                                                A, gamma_star, alpha, samples, data_points,
                                                pair_radius, threshold)

int run_scaling_probe(const json& given, const RunContext& ctx) {
  const auto p = start<ScalingParams>("scaling-probe", given, ctx);
  const Architecture base{p.input_dim, p.depth, std::max(p.width, 2 * p.input_dim), 1};
  const BoundParams bounds{p.B, p.A, p.gamma_star, p.alpha};
  const ProbeOptions opts{p.data_points, p.samples, p.pair_radius, p.threshold};
  ProbeReport grad, lip;
  try {
    Rng grad_rng = make_rng(RngSeed{ctx.seed}, kAux, 0);
    grad = grad_scaling_probe(base, p.K_sweep, bounds, opts, grad_rng);
    Rng lip_rng = make_rng(RngSeed{ctx.seed}, kAux, 1);
    lip = lipschitz_scaling_probe(base, p.K_sweep, bounds, opts, lip_rng);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  Checks checks;
  checks.add("gradient_exponent", grad.pass(), grad.slope, grad.threshold);
  checks.add("lipschitz_exponent", lip.pass(), lip.slope, lip.threshold);
  json report = {{"command", "scaling-probe"},
                 {"seed", ctx.seed},
                 {"gradient", json::parse(probe_json(grad))},
                 {"lipschitz", json::parse(probe_json(lip))}};
  return finish(ctx, report, checks);
}

// ------------------------------------------------- construct / perturb-check

struct ConstructParams {
  std::string target = "abs1d";  // a shipped target or "identity" (m(x) = x, d = 1)
  std::size_t grid_K = 4;
  std::size_t repetitions = 1;
  std::size_t n = 10000;
  std::size_t depth = 3;
  std::size_t width = 0;  // 0: 2d
  std::size_t extra_subnets = 0;
  std::string gate_margin = "robust";  // or "literal"
  std::size_t shift_sample = 1000;  // uniform draws for choose_shift; 0 keeps shift 0
  double domain_lo = 0.0;
  double domain_hi = 1.0;
  std::size_t grid_points = 20001;
  std::size_t mc_points = 100000;
  double offband_factor = 0.02;
  double indicator_tolerance = 1e-3;

  void validate() const {
    if (gate_margin != "robust" && gate_margin != "literal")
      throw std::invalid_argument("gate_margin must be 'robust' or 'literal'");
    if (!(domain_lo < domain_hi)) throw std::invalid_argument("need domain_lo < domain_hi");
    if (target != "identity") {
      (void)shipped_target(target);
      if (domain_lo != 0.0 || domain_hi != 1.0)
        throw std::invalid_argument("shipped targets are defined on [0,1]^d");
    }
    GridSpec::make(grid_K, 1, repetitions);
  }
};
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(ConstructParams, target, grid_K, repetitions, n,
                                                depth, width, extra_subnets, gate_margin,
                                                shift_sample, domain_lo, domain_hi, grid_points,
                                                mc_points, offband_factor, indicator_tolerance)

struct PlanSetup {
  ApproxTarget target;
  std::size_t d = 1;
  std::optional<double> lipschitz;
  ApproxPlan plan;
  double sample_band_mass = 0.0;
  EvalOptions eval;
};

PlanSetup build_setup(const ConstructParams& p, const RunContext& ctx) {
  PlanSetup s;
  if (p.target == "identity") {
    s.d = 1;
    s.target.m = [](std::span<const double> x) { return x[0]; };
    s.target.sup_norm = std::max(std::abs(p.domain_lo), std::abs(p.domain_hi));
    s.target.lipschitz = 1.0;
    s.lipschitz = 1.0;
  } else {
    const TargetSpec t = shipped_target(p.target);
    s.d = t.d;
    s.target.m = t.m;
    s.target.sup_norm = t.sup_norm;
    s.lipschitz = t.lipschitz;
    s.target.lipschitz = t.lipschitz.value_or(0.0);
  }
  GridSpec grid = GridSpec::make(p.grid_K, s.d, p.repetitions);
  if (p.shift_sample > 0) {
    Rng rng = make_rng(RngSeed{ctx.seed}, kData);
    std::uniform_real_distribution<double> u(p.domain_lo, p.domain_hi);
    std::vector<double> sample(p.shift_sample * s.d);
    for (double& v : sample) v = u(rng);
    grid = choose_shift(grid, sample);
    s.sample_band_mass = band_mass(grid, sample);
  }
  const std::size_t slots = grid.repetitions * grid.cube_count();
  const Architecture arch{s.d, p.depth, p.width ? p.width : 2 * s.d, slots + p.extra_subnets};
  try {
    s.plan = build_plan(s.target, grid, p.n, arch,
                        p.gate_margin == "robust" ? GateMargin::robust : GateMargin::literal);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  s.eval.lo = p.domain_lo;
  s.eval.hi = p.domain_hi;
  s.eval.grid_points = p.grid_points;
  s.eval.mc_points = p.mc_points;
  s.eval.seed = ctx.seed;
  return s;
}

void add_plan_checks(Checks& checks, const ConstructParams& p, const PlanSetup& s,
                     const PlanError& err, const std::string& prefix) {
  checks.add(prefix + "indicator_deviation", err.indicator_deviation <= p.indicator_tolerance,
             err.indicator_deviation, p.indicator_tolerance);
  if (s.lipschitz) {
    const double limit = p.offband_factor * std::max(1.0, *s.lipschitz);
    checks.add(prefix + "offband_sup_error", err.sup_offband <= limit, err.sup_offband, limit);
  }
  checks.add(prefix + "sup_norm_bound", err.sup_ok(), err.sup_norm, err.sup_bound);
}

int run_construct(const json& given, const RunContext& ctx) {
  const auto p = start<ConstructParams>("construct", given, ctx);
  const PlanSetup s = build_setup(p, ctx);
  const PlanError err = eval_plan_error(s.plan, s.target, s.eval);
  write_text(ctx.out, "plan.json", plan_json(s.plan) + "\n");

  const GridSpec& g = s.plan.grid;
  const double alpha_bound = static_cast<double>(g.cube_count()) * s.target.sup_norm *
                             s.target.sup_norm / static_cast<double>(g.repetitions);
  Checks checks;
  add_plan_checks(checks, p, s, err, "");
  checks.add("alpha_square_sum", s.plan.alpha_square_sum() <= alpha_bound,
             s.plan.alpha_square_sum(), alpha_bound);
  if (p.shift_sample > 0) {
    const double limit = static_cast<double>(g.d) / static_cast<double>(g.K);
    checks.add("shift_band_mass", s.sample_band_mass <= limit, s.sample_band_mass, limit);
  }
  json report = {{"command", "construct"},
                 {"seed", ctx.seed},
                 {"shift_steps", g.shift_steps},
                 {"sample_band_mass", s.sample_band_mass},
                 {"error", json::parse(plan_error_json(err))}};
  return finish(ctx, report, checks);
}

struct PerturbParams {
  ConstructParams plan;
  std::size_t trials = 100;
  double magnitude = 0.0;  // 0: log n

  void validate() const {
    plan.validate();
    if (!(magnitude >= 0.0)) throw std::invalid_argument("magnitude must be >= 0");
  }
};
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(PerturbParams, plan, trials, magnitude)

int run_perturb_check(const json& given, const RunContext& ctx) {
  const auto p = start<PerturbParams>("perturb-check", given, ctx);
  const PlanSetup s = build_setup(p.plan, ctx);
  const double magnitude =
      p.magnitude > 0.0 ? p.magnitude : std::log(static_cast<double>(p.plan.n));
  Rng rng = make_rng(RngSeed{ctx.seed}, kAux);
  const PerturbReport rep = perturb_and_check(s.plan, s.target, magnitude, p.trials, rng, s.eval);
  Checks checks;
  add_plan_checks(checks, p.plan, s, rep.baseline, "baseline_");
  add_plan_checks(checks, p.plan, s, rep.worst, "worst_");
  checks.add("sup_failures", rep.sup_failures == 0, static_cast<double>(rep.sup_failures), 0.0);
  json report = {{"command", "perturb-check"},
                 {"seed", ctx.seed},
                 {"magnitude", magnitude},
                 {"trials", rep.trials},
                 {"baseline", json::parse(plan_error_json(rep.baseline))},
                 {"worst", json::parse(plan_error_json(rep.worst))}};
  return finish(ctx, report, checks);
}

// ----------------------------------------------------------------- cover

struct CoverParams {
  std::size_t input_dim = 1;
  std::size_t depth = 2;
  std::size_t width = 2;
  std::size_t subnets = 4;
  std::size_t d_star = 0;  // > 0: interaction class over all d*-subsets
  double A = 1.0;
  double B = 1.0;
  double C = 1.0;
  double beta = 1.0;
  double alpha = 1.0;
  std::size_t members = 200;
  std::size_t points = 50;  // x uniform on [0,1]^d
  std::vector<double> epsilons{0.1, 0.2, 0.4};
  double p = 1.0;
  std::size_t smoothness_k = 2;

  FunctionClassSpec class_spec() const {
    const std::size_t group_dim = d_star ? d_star : input_dim;
    FunctionClassSpec cls;
    cls.arch = Architecture{group_dim, depth, std::max(width, 2 * group_dim), subnets};
    cls.A = A;
    cls.B = B;
    cls.C = C;
    cls.beta = beta;
    cls.alpha = alpha;
    cls.d = input_dim;
    cls.d_star = d_star;
    return cls;
  }
  void validate() const {
    class_spec().validate();
    if (members < 2 || points < 1) throw std::invalid_argument("need members >= 2, points >= 1");
    if (!(p >= 1.0) || smoothness_k < 1) throw std::invalid_argument("need p >= 1, k >= 1");
    for (double e : epsilons)
      if (!(e > 0.0) || !(e < beta)) throw std::invalid_argument("need 0 < epsilon < beta");
    if (!std::is_sorted(epsilons.begin(), epsilons.end()))
      throw std::invalid_argument("epsilons must be ascending");
  }
};
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(CoverParams, input_dim, depth, width, subnets,
                                                d_star, A, B, C, beta, alpha, members, points,
                                                epsilons, p, smoothness_k)

int run_cover(const json& given, const RunContext& ctx) {
  const auto p = start<CoverParams>("cover", given, ctx);
  const FunctionClassSpec cls = p.class_spec();
  Rng x_rng = make_rng(RngSeed{ctx.seed}, kData);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::vector<double> xs(p.points * p.input_dim);
  for (double& v : xs) v = unit(x_rng);
  Rng rng = make_rng(RngSeed{ctx.seed}, kAux);
  const std::vector<double> values = sample_class_values(cls, p.members, xs, rng);

  json rows = json::array();
  Checks checks;
  std::size_t previous = std::numeric_limits<std::size_t>::max();
  bool monotone = true, valid = true, within = true;
  for (double eps : p.epsilons) {
    const CoverResult cover = greedy_cover(values, p.members, eps, p.p);
    const double log_bound = covering_log_bound(cls, eps, p.p, p.smoothness_k);
    const bool inside = std::log(static_cast<double>(cover.size())) <= log_bound;
    monotone = monotone && cover.size() <= previous;
    valid = valid && cover.valid && cover.size() >= 1;
    within = within && inside;
    previous = cover.size();
    rows.push_back({{"epsilon", eps}, {"N", cover.size()}, {"valid", cover.valid},
                    {"log_bound", log_bound}, {"within_bound", inside}});
  }
  checks.add("monotone_in_epsilon", monotone, monotone ? 1.0 : 0.0, 1.0);
  checks.add("valid_cover", valid, valid ? 1.0 : 0.0, 1.0);
  checks.add("within_bound", within, within ? 1.0 : 0.0, 1.0);
  json report = {{"command", "cover"}, {"seed", ctx.seed}, {"covers", rows}};
  return finish(ctx, report, checks);
}

// ----------------------------------------------------------------- rates

json cells_json(const RateReport& r) {
  json cells = json::array();
  for (const RateCell& c : r.cells)
    cells.push_back({{"n", c.n}, {"K", c.K}, {"t_n", c.t_n}, {"used", c.used},
                     {"diverged", c.diverged}, {"mean", c.mean}, {"std_error", c.std_error}});
  return {{"label", r.label},
          {"cells", cells},
          {"slope", r.fit.slope},
          {"slope_half_width", r.fit.half_width},
          {"theory_slope", r.theory_slope},
          {"monotone_within_pooled_se", r.monotone_within_pooled_se()},
          {"beta_warning_max_abs_y", r.beta_warning_max_abs_y}};
}

json theory_per_n(const ExperimentConfig& cfg, std::size_t d) {
  json rows = json::array();
  for (std::size_t n : cfg.n_values) {
    TheoryRequest req;
    req.d = d;
    req.r = std::max(cfg.width, 2 * d);
    req.L = cfg.depth;
    req.n = n;
    req.c1 = cfg.c1;
    req.desk_K = cfg.scaling.subnets(n);
    req.desk_t = cfg.scaling.steps(n);
    json t = theory_json(theory_params(req));
    t["n"] = n;
    rows.push_back(t);
  }
  return rows;
}

// K(n) = 7.5 sqrt(n), t_n = 0.6 K(n): the largest desk scaling whose
// 20-repetition sweep over n <= 3200 stays within minutes and never diverges.
DeskScaling feasible_scaling() {
  DeskScaling s;
  s.K_coef = 7.5;
  s.K_exponent = 0.5;
  s.K_min = 16;
  s.t_fixed = 30;
  s.t_per_K = 0.6;
  return s;
}

struct RatesParams {
  ExperimentConfig experiment = [] {
    ExperimentConfig c;
    c.scaling = feasible_scaling();
    return c;
  }();
  double slope_min = -1.0;
  double slope_max = -0.25;

  void validate() const {
    experiment.validate();
    if (experiment.n_values.size() < 2) throw std::invalid_argument("rates need two or more n values");
  }
};
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(RatesParams, experiment, slope_min, slope_max)

std::string rows_csv(std::span<const RateRow> rows) {
  std::ostringstream csv;
  write_rates_csv(csv, rows);
  return csv.str();
}

int run_rates(const json& given, const RunContext& ctx) {
  auto p = start<RatesParams>("rates", given, ctx);
  p.experiment.seed = ctx.seed;
  const RateReport rep = rate_sweep(p.experiment);
  write_text(ctx.out, "rates.csv", rows_csv(rep.rows));
  Checks checks;
  checks.add("monotone_within_pooled_se", rep.monotone_within_pooled_se(),
             rep.monotone_within_pooled_se() ? 1.0 : 0.0, 1.0);
  checks.add("slope_at_least", rep.fit.slope >= p.slope_min, rep.fit.slope, p.slope_min);
  checks.add("slope_at_most", rep.fit.slope <= p.slope_max, rep.fit.slope, p.slope_max);
  const TargetSpec target = shipped_target(p.experiment.target);
  json report = {{"command", "rates"},
                 {"seed", ctx.seed},
                 {"result", cells_json(rep)},
                 {"theory", theory_per_n(p.experiment, target.d)}};
  return finish(ctx, report, checks);
}

struct InteractionRatesParams {
  ExperimentConfig experiment = [] {
    ExperimentConfig c;
    c.target = "additive3d";
    c.n_values = {800};
    c.reps = 10;
    // The interaction model stacks C(d, d*) groups of K subnets, which
    // multiplies the curvature; t_n = 0.6 K lets its descent oscillate.
    c.scaling = feasible_scaling();
    c.scaling.t_per_K = 2.0;
    return c;
  }();

  void validate() const { experiment.validate(); }
};
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(InteractionRatesParams, experiment)

int run_interaction_rates(const json& given, const RunContext& ctx) {
  auto p = start<InteractionRatesParams>("interaction-rates", given, ctx);
  p.experiment.seed = ctx.seed;
  InteractionReport rep;
  try {
    rep = interaction_sweep(p.experiment);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  write_text(ctx.out, "rates_plain.csv", rows_csv(rep.plain.rows));
  write_text(ctx.out, "rates_interaction.csv", rows_csv(rep.interaction.rows));
  json pairs = json::array();
  for (const PairedRow& r : rep.pairs)
    pairs.push_back({{"n", r.n}, {"rep", r.rep}, {"plain", r.plain_error},
                     {"interaction", r.interaction_error}});
  json report = {{"command", "interaction-rates"},
                 {"seed", ctx.seed},
                 {"pairs", pairs},
                 {"plain_median", rep.plain_median},
                 {"interaction_median", rep.interaction_median},
                 {"plain_theory_slope", rep.plain.theory_slope},
                 {"interaction_theory_slope", rep.interaction.theory_slope}};
  if (p.experiment.n_values.size() >= 2) {
    report["plain"] = cells_json(rep.plain);
    report["interaction"] = cells_json(rep.interaction);
  }
  Checks checks;
  checks.add("interaction_median_not_worse", rep.interaction_median <= rep.plain_median,
             rep.interaction_median, rep.plain_median);
  return finish(ctx, report, checks);
}

}  // namespace

const std::vector<CommandInfo>& commands() {
  static const std::vector<CommandInfo> list = {
      {"train", "Fit one estimator by gradient descent and write its trace", run_train},
      {"grad-check", "Compare the gradient with finite differences and the path-sum formula",
       run_grad_check},
      {"lemma1", "Run the descent bound harness on synthetic objectives", run_lemma1},
      {"lipschitz-check", "Check the layer-wise Lipschitz inequality on random pairs",
       run_lipschitz_check},
      {"scaling-probe", "Fit the K-exponents of gradient norm and gradient Lipschitz ratio",
       run_scaling_probe},
      {"construct", "Build the indicator-grid network for a target and evaluate it",
       run_construct},
      {"perturb-check", "Re-evaluate the grid network under inner-weight perturbations",
       run_perturb_check},
      {"cover", "Greedy empirical covering numbers of a sampled network class", run_cover},
      {"rates", "L2-error sweep over n for the plain estimator", run_rates},
      {"interaction-rates", "Paired plain vs interaction estimator errors",
       run_interaction_rates},
  };
  return list;
}

}  // namespace opnn::cli
