#include <cmath>
#include <fstream>
#include <random>
#include <sstream>

#include "doctest.h"
#include "opnn/approx.hpp"
#include "opnn/experiments.hpp"
#include "opnn/network.hpp"
#include "oracle.hpp"

using namespace opnn;

namespace {

WeightVector single_subnet(const Architecture& arch, const std::vector<double>& block) {
  WeightVector w(Architecture{arch.input_dim, arch.depth, arch.width, 1});
  std::copy(block.begin(), block.end(), w.values().begin() + 1);
  w.outer(0) = 1.0;
  return w;
}

ApproxTarget identity_target(double sup) {
  return {[](std::span<const double> x) { return x[0]; }, sup, 1.0};
}

ApproxTarget from_shipped(const std::string& name) {
  const TargetSpec t = shipped_target(name);
  return {t.m, t.sup_norm, t.lipschitz.value_or(0.0)};
}

// The plan used by the golden file: d = 1, K = 2, L = 2, r = 2, n = 10^4.
ApproxPlan golden_plan() {
  const GridSpec g = GridSpec::make(2, 1);
  return build_plan(from_shipped("abs1d"), g, 10000, {1, 2, 2, g.cube_count() + 1});
}

}  // namespace

TEST_SUITE("approx_construct") {

TEST_CASE("grid geometry") {
  GridSpec g = GridSpec::make(4, 2);
  CHECK(g.cube_side() == 0.5);
  CHECK(g.delta() == 1.0 / 16.0);
  CHECK(g.cells_per_axis() == 17);
  CHECK(g.cube_count() == 289);
  CHECK(g.origin(0) == -4.5);
  const auto u = g.corner(17 + 2);  // first coordinate fastest
  CHECK(u[0] == -3.5);
  CHECK(u[1] == -4.0);
  const double inside[] = {-3.4, -3.9};
  CHECK(g.locate(inside) == 19);
  const double outside[] = {5.0, 0.0};
  CHECK(g.locate(outside) == g.cube_count());
  CHECK(g.in_band(0, -3.5 + 0.06));
  CHECK_FALSE(g.in_band(0, -3.5 + 0.07));
  g.shift_steps = {3, 0};
  CHECK(g.shift(0) == 6.0 / 16.0);
  CHECK_NOTHROW(g.validate());
  g.shift_steps = {4, 0};
  CHECK_THROWS(g.validate());
  CHECK_THROWS(GridSpec::make(1, 1));
}

TEST_CASE("layer-0 slope") {
  const double u[] = {0.0};
  const auto block = build_indicator_subnet({1, 2, 2, 1}, u, 1.0, 10000);  // K = 2
  const double c = std::log(1e4) * std::log(1e4);
  CHECK(std::abs(block[1]) == doctest::Approx(4.0 * 1 * 4 * c));
  CHECK(std::abs(block[1]) == doctest::Approx(1357.29).epsilon(1e-5));
  CHECK(block[3] == -block[1]);  // row d mirrors row 0
}

TEST_CASE("indicator subnet with the robust gate") {
  std::mt19937_64 rng(3);
  for (std::size_t d : {1u, 2u}) {
    for (std::size_t L : {2u, 3u, 4u}) {
      const Architecture arch{d, L, 2 * d, 1};
      const std::size_t K = 4;
      const double side = 2.0 / K, delta = 1.0 / (K * K);
      std::vector<double> u(d, -0.25);
      const auto block = build_indicator_subnet(arch, u, side, 10000, GateMargin::robust);
      const WeightVector w = single_subnet(arch, block);
      std::vector<double> center(d, -0.25 + side / 2);
      CHECK(oracle::subnet(w, 0, center) >= 1.0 - 1e-3);
      CHECK(subnet_output(w, 0, center) >= 1.0 - 1e-3);
      std::uniform_real_distribution<double> gap(1.01 * delta, 1.0);
      for (int t = 0; t < 50; ++t) {
        std::vector<double> x = center;
        const std::size_t j = t % d;
        x[j] = (t % 2 ? u[j] + side + gap(rng) : u[j] - gap(rng));
        CHECK(subnet_output(w, 0, x) <= 1e-3);
      }
      // Shrunk by delta, the cube is fully on.
      std::uniform_real_distribution<double> in(u[0] + delta, u[0] + side - delta);
      for (int t = 0; t < 50; ++t) {
        std::vector<double> x(d);
        for (double& v : x) v = in(rng);
        const double f = subnet_output(w, 0, x);
        CHECK(f >= 1.0 - 1e-3);
        CHECK(f < 1.0 + 1e-15);
      }
    }
  }
}

TEST_CASE("literal gate margin leaves the gate half-open") {
  // Inside the cube the AND pre-activation is only 8 (log n)^2 / n above zero.
  const Architecture arch{1, 2, 2, 1};
  const double u[] = {0.0};
  const auto block = build_indicator_subnet(arch, u, 0.5, 10000, GateMargin::literal);
  const WeightVector w = single_subnet(arch, block);
  const double center[] = {0.25};
  const double f = subnet_output(w, 0, center);
  CHECK(f > 0.5);
  CHECK(f < 0.6);
}

TEST_CASE("indicator preconditions") {
  const double u[] = {0.0};
  CHECK_THROWS_AS(build_indicator_subnet({1, 2, 2, 1}, u, 0.5, 19), std::invalid_argument);
  CHECK_NOTHROW(build_indicator_subnet({1, 2, 2, 1}, u, 0.5, 21));  // e^3 ~ 20.1
  CHECK_THROWS_AS(build_indicator_subnet({1, 2, 4, 1}, u, 0.5, 100), std::invalid_argument);
}

TEST_CASE("zero target gives a zero plan") {
  const GridSpec g = GridSpec::make(4, 1);
  const ApproxTarget zero{[](std::span<const double>) { return 0.0; }, 0.0, 0.0};
  const ApproxPlan plan = build_plan(zero, g, 10000, {1, 3, 2, 17}, GateMargin::robust);
  for (double a : plan.alphas) CHECK(a == 0.0);
  const PlanError e = eval_plan_error(plan, zero);
  CHECK(e.l2_error == 0.0);
  CHECK(e.sup_offband == 0.0);
  CHECK(e.sup_norm == 0.0);
  CHECK(e.sup_bound == 0.0);
}

TEST_CASE("capacity and hosts") {
  const GridSpec g = GridSpec::make(2, 1, 2);  // 10 slots
  const ApproxTarget t = identity_target(1.0);
  CHECK_THROWS_AS(build_plan(t, g, 10000, {1, 2, 2, 9}), std::invalid_argument);
  CHECK_NOTHROW(build_plan(t, g, 10000, {1, 2, 2, 10}));
  std::vector<std::size_t> dup(10, 0);
  CHECK_THROWS_AS(build_plan(t, g, 10000, {1, 2, 2, 12}, GateMargin::robust, dup),
                  std::invalid_argument);
}

TEST_CASE("outer coefficient bounds for every shipped target") {
  for (const std::string& name : shipped_target_names()) {
    const ApproxTarget t = from_shipped(name);
    const std::size_t d = shipped_target(name).d;
    for (std::size_t N : {1u, 3u}) {
      const GridSpec g = GridSpec::make(d == 1 ? 4 : 2, d, N);
      const ApproxPlan plan =
          build_plan(t, g, 200000, {d, 2, 2 * d, g.repetitions * g.cube_count()});
      const double cap = t.sup_norm / static_cast<double>(N);
      for (double a : plan.alphas) CHECK(std::abs(a) <= cap);
      CHECK(plan.alpha_square_sum() <=
            static_cast<double>(g.cube_count()) * t.sup_norm * t.sup_norm / static_cast<double>(N));
    }
  }
}

TEST_CASE("identity on [-2,2]: piecewise-constant error and sup bound") {
  const GridSpec g = GridSpec::make(4, 1, 2);
  const ApproxTarget t = identity_target(2.0);
  const ApproxPlan plan = build_plan(t, g, 10000, {1, 3, 2, 34}, GateMargin::robust);
  EvalOptions opts;
  opts.lo = -2.0;
  opts.hi = 2.0;
  const PlanError e = eval_plan_error(plan, t, opts);
  // Off the band the plan equals m at the cube center, so the error is half
  // a cube side less delta.
  CHECK(e.sup_offband == doctest::Approx(0.25 - 1.0 / 16.0).epsilon(1e-3));
  CHECK(e.indicator_deviation <= 1e-3);
  CHECK(e.sup_ok());
  CHECK(e.sup_bound == doctest::Approx(2.0 * (3.0 + 17.0 / 1e4)));
}

TEST_CASE("error shrinks as the grid refines") {
  const ApproxTarget t = from_shipped("abs1d");
  double previous = 1e300;
  for (std::size_t K : {4u, 8u, 16u}) {
    const GridSpec g = GridSpec::make(K, 1);
    const ApproxPlan plan = build_plan(t, g, 1000000, {1, 3, 2, g.cube_count()}, GateMargin::robust);
    const double err = eval_plan_error(plan, t).l2_error;
    CHECK(err < previous);
    previous = err;
  }
}

TEST_CASE("shift selection") {
  GridSpec g = GridSpec::make(4, 1);
  // Points at cube centers for shift 0: no band hits, shift 0 kept.
  std::vector<double> centers;
  for (int i = 0; i < 8; ++i) centers.push_back(-4.5 + 0.25 + 0.5 * i);
  CHECK(choose_shift(g, centers).shift_steps[0] == 0);

  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<double> uniform(2000);
  for (double& v : uniform) v = u(rng);
  const GridSpec su = choose_shift(g, uniform);
  CHECK(band_mass(su, uniform) <= 0.25);

  // Every point on a shift-0 grid line.
  std::vector<double> lines;
  for (int i = 0; i < 200; ++i) lines.push_back(-0.5 + 0.5 * (i % 4) + 1e-4 * (i % 3));
  CHECK(band_mass(g, lines) == 1.0);
  const GridSpec sl = choose_shift(g, lines);
  CHECK(sl.shift_steps[0] != 0);
  CHECK(band_mass(sl, lines) < 0.25);

  GridSpec g2 = GridSpec::make(3, 2);
  std::vector<double> pts(2000);
  for (double& v : pts) v = u(rng);
  CHECK(band_mass(choose_shift(g2, pts), pts) <= 2.0 / 3.0);
}

TEST_CASE("perturbations of inner weights") {
  const GridSpec g = GridSpec::make(4, 1);
  const ApproxTarget t = from_shipped("abs1d");
  const ApproxPlan plan = build_plan(t, g, 10000, {1, 3, 2, 17}, GateMargin::robust);
  const PlanError base = eval_plan_error(plan, t);
  Rng rng = make_rng(RngSeed{1}, 4);
  const PerturbReport none = perturb_and_check(plan, t, 0.0, 3, rng);
  CHECK(none.worst.sup_offband == base.sup_offband);
  CHECK(none.worst.l2_error == base.l2_error);
  CHECK(none.worst.sup_norm == base.sup_norm);

  const PerturbReport rep = perturb_and_check(plan, t, std::log(1e4), 100, rng);
  CHECK(rep.trials == 100);
  CHECK(rep.sup_failures == 0);
  CHECK(rep.worst.indicator_deviation <= 1e-3);
  // Regression bound frozen after the first verified run: perturbations of
  // size log n leave the off-band error of the unperturbed plan unchanged.
  CHECK(rep.worst.sup_offband == doctest::Approx(base.sup_offband).epsilon(1e-9));
  CHECK(base.sup_offband == doctest::Approx(0.1875).epsilon(1e-3));
}

TEST_CASE("output does not depend on which subnets host the construction") {
  const GridSpec g = GridSpec::make(2, 1);
  const ApproxTarget t = from_shipped("abs1d");
  const Architecture arch{1, 3, 2, 8};
  const ApproxPlan a = build_plan(t, g, 10000, arch, GateMargin::robust);
  const ApproxPlan b = build_plan(t, g, 10000, arch, GateMargin::robust, {7, 2, 5, 0, 3});
  for (double x = -3.2; x <= 3.2; x += 0.01) {
    const double xs[] = {x};
    CHECK(forward(a.weights, xs) == doctest::Approx(forward(b.weights, xs)).epsilon(1e-14));
  }
  for (std::size_t k : {1u, 4u, 6u}) CHECK(b.weights.outer(k) == 0.0);
}

TEST_CASE("plan json matches the frozen document") {
  const std::string text = plan_json(golden_plan()) + "\n";
  std::ifstream in(std::string(OPNN_TEST_DATA_DIR) + "/plan_abs1d_K2.json", std::ios::binary);
  REQUIRE(in);
  std::ostringstream expected;
  expected << in.rdbuf();
  CHECK(text == expected.str());
}

}  // TEST_SUITE
