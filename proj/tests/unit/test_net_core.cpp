#include <cmath>
#include <random>
#include <set>

#include "doctest.h"
#include "opnn/architecture.hpp"
#include "opnn/network.hpp"
#include "oracle.hpp"

using namespace opnn;

namespace {

WeightVector random_weights(const Architecture& a, std::mt19937_64& rng, double bound) {
  std::uniform_real_distribution<double> u(-bound, bound);
  WeightVector w(a);
  for (double& v : w.values()) v = u(rng);
  return w;
}

}  // namespace

TEST_SUITE("net_core") {

TEST_CASE("architecture validation") {
  CHECK_NOTHROW(Architecture{1, 2, 2, 1}.validate());
  CHECK_THROWS_AS(Architecture({2, 2, 3, 1}).validate(), std::invalid_argument);  // r < 2d
  CHECK_THROWS_AS(Architecture({1, 1, 2, 1}).validate(), std::invalid_argument);
  CHECK_THROWS_AS(Architecture({1, 2, 2, 0}).validate(), std::invalid_argument);
}

TEST_CASE("weight count closed form") {
  // K (1 + (r+1) + (L-2) r (r+1) + r (d+1))
  CHECK(weight_count({1, 2, 2, 1}) == 1 + 3 + 0 + 4);
  CHECK(weight_count({2, 3, 4, 3}) == 3 * (1 + 5 + 20 + 12));
  CHECK(weight_count({3, 4, 6, 5}) == 5 * (1 + 7 + 2 * 42 + 24));
  for (std::size_t K : {1u, 4u, 17u})
    CHECK(weight_count({2, 3, 4, 2 * K}) == 2 * weight_count({2, 3, 4, K}));
  const Architecture a{2, 3, 5, 4};
  CHECK(WeightVector(a).size() == weight_count(a));
}

TEST_CASE("layout is a bijection between offsets and indices") {
  for (const Architecture& a : {Architecture{1, 2, 2, 3}, Architecture{3, 4, 6, 2}}) {
    const WeightLayout layout(a);
    std::set<std::size_t> seen;
    for (std::size_t off = 0; off < layout.size(); ++off) {
      const WeightIndex idx = layout.index_of(off);
      CHECK(layout.offset(idx) == off);
      seen.insert(off);
      CHECK(layout.is_outer(off) == (idx.layer == a.depth));
    }
    CHECK(seen.size() == layout.size());
    CHECK_THROWS(layout.offset({0, a.subnets, 0, 0}));
    CHECK_THROWS(layout.offset({a.depth - 1, 0, 1, 0}));  // top layer has one row
    CHECK_THROWS(layout.offset({0, 0, 0, a.input_dim + 1}));
  }
}

TEST_CASE("sigmoid") {
  CHECK(sigmoid(0.0) == 0.5);
  for (double z : {-800.0, -40.0, -3.0, -1e-9, 0.7, 12.0, 36.0, 900.0})
    CHECK(sigmoid(z) + sigmoid(-z) == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(sigmoid(1e6) == 1.0);
  CHECK(sigmoid(-1e6) == 0.0);
  double prev = 0.0;
  for (double z = -50.0; z <= 50.0; z += 0.25) {
    CHECK(sigmoid(z) >= prev);
    prev = sigmoid(z);
  }
  for (double z : {-30.0, -2.0, 0.0, 1.5, 30.0}) {
    const SigmoidEval s = sigmoid_with_slope(z);
    CHECK(s.value == sigmoid(z));
    CHECK(s.slope == doctest::Approx(sigmoid(z) * (1.0 - sigmoid(z))).epsilon(1e-12));
  }
}

TEST_CASE("truncate") {
  CHECK(truncate(1.0, 0.5) == 0.5);
  CHECK(truncate(1.0, 3.0) == 1.0);
  CHECK(truncate(1.0, -3.0) == -1.0);
  for (double z : {-7.0, -0.3, 0.0, 2.2, 40.0})
    CHECK(truncate(2.0, truncate(2.0, z)) == truncate(2.0, z));
  CHECK_THROWS_AS(truncate(0.0, 1.0), std::invalid_argument);
}

TEST_CASE("forward small cases") {
  const Architecture a{1, 2, 2, 1};
  WeightVector w(a);
  const double x[] = {0.3};
  CHECK(forward(w, x) == 0.0);
  w.outer(0) = 1.0;
  CHECK(forward(w, x) == 0.5);
  const double bad[] = {0.3, 0.1};
  CHECK_THROWS_AS(forward(w, bad), std::invalid_argument);
}

TEST_CASE("forward matches the straight-line evaluator") {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (std::size_t trial = 0; trial < 100; ++trial) {
    const std::size_t d = 1 + trial % 3;
    const Architecture a{d, 2 + trial % 3, 2 * d + trial % 2, 1 + trial % 4};
    const WeightVector w = random_weights(a, rng, 3.0);
    std::vector<double> x(d);
    for (double& v : x) v = u(rng);
    CHECK(forward(w, x) == doctest::Approx(oracle::forward(w, x)).epsilon(1e-13));
    for (std::size_t k = 0; k < a.subnets; ++k)
      CHECK(subnet_output(w, k, x) == doctest::Approx(oracle::subnet(w, k, x)).epsilon(1e-13));
  }
}

TEST_CASE("zero outer weights give exactly zero and activations stay in (0,1)") {
  std::mt19937_64 rng(5);
  const Architecture a{2, 3, 4, 3};
  WeightVector w = random_weights(a, rng, 2.0);
  for (double& o : w.outer_block()) o = 0.0;
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int i = 0; i < 50; ++i) {
    const double x[] = {u(rng), u(rng)};
    CHECK(forward(w, x) == 0.0);
    for (std::size_t k = 0; k < a.subnets; ++k)
      for (std::size_t l = 1; l <= a.depth; ++l)
        for (double h : hidden_outputs(w, k, l, x)) {
          CHECK(h > 0.0);
          CHECK(h < 1.0);
        }
  }
  const double x[] = {0.0, 0.0};
  CHECK(hidden_outputs(w, 0, a.depth, x).size() == 1);
  CHECK(hidden_outputs(w, 0, 1, x).size() == a.width);
  CHECK_THROWS(hidden_outputs(w, 0, 0, x));
}

TEST_CASE("empirical risk") {
  const Architecture a{1, 2, 2, 2};
  std::mt19937_64 rng(3);
  WeightVector w = random_weights(a, rng, 1.0);
  for (double& o : w.outer_block()) o = 0.0;
  const Dataset two(1, {0.1, 0.9}, {1.0, 2.0});
  CHECK(empirical_risk(w, two) == 2.5);

  w.outer(0) = 1.0;
  w.outer(1) = 0.0;
  std::vector<double> xs{0.2, 0.4, 0.6}, ys;
  for (double x : xs) ys.push_back(oracle::forward(w, std::span<const double>(&x, 1)));
  CHECK(empirical_risk(w, Dataset(1, xs, ys)) <= 1e-30);

  std::uniform_real_distribution<double> u(-1.0, 1.0);
  const WeightVector r = random_weights({2, 3, 4, 3}, rng, 2.0);
  std::vector<double> x2(40), y2(20);
  for (double& v : x2) v = u(rng);
  for (double& v : y2) v = u(rng);
  const Dataset data(2, x2, y2);
  CHECK(empirical_risk(r, data) == doctest::Approx(oracle::risk(r, data)).epsilon(1e-13));

  // Row permutation changes only the summation order.
  std::vector<double> xp(40), yp(20);
  for (std::size_t i = 0; i < 20; ++i) {
    const std::size_t j = (7 * i + 3) % 20;
    xp[2 * i] = x2[2 * j];
    xp[2 * i + 1] = x2[2 * j + 1];
    yp[i] = y2[j];
  }
  CHECK(empirical_risk(r, Dataset(2, xp, yp)) ==
        doctest::Approx(empirical_risk(r, data)).epsilon(1e-14));
  CHECK_THROWS(Dataset(1, {}, {}).mean_square_response());
}

TEST_CASE("predict truncates at beta") {
  const Architecture a{1, 2, 2, 1};
  Estimator zero{WeightVector(a), 2.0};
  const double x[] = {0.4};
  CHECK(predict(zero, x) == 0.0);

  WeightVector w(a);
  w.outer(0) = 20.0;  // top activation sigma(0) = 1/2, so f = 10
  CHECK(forward(w, x) == 10.0);
  CHECK(predict(Estimator{w, 2.0}, x) == 2.0);

  std::mt19937_64 rng(9);
  const Estimator big{random_weights({2, 2, 4, 6}, rng, 50.0), 1.5};
  std::uniform_real_distribution<double> u(-3.0, 3.0);
  for (int i = 0; i < 1000; ++i) {
    const double xi[] = {u(rng), u(rng)};
    CHECK(std::abs(predict(big, xi)) <= 1.5);
  }
}

}  // TEST_SUITE
