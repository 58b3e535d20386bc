#include "opnn/initialization.hpp"

#include <cmath>
#include <cstdio>
#include <limits>
#include <stdexcept>

namespace opnn {

Rng make_rng(RngSeed seed, std::uint64_t stream, std::uint64_t index) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed.value), static_cast<std::uint32_t>(seed.value >> 32),
                    static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32),
                    static_cast<std::uint32_t>(index), static_cast<std::uint32_t>(index >> 32)};
  return Rng(seq);
}

InitBounds init_bounds(std::size_t hidden_dim, std::size_t layer0_dim, std::size_t n, double tau) {
  if (n < 3) throw std::invalid_argument("init: need n >= 3 so that log n > 1");
  if (!(tau > 0.0)) throw std::invalid_argument("init: tau must be positive");
  const double ln = std::log(static_cast<double>(n));
  return {8.0 * static_cast<double>(layer0_dim) * ln * ln * std::pow(static_cast<double>(n), tau),
          20.0 * static_cast<double>(hidden_dim) * ln * ln};
}

WeightVector init_weights(const Architecture& arch, const InitBounds& bounds, Rng& rng) {
  WeightVector w(arch);
  const WeightLayout& layout = w.layout();
  std::uniform_real_distribution<double> layer0(-bounds.layer0, bounds.layer0);
  std::uniform_real_distribution<double> hidden(-bounds.hidden, bounds.hidden);
  for (std::size_t k = 0; k < arch.subnets; ++k) {
    for (std::size_t l = 0; l < arch.depth; ++l) {
      const std::size_t begin = layout.layer_begin(k, l);
      const std::size_t count = layout.layer_rows(l) * layout.layer_cols(l);
      auto& dist = l == 0 ? layer0 : hidden;
      for (std::size_t i = 0; i < count; ++i) w[begin + i] = dist(rng);
    }
  }
  return w;
}

WeightVector init_weights(const Architecture& arch, std::size_t n, double tau, Rng& rng) {
  return init_weights(arch, init_bounds(arch.input_dim, arch.input_dim, n, tau), rng);
}

double ExtendedReal::value() const {
  if (log_value > std::log(std::numeric_limits<double>::max()))
    return std::numeric_limits<double>::infinity();
  return std::exp(log_value);
}

std::string ExtendedReal::to_string() const {
  const double log10v = log_value / std::log(10.0);
  double exponent = std::floor(log10v);
  double mantissa = std::pow(10.0, log10v - exponent);
  if (mantissa >= 9.9995) {
    mantissa /= 10.0;
    exponent += 1.0;
  }
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.3fe%+.0f", mantissa, exponent);
  return buf;
}

bool ExtendedReal::exceeds(double limit) const { return log_value > std::log(limit); }

std::size_t desk_subnet_count(std::size_t n) { return std::max<std::size_t>(8 * n, 512); }

TheoryParams theory_params(const TheoryRequest& req) {
  if (req.n < 3) throw std::invalid_argument("theory_params: need n >= 3");
  TheoryParams p;
  const double n = static_cast<double>(req.n);
  const double ln = std::log(n);
  p.mode = req.mode;
  p.c1 = req.c1;
  p.c2 = req.c2;
  p.tau = 1.0 / (1.0 + static_cast<double>(req.d));
  p.beta = req.c1 * ln;
  p.K_theory.log_value = static_cast<double>(6 * req.d + req.r + 2) * ln;
  p.log_exponent = static_cast<int>(6 * req.L) + (req.variant == TheoryVariant::consistency ? 5 : 2);
  p.L_theory.log_value = 1.5 * p.K_theory.log_value + p.log_exponent * std::log(ln);
  // t_n = ceil(c2 L_n); at these magnitudes the ceiling is invisible in log space.
  p.t_theory.log_value = std::log(req.c2) + p.L_theory.log_value;
  p.feasible = !p.K_theory.exceeds(req.K_budget) && !p.t_theory.exceeds(req.t_budget);

  if (req.mode == ParamMode::theory && p.feasible) {
    p.K = static_cast<std::size_t>(std::llround(p.K_theory.value()));
    p.t_n = static_cast<std::size_t>(std::ceil(req.c2 * p.L_theory.value()));
  } else {
    p.K = req.desk_K == 0 ? desk_subnet_count(req.n) : req.desk_K;
    p.t_n = req.desk_t;
  }
  if (p.t_n == 0) throw std::invalid_argument("theory_params: t_n must be positive");
  p.lambda = 1.0 / static_cast<double>(p.t_n);
  return p;
}

}  // namespace opnn
