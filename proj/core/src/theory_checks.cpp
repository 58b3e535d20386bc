#include "opnn/theory_checks.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "json.hpp"

#include "opnn/gradient.hpp"
#include "opnn/interaction.hpp"
#include "opnn/network.hpp"

namespace opnn {
namespace {

void check_hidden_bound(const WeightVector& w, double B) {
  const WeightLayout& layout = w.layout();
  const Architecture& a = w.arch();
  for (std::size_t k = 0; k < a.subnets; ++k) {
    for (std::size_t l = 1; l < a.depth; ++l) {
      const std::size_t begin = layout.layer_begin(k, l);
      const std::size_t size = layout.layer_rows(l) * layout.layer_cols(l);
      for (std::size_t i = 0; i < size; ++i)
        if (!(std::abs(w[begin + i]) <= B))
          throw std::invalid_argument("layer_lipschitz_check: hidden weight exceeds B");
    }
  }
}

void fill_uniform(std::span<double> out, double bound, Rng& rng) {
  std::uniform_real_distribution<double> u(-bound, bound);
  for (double& v : out) v = u(rng);
}

Dataset probe_data(std::size_t d, const BoundParams& bounds, std::size_t count, Rng& rng) {
  std::uniform_real_distribution<double> ux(-bounds.alpha, bounds.alpha), uy(-1.0, 1.0);
  std::vector<double> xs(count * d), ys(count);
  for (double& v : xs) v = ux(rng);
  for (double& v : ys) v = uy(rng);
  return Dataset(d, std::move(xs), std::move(ys));
}

void check_sweep(std::span<const std::size_t> sweep) {
  if (sweep.size() < 4) throw std::invalid_argument("probe: sweep needs at least 4 values");
  const double ratio = static_cast<double>(sweep[1]) / static_cast<double>(sweep[0]);
  if (!(ratio > 1.0)) throw std::invalid_argument("probe: sweep must be increasing");
  for (std::size_t i = 1; i < sweep.size(); ++i) {
    const double q = static_cast<double>(sweep[i]) / static_cast<double>(sweep[i - 1]);
    if (std::abs(q - ratio) > 1e-9 * ratio)
      throw std::invalid_argument("probe: sweep must be a geometric progression");
  }
}

// Clamps each coordinate of w to the sampling box of its layer.
void clamp_to_bounds(WeightVector& w, const BoundParams& bounds) {
  const WeightLayout& layout = w.layout();
  const Architecture& a = w.arch();
  for (std::size_t k = 0; k < a.subnets; ++k) {
    w.outer(k) = std::clamp(w.outer(k), -bounds.gamma_star, bounds.gamma_star);
    for (std::size_t l = 0; l < a.depth; ++l) {
      const double b = l == 0 ? bounds.A : bounds.B;
      const std::size_t begin = layout.layer_begin(k, l);
      const std::size_t size = layout.layer_rows(l) * layout.layer_cols(l);
      for (std::size_t i = 0; i < size; ++i) w[begin + i] = std::clamp(w[begin + i], -b, b);
    }
  }
}

}  // namespace

void BoundParams::validate() const {
  if (!(B >= 1.0) || !(gamma_star >= 1.0) || !(alpha >= 1.0) || !(A > 0.0))
    throw std::invalid_argument("bounds: need B, gamma*, alpha >= 1 and A > 0");
}

LayerLipschitz layer_lipschitz_check(const WeightVector& w, const WeightVector& v,
                                     std::span<const double> x, std::size_t l,
                                     const BoundParams& bounds) {
  bounds.validate();
  const Architecture& a = w.arch();
  if (!(v.arch() == a)) throw std::invalid_argument("layer_lipschitz_check: shape mismatch");
  if (l < 1 || l > a.depth) throw std::invalid_argument("layer_lipschitz_check: need 1 <= l <= L");
  if (x.size() != a.input_dim) throw std::invalid_argument("layer_lipschitz_check: input size");
  for (double xi : x)
    if (!(std::abs(xi) <= bounds.alpha))
      throw std::invalid_argument("layer_lipschitz_check: input outside [-alpha, alpha]^d");
  check_hidden_bound(w, bounds.B);
  check_hidden_bound(v, bounds.B);

  const WeightLayout& layout = w.layout();
  const double growth = std::pow((2.0 * static_cast<double>(a.width) + 1.0) * bounds.B,
                                 static_cast<double>(l));
  LayerLipschitz out;
  double worst_ratio = -1.0;
  for (std::size_t k = 0; k < a.subnets; ++k) {
    double diff = 0.0;
    const std::size_t begin = layout.subnet_begin(k);
    for (std::size_t i = 0; i < layout.inner_per_subnet(); ++i)
      diff = std::max(diff, std::abs(w[begin + i] - v[begin + i]));
    const std::vector<double> fw = hidden_outputs(w, k, l, x);
    const std::vector<double> fv = hidden_outputs(v, k, l, x);
    double lhs = 0.0;
    for (std::size_t i = 0; i < fw.size(); ++i) lhs = std::max(lhs, std::abs(fw[i] - fv[i]));
    const double rhs = growth * bounds.alpha * diff;
    const bool ok = lhs <= rhs;
    out.ok = out.ok && ok;
    const double ratio = rhs > 0.0 ? lhs / rhs : (lhs > 0.0 ? std::numeric_limits<double>::infinity() : 0.0);
    if (ratio > worst_ratio) {
      worst_ratio = ratio;
      out.lhs = lhs;
      out.rhs = rhs;
    }
  }
  return out;
}

WeightVector sample_bounded(const Architecture& arch, const BoundParams& bounds, Rng& rng) {
  arch.validate();
  WeightVector w(arch);
  const WeightLayout& layout = w.layout();
  fill_uniform(w.outer_block(), bounds.gamma_star, rng);
  for (std::size_t k = 0; k < arch.subnets; ++k) {
    for (std::size_t l = 0; l < arch.depth; ++l) {
      const std::size_t size = layout.layer_rows(l) * layout.layer_cols(l);
      fill_uniform(w.values().subspan(layout.layer_begin(k, l), size), l == 0 ? bounds.A : bounds.B,
                   rng);
    }
  }
  return w;
}

double log_log_slope(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size() || x.size() < 2)
    throw std::invalid_argument("log_log_slope: need two or more paired values");
  double mx = 0.0, my = 0.0;
  const double m = static_cast<double>(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (!(x[i] > 0.0) || !(y[i] > 0.0)) throw std::invalid_argument("log_log_slope: values must be positive");
    mx += std::log(x[i]);
    my += std::log(y[i]);
  }
  mx /= m;
  my /= m;
  double sxx = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double dx = std::log(x[i]) - mx;
    sxx += dx * dx;
    sxy += dx * (std::log(y[i]) - my);
  }
  return sxy / sxx;
}

ProbeReport grad_scaling_probe(const Architecture& base, std::span<const std::size_t> K_sweep,
                               const BoundParams& bounds, const ProbeOptions& opts, Rng& rng) {
  bounds.validate();
  check_sweep(K_sweep);
  if (opts.samples < 1) throw std::invalid_argument("probe: need at least one sample");
  const Dataset data = probe_data(base.input_dim, bounds, opts.data_points, rng);
  ProbeReport rep;
  rep.threshold = opts.threshold;
  for (std::size_t K : K_sweep) {
    Architecture arch = base;
    arch.subnets = K;
    const WeightLayout layout(arch);
    GradientWorkspace ws;
    std::vector<double> grad(layout.size());
    double best = 0.0;
    for (std::size_t s = 0; s < opts.samples; ++s) {
      const WeightVector w = sample_bounded(arch, bounds, rng);
      risk_and_gradient(layout, w.values(), data, grad, ws);
      best = std::max(best, euclidean_norm(grad));
    }
    rep.sweep.push_back(K);
    rep.max_values.push_back(best);
  }
  std::vector<double> ks(rep.sweep.begin(), rep.sweep.end());
  rep.slope = log_log_slope(ks, rep.max_values);
  return rep;
}

ProbeReport lipschitz_scaling_probe(const Architecture& base,
                                    std::span<const std::size_t> K_sweep,
                                    const BoundParams& bounds, const ProbeOptions& opts,
                                    Rng& rng) {
  bounds.validate();
  check_sweep(K_sweep);
  if (opts.samples < 1) throw std::invalid_argument("probe: need at least one pair");
  if (!(opts.pair_radius > 0.0)) throw std::invalid_argument("probe: pair_radius must be positive");
  const Dataset data = probe_data(base.input_dim, bounds, opts.data_points, rng);
  ProbeReport rep;
  rep.threshold = opts.threshold;
  std::uniform_real_distribution<double> step(-opts.pair_radius, opts.pair_radius);
  for (std::size_t K : K_sweep) {
    Architecture arch = base;
    arch.subnets = K;
    const WeightLayout layout(arch);
    GradientWorkspace ws;
    std::vector<double> g1(layout.size()), g2(layout.size()), dw(layout.size()),
        dg(layout.size());
    double best = 0.0;
    for (std::size_t s = 0; s < opts.samples; ++s) {
      const WeightVector w1 = sample_bounded(arch, bounds, rng);
      WeightVector w2 = w1;
      for (double& v : w2.values()) v += step(rng);
      clamp_to_bounds(w2, bounds);
      for (std::size_t i = 0; i < dw.size(); ++i) dw[i] = w1[i] - w2[i];
      const double dist = euclidean_norm(dw);
      if (dist == 0.0) continue;
      risk_and_gradient(layout, w1.values(), data, g1, ws);
      risk_and_gradient(layout, w2.values(), data, g2, ws);
      for (std::size_t i = 0; i < dg.size(); ++i) dg[i] = g1[i] - g2[i];
      best = std::max(best, euclidean_norm(dg) / dist);
    }
    rep.sweep.push_back(K);
    rep.max_values.push_back(best);
  }
  std::vector<double> ks(rep.sweep.begin(), rep.sweep.end());
  rep.slope = log_log_slope(ks, rep.max_values);
  return rep;
}

void FunctionClassSpec::validate() const {
  arch.validate();
  if (!(A >= 1.0) || !(B >= 1.0) || !(C >= 1.0))
    throw std::invalid_argument("function class: need A, B, C >= 1");
  if (!(beta > 0.0) || !(alpha > 0.0))
    throw std::invalid_argument("function class: beta and alpha must be positive");
  if (d_star > 0) {
    if (arch.input_dim != d_star) throw std::invalid_argument("function class: per-group input must be d*");
    if (d_star > ambient_dim()) throw std::invalid_argument("function class: d* exceeds d");
  }
}

double empirical_lp_distance(std::span<const double> f, std::span<const double> g, double p) {
  if (f.size() != g.size() || f.empty()) throw std::invalid_argument("lp distance: size mismatch");
  double s = 0.0;
  for (std::size_t i = 0; i < f.size(); ++i) s += std::pow(std::abs(f[i] - g[i]), p);
  return std::pow(s / static_cast<double>(f.size()), 1.0 / p);
}

CoverResult greedy_cover(std::span<const double> values, std::size_t rows, double epsilon,
                         double p) {
  if (rows == 0 || values.size() % rows) throw std::invalid_argument("greedy_cover: bad table");
  if (!(p >= 1.0)) throw std::invalid_argument("greedy_cover: need p >= 1");
  const std::size_t P = values.size() / rows;
  auto row = [&](std::size_t i) { return values.subspan(i * P, P); };
  std::vector<char> near(rows * rows, 0);
  for (std::size_t i = 0; i < rows; ++i) {
    near[i * rows + i] = 1;
    for (std::size_t j = i + 1; j < rows; ++j) {
      const bool close = empirical_lp_distance(row(i), row(j), p) <= epsilon;
      near[i * rows + j] = near[j * rows + i] = close;
    }
  }
  CoverResult out;
  std::vector<char> covered(rows, 0);
  std::size_t remaining = rows;
  while (remaining > 0) {
    std::size_t best = rows, best_gain = 0;
    for (std::size_t i = 0; i < rows; ++i) {
      std::size_t gain = 0;
      for (std::size_t j = 0; j < rows; ++j)
        if (!covered[j] && near[i * rows + j]) ++gain;
      if (gain > best_gain) {
        best = i;
        best_gain = gain;
      }
    }
    out.centers.push_back(best);
    for (std::size_t j = 0; j < rows; ++j)
      if (!covered[j] && near[best * rows + j]) {
        covered[j] = 1;
        --remaining;
      }
  }
  out.valid = true;
  for (std::size_t j = 0; j < rows && out.valid; ++j) {
    bool hit = false;
    for (std::size_t c : out.centers)
      if (empirical_lp_distance(row(c), row(j), p) <= epsilon) {
        hit = true;
        break;
      }
    out.valid = hit;
  }
  return out;
}

std::vector<double> sample_class_values(const FunctionClassSpec& cls, std::size_t M,
                                        std::span<const double> x_points, Rng& rng) {
  cls.validate();
  const std::size_t d = cls.ambient_dim();
  if (x_points.empty() || x_points.size() % d)
    throw std::invalid_argument("covering: x_points must hold whole points");
  const std::size_t P = x_points.size() / d;
  const BoundParams box{cls.B, cls.A, cls.C / static_cast<double>(cls.arch.subnets), 1.0};
  std::vector<double> out(M * P);
  if (cls.d_star == 0) {
    for (std::size_t m = 0; m < M; ++m) {
      const WeightVector w = sample_bounded(cls.arch, box, rng);
      for (std::size_t i = 0; i < P; ++i) {
        std::span<const double> x = x_points.subspan(i * d, d);
        const bool inside = std::all_of(x.begin(), x.end(),
                                        [&](double v) { return std::abs(v) <= cls.alpha; });
        out[m * P + i] = inside ? truncate(cls.beta, forward(w, x)) : 0.0;
      }
    }
    return out;
  }
  const InteractionArchitecture iarch = InteractionArchitecture::make(
      d, cls.d_star, cls.arch.depth, cls.arch.width, cls.arch.subnets);
  for (std::size_t m = 0; m < M; ++m) {
    std::vector<double> w;
    w.reserve(iarch.total_weights());
    for (std::size_t g = 0; g < iarch.group_count(); ++g) {
      const WeightVector part = sample_bounded(cls.arch, box, rng);
      w.insert(w.end(), part.values().begin(), part.values().end());
    }
    for (std::size_t i = 0; i < P; ++i) {
      std::span<const double> x = x_points.subspan(i * d, d);
      const bool inside = std::all_of(x.begin(), x.end(),
                                      [&](double v) { return std::abs(v) <= cls.alpha; });
      out[m * P + i] = inside ? truncate(cls.beta, interaction_forward(iarch, w, x)) : 0.0;
    }
  }
  return out;
}

double covering_log_bound(const FunctionClassSpec& cls, double epsilon, double p,
                          std::size_t smoothness_k) {
  if (smoothness_k < 1) throw std::invalid_argument("covering bound: k must be >= 1");
  auto single = [&](double dim, double eps) {
    const double L = static_cast<double>(cls.arch.depth);
    const double log_main = dim * std::log(cls.alpha) + (L - 1.0) * dim * std::log(cls.B) +
                            dim * std::log(cls.A) +
                            dim / static_cast<double>(smoothness_k) * std::log(cls.C / eps);
    const double exponent = std::exp(log_main) + 1.0;
    return exponent * p * std::log(cls.beta / eps);
  };
  if (cls.d_star == 0) return single(static_cast<double>(cls.arch.input_dim), epsilon);
  const double G = static_cast<double>(binomial(cls.ambient_dim(), cls.d_star));
  return G * single(static_cast<double>(cls.d_star), epsilon / G);
}

bool CoveringEstimate::within_bound() const {
  return std::log(static_cast<double>(N)) <= log_bound;
}

CoveringEstimate covering_estimate(const FunctionClassSpec& cls, std::size_t M,
                                   std::span<const double> x_points, double epsilon, double p,
                                   Rng& rng, std::size_t smoothness_k) {
  if (!(epsilon > 0.0) || !(epsilon < cls.beta))
    throw std::invalid_argument("covering: need 0 < epsilon < beta");
  if (M < 2) throw std::invalid_argument("covering: need M >= 2");
  const std::vector<double> values = sample_class_values(cls, M, x_points, rng);
  const CoverResult cover = greedy_cover(values, M, epsilon, p);
  return {cover.size(), cover.valid, covering_log_bound(cls, epsilon, p, smoothness_k)};
}

std::string probe_json(const ProbeReport& report) {
  const nlohmann::json doc = {{"sweep", report.sweep},
          {"max_values", report.max_values},
          {"slope", report.slope},
          {"threshold", report.threshold},
          {"pass", report.pass()}};
  return doc.dump(2);
}

}  // namespace opnn
