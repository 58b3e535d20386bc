#include "opnn/lemma1.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace opnn {
namespace {

double norm(std::span<const double> a) {
  double s = 0.0;
  for (double v : a) s += v * v;
  return std::sqrt(s);
}

double distance(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
  return std::sqrt(s);
}

// Visits every point of the axis grid centered at `center` with the given
// pitch whose distance to the center is at most `radius`.
template <class Visit>
std::size_t for_each_ball_point(std::span<const double> center, double radius, double pitch,
                                Visit&& visit) {
  const std::size_t dim = center.size();
  if (dim == 0) {
    visit(std::span<const double>());
    return 1;
  }
  const long steps = static_cast<long>(std::floor(radius / pitch));
  const double per_axis = 2.0 * static_cast<double>(steps) + 1.0;
  if (std::pow(per_axis, static_cast<double>(dim)) > 5e7)
    throw std::invalid_argument("certify: grid over region A is too large");
  std::vector<long> idx(dim, -steps);
  std::vector<double> p(dim);
  std::size_t visited = 0;
  for (;;) {
    double r2 = 0.0;
    for (std::size_t j = 0; j < dim; ++j) {
      const double off = static_cast<double>(idx[j]) * pitch;
      p[j] = center[j] + off;
      r2 += off * off;
    }
    if (r2 <= radius * radius) {
      visit(std::span<const double>(p));
      ++visited;
    }
    std::size_t j = 0;
    while (j < dim && idx[j] == steps) idx[j++] = -steps;
    if (j == dim) break;
    ++idx[j];
  }
  return visited;
}

}  // namespace

double Lemma1Instance::region_radius() const { return 2.0 * std::sqrt(F0()) + 1.0; }

Certification certify(Lemma1Instance& inst, double pitch, double inflation) {
  if (!(pitch > 0.0) || !(inflation >= 1.0))
    throw std::invalid_argument("certify: need pitch > 0 and inflation >= 1");
  const std::size_t du = inst.dim_u, dv = inst.dim_v, dim = du + dv;
  std::vector<double> center(inst.u0);
  center.insert(center.end(), inst.v0.begin(), inst.v0.end());

  Certification c;
  const double h = 1e-5;
  std::vector<double> g(dim), gp(dim), gm(dim), q(dim);
  auto gradient_at = [&](std::span<const double> w, std::span<double> out) {
    inst.grad(w.first(du), w.subspan(du), out.first(du), out.subspan(du));
  };
  c.grid_points = for_each_ball_point(center, inst.region_radius(), pitch,
                                      [&](std::span<const double> w) {
    gradient_at(w, g);
    c.grad_max = std::max(c.grad_max, norm(g));
    double frob = 0.0;
    std::copy(w.begin(), w.end(), q.begin());
    for (std::size_t j = 0; j < dim; ++j) {
      q[j] = w[j] + h;
      gradient_at(q, gp);
      q[j] = w[j] - h;
      gradient_at(q, gm);
      q[j] = w[j];
      for (std::size_t i = 0; i < dim; ++i) {
        const double hij = (gp[i] - gm[i]) / (2.0 * h);
        frob += hij * hij;
      }
    }
    c.hessian_max = std::max(c.hessian_max, std::sqrt(frob));
  });
  inst.L_n = inflation * std::max(c.grad_max, c.hessian_max);
  if (!(inst.L_n > 0.0)) inst.L_n = std::numeric_limits<double>::min();

  const double ustar_norm = norm(inst.u_star);
  const double f_ref = inst.F(inst.u_star, inst.v0);
  double worst_gap = 0.0;
  for_each_ball_point(inst.v0, std::sqrt(2.0 * inst.F0()), pitch,
                      [&](std::span<const double> v) {
    const double dist = distance(v, inst.v0);
    if (dist == 0.0) return;
    const double gap = std::abs(inst.F(inst.u_star, v) - f_ref);
    worst_gap = std::max(worst_gap, gap);
    if (ustar_norm > 0.0) c.difference_max = std::max(c.difference_max, gap / (ustar_norm * dist));
  });
  if (ustar_norm == 0.0 && worst_gap > 0.0) {
    c.d_certified = false;
    c.difference_max = std::numeric_limits<double>::infinity();
  }
  inst.D_n = c.d_certified ? inflation * c.difference_max : std::numeric_limits<double>::infinity();
  if (!(inst.D_n > 0.0)) inst.D_n = std::numeric_limits<double>::min();
  return c;
}

Lemma1Report lemma1_run(const Lemma1Instance& inst, std::size_t t_n, bool d_certified,
                        double tolerance) {
  if (!(inst.L_n > 0.0) || !(inst.D_n > 0.0))
    throw std::invalid_argument("lemma1_run: D_n and L_n must be positive");
  if (t_n == 0 || static_cast<double>(t_n) < inst.L_n)
    throw std::invalid_argument("lemma1_run: need t_n >= L_n");
  if (inst.u0.size() != inst.dim_u || inst.u_star.size() != inst.dim_u ||
      inst.v0.size() != inst.dim_v)
    throw std::invalid_argument("lemma1_run: dimension mismatch");

  Lemma1Report rep;
  rep.t_n = t_n;
  rep.lambda = 1.0 / static_cast<double>(t_n);
  rep.F0 = inst.F0();
  rep.F_star = inst.F(inst.u_star, inst.v0);
  rep.displacement_bound = std::sqrt(2.0 * rep.F0);
  rep.hypotheses_certified = d_certified;

  std::vector<double> u(inst.u0), v(inst.v0), gu(inst.dim_u), gv(inst.dim_v);
  double f = rep.F0;
  for (std::size_t t = 0; t < t_n; ++t) {
    inst.grad(u, v, gu, gv);
    for (std::size_t i = 0; i < u.size(); ++i) u[i] -= rep.lambda * gu[i];
    for (std::size_t i = 0; i < v.size(); ++i) v[i] -= rep.lambda * gv[i];
    const double next = inst.F(u, v);
    if (!std::isfinite(next)) throw std::runtime_error("lemma1_run: objective diverged");
    if (next > f + tolerance) rep.monotone_violations.push_back(t + 1);
    f = next;
    rep.max_u_displacement = std::max(rep.max_u_displacement, distance(u, inst.u0));
    rep.max_v_displacement = std::max(rep.max_v_displacement, distance(v, inst.v0));
  }
  rep.F_final = f;
  const double us = norm(inst.u_star);
  const double d_term = us > 0.0 ? inst.D_n * us * rep.displacement_bound : 0.0;
  rep.rhs = rep.F_star + d_term + 0.5 * distance(inst.u_star, inst.u0) * distance(inst.u_star, inst.u0) +
            rep.F0 / static_cast<double>(t_n);
  rep.conclusion_ok = rep.F_final <= rep.rhs;
  rep.displacement_ok = rep.max_u_displacement <= rep.displacement_bound + tolerance &&
                        rep.max_v_displacement <= rep.displacement_bound + tolerance;
  rep.monotone_ok = rep.monotone_violations.empty();
  return rep;
}

Lemma1Instance sine_instance() {
  Lemma1Instance inst;
  inst.name = "sine";
  inst.F = [](std::span<const double> u, std::span<const double> v) {
    const double r = u[0] - std::sin(v[0]);
    return r * r;
  };
  inst.grad = [](std::span<const double> u, std::span<const double> v, std::span<double> gu,
                 std::span<double> gv) {
    const double r = u[0] - std::sin(v[0]);
    gu[0] = 2.0 * r;
    gv[0] = -2.0 * r * std::cos(v[0]);
  };
  inst.u0 = {1.0};
  inst.v0 = {0.0};
  inst.u_star = {0.0};
  return inst;
}

Lemma1Instance fixed_point_instance() {
  Lemma1Instance inst;
  inst.name = "fixed-point";
  inst.F = [](std::span<const double> u, std::span<const double> v) {
    return u[0] * u[0] + v[0] * v[0];
  };
  inst.grad = [](std::span<const double> u, std::span<const double> v, std::span<double> gu,
                 std::span<double> gv) {
    gu[0] = 2.0 * u[0];
    gv[0] = 2.0 * v[0];
  };
  inst.u0 = {0.0};
  inst.v0 = {0.0};
  inst.u_star = {0.0};
  return inst;
}

Lemma1Instance random_quadratic_instance(Rng& rng) {
  std::uniform_real_distribution<double> sym(-1.0, 1.0), pos(0.1, 1.0);
  const double M = sym(rng);
  const double u0 = sym(rng);
  const double v0 = sym(rng);
  const double alpha = pos(rng);
  Lemma1Instance inst;
  inst.name = "quadratic";
  inst.F = [=](std::span<const double> u, std::span<const double> v) {
    const double r = u[0] - M * v[0];
    return r * r + alpha * (v[0] - v0) * (v[0] - v0);
  };
  inst.grad = [=](std::span<const double> u, std::span<const double> v, std::span<double> gu,
                  std::span<double> gv) {
    const double r = u[0] - M * v[0];
    gu[0] = 2.0 * r;
    gv[0] = -2.0 * M * r + 2.0 * alpha * (v[0] - v0);
  };
  inst.u0 = {u0};
  inst.v0 = {v0};
  inst.u_star = {M * v0};
  return inst;
}

}  // namespace opnn
