#include "opnn/gradient.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

#if defined(__SIZEOF_FLOAT128__) && !defined(__clang__)
#include <quadmath.h>
#endif

#include "opnn/network.hpp"

namespace opnn {
namespace {

struct Shape {
  std::size_t d, r, L;
  explicit Shape(const Architecture& a) : d(a.input_dim), r(a.width), L(a.depth) {}
  std::size_t hidden_begin(std::size_t l) const { return r * (d + 1) + (l - 1) * r * (r + 1); }
};

// Activations of one subnet on one input: layers 1..L-1 hold r values each,
// layer L holds one. `vals` and `slopes` receive r*(L-1)+1 entries. `block`
// points at the subnet's first inner weight.
void subnet_forward(const Shape& sh, const double* block, const double* x, double* vals,
                    double* slopes) {
  const std::size_t d = sh.d, r = sh.r, L = sh.L;
  for (std::size_t i = 0; i < r; ++i) {
    const double* row = block + i * (d + 1);
    double z = row[0];
    for (std::size_t j = 0; j < d; ++j) z += row[j + 1] * x[j];
    const SigmoidEval s = sigmoid_with_slope(z);
    vals[i] = s.value;
    slopes[i] = s.slope;
  }
  for (std::size_t l = 1; l + 1 < L; ++l) {
    const double* layer = block + sh.hidden_begin(l);
    const double* prev = vals + (l - 1) * r;
    for (std::size_t i = 0; i < r; ++i) {
      const double* row = layer + i * (r + 1);
      double z = row[0];
      for (std::size_t j = 0; j < r; ++j) z += row[j + 1] * prev[j];
      const SigmoidEval s = sigmoid_with_slope(z);
      vals[l * r + i] = s.value;
      slopes[l * r + i] = s.slope;
    }
  }
  const double* top = block + sh.hidden_begin(L - 1);
  const double* prev = vals + (L - 2) * r;
  double z = top[0];
  for (std::size_t j = 0; j < r; ++j) z += top[j + 1] * prev[j];
  const SigmoidEval s = sigmoid_with_slope(z);
  vals[(L - 1) * r] = s.value;
  slopes[(L - 1) * r] = s.slope;
}

// Adds one sample's contribution to the gradient of subnet k. `coef` is
// dLoss/df_w(x); the outer partial gets coef * f_k, inner partials get
// coef * outer_k * d f_k / d w. `block` and `gblock` point at the subnet's
// first inner weight and gradient entry.
void subnet_backward(const Shape& sh, const double* block, double outer, const double* x,
                     const double* vals, const double* slopes, double coef, double& gouter,
                     double* gblock, double* delta, double* delta_next) {
  const std::size_t d = sh.d, r = sh.r, L = sh.L;
  gouter += coef * vals[(L - 1) * r];
  if (outer == 0.0) return;  // every inner partial carries the factor outer_k

  const double delta_top = coef * outer * slopes[(L - 1) * r];
  {
    const std::size_t off = sh.hidden_begin(L - 1);
    const double* top = block + off;
    double* g = gblock + off;
    const double* prev = vals + (L - 2) * r;
    const double* prev_slope = slopes + (L - 2) * r;
    g[0] += delta_top;
    for (std::size_t j = 0; j < r; ++j) {
      g[j + 1] += delta_top * prev[j];
      delta[j] = delta_top * top[j + 1] * prev_slope[j];
    }
  }
  for (std::size_t l = L - 2; l >= 1; --l) {
    const std::size_t off = sh.hidden_begin(l);
    const double* layer = block + off;
    double* g = gblock + off;
    const double* prev = vals + (l - 1) * r;
    const double* prev_slope = slopes + (l - 1) * r;
    std::fill(delta_next, delta_next + r, 0.0);
    for (std::size_t i = 0; i < r; ++i) {
      const double di = delta[i];
      const double* row = layer + i * (r + 1);
      double* grow = g + i * (r + 1);
      grow[0] += di;
      for (std::size_t j = 0; j < r; ++j) {
        grow[j + 1] += di * prev[j];
        delta_next[j] += di * row[j + 1];
      }
    }
    for (std::size_t j = 0; j < r; ++j) delta[j] = delta_next[j] * prev_slope[j];
  }
  for (std::size_t i = 0; i < r; ++i) {
    double* grow = gblock + i * (d + 1);
    grow[0] += delta[i];
    for (std::size_t j = 0; j < d; ++j) grow[j + 1] += delta[i] * x[j];
  }
}

}  // namespace

void accumulate_outputs(const WeightLayout& layout, std::span<const double> w,
                        const Dataset& data, std::span<double> outputs, GradientWorkspace& ws) {
  const std::size_t n = data.size();
  if (data.dim() != layout.arch().input_dim)
    throw std::invalid_argument("network: dataset dimension does not match network");
  if (w.size() != layout.size()) throw std::invalid_argument("network: weight size mismatch");
  if (outputs.size() != n) throw std::invalid_argument("network: output buffer size mismatch");

  const std::size_t K = layout.arch().subnets, r = layout.arch().width;
  const std::size_t stride = r * (layout.arch().depth - 1) + 1;
  ws.cached = K * n * stride <= ws.cache_limit;
  ws.samples = n;
  if (ws.cached) {
    ws.values.resize(K * n * stride);
    ws.slopes.resize(K * n * stride);
  } else {
    ws.values.resize(stride);
    ws.slopes.resize(stride);
  }
  const Shape sh(layout.arch());
  const std::size_t d = sh.d;
  const double* xs = data.xs().data();
  for (std::size_t k = 0; k < K; ++k) {
    const double outer = w[layout.outer(k)];
    const double* block = w.data() + layout.subnet_begin(k);
    for (std::size_t s = 0; s < n; ++s) {
      const std::size_t base = ws.cached ? (k * n + s) * stride : 0;
      double* vals = ws.values.data() + base;
      subnet_forward(sh, block, xs + s * d, vals, ws.slopes.data() + base);
      outputs[s] += outer * vals[stride - 1];
    }
  }
}

void accumulate_gradient(const WeightLayout& layout, std::span<const double> w,
                         const Dataset& data, std::span<const double> coef,
                         std::span<double> grad, GradientWorkspace& ws) {
  const std::size_t n = data.size();
  if (ws.samples != n) throw std::logic_error("accumulate_gradient: run accumulate_outputs first");
  if (grad.size() != layout.size()) throw std::invalid_argument("network: gradient size mismatch");
  const std::size_t K = layout.arch().subnets, r = layout.arch().width;
  const std::size_t stride = r * (layout.arch().depth - 1) + 1;
  std::fill(grad.begin(), grad.end(), 0.0);
  std::vector<double> delta(r), delta_next(r);
  const Shape sh(layout.arch());
  const std::size_t d = sh.d;
  const double* xs = data.xs().data();
  for (std::size_t k = 0; k < K; ++k) {
    const double outer = w[layout.outer(k)];
    const double* block = w.data() + layout.subnet_begin(k);
    double* gblock = grad.data() + layout.subnet_begin(k);
    double& gouter = grad[layout.outer(k)];
    for (std::size_t s = 0; s < n; ++s) {
      const std::size_t base = ws.cached ? (k * n + s) * stride : 0;
      const double* x = xs + s * d;
      if (!ws.cached) subnet_forward(sh, block, x, ws.values.data(), ws.slopes.data());
      subnet_backward(sh, block, outer, x, ws.values.data() + base, ws.slopes.data() + base,
                      coef[s], gouter, gblock, delta.data(), delta_next.data());
    }
  }
}

double risk_coefficients(const Dataset& data, std::span<const double> outputs,
                         std::span<double> coef) {
  const std::size_t n = data.size();
  double risk = 0.0;
  const double scale = 2.0 / static_cast<double>(n);
  for (std::size_t s = 0; s < n; ++s) {
    const double res = outputs[s] - data.y(s);
    risk += res * res;
    coef[s] = scale * res;
  }
  return risk / static_cast<double>(n);
}

double risk_and_gradient(const WeightLayout& layout, std::span<const double> w,
                         const Dataset& data, std::span<double> grad,
                         GradientWorkspace& ws) {
  const std::size_t n = data.size();
  if (n == 0) throw std::invalid_argument("grad_risk: empty dataset");
  ws.outputs.assign(n, 0.0);
  ws.coef.resize(n);
  accumulate_outputs(layout, w, data, ws.outputs, ws);
  const double risk = risk_coefficients(data, ws.outputs, ws.coef);
  accumulate_gradient(layout, w, data, ws.coef, grad, ws);
  return risk;
}

GradientVector grad_risk(const WeightVector& w, const Dataset& data) {
  GradientVector g(w.arch());
  GradientWorkspace ws;
  risk_and_gradient(w.layout(), w.values(), data, g.values(), ws);
  return g;
}

GradientVector grad_output(const WeightVector& w, std::span<const double> x) {
  if (x.size() != w.arch().input_dim)
    throw std::invalid_argument("grad_output: input dimension mismatch");
  const WeightLayout& layout = w.layout();
  const std::size_t r = w.arch().width;
  const std::size_t stride = r * (w.arch().depth - 1) + 1;
  GradientVector g(w.arch());
  std::vector<double> vals(stride), slopes(stride), delta(r), delta_next(r);
  const Shape sh(w.arch());
  for (std::size_t k = 0; k < w.arch().subnets; ++k) {
    const double* block = w.values().data() + layout.subnet_begin(k);
    subnet_forward(sh, block, x.data(), vals.data(), slopes.data());
    subnet_backward(sh, block, w.outer(k), x.data(), vals.data(), slopes.data(), 1.0,
                    g.outer(k), g.values().data() + layout.subnet_begin(k), delta.data(),
                    delta_next.data());
  }
  return g;
}

double grad_formula_direct(const WeightVector& w, std::span<const double> x,
                           const WeightIndex& target) {
  const Architecture& a = w.arch();
  const std::size_t L = a.depth, r = a.width;
  if (x.size() != a.input_dim)
    throw std::invalid_argument("grad_formula_direct: input dimension mismatch");
  if (std::pow(static_cast<double>(r), static_cast<double>(L - 2)) > 1e6)
    throw std::domain_error("grad_formula_direct: r^(L-2) exceeds 10^6 paths");
  (void)w.layout().offset(target);  // range check

  const std::size_t k = target.subnet;
  // f[l][j]: f^{(l)}_{k,j}(x) with f[l][0] = 1; zs[l][i]: pre-activation of
  // neuron i+1 in layer l (l = 1..L).
  std::vector<std::vector<double>> f(L + 1), zs(L + 1);
  f[0].assign(a.input_dim + 1, 1.0);
  std::copy(x.begin(), x.end(), f[0].begin() + 1);
  for (std::size_t l = 1; l <= L; ++l) {
    const std::size_t rows = l == L ? 1 : r;
    f[l].assign(rows + 1, 1.0);
    zs[l].assign(rows, 0.0);
    for (std::size_t i = 0; i < rows; ++i) {
      double z = 0.0;
      for (std::size_t j = 0; j < f[l - 1].size(); ++j) z += w.at({l - 1, k, i, j}) * f[l - 1][j];
      zs[l][i] = z;
      f[l][i + 1] = sigmoid(z);
    }
  }
  const double outer = w.at({L, k, 0, 0});
  if (target.layer == L) return f[L][1];

  auto dsig = [](double z) { return sigmoid_with_slope(z).slope; };
  const std::size_t l = target.layer, i = target.row, j = target.col;
  const double head = f[l][j] * dsig(zs[l + 1][i]);
  if (l + 1 == L) return head * outer;

  // Free path indices s_{l+2}, ..., s_{L-1}, each in 0..r-1.
  const std::size_t free = L - l - 2;
  std::vector<std::size_t> s(free, 0);
  double total = 0.0;
  for (;;) {
    double term = head;
    std::size_t from = i;
    for (std::size_t m = 0; m < free; ++m) {
      const std::size_t layer = l + 2 + m;  // neuron s_m lives in this layer
      term *= w.at({layer - 1, k, s[m], from + 1}) * dsig(zs[layer][s[m]]);
      from = s[m];
    }
    term *= w.at({L - 1, k, 0, from + 1}) * dsig(zs[L][0]) * outer;
    total += term;

    std::size_t m = free;
    while (m > 0) {
      if (++s[m - 1] < r) break;
      s[m - 1] = 0;
      --m;
    }
    if (m == 0) break;
  }
  return total;
}

std::vector<double> fd_gradient(const std::function<double(std::span<const double>)>& f,
                                std::span<const double> w, double h_floor) {
  if (!(h_floor > 0.0)) throw std::invalid_argument("fd_gradient: step must be positive");
  std::vector<double> point(w.begin(), w.end());
  std::vector<double> g(w.size());
  for (std::size_t i = 0; i < w.size(); ++i) {
    const double h = std::max(h_floor, 1e-8 * std::abs(w[i]));
    point[i] = w[i] + h;
    const double up = f(point);
    point[i] = w[i] - h;
    const double down = f(point);
    point[i] = w[i];
    g[i] = (up - down) / (2.0 * h);
  }
  return g;
}

namespace {

#if defined(__SIZEOF_FLOAT128__) && !defined(__clang__)
using Wide = __float128;
inline Wide wide_exp(Wide z) { return expq(z); }
#else
using Wide = long double;
inline Wide wide_exp(Wide z) { return std::exp(z); }
#endif

// Plain forward pass in Wide, sharing nothing with the double kernels.
Wide wide_risk(const WeightLayout& layout, const std::vector<Wide>& w, const Dataset& data) {
  const Architecture& a = layout.arch();
  std::vector<Wide> cur, next;
  Wide total = 0;
  for (std::size_t s = 0; s < data.size(); ++s) {
    const auto x = data.x(s);
    Wide f = 0;
    for (std::size_t k = 0; k < a.subnets; ++k) {
      cur.assign(x.begin(), x.end());
      for (std::size_t l = 0; l < a.depth; ++l) {
        const std::size_t begin = layout.layer_begin(k, l), rows = layout.layer_rows(l),
                          cols = layout.layer_cols(l);
        next.resize(rows);
        for (std::size_t i = 0; i < rows; ++i) {
          const Wide* row = w.data() + begin + i * cols;
          Wide z = row[0];
          for (std::size_t j = 1; j < cols; ++j) z += row[j] * cur[j - 1];
          next[i] = 1 / (1 + wide_exp(-z));
        }
        cur.swap(next);
      }
      f += w[layout.outer(k)] * cur[0];
    }
    const Wide e = f - static_cast<Wide>(data.y(s));
    total += e * e;
  }
  return total / static_cast<Wide>(data.size());
}

}  // namespace

GradientVector fd_grad(const WeightVector& w, const Dataset& data, double h) {
  if (!(h > 0.0)) throw std::invalid_argument("fd_grad: step must be positive");
  const WeightLayout& layout = w.layout();
  std::vector<Wide> point(w.values().begin(), w.values().end());
  GradientVector g(w.arch());
  for (std::size_t i = 0; i < point.size(); ++i) {
    const Wide orig = point[i];
    const Wide step = static_cast<Wide>(h * std::max(1.0, std::abs(w[i])));
    point[i] = orig + step;
    const Wide up = wide_risk(layout, point, data);
    point[i] = orig - step;
    const Wide down = wide_risk(layout, point, data);
    point[i] = orig;
    g[i] = static_cast<double>((up - down) / (2 * step));
  }
  return g;
}

double max_relative_error(std::span<const double> a, std::span<const double> b,
                          double abs_floor) {
  if (a.size() != b.size()) throw std::invalid_argument("max_relative_error: size mismatch");
  double worst = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double scale = std::max(std::abs(a[i]), std::abs(b[i]));
    if (scale < abs_floor || scale == 0.0) continue;
    worst = std::max(worst, std::abs(a[i] - b[i]) / scale);
  }
  return worst;
}

double euclidean_norm(std::span<const double> v) {
  double sum = 0.0;
  for (double x : v) sum += x * x;
  return std::sqrt(sum);
}

}  // namespace opnn
