#include "opnn/network.hpp"

#include <algorithm>
#include <stdexcept>
#include <string>

namespace opnn {
namespace {

void check_input(const WeightLayout& layout, std::span<const double> x) {
  if (x.size() != layout.arch().input_dim) {
    throw std::invalid_argument("forward: input has dimension " + std::to_string(x.size()) +
                                ", network expects " +
                                std::to_string(layout.arch().input_dim));
  }
}

// Evaluates subnet k up to layer `last` (1..L); returns activations of that layer.
std::vector<double> activations_through(const WeightLayout& layout, std::span<const double> w,
                                        std::size_t k, std::span<const double> x,
                                        std::size_t last) {
  const Architecture& a = layout.arch();
  std::vector<double> prev(x.begin(), x.end());
  std::vector<double> cur;
  for (std::size_t l = 0; l < last; ++l) {
    const std::size_t rows = layout.layer_rows(l), cols = layout.layer_cols(l);
    const double* block = w.data() + layout.layer_begin(k, l);
    cur.assign(rows, 0.0);
    for (std::size_t i = 0; i < rows; ++i) {
      const double* row = block + i * cols;
      double z = row[0];
      for (std::size_t j = 1; j < cols; ++j) z += row[j] * prev[j - 1];
      cur[i] = sigmoid(z);
    }
    prev.swap(cur);
  }
  (void)a;
  return prev;
}

}  // namespace

double truncate(double beta, double z) {
  if (!(beta > 0.0)) throw std::invalid_argument("truncate: beta must be positive");
  return std::max(-beta, std::min(beta, z));
}

double subnet_output(const WeightLayout& layout, std::span<const double> w, std::size_t k,
                     std::span<const double> x) {
  check_input(layout, x);
  const std::size_t d = layout.arch().input_dim, r = layout.arch().width;
  const std::size_t L = layout.arch().depth;
  // Fixed-size stack buffers keep the hot path allocation free for r <= 64.
  double buf_a[64], buf_b[64];
  std::vector<double> heap_a, heap_b;
  double* prev = buf_a;
  double* cur = buf_b;
  if (r > 64) {
    heap_a.resize(r);
    heap_b.resize(r);
    prev = heap_a.data();
    cur = heap_b.data();
  }
  const double* block = w.data() + layout.layer_begin(k, 0);
  for (std::size_t i = 0; i < r; ++i) {
    const double* row = block + i * (d + 1);
    double z = row[0];
    for (std::size_t j = 0; j < d; ++j) z += row[j + 1] * x[j];
    prev[i] = sigmoid(z);
  }
  for (std::size_t l = 1; l + 1 < L; ++l) {
    block = w.data() + layout.layer_begin(k, l);
    for (std::size_t i = 0; i < r; ++i) {
      const double* row = block + i * (r + 1);
      double z = row[0];
      for (std::size_t j = 0; j < r; ++j) z += row[j + 1] * prev[j];
      cur[i] = sigmoid(z);
    }
    std::swap(prev, cur);
  }
  block = w.data() + layout.layer_begin(k, L - 1);
  double z = block[0];
  for (std::size_t j = 0; j < r; ++j) z += block[j + 1] * prev[j];
  return sigmoid(z);
}

double subnet_output(const WeightVector& w, std::size_t k, std::span<const double> x) {
  return subnet_output(w.layout(), w.values(), k, x);
}

double forward(const WeightLayout& layout, std::span<const double> w,
               std::span<const double> x) {
  check_input(layout, x);
  double out = 0.0;
  for (std::size_t k = 0; k < layout.arch().subnets; ++k) {
    const double outer = w[layout.outer(k)];
    if (outer == 0.0) continue;  // outer weight kills the whole subnet
    out += outer * subnet_output(layout, w, k, x);
  }
  return out;
}

double forward(const WeightVector& w, std::span<const double> x) {
  return forward(w.layout(), w.values(), x);
}

std::vector<double> hidden_outputs(const WeightVector& w, std::size_t k, std::size_t l,
                                   std::span<const double> x) {
  check_input(w.layout(), x);
  if (k >= w.arch().subnets) throw std::out_of_range("hidden_outputs: subnet index");
  if (l < 1 || l > w.arch().depth) throw std::out_of_range("hidden_outputs: layer index");
  return activations_through(w.layout(), w.values(), k, x, l);
}

double empirical_risk(const WeightLayout& layout, std::span<const double> w,
                      const Dataset& data) {
  if (data.size() == 0) throw std::invalid_argument("empirical_risk: empty dataset");
  double sum = 0.0;
  for (std::size_t i = 0; i < data.size(); ++i) {
    const double res = forward(layout, w, data.x(i)) - data.y(i);
    sum += res * res;
  }
  return sum / static_cast<double>(data.size());
}

double empirical_risk(const WeightVector& w, const Dataset& data) {
  return empirical_risk(w.layout(), w.values(), data);
}

double predict(const Estimator& est, std::span<const double> x) {
  return truncate(est.beta, forward(est.weights, x));
}

}  // namespace opnn
