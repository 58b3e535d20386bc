#pragma once

#include <cstddef>
#include <span>
#include <stdexcept>
#include <vector>

namespace opnn {

/// Dimensions of the combined network: `subnets` fully connected sigmoid
/// networks with `depth` hidden layers of `width` neurons each, combined
/// linearly by one outer weight per subnetwork.
struct Architecture {
  std::size_t input_dim = 1;  // d
  std::size_t depth = 2;      // L
  std::size_t width = 2;      // r
  std::size_t subnets = 1;    // K

  /// Throws std::invalid_argument unless L >= 2, K >= 1, d >= 1 and r >= 2d.
  void validate() const;

  friend bool operator==(const Architecture&, const Architecture&) = default;
};

/// Position of one scalar weight w^{(layer)}_{subnet, row, col}.
///
/// Layers 0..L-1 are inner layers; `row` is the receiving neuron and `col`
/// the sending one with col == 0 the bias. Layer L is the outer layer: the
/// weight w^{(L)}_{1,1,k} is addressed as {L, k, 0, 0}. All indices are
/// zero-based except that col 0 is reserved for the bias, so sending neuron
/// j (1-based as in the formulas) sits at col j.
struct WeightIndex {
  std::size_t layer = 0;
  std::size_t subnet = 0;
  std::size_t row = 0;
  std::size_t col = 0;

  friend bool operator==(const WeightIndex&, const WeightIndex&) = default;
};

/// Dense storage map for a weight vector.
///
/// Layout: the K outer weights first, then one contiguous block per
/// subnetwork holding layer 0 (r x (d+1)), hidden layers 1..L-2
/// (r x (r+1) each) and the top layer L-1 (1 x (r+1)), all row-major.
class WeightLayout {
 public:
  WeightLayout() = default;
  explicit WeightLayout(const Architecture& arch);

  const Architecture& arch() const { return arch_; }

  /// W_n = K * (1 + (r+1) + (L-2) r (r+1) + r (d+1)).
  std::size_t size() const { return arch_.subnets * (1 + inner_per_subnet_); }
  std::size_t outer_count() const { return arch_.subnets; }
  std::size_t inner_per_subnet() const { return inner_per_subnet_; }

  std::size_t outer(std::size_t k) const { return k; }
  std::size_t subnet_begin(std::size_t k) const {
    return arch_.subnets + k * inner_per_subnet_;
  }
  /// Offset of the first entry of inner layer `layer` within subnet k.
  std::size_t layer_begin(std::size_t k, std::size_t layer) const;
  /// Number of columns (inputs + bias) of inner layer `layer`.
  std::size_t layer_cols(std::size_t layer) const {
    return layer == 0 ? arch_.input_dim + 1 : arch_.width + 1;
  }
  /// Number of rows (receiving neurons) of inner layer `layer`.
  std::size_t layer_rows(std::size_t layer) const {
    return layer + 1 == arch_.depth ? 1 : arch_.width;
  }

  std::size_t offset(const WeightIndex& idx) const;
  WeightIndex index_of(std::size_t offset) const;
  bool is_outer(std::size_t offset) const { return offset < arch_.subnets; }

 private:
  Architecture arch_{};
  std::size_t inner_per_subnet_ = 0;
};

/// W_n for `arch`.
std::size_t weight_count(const Architecture& arch);

/// All weights w^{(l)}_{k,i,j} of one network in WeightLayout order.
class WeightVector {
 public:
  WeightVector() = default;
  explicit WeightVector(const Architecture& arch)
      : layout_(arch), values_(layout_.size(), 0.0) {}
  WeightVector(const Architecture& arch, std::vector<double> values);

  const Architecture& arch() const { return layout_.arch(); }
  const WeightLayout& layout() const { return layout_; }
  std::size_t size() const { return values_.size(); }

  std::span<double> values() { return values_; }
  std::span<const double> values() const { return values_; }

  double& operator[](std::size_t i) { return values_[i]; }
  double operator[](std::size_t i) const { return values_[i]; }
  double& at(const WeightIndex& idx) { return values_[layout_.offset(idx)]; }
  double at(const WeightIndex& idx) const { return values_[layout_.offset(idx)]; }

  double& outer(std::size_t k) { return values_[layout_.outer(k)]; }
  double outer(std::size_t k) const { return values_[layout_.outer(k)]; }
  std::span<double> outer_block() { return {values_.data(), layout_.outer_count()}; }
  std::span<const double> outer_block() const {
    return {values_.data(), layout_.outer_count()};
  }

  bool all_finite() const;

  friend bool operator==(const WeightVector& a, const WeightVector& b) {
    return a.arch() == b.arch() && a.values_ == b.values_;
  }

 private:
  WeightLayout layout_{};
  std::vector<double> values_;
};

/// n observations (X_i, Y_i) with X_i in R^d, stored row-major.
class Dataset {
 public:
  Dataset() = default;
  Dataset(std::size_t dim, std::vector<double> x, std::vector<double> y);

  std::size_t size() const { return y_.size(); }
  std::size_t dim() const { return dim_; }
  std::span<const double> x(std::size_t i) const { return {x_.data() + i * dim_, dim_}; }
  double y(std::size_t i) const { return y_[i]; }
  std::span<const double> ys() const { return y_; }
  std::span<const double> xs() const { return x_; }

  /// (1/n) sum Y_i^2, the risk of the zero function.
  double mean_square_response() const;

 private:
  std::size_t dim_ = 0;
  std::vector<double> x_;
  std::vector<double> y_;
};

}  // namespace opnn
