#include "opnn/architecture.hpp"

#include <cmath>
#include <string>

namespace opnn {

void Architecture::validate() const {
  if (input_dim < 1) throw std::invalid_argument("architecture: input_dim must be >= 1");
  if (depth < 2) throw std::invalid_argument("architecture: depth L must be >= 2");
  if (subnets < 1) throw std::invalid_argument("architecture: subnet count K must be >= 1");
  if (width < 2 * input_dim) {
    throw std::invalid_argument("architecture: width r=" + std::to_string(width) +
                                " must be >= 2d=" + std::to_string(2 * input_dim));
  }
}

WeightLayout::WeightLayout(const Architecture& arch) : arch_(arch) {
  arch_.validate();
  const std::size_t d = arch.input_dim, r = arch.width, L = arch.depth;
  inner_per_subnet_ = r * (d + 1) + (L - 2) * r * (r + 1) + (r + 1);
}

std::size_t WeightLayout::layer_begin(std::size_t k, std::size_t layer) const {
  const std::size_t d = arch_.input_dim, r = arch_.width;
  std::size_t off = subnet_begin(k);
  if (layer == 0) return off;
  off += r * (d + 1);
  return off + (layer - 1) * r * (r + 1);
}

std::size_t WeightLayout::offset(const WeightIndex& idx) const {
  const std::size_t L = arch_.depth;
  if (idx.layer == L) {
    if (idx.subnet >= arch_.subnets || idx.row != 0 || idx.col != 0)
      throw std::out_of_range("weight index: bad outer index");
    return outer(idx.subnet);
  }
  if (idx.layer > L || idx.subnet >= arch_.subnets || idx.row >= layer_rows(idx.layer) ||
      idx.col >= layer_cols(idx.layer)) {
    throw std::out_of_range("weight index out of range");
  }
  return layer_begin(idx.subnet, idx.layer) + idx.row * layer_cols(idx.layer) + idx.col;
}

WeightIndex WeightLayout::index_of(std::size_t off) const {
  if (off >= size()) throw std::out_of_range("weight offset out of range");
  if (off < arch_.subnets) return {arch_.depth, off, 0, 0};
  const std::size_t rel = off - arch_.subnets;
  const std::size_t k = rel / inner_per_subnet_;
  std::size_t within = rel % inner_per_subnet_;
  for (std::size_t l = 0; l < arch_.depth; ++l) {
    const std::size_t block = layer_rows(l) * layer_cols(l);
    if (within < block) return {l, k, within / layer_cols(l), within % layer_cols(l)};
    within -= block;
  }
  throw std::logic_error("weight layout: unreachable");
}

std::size_t weight_count(const Architecture& arch) {
  const std::size_t d = arch.input_dim, r = arch.width, L = arch.depth;
  return arch.subnets * (1 + (r + 1) + (L - 2) * r * (r + 1) + r * (d + 1));
}

WeightVector::WeightVector(const Architecture& arch, std::vector<double> values)
    : layout_(arch), values_(std::move(values)) {
  if (values_.size() != layout_.size()) {
    throw std::invalid_argument("weight vector: expected " + std::to_string(layout_.size()) +
                                " values, got " + std::to_string(values_.size()));
  }
}

bool WeightVector::all_finite() const {
  for (double v : values_)
    if (!std::isfinite(v)) return false;
  return true;
}

Dataset::Dataset(std::size_t dim, std::vector<double> x, std::vector<double> y)
    : dim_(dim), x_(std::move(x)), y_(std::move(y)) {
  if (dim_ == 0) throw std::invalid_argument("dataset: dimension must be >= 1");
  if (x_.size() != dim_ * y_.size())
    throw std::invalid_argument("dataset: x has " + std::to_string(x_.size()) +
                                " entries, expected n*d = " + std::to_string(dim_ * y_.size()));
  for (double v : x_)
    if (!std::isfinite(v)) throw std::invalid_argument("dataset: non-finite x entry");
  for (double v : y_)
    if (!std::isfinite(v)) throw std::invalid_argument("dataset: non-finite y entry");
}

double Dataset::mean_square_response() const {
  if (y_.empty()) throw std::invalid_argument("dataset is empty");
  double sum = 0.0;
  for (double v : y_) sum += v * v;
  return sum / static_cast<double>(y_.size());
}

}  // namespace opnn
