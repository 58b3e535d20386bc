#pragma once

#include <span>

#include "opnn/architecture.hpp"
#include "opnn/gradient.hpp"

namespace opnn {

/// What the gradient-descent loop needs from a parametrized regression
/// function: its risk and gradient on a dataset, pointwise evaluation, and
/// which parameters are outer (linear output) weights.
class RiskModel {
 public:
  virtual ~RiskModel() = default;

  virtual std::size_t parameter_count() const = 0;
  virtual bool is_outer(std::size_t i) const = 0;
  virtual std::size_t input_dim() const = 0;
  /// Fills `grad` with the gradient of F_n at w and returns F_n(w).
  virtual double risk_and_gradient(std::span<const double> w, const Dataset& data,
                                   std::span<double> grad) = 0;
  virtual double output(std::span<const double> w, std::span<const double> x) const = 0;
};

/// The plain combined network of one Architecture.
class NetworkModel final : public RiskModel {
 public:
  explicit NetworkModel(const Architecture& arch) : layout_(arch) {}

  const WeightLayout& layout() const { return layout_; }

  std::size_t parameter_count() const override { return layout_.size(); }
  bool is_outer(std::size_t i) const override { return layout_.is_outer(i); }
  std::size_t input_dim() const override { return layout_.arch().input_dim; }
  double risk_and_gradient(std::span<const double> w, const Dataset& data,
                           std::span<double> grad) override;
  double output(std::span<const double> w, std::span<const double> x) const override;

 private:
  WeightLayout layout_;
  GradientWorkspace workspace_;
};

}  // namespace opnn
