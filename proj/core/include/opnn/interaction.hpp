#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "opnn/initialization.hpp"
#include "opnn/model.hpp"
#include "opnn/trainer.hpp"

namespace opnn {

/// Exact binomial coefficient; throws std::overflow_error past 2^64.
std::uint64_t binomial(std::size_t n, std::size_t k);

/// All k-subsets of {0, ..., n-1} in lexicographic order, each sorted.
std::vector<std::vector<std::size_t>> enumerate_subsets(std::size_t n, std::size_t k);

/// Sum over all d*-subsets I of the coordinates of an independent network
/// f_{w_I}(x_I). Every group shares `per_group` (input_dim = d*).
struct InteractionArchitecture {
  static constexpr std::uint64_t kMaxGroups = 10000;

  std::size_t d = 1;
  std::size_t d_star = 1;
  Architecture per_group;
  std::vector<std::vector<std::size_t>> subsets;

  static InteractionArchitecture make(std::size_t d, std::size_t d_star, std::size_t depth,
                                      std::size_t width, std::size_t subnets);

  std::size_t group_count() const { return subsets.size(); }
  std::size_t group_size() const { return weight_count(per_group); }
  std::size_t total_weights() const { return group_count() * group_size(); }
};

/// Weights of all groups are stored back to back in subset order.
std::span<const double> group_weights(const InteractionArchitecture& iarch,
                                      std::span<const double> w, std::size_t group);

/// x_I = (x^{(j_1)}, ..., x^{(j_{d*})}) with j_1 < ... < j_{d*}.
std::vector<double> slice(std::span<const double> x, const std::vector<std::size_t>& subset);

double interaction_forward(const InteractionArchitecture& iarch, std::span<const double> w,
                           std::span<const double> x);

/// Outer weights zero in every group; hidden layers uniform on
/// +-20 d* (log n)^2, layer 0 uniform on +-8 d (log n)^2 n^tau with
/// tau = 1/(1+d*). Groups are drawn in subset order.
std::vector<double> interaction_init(const InteractionArchitecture& iarch, std::size_t n,
                                     Rng& rng);

class InteractionModel final : public RiskModel {
 public:
  explicit InteractionModel(InteractionArchitecture iarch);

  const InteractionArchitecture& arch() const { return iarch_; }

  std::size_t parameter_count() const override { return iarch_.total_weights(); }
  bool is_outer(std::size_t i) const override;
  std::size_t input_dim() const override { return iarch_.d; }
  double risk_and_gradient(std::span<const double> w, const Dataset& data,
                           std::span<double> grad) override;
  double output(std::span<const double> w, std::span<const double> x) const override;

 private:
  void prepare(const Dataset& data);

  InteractionArchitecture iarch_;
  WeightLayout layout_;
  std::vector<Dataset> sliced_;
  const Dataset* sliced_from_ = nullptr;
  std::vector<GradientWorkspace> workspaces_;
  std::vector<double> outputs_, coef_;
};

struct InteractionEstimator {
  InteractionArchitecture arch;
  std::vector<double> weights;
  double beta = 1.0;

  double predict(std::span<const double> x) const;
};

InteractionEstimator interaction_fit(const InteractionArchitecture& iarch, const Dataset& data,
                                     const TrainConfig& cfg, RngSeed seed,
                                     TrainingTrace* trace = nullptr);

}  // namespace opnn
