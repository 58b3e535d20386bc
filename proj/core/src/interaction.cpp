#include "opnn/interaction.hpp"

#include <limits>
#include <stdexcept>
#include <string>

#include "opnn/network.hpp"

namespace opnn {

std::uint64_t binomial(std::size_t n, std::size_t k) {
  if (k > n) return 0;
  k = std::min(k, n - k);
  std::uint64_t result = 1;
  for (std::size_t i = 1; i <= k; ++i) {
    // result * (n - k + i) / i stays integral at every step
    const std::uint64_t num = n - k + i;
    if (result > std::numeric_limits<std::uint64_t>::max() / num)
      throw std::overflow_error("binomial coefficient overflows 64 bits");
    result = result * num / i;
  }
  return result;
}

std::vector<std::vector<std::size_t>> enumerate_subsets(std::size_t n, std::size_t k) {
  std::vector<std::vector<std::size_t>> out;
  if (k > n) return out;
  std::vector<std::size_t> cur(k);
  for (std::size_t i = 0; i < k; ++i) cur[i] = i;
  for (;;) {
    out.push_back(cur);
    std::size_t i = k;
    while (i > 0 && cur[i - 1] == n - k + i - 1) --i;
    if (i == 0) break;
    ++cur[i - 1];
    for (std::size_t j = i; j < k; ++j) cur[j] = cur[j - 1] + 1;
  }
  return out;
}

InteractionArchitecture InteractionArchitecture::make(std::size_t d, std::size_t d_star,
                                                      std::size_t depth, std::size_t width,
                                                      std::size_t subnets) {
  if (d_star < 1 || d_star > d)
    throw std::invalid_argument("interaction: need 1 <= d* <= d");
  const std::uint64_t groups = binomial(d, d_star);
  if (groups > kMaxGroups)
    throw std::invalid_argument("interaction: C(d, d*) = " + std::to_string(groups) +
                                " exceeds the group cap");
  InteractionArchitecture a;
  a.d = d;
  a.d_star = d_star;
  a.per_group = Architecture{d_star, depth, width, subnets};
  a.per_group.validate();
  a.subsets = enumerate_subsets(d, d_star);
  return a;
}

std::span<const double> group_weights(const InteractionArchitecture& iarch,
                                      std::span<const double> w, std::size_t group) {
  return w.subspan(group * iarch.group_size(), iarch.group_size());
}

std::vector<double> slice(std::span<const double> x, const std::vector<std::size_t>& subset) {
  std::vector<double> out;
  out.reserve(subset.size());
  for (std::size_t j : subset) out.push_back(x[j]);
  return out;
}

double interaction_forward(const InteractionArchitecture& iarch, std::span<const double> w,
                           std::span<const double> x) {
  if (x.size() != iarch.d)
    throw std::invalid_argument("interaction_forward: input dimension mismatch");
  if (w.size() != iarch.total_weights())
    throw std::invalid_argument("interaction_forward: weight size mismatch");
  const WeightLayout layout(iarch.per_group);
  double out = 0.0;
  for (std::size_t g = 0; g < iarch.group_count(); ++g)
    out += forward(layout, group_weights(iarch, w, g), slice(x, iarch.subsets[g]));
  return out;
}

std::vector<double> interaction_init(const InteractionArchitecture& iarch, std::size_t n,
                                     Rng& rng) {
  const double tau = 1.0 / (1.0 + static_cast<double>(iarch.d_star));
  const InitBounds bounds = init_bounds(iarch.d_star, iarch.d, n, tau);
  std::vector<double> w;
  w.reserve(iarch.total_weights());
  for (std::size_t g = 0; g < iarch.group_count(); ++g) {
    WeightVector group = init_weights(iarch.per_group, bounds, rng);
    w.insert(w.end(), group.values().begin(), group.values().end());
  }
  return w;
}

InteractionModel::InteractionModel(InteractionArchitecture iarch)
    : iarch_(std::move(iarch)), layout_(iarch_.per_group) {
  workspaces_.resize(iarch_.group_count());
}

bool InteractionModel::is_outer(std::size_t i) const {
  return layout_.is_outer(i % iarch_.group_size());
}

void InteractionModel::prepare(const Dataset& data) {
  if (sliced_from_ == &data && !sliced_.empty() && sliced_.front().size() == data.size()) return;
  sliced_.clear();
  for (const auto& subset : iarch_.subsets) {
    std::vector<double> xs;
    xs.reserve(data.size() * subset.size());
    for (std::size_t s = 0; s < data.size(); ++s)
      for (std::size_t j : subset) xs.push_back(data.x(s)[j]);
    std::vector<double> ys(data.ys().begin(), data.ys().end());
    sliced_.emplace_back(subset.size(), std::move(xs), std::move(ys));
  }
  sliced_from_ = &data;
}

double InteractionModel::risk_and_gradient(std::span<const double> w, const Dataset& data,
                                           std::span<double> grad) {
  if (data.size() == 0) throw std::invalid_argument("interaction: empty dataset");
  if (data.dim() != iarch_.d) throw std::invalid_argument("interaction: dataset dimension");
  prepare(data);
  const std::size_t G = iarch_.group_count();
  outputs_.assign(data.size(), 0.0);
  coef_.resize(data.size());
  for (std::size_t g = 0; g < G; ++g)
    accumulate_outputs(layout_, group_weights(iarch_, w, g), sliced_[g], outputs_, workspaces_[g]);
  const double risk = risk_coefficients(data, outputs_, coef_);
  for (std::size_t g = 0; g < G; ++g)
    accumulate_gradient(layout_, group_weights(iarch_, w, g), sliced_[g], coef_,
                        grad.subspan(g * iarch_.group_size(), iarch_.group_size()),
                        workspaces_[g]);
  return risk;
}

double InteractionModel::output(std::span<const double> w, std::span<const double> x) const {
  return interaction_forward(iarch_, w, x);
}

double InteractionEstimator::predict(std::span<const double> x) const {
  return truncate(beta, interaction_forward(arch, weights, x));
}

InteractionEstimator interaction_fit(const InteractionArchitecture& iarch, const Dataset& data,
                                     const TrainConfig& cfg, RngSeed seed,
                                     TrainingTrace* trace) {
  Rng rng = make_rng(seed);
  std::vector<double> init = interaction_init(iarch, data.size(), rng);
  InteractionModel model(iarch);
  TrainResult r = train(model, data, init, cfg);
  if (trace) *trace = std::move(r.trace);
  return InteractionEstimator{iarch, std::move(r.weights), cfg.beta};
}

}  // namespace opnn
