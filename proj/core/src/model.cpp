#include "opnn/model.hpp"

#include "opnn/network.hpp"

namespace opnn {

double NetworkModel::risk_and_gradient(std::span<const double> w, const Dataset& data,
                                       std::span<double> grad) {
  return opnn::risk_and_gradient(layout_, w, data, grad, workspace_);
}

double NetworkModel::output(std::span<const double> w, std::span<const double> x) const {
  return forward(layout_, w, x);
}

}  // namespace opnn
