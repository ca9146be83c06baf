#pragma once

// Independent reference computations shared by the unit and acceptance tests.

#include <algorithm>
#include <cmath>
#include <map>
#include <string>
#include <vector>

#include "layoutprior/model.hpp"

namespace oracles {

struct GradientReport {
  std::map<std::string, double> per_tensor;  // ||analytic - numeric|| / max(||analytic||, ||numeric||)
  double max_error = 0.0;
};

/// Central differences in 64-bit arithmetic over every scalar parameter.
inline GradientReport gradient_check(const layoutprior::ModelConfig& config, const layoutprior::Batch& batch,
                                     double h = 1e-5) {
  using namespace layoutprior;
  Model<double> model(Parameters<double>::init(config));
  Parameters<double> grads(config);
  model.loss_and_gradients(batch, grads);

  GradientReport report;
  auto& tensors = model.params().tensors();
  for (std::size_t i = 0; i < tensors.size(); ++i) {
    double diff = 0.0, na = 0.0, nn = 0.0;
    auto& data = tensors[i].data;
    for (std::size_t j = 0; j < data.size(); ++j) {
      const double saved = data[j];
      data[j] = saved + h;
      const double up = model.loss(batch);
      data[j] = saved - h;
      const double down = model.loss(batch);
      data[j] = saved;
      const double numeric = (up - down) / (2.0 * h);
      const double analytic = grads.tensors()[i].data[j];
      diff += (analytic - numeric) * (analytic - numeric);
      na += analytic * analytic;
      nn += numeric * numeric;
    }
    const double denom = std::max(std::sqrt(na), std::sqrt(nn));
    const double err = denom < 1e-12 ? 0.0 : std::sqrt(diff) / denom;
    report.per_tensor[tensors[i].name] = err;
    report.max_error = std::max(report.max_error, err);
  }
  return report;
}

}  // namespace oracles
