#pragma once

// Central-difference check of AutoencoderModel::loss_and_gradients.

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "uavmon/autoenc.hpp"

namespace gradcheck {

struct Result {
  double max_rel_error = 0.0;
  std::string worst;
  std::size_t checked = 0;
  std::size_t skipped = 0;  // perturbation crossed a ReLU kink
};

inline double batch_loss(const uavmon::AutoencoderModel& model, const std::vector<std::vector<double>>& batch) {
  double sum = 0.0;
  for (const auto& w : batch) sum += model.reconstruction_loss(w);
  return sum / static_cast<double>(batch.size());
}

// Checks every `every`-th coordinate of every parameter tensor.
inline Result run(uavmon::AutoencoderModel& model, const std::vector<std::vector<double>>& batch, double h = 1e-4,
                  std::size_t every = 1, double floor = 1e-7) {
  uavmon::Gradients grads;
  model.loss_and_gradients(batch, grads);
  Result res;
  auto params = model.parameters();
  for (std::size_t p = 0; p < params.size(); ++p) {
    auto values = params[p].values;
    for (std::size_t i = 0; i < values.size(); i += every) {
      const double saved = values[i];
      values[i] = saved + h;
      const double up = batch_loss(model, batch);
      const auto up_pattern = model.relu_pattern(batch);
      values[i] = saved - h;
      const double down = batch_loss(model, batch);
      const auto down_pattern = model.relu_pattern(batch);
      values[i] = saved;
      if (up_pattern != down_pattern) {
        ++res.skipped;
        continue;
      }
      const double numeric = (up - down) / (2.0 * h);
      const double analytic = grads[p][i];
      const double rel = std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), floor});
      ++res.checked;
      if (rel > res.max_rel_error) {
        res.max_rel_error = rel;
        res.worst = params[p].name + "[" + std::to_string(i) + "]";
      }
    }
  }
  return res;
}

}  // namespace gradcheck
