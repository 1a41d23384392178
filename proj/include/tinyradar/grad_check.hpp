#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "tinyradar/network.hpp"

namespace tinyradar {

struct LossResult {
  double loss = 0.0;
  Tensor grad;  // d loss / d network output
};

using LossFn = std::function<LossResult(const Tensor& output)>;

struct GradCheckOptions {
  double epsilon = 1e-5;
  double tolerance = 1e-5;
  // Relative errors are |a - n| / max(|a|, |n|, abs_floor); the floor keeps
  // gradients at round-off scale from dominating the report.
  double abs_floor = 1e-6;
  // 0 checks every coordinate; otherwise a seeded random subset per tensor.
  std::size_t samples_per_tensor = 0;
  std::uint64_t seed = 1;
  bool check_input = true;
  // Invoked after the analytic backward pass with the parameter tensors and
  // the input gradient. Lets tests tamper with the analytic result.
  std::function<void(std::span<Tensor* const> params, Tensor& input_grad)> analytic_hook;
};

struct TensorCheck {
  std::string name;
  std::size_t checked = 0;
  std::size_t skipped_kinks = 0;  // coordinates whose +/- epsilon runs changed routing
  double max_rel_error = 0.0;
};

struct GradCheckReport {
  std::vector<TensorCheck> tensors;
  double max_rel_error = 0.0;
  bool passed = false;
};

/// Compares analytic gradients from Network::backward with central finite
/// differences of `loss(net.forward(x))`. Coordinates whose perturbation
/// changes a ReLU mask or pooling winner are resampled, since the loss is
/// not differentiable across those points.
GradCheckReport grad_check(Network& net, const Tensor& x, const LossFn& loss,
                           const GradCheckOptions& options = {});

}  // namespace tinyradar
