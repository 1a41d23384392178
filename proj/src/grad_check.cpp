#include "tinyradar/grad_check.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

namespace tinyradar {

namespace {

struct Probe {
  double loss;
  std::uint64_t routing;
};

double rel_error(double analytic, double numeric, double floor) {
  const double denom = std::max({std::abs(analytic), std::abs(numeric), floor});
  return std::abs(analytic - numeric) / denom;
}

}  // namespace

GradCheckReport grad_check(Network& net, const Tensor& x, const LossFn& loss,
                           const GradCheckOptions& options) {
  Tensor input = x;

  net.zero_grad();
  const Tensor out = net.forward(input);
  const LossResult base = loss(out);
  const std::uint64_t base_routing = net.routing_signature();
  Tensor input_grad = net.backward(base.grad, options.check_input);

  std::vector<Tensor*> params = net.parameters();
  if (options.analytic_hook) {
    options.analytic_hook(params, input_grad);
  }

  // Targets: every parameter tensor, then optionally the input.
  struct Target {
    std::string name;
    std::vector<double>* values;
    std::vector<double> analytic;
  };
  std::vector<Target> targets;
  for (std::size_t li = 0; li < net.size(); ++li) {
    auto lp = net.layer(li).parameters();
    for (std::size_t pi = 0; pi < lp.size(); ++pi) {
      targets.push_back({"layer" + std::to_string(li) + "." + net.layer(li).name() +
                             (pi == 0 ? ".weight" : ".bias"),
                         &lp[pi]->data, lp[pi]->grad});
    }
  }
  if (options.check_input) {
    targets.push_back({"input", &input.data, input_grad.data});
  }

  auto probe = [&]() -> Probe {
    const Tensor o = net.forward(input);
    return {loss(o).loss, net.routing_signature()};
  };

  std::mt19937_64 rng(options.seed);
  GradCheckReport report;
  for (Target& target : targets) {
    TensorCheck check;
    check.name = target.name;
    std::vector<std::size_t> order(target.values->size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    const bool sampled =
        options.samples_per_tensor != 0 && options.samples_per_tensor < order.size();
    if (sampled) {
      std::shuffle(order.begin(), order.end(), rng);
    }
    const std::size_t want = sampled ? options.samples_per_tensor : order.size();

    for (std::size_t idx : order) {
      if (check.checked >= want) break;
      double& v = (*target.values)[idx];
      const double saved = v;
      v = saved + options.epsilon;
      const Probe plus = probe();
      v = saved - options.epsilon;
      const Probe minus = probe();
      v = saved;
      if (plus.routing != base_routing || minus.routing != base_routing) {
        ++check.skipped_kinks;
        continue;
      }
      const double numeric = (plus.loss - minus.loss) / (2.0 * options.epsilon);
      check.max_rel_error =
          std::max(check.max_rel_error, rel_error(target.analytic[idx], numeric, options.abs_floor));
      ++check.checked;
    }
    report.max_rel_error = std::max(report.max_rel_error, check.max_rel_error);
    report.tensors.push_back(std::move(check));
  }
  report.passed = report.max_rel_error < options.tolerance;

  // Leave the layer caches consistent with the unperturbed input.
  net.forward(input);
  return report;
}

}  // namespace tinyradar
