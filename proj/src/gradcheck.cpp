#include "hpvit/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "hpvit/errors.hpp"
#include "hpvit/rng.hpp"

namespace hpvit {

GradReport grad_check(const std::function<Tensor()>& loss_fn, std::vector<NamedTensor> params,
                      const GradCheckOptions& options) {
  if (!(options.step > 0.0)) throw ContractError("grad_check: step must be positive");
  for (auto& p : params) {
    if (!p.tensor.requires_grad()) throw ContractError("grad_check: parameter '" + p.name + "' does not require grad");
    p.tensor.zero_grad();
  }
  backward(loss_fn());

  std::vector<std::vector<double>> analytic;
  analytic.reserve(params.size());
  for (auto& p : params) analytic.emplace_back(p.tensor.grad().begin(), p.tensor.grad().end());

  auto eval = [&] { return loss_fn().item(); };

  GradReport report;
  report.tolerance = options.tolerance;
  Rng rng(options.seed);
  for (std::size_t pi = 0; pi < params.size(); ++pi) {
    Tensor& t = params[pi].tensor;
    const std::size_t n = t.numel();
    std::vector<std::size_t> coords(n);
    std::iota(coords.begin(), coords.end(), std::size_t{0});
    if (n > options.max_coords_per_tensor) {
      // partial Fisher-Yates: first k entries become a uniform sample
      for (std::size_t i = 0; i < options.max_coords_per_tensor; ++i) {
        std::swap(coords[i], coords[i + rng.below(n - i)]);
      }
      coords.resize(options.max_coords_per_tensor);
    }

    ParamGradError entry;
    entry.name = params[pi].name;
    auto values = t.mutable_data();
    for (std::size_t idx : coords) {
      const double orig = values[idx];
      values[idx] = orig + options.step;
      const double fp = eval();
      values[idx] = orig - options.step;
      const double fm = eval();
      values[idx] = orig;
      const double numeric = (fp - fm) / (2.0 * options.step);
      const double a = analytic[pi][idx];
      double rel = 0.0;
      if (std::abs(a) < 1e-13) {
        ++entry.zero_coords;
        if (!(std::abs(numeric) <= options.zero_tolerance)) rel = std::numeric_limits<double>::infinity();
      } else {
        rel = std::abs(a - numeric) / std::max({std::abs(a), std::abs(numeric), 1e-8});
      }
      if (!std::isfinite(rel)) rel = std::numeric_limits<double>::infinity();
      if (++entry.coords_checked == 1 || rel > entry.max_rel_error) {
        entry.max_rel_error = rel;
        entry.worst_index = idx;
        entry.worst_analytic = a;
        entry.worst_numeric = numeric;
      }
    }
    report.max_rel_error = std::max(report.max_rel_error, entry.max_rel_error);
    report.params.push_back(std::move(entry));
  }
  for (auto& p : params) p.tensor.zero_grad();
  report.pass = report.max_rel_error <= report.tolerance;
  return report;
}

}  // namespace hpvit
