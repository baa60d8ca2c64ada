#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "hpvit/tensor.hpp"

namespace hpvit {

struct NamedTensor {
  std::string name;
  Tensor tensor;
};

struct GradCheckOptions {
  double step = 1e-5;
  double tolerance = 1e-4;
  /// Coordinates checked per tensor; tensors with at most this many entries are checked exhaustively.
  std::size_t max_coords_per_tensor = 16;
  /// An analytic gradient below 1e-13 in magnitude is an exact zero (e.g. a key
  /// bias under softmax shift invariance); relative error is undefined there, so
  /// the coordinate passes iff |numeric| <= zero_tolerance.
  double zero_tolerance = 1e-8;
  std::uint64_t seed = 0;
};

struct ParamGradError {
  std::string name;
  std::size_t coords_checked = 0;
  std::size_t zero_coords = 0;
  double max_rel_error = 0.0;
  std::size_t worst_index = 0;
  double worst_analytic = 0.0;
  double worst_numeric = 0.0;
};

struct GradReport {
  std::vector<ParamGradError> params;
  double max_rel_error = 0.0;
  double tolerance = 0.0;
  bool pass = false;
};

/// Compares backward() gradients with central differences (f(x+h) - f(x-h)) / 2h.
/// Relative error per coordinate is |a - n| / max(|a|, |n|, 1e-8). `loss_fn`
/// must rebuild the graph from the current parameter values on every call.
GradReport grad_check(const std::function<Tensor()>& loss_fn, std::vector<NamedTensor> params,
                      const GradCheckOptions& options = {});

}  // namespace hpvit
