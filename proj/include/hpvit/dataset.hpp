#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "hpvit/augment.hpp"
#include "hpvit/joints.hpp"
#include "hpvit/tensor.hpp"

namespace hpvit {

struct DatasetEntry {
  std::string id;
  std::filesystem::path image;  // absolute or relative to the working directory
  JointSet joints;
};

/// A dataset directory as written by synth_generate.
struct Dataset {
  std::filesystem::path root;
  std::size_t image_size = 0;
  double focal = 0.0;
  std::vector<DatasetEntry> entries;

  std::size_t size() const { return entries.size(); }
  /// Throws ShapeError if the stored image is not [3 x S x S].
  Tensor load_image(std::size_t index) const;
  std::vector<Sample> load_samples() const;
  std::vector<JointSet> ground_truth() const;
  std::vector<std::string> ids() const;
};

/// Reads `<dir>/manifest.json`. Malformed manifests raise FormatError.
Dataset load_dataset(const std::filesystem::path& dir);

}  // namespace hpvit
