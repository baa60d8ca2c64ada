#include "hpvit/dataset.hpp"

#include <json.hpp>

#include "hpvit/errors.hpp"
#include "hpvit/tensor_io.hpp"

namespace hpvit {

Tensor Dataset::load_image(std::size_t index) const {
  const DatasetEntry& e = entries.at(index);
  Tensor img = load_tensor(e.image);
  if (img.dims() != Shape{3, image_size, image_size}) {
    throw ShapeError("dataset: image '" + e.id + "' has shape " + shape_str(img.dims()) + ", manifest says [3x" +
                     std::to_string(image_size) + "x" + std::to_string(image_size) + "]");
  }
  return img;
}

std::vector<Sample> Dataset::load_samples() const {
  std::vector<Sample> out;
  out.reserve(entries.size());
  for (std::size_t i = 0; i < entries.size(); ++i) out.push_back({load_image(i), entries[i].joints, true});
  return out;
}

std::vector<JointSet> Dataset::ground_truth() const {
  std::vector<JointSet> out;
  out.reserve(entries.size());
  for (const auto& e : entries) out.push_back(e.joints);
  return out;
}

std::vector<std::string> Dataset::ids() const {
  std::vector<std::string> out;
  out.reserve(entries.size());
  for (const auto& e : entries) out.push_back(e.id);
  return out;
}

Dataset load_dataset(const std::filesystem::path& dir) {
  const auto bytes = read_file(dir / "manifest.json");
  nlohmann::json manifest;
  try {
    manifest = nlohmann::json::parse(bytes.begin(), bytes.end());
  } catch (const nlohmann::json::parse_error& e) {
    throw FormatError(std::string("manifest: ") + e.what(), e.byte);
  }
  Dataset ds;
  ds.root = dir;
  try {
    if (manifest.at("version").get<int>() != 1) throw FormatError("manifest: unsupported version", 0);
    ds.image_size = manifest.at("image_size").get<std::size_t>();
    ds.focal = manifest.at("focal").get<double>();
    for (const auto& s : manifest.at("samples")) {
      DatasetEntry e;
      e.id = s.at("id").get<std::string>();
      e.image = dir / s.at("image").get<std::string>();
      e.joints = JointSet::from_rows(s.at("joints").get<std::vector<std::vector<double>>>());
      e.joints.validate();
      ds.entries.push_back(std::move(e));
    }
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("manifest: ") + e.what(), 0);
  } catch (const ShapeError& e) {
    throw FormatError(std::string("manifest: ") + e.what(), 0);
  } catch (const DomainError& e) {
    throw FormatError(std::string("manifest: ") + e.what(), 0);
  }
  if (ds.entries.empty()) throw FormatError("manifest: no samples", 0);
  return ds;
}

}  // namespace hpvit
