#include "hpvit/infer.hpp"

#include <sstream>

#include <json.hpp>

#include "hpvit/augment.hpp"
#include "hpvit/errors.hpp"
#include "hpvit/tensor_io.hpp"

namespace hpvit {

std::vector<PredictionRecord> infer(const Checkpoint& ckpt, const Dataset& dataset, bool tta) {
  if (dataset.image_size != ckpt.config.image_size) {
    throw ShapeError("infer: dataset images are " + std::to_string(dataset.image_size) + "px, model expects " +
                     std::to_string(ckpt.config.image_size) + "px");
  }
  const ForwardFn fwd = [&](const Tensor& image) { return forward(image, ckpt.params, ckpt.config); };
  std::vector<PredictionRecord> out;
  out.reserve(dataset.size());
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    const Tensor image = dataset.load_image(i);
    const PosePrediction p = tta ? tta_predict(fwd, image) : fwd(image);
    out.push_back({dataset.entries[i].id, p.mu_joints(), p.sigma_joints()});
  }
  return out;
}

std::string encode_predictions(const std::vector<PredictionRecord>& records) {
  std::string out;
  for (const auto& r : records) {
    nlohmann::json line = {{"sample_id", r.sample_id}, {"mu", r.mu.to_rows()}};
    if (r.sigma) line["sigma"] = r.sigma->to_rows();
    out += line.dump();
    out += '\n';
  }
  return out;
}

std::vector<PredictionRecord> decode_predictions(const std::string& text) {
  std::vector<PredictionRecord> out;
  std::istringstream in(text);
  std::string line;
  std::size_t offset = 0, lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::size_t line_start = offset;
    offset += line.size() + 1;
    if (line.empty()) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      PredictionRecord r;
      r.sample_id = j.at("sample_id").get<std::string>();
      r.mu = JointSet::from_rows(j.at("mu").get<std::vector<std::vector<double>>>());
      r.mu.validate();
      if (j.contains("sigma")) {
        r.sigma = JointSet::from_rows(j.at("sigma").get<std::vector<std::vector<double>>>());
        r.sigma->validate();
      }
      out.push_back(std::move(r));
    } catch (const nlohmann::json::exception& e) {
      throw FormatError("predictions: line " + std::to_string(lineno) + ": " + e.what(), line_start);
    } catch (const ShapeError& e) {
      throw FormatError("predictions: line " + std::to_string(lineno) + ": " + e.what(), line_start);
    } catch (const DomainError& e) {
      throw FormatError("predictions: line " + std::to_string(lineno) + ": " + e.what(), line_start);
    }
  }
  return out;
}

void write_predictions(const std::filesystem::path& path, const std::vector<PredictionRecord>& records) {
  const std::string text = encode_predictions(records);
  write_file(path, std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

std::vector<PredictionRecord> read_predictions(const std::filesystem::path& path) {
  const auto bytes = read_file(path);
  return decode_predictions(std::string(bytes.begin(), bytes.end()));
}

PredictionSet to_prediction_set(const std::string& model_id, const std::vector<PredictionRecord>& records) {
  PredictionSet set{model_id, {}, {}};
  for (const auto& r : records) {
    set.sample_ids.push_back(r.sample_id);
    set.predictions.push_back(r.mu);
  }
  return set;
}

}  // namespace hpvit
