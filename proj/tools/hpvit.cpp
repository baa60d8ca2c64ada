// hpvit: synthetic data, training, inference, evaluation and ensembling.
//
// Exit codes: 0 success, 1 usage or configuration error (including a failed
// gradcheck), 2 data, format or I/O error.

#include <cstdio>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "hpvit/checkpoint.hpp"
#include "hpvit/dataset.hpp"
#include "hpvit/ensemble.hpp"
#include "hpvit/errors.hpp"
#include "hpvit/infer.hpp"
#include "hpvit/kv_config.hpp"
#include "hpvit/metrics.hpp"
#include "hpvit/model_checks.hpp"
#include "hpvit/synth.hpp"
#include "hpvit/tensor_io.hpp"
#include "hpvit/train.hpp"

namespace {

using namespace hpvit;
using json = nlohmann::json;

constexpr int kExitUsage = 1;
constexpr int kExitData = 2;

struct CommonOptions {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> variant;
  std::vector<std::string> sets;
  std::string out;
};

KvConfig load_settings(const CommonOptions& o) {
  KvConfig kv = o.config.empty() ? KvConfig{} : KvConfig::load(o.config);
  for (const auto& s : o.sets) {
    const auto eq = s.find('=');
    if (eq == std::string::npos) throw ConfigError("--set expects key=value, got '" + s + "'");
    kv.set(s.substr(0, eq), s.substr(eq + 1));
  }
  if (o.seed) kv.set("seed", std::to_string(*o.seed));
  if (o.variant) kv.set("variant", *o.variant);
  return kv;
}

void write_text(const std::string& path, const std::string& text) {
  write_file(path, std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

std::string fmt(const char* spec, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, spec, v);
  return buf;
}

ModelConfig model_config_from(const KvConfig& kv, std::size_t image_size) {
  ModelConfig c = ModelConfig::preset(parse_variant(kv.get_string("variant", "tiny")));
  c.image_size = kv.get_size("image_size", image_size);
  c.patch_size = kv.get_size("patch_size", c.patch_size);
  c.embed_dim = kv.get_size("embed_dim", c.embed_dim);
  c.depth = kv.get_size("depth", c.depth);
  c.heads = kv.get_size("heads", c.heads);
  c.decoder_depth = kv.get_size("decoder_depth", c.decoder_depth);
  c.mlp_ratio = kv.get_double("mlp_ratio", c.mlp_ratio);
  c.validate();
  return c;
}

TrainConfig train_config_from(const KvConfig& kv) {
  const std::string profile = kv.get_string("profile", "desk");
  TrainConfig t;
  if (profile == "reference") {
    t = TrainConfig::reference();
  } else if (profile != "desk") {
    throw ConfigError("unknown profile '" + profile + "' (expected desk|reference)");
  }
  t.seed = kv.get_u64("seed", t.seed);
  t.phase1.epochs = kv.get_size("phase1_epochs", t.phase1.epochs);
  t.phase1.lr = kv.get_double("phase1_lr", t.phase1.lr);
  t.phase1.batch = kv.get_size("phase1_batch", t.phase1.batch);
  t.phase2.epochs = kv.get_size("phase2_epochs", t.phase2.epochs);
  t.phase2.lr = kv.get_double("phase2_lr", t.phase2.lr);
  t.phase2.batch = kv.get_size("phase2_batch", t.phase2.batch);
  if (!kv.get_bool("augment", true)) t.augment = AugmentConfig::none();
  t.augment.p_vflip = kv.get_double("p_vflip", t.augment.p_vflip);
  t.augment.p_blur = kv.get_double("p_blur", t.augment.p_blur);
  t.augment.p_median = kv.get_double("p_median", t.augment.p_median);
  t.augment.p_dropout = kv.get_double("p_dropout", t.augment.p_dropout);
  t.rle.mode = parse_rle_mode(kv.get_string("rle_mode", to_string(t.rle.mode)));
  t.rle.s = kv.get_double("rle_s", t.rle.s);
  t.rle.flow_layers = kv.get_size("flow_layers", t.rle.flow_layers);
  t.rle.flow_hidden = kv.get_size("flow_hidden", t.rle.flow_hidden);
  t.normalize_outputs = kv.get_bool("normalize_outputs", t.normalize_outputs);
  t.eval_each_epoch = kv.get_bool("eval_each_epoch", t.eval_each_epoch);
  t.validate();
  return t;
}

int cmd_synth(const CommonOptions& o) {
  const KvConfig kv = load_settings(o);
  SyntheticConfig c;
  c.num_samples = kv.get_size("num_samples", c.num_samples);
  c.image_size = kv.get_size("image_size", c.image_size);
  c.seed = kv.get_u64("seed", c.seed);
  c.noise_std = kv.get_double("noise_std", c.noise_std);
  c.focal = kv.get_double("focal", c.focal);
  kv.require_all_used();
  synth_generate(c, o.out);
  std::cout << "wrote " << c.num_samples << " samples to " << o.out << "\n";
  return 0;
}

int cmd_train(const CommonOptions& o, const std::string& data) {
  const KvConfig kv = load_settings(o);
  const Dataset ds = load_dataset(data);
  const ModelConfig model = model_config_from(kv, ds.image_size);
  const TrainConfig tc = train_config_from(kv);
  kv.require_all_used();
  const auto samples = ds.load_samples();
  const Checkpoint ckpt = train(tc, model, samples, [](const EpochRecord& r) {
    std::cout << r.phase << " epoch " << r.epoch << " loss " << fmt("%.6f", r.loss) << " train_mpjpe "
              << fmt("%.4f", r.train_mpjpe) << std::endl;
  });
  save_checkpoint(o.out, ckpt);
  std::cout << "saved checkpoint to " << o.out << "\n";
  return 0;
}

int cmd_infer(const CommonOptions& o, const std::string& data, const std::string& checkpoint, bool tta_flag) {
  const KvConfig kv = load_settings(o);
  const bool tta = tta_flag || kv.get_bool("tta", false);
  kv.get("seed");
  kv.require_all_used();
  const Checkpoint ckpt = load_checkpoint(checkpoint);
  const Dataset ds = load_dataset(data);
  const auto records = infer(ckpt, ds, tta);
  write_predictions(o.out, records);
  std::cout << "wrote " << records.size() << " predictions to " << o.out << (tta ? " (tta)" : "") << "\n";
  return 0;
}

// Predictions reordered to match the dataset; every dataset id must be present.
std::vector<JointSet> aligned(const std::vector<PredictionRecord>& records, const Dataset& ds, const std::string& what) {
  std::map<std::string, const JointSet*> by_id;
  for (const auto& r : records) {
    if (!by_id.emplace(r.sample_id, &r.mu).second) throw AlignmentError(what + ": duplicate sample id " + r.sample_id);
  }
  if (by_id.size() != ds.size()) {
    throw AlignmentError(what + ": " + std::to_string(by_id.size()) + " predictions for " + std::to_string(ds.size()) +
                         " samples");
  }
  std::vector<JointSet> out;
  for (const auto& e : ds.entries) {
    auto it = by_id.find(e.id);
    if (it == by_id.end()) throw AlignmentError(what + ": no prediction for sample " + e.id);
    out.push_back(*it->second);
  }
  return out;
}

int cmd_eval(const CommonOptions& o, const std::string& data, const std::string& pred) {
  const KvConfig kv = load_settings(o);
  kv.get("seed");
  kv.require_all_used();
  const Dataset ds = load_dataset(data);
  const auto preds = aligned(read_predictions(pred), ds, pred);
  const EvalReport r = evaluate(preds, ds.ground_truth());

  std::cout << "sample          mpjpe   pa_mpjpe\n";
  json per_sample = json::array();
  for (std::size_t i = 0; i < ds.size(); ++i) {
    const auto& s = r.per_sample[i];
    std::printf("%-10s %10.3f %10.3f\n", ds.entries[i].id.c_str(), s.mpjpe, s.pa_mpjpe);
    per_sample.push_back({{"sample_id", ds.entries[i].id}, {"mpjpe", s.mpjpe}, {"pa_mpjpe", s.pa_mpjpe}});
  }
  std::printf("%-10s %10.3f %10.3f\n", "mean", r.mpjpe_mean, r.pa_mpjpe_mean);
  std::fflush(stdout);
  const json summary = {{"samples", ds.size()}, {"mpjpe", r.mpjpe_mean}, {"pa_mpjpe", r.pa_mpjpe_mean}};
  std::cout << summary.dump() << "\n";
  if (!o.out.empty()) {
    json full = summary;
    full["per_sample"] = per_sample;
    write_text(o.out, full.dump(1) + "\n");
  }
  return 0;
}

std::vector<PredictionSet> load_sets(const std::vector<std::string>& files, const Dataset& ds) {
  std::vector<PredictionSet> sets;
  for (const auto& f : files) {
    PredictionSet s{std::filesystem::path(f).stem().string(), ds.ids(), aligned(read_predictions(f), ds, f)};
    sets.push_back(std::move(s));
  }
  return sets;
}

int cmd_ensemble_search(const CommonOptions& o, const std::string& data, const std::vector<std::string>& preds,
                        std::optional<std::size_t> trials_flag, std::optional<std::string> metric_flag) {
  const KvConfig kv = load_settings(o);
  const std::size_t trials = trials_flag.value_or(kv.get_size("trials", 1000));
  const Metric metric = parse_metric(metric_flag.value_or(kv.get_string("metric", "mpjpe")));
  const std::uint64_t seed = kv.get_u64("seed", 0);
  kv.require_all_used();
  const Dataset ds = load_dataset(data);
  const auto sets = load_sets(preds, ds);
  const SearchResult r = random_search_weights(sets, ds.ground_truth(), trials, seed, metric);
  const std::string weights = json(r.weights.values()).dump();
  std::cout << "weights " << weights << "\n"
            << to_string(metric) << " " << fmt("%.3f", r.best_score) << " (" << r.candidates_evaluated
            << " candidates)\n";
  if (!o.out.empty()) write_text(o.out, weights + "\n");
  return 0;
}

int cmd_ensemble_eval(const CommonOptions& o, const std::string& data, const std::vector<std::string>& preds,
                      const std::string& weights_path, std::optional<std::string> metric_flag) {
  const KvConfig kv = load_settings(o);
  const Metric metric = parse_metric(metric_flag.value_or(kv.get_string("metric", "mpjpe")));
  kv.get("seed");
  kv.require_all_used();
  const Dataset ds = load_dataset(data);
  const auto sets = load_sets(preds, ds);
  const auto bytes = read_file(weights_path);
  std::vector<double> w;
  try {
    w = json::parse(bytes.begin(), bytes.end()).get<std::vector<double>>();
  } catch (const json::parse_error& e) {
    throw FormatError("weights: " + std::string(e.what()), e.byte);
  } catch (const json::exception& e) {
    throw FormatError("weights: " + std::string(e.what()), 0);
  }
  const EnsembleWeights weights(std::move(w));
  const double score = evaluate_ensemble(sets, weights, ds.ground_truth(), metric);
  std::cout << to_string(metric) << " " << fmt("%.3f", score) << "\n";
  if (!o.out.empty()) {
    const PredictionSet fused = fuse(sets, weights);
    std::vector<PredictionRecord> records;
    for (std::size_t i = 0; i < fused.predictions.size(); ++i) {
      records.push_back({fused.sample_ids[i], fused.predictions[i], std::nullopt});
    }
    write_predictions(o.out, records);
  }
  return 0;
}

int cmd_gradcheck(const CommonOptions& o) {
  const KvConfig kv = load_settings(o);
  const ModelConfig model = model_config_from(kv, 64);
  GradCheckOptions opts;
  opts.step = kv.get_double("step", opts.step);
  opts.tolerance = kv.get_double("tolerance", opts.tolerance);
  opts.max_coords_per_tensor = kv.get_size("coords_per_tensor", opts.max_coords_per_tensor);
  const std::uint64_t seed = kv.get_u64("seed", 0);
  opts.seed = seed;
  kv.require_all_used();
  bool all = true;
  for (const auto& [name, rep] : run_model_gradchecks(model, seed, opts)) {
    std::size_t coords = 0;
    const ParamGradError* worst = nullptr;
    for (const auto& p : rep.params) {
      coords += p.coords_checked;
      if (!worst || p.max_rel_error > worst->max_rel_error) worst = &p;
    }
    std::cout << (rep.pass ? "PASS " : "FAIL ") << name << "  max_rel_error " << fmt("%.3e", rep.max_rel_error)
              << "  coords " << coords;
    if (worst) std::cout << "  worst " << worst->name << "[" << worst->worst_index << "]";
    std::cout << "\n";
    all = all && rep.pass;
  }
  return all ? 0 : kExitUsage;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Hand-pose ViT toolkit"};
  app.require_subcommand(1);
  CommonOptions common;
  std::string data, checkpoint, weights;
  std::vector<std::string> preds;
  bool tta = false;
  std::optional<std::size_t> trials;
  std::optional<std::string> metric;

  auto add_common = [&](CLI::App* sub, bool out_required) {
    sub->add_option("--config", common.config, "key=value settings file")->check(CLI::ExistingFile);
    sub->add_option("--seed", common.seed, "RNG seed (overrides the config file)");
    sub->add_option("--set", common.sets, "Override one setting, key=value (repeatable)");
    auto* out = sub->add_option("--out", common.out, "Output path");
    if (out_required) out->required();
  };

  auto* synth = app.add_subcommand("synth", "Generate a synthetic dataset directory");
  add_common(synth, true);

  auto* train_cmd = app.add_subcommand("train", "Train a model (MPJPE phase, then RLE fine-tune)");
  add_common(train_cmd, true);
  train_cmd->add_option("--data", data, "Dataset directory")->required();
  train_cmd->add_option("--variant", common.variant, "tiny|base|large|huge");

  auto* infer_cmd = app.add_subcommand("infer", "Write predictions for a dataset");
  add_common(infer_cmd, true);
  infer_cmd->add_option("--data", data, "Dataset directory")->required();
  infer_cmd->add_option("--checkpoint", checkpoint, "Checkpoint file")->required();
  infer_cmd->add_flag("--tta", tta, "Average with the vertically flipped input");

  auto* eval_cmd = app.add_subcommand("eval", "MPJPE / PA-MPJPE report");
  add_common(eval_cmd, false);
  eval_cmd->add_option("--data", data, "Dataset directory")->required();
  eval_cmd->add_option("--pred", preds, "Prediction file")->required()->expected(1);

  auto* search = app.add_subcommand("ensemble-search", "Random search for fusion weights");
  add_common(search, false);
  search->add_option("--data", data, "Validation dataset directory")->required();
  search->add_option("--pred", preds, "Prediction file, one per model (repeatable)")->required();
  search->add_option("--trials", trials, "Random simplex samples");
  search->add_option("--metric", metric, "mpjpe|pa_mpjpe");

  auto* ens_eval = app.add_subcommand("ensemble-eval", "Score fused predictions");
  add_common(ens_eval, false);
  ens_eval->add_option("--data", data, "Dataset directory")->required();
  ens_eval->add_option("--pred", preds, "Prediction file, one per model (repeatable)")->required();
  ens_eval->add_option("--weights", weights, "JSON array of weights")->required();
  ens_eval->add_option("--metric", metric, "mpjpe|pa_mpjpe");

  auto* gradcheck = app.add_subcommand("gradcheck", "Finite-difference check of the full model");
  add_common(gradcheck, false);
  gradcheck->add_option("--variant", common.variant, "tiny|base|large|huge");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : kExitUsage;
  }

  try {
    if (*synth) return cmd_synth(common);
    if (*train_cmd) return cmd_train(common, data);
    if (*infer_cmd) return cmd_infer(common, data, checkpoint, tta);
    if (*eval_cmd) return cmd_eval(common, data, preds.front());
    if (*search) return cmd_ensemble_search(common, data, preds, trials, metric);
    if (*ens_eval) return cmd_ensemble_eval(common, data, preds, weights, metric);
    if (*gradcheck) return cmd_gradcheck(common);
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const ContractError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitData;
  }
  return kExitUsage;
}
