// Acceptance suite: one PASS/FAIL line per criterion. Exit status is non-zero
// if any criterion fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <iostream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "hpvit/augment.hpp"
#include "hpvit/checkpoint.hpp"
#include "hpvit/ensemble.hpp"
#include "hpvit/errors.hpp"
#include "hpvit/losses.hpp"
#include "hpvit/metrics.hpp"
#include "hpvit/model_checks.hpp"
#include "hpvit/rng.hpp"
#include "hpvit/svd3.hpp"
#include "hpvit/synth.hpp"
#include "hpvit/tensor_io.hpp"
#include "hpvit/train.hpp"

namespace fs = std::filesystem;
using namespace hpvit;

namespace {

struct Outcome {
  bool pass = true;
  std::string detail;
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string num(double v, const char* spec = "%.3g") {
  char buf[64];
  std::snprintf(buf, sizeof buf, spec, v);
  return buf;
}

JointSet uniform_pose(Rng& rng) {
  JointSet j;
  for (auto& p : j.joints)
    for (auto& x : p) x = rng.uniform(-100.0, 100.0);
  return j;
}

Mat3 random_rotation(Rng& rng) {
  double q[4], n = 0.0;
  for (double& x : q) {
    x = rng.normal();
    n += x * x;
  }
  n = std::sqrt(n);
  const double w = q[0] / n, x = q[1] / n, y = q[2] / n, z = q[3] / n;
  return {{{1 - 2 * (y * y + z * z), 2 * (x * y - z * w), 2 * (x * z + y * w)},
           {2 * (x * y + z * w), 1 - 2 * (x * x + z * z), 2 * (y * z - x * w)},
           {2 * (x * z - y * w), 2 * (y * z + x * w), 1 - 2 * (x * x + y * y)}}};
}

std::vector<Sample> overfit_suite(std::size_t n, std::uint64_t seed) {
  SyntheticConfig cfg;
  cfg.num_samples = n;
  cfg.seed = seed;
  const Camera cam{cfg.effective_focal(), cfg.image_size};
  std::vector<Sample> out;
  for (std::size_t i = 0; i < n; ++i) {
    const JointSet j = sample_hand(cfg, i);
    out.push_back({round_to_f32(render_hand(j, cam)), j, true});
  }
  return out;
}

// 1. Full-model finite-difference gradient checks.
Outcome gradient_suite() {
  const auto t0 = Clock::now();
  GradCheckOptions opt;
  opt.step = 1e-5;
  opt.tolerance = 1e-4;
  // Same draw as `hpvit gradcheck` with its default seed.
  const std::uint64_t seed = 0;
  opt.seed = seed;
  Outcome o;
  double worst = 0.0;
  std::size_t coords = 0;
  for (const auto& [name, rep] : run_model_gradchecks(ModelConfig::preset(Variant::tiny), seed, opt)) {
    o.pass = o.pass && rep.pass;
    worst = std::max(worst, rep.max_rel_error);
    for (const auto& p : rep.params) coords += p.coords_checked;
    if (!rep.pass) o.detail += name + " failed; ";
  }
  const double elapsed = seconds_since(t0);
  if (elapsed > 120.0) o.pass = false;
  o.detail += "3 losses, " + std::to_string(coords) + " coords, max rel err " + num(worst) + ", " +
              num(elapsed, "%.1f") + " s";
  return o;
}

// 2. rle_loss(gaussian_only) - gaussian_nll is input independent.
Outcome loss_equivalence() {
  Rng rng(2);
  const RleConfig cfg;
  double lo = 1e300, hi = -1e300;
  for (int trial = 0; trial < 1000; ++trial) {
    std::vector<double> mu(63), sigma(63), gt(63);
    const double spread = std::pow(10.0, rng.uniform(-1, 2));
    for (std::size_t i = 0; i < 63; ++i) {
      mu[i] = rng.normal(0.0, spread);
      gt[i] = rng.normal(0.0, spread);
      sigma[i] = std::exp(rng.uniform(-3.0, 3.0));
    }
    const Tensor m = Tensor::from({21, 3}, mu), s = Tensor::from({21, 3}, sigma), g = Tensor::from({21, 3}, gt);
    const double d = rle_loss(m, s, g, nullptr, cfg).item() - gaussian_nll(m, s, g).item();
    lo = std::min(lo, d);
    hi = std::max(hi, d);
  }
  return {hi - lo < 1e-9, "variation " + num(hi - lo) + " over 1000 inputs"};
}

// 3. Metric oracles.
Outcome metric_oracles() {
  Outcome o;
  Rng rng(3);
  int violations = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    const JointSet a = uniform_pose(rng), b = uniform_pose(rng);
    if (pa_mpjpe(a, b) > mpjpe(a, b) + 1e-9) ++violations;
  }
  double worst_pa = 0.0;
  for (int trial = 0; trial < 1000; ++trial) {
    const JointSet gt = uniform_pose(rng);
    const SimilarityTransform t{rng.uniform(0.2, 5.0), random_rotation(rng),
                                {rng.uniform(-500, 500), rng.uniform(-500, 500), rng.uniform(-500, 500)}};
    worst_pa = std::max(worst_pa, pa_mpjpe(t.apply(gt), gt));
  }
  double worst_recovery = 0.0;
  for (int trial = 0; trial < 1000; ++trial) {
    const JointSet gt = uniform_pose(rng);
    const SimilarityTransform fwd{rng.uniform(0.2, 5.0), random_rotation(rng),
                                  {rng.uniform(-500, 500), rng.uniform(-500, 500), rng.uniform(-500, 500)}};
    // Align gt onto pred = fwd(gt): the result must be fwd itself.
    const SimilarityTransform got = procrustes_align(gt, fwd.apply(gt));
    worst_recovery = std::max(worst_recovery, std::abs(got.scale - fwd.scale) / fwd.scale);
    for (int r = 0; r < 3; ++r) {
      worst_recovery = std::max(worst_recovery, std::abs(got.translation[r] - fwd.translation[r]) / 500.0);
      for (int c = 0; c < 3; ++c) worst_recovery = std::max(worst_recovery, std::abs(got.rotation[r][c] - fwd.rotation[r][c]));
    }
  }
  double worst_svd = 0.0;
  for (int trial = 0; trial < 10000; ++trial) {
    Mat3 m;
    const double mag = std::pow(10.0, rng.uniform(-3, 3));
    for (auto& row : m)
      for (auto& x : row) x = mag * rng.normal();
    const Svd3 d = svd3(m);
    double norm = 0.0, err = 0.0;
    for (int r = 0; r < 3; ++r)
      for (int c = 0; c < 3; ++c) {
        double rec = 0.0;
        for (int k = 0; k < 3; ++k) rec += d.u[r][k] * d.s[k] * d.v[c][k];
        err = std::max(err, std::abs(rec - m[r][c]));
        norm += m[r][c] * m[r][c];
      }
    worst_svd = std::max(worst_svd, err / std::max(1.0, std::sqrt(norm)));
  }
  o.pass = violations == 0 && worst_pa <= 1e-8 && worst_recovery <= 1e-6 && worst_svd <= 1e-8;
  o.detail = "pa>mpjpe " + std::to_string(violations) + "/1000, similarity pa " + num(worst_pa) + ", recovery err " +
             num(worst_recovery) + ", svd rel err " + num(worst_svd) + " over 10000";
  return o;
}

// 4. Flip involution and TTA on an equivariant mock.
Outcome flip_and_tta() {
  const auto samples = overfit_suite(16, 4);
  bool involution = true;
  for (const auto& s : samples) {
    const Sample back = vertical_flip_sample(vertical_flip_sample(s));
    involution = involution && back.joints == s.joints &&
                 std::equal(back.image.data().begin(), back.image.data().end(), s.image.data().begin());
  }
  // x, z: row-symmetric statistics; y: odd under row reversal.
  const ForwardFn mock = [](const Tensor& img) {
    const std::size_t h = img.dim(1), w = img.dim(2);
    std::vector<double> mu(63, 0.0), sigma(63, 0.0);
    for (std::size_t j = 0; j < 21; ++j) {
      const double k = 1.0 + 0.1 * static_cast<double>(j);
      for (std::size_t c = 0; c < 3; ++c)
        for (std::size_t r = 0; r < h; ++r)
          for (std::size_t x = 0; x < w; ++x) {
            const double v = img[(c * h + r) * w + x];
            mu[3 * j] += k * v * static_cast<double>(x + c);
            mu[3 * j + 1] += k * v * (static_cast<double>(r) - 0.5 * static_cast<double>(h - 1));
            mu[3 * j + 2] += k * v * v;
          }
      for (std::size_t d = 0; d < 3; ++d) {
        mu[3 * j + d] /= static_cast<double>(3 * h * w);
        sigma[3 * j + d] = 1.0 + std::abs(mu[3 * j + d]);
      }
    }
    return PosePrediction{Tensor::from({21, 3}, mu), Tensor::from({21, 3}, sigma)};
  };
  double worst = 0.0;
  for (const auto& s : samples) {
    const PosePrediction plain = mock(s.image), tta = tta_predict(mock, s.image);
    for (std::size_t i = 0; i < 63; ++i) {
      worst = std::max(worst, std::abs(plain.mu[i] - tta.mu[i]));
      worst = std::max(worst, std::abs((*plain.sigma)[i] - (*tta.sigma)[i]));
    }
  }
  return {involution && worst <= 1e-12,
          std::string("flip involution ") + (involution ? "bit-exact" : "BROKEN") + " on 16 samples, tta max diff " + num(worst)};
}

// 5. Ensemble search never loses to its best member; opposite errors cancel.
Outcome ensemble_dominance() {
  Rng rng(5);
  int losses = 0, cases = 0;
  for (std::uint64_t seed = 0; seed < 40; ++seed) {
    const std::size_t n = 3 + rng.below(10), m = 1 + rng.below(5);
    std::vector<JointSet> gt;
    std::vector<std::string> ids;
    for (std::size_t i = 0; i < n; ++i) {
      gt.push_back(uniform_pose(rng));
      ids.push_back("v" + std::to_string(i));
    }
    std::vector<PredictionSet> sets;
    for (std::size_t k = 0; k < m; ++k) {
      std::vector<JointSet> p = gt;
      const double sd = rng.uniform(0.5, 20.0), bias = rng.uniform(-10.0, 10.0);
      for (auto& j : p)
        for (auto& q : j.joints)
          for (auto& x : q) x += bias + rng.normal(0.0, sd);
      sets.push_back({"m" + std::to_string(k), ids, p});
    }
    for (Metric metric : {Metric::mpjpe, Metric::pa_mpjpe}) {
      const SearchResult r = random_search_weights(sets, gt, 50, seed, metric);
      double best = 1e300;
      for (std::size_t k = 0; k < m; ++k) best = std::min(best, evaluate_ensemble(sets, EnsembleWeights::one_hot(m, k), gt, metric));
      ++cases;
      if (r.best_score > best) ++losses;
    }
  }
  std::vector<JointSet> gt, plus, minus;
  std::vector<std::string> ids;
  for (int i = 0; i < 10; ++i) {
    gt.push_back(uniform_pose(rng));
    plus.push_back(gt.back());
    minus.push_back(gt.back());
    ids.push_back("v" + std::to_string(i));
    for (std::size_t j = 0; j < kNumJoints; ++j)
      for (std::size_t d = 0; d < 3; ++d) {
        const double delta = rng.normal(0.0, 8.0);
        plus.back()[j][d] += delta;
        minus.back()[j][d] -= delta;
      }
  }
  const std::vector<PredictionSet> pair{{"plus", ids, plus}, {"minus", ids, minus}};
  const double fused = evaluate_ensemble(pair, EnsembleWeights({0.5, 0.5}), gt, Metric::mpjpe);
  return {losses == 0 && fused < 1e-9,
          "search worse than best member in " + std::to_string(losses) + "/" + std::to_string(cases) +
              " cases, opposite pair fused mpjpe " + num(fused)};
}

// 6. Overfit run on 64 synthetic samples with the desk profile, augmentation off.
Outcome overfit_run() {
  const auto t0 = Clock::now();
  TrainConfig cfg = TrainConfig::desk();
  cfg.augment = AugmentConfig::none();
  const auto samples = overfit_suite(64, 0);
  Outcome o;
  Checkpoint ckpt;
  try {
    ckpt = train(cfg, ModelConfig::preset(Variant::tiny), samples);
  } catch (const TrainingDiverged& e) {
    return {false, std::string("diverged: ") + e.what()};
  }
  const double elapsed = seconds_since(t0);
  double initial = 0.0, after_phase1 = 0.0, after_phase2 = 0.0;
  bool finite = true;
  for (const auto& r : ckpt.meta.history) {
    finite = finite && std::isfinite(r.loss) && std::isfinite(r.train_mpjpe);
    if (r.phase == "init") initial = r.train_mpjpe;
    if (r.phase == "mpjpe") after_phase1 = r.train_mpjpe;
    if (r.phase == "rle") after_phase2 = r.train_mpjpe;
  }
  const double ratio = after_phase1 / initial;
  const double change = std::abs(after_phase2 - after_phase1) / after_phase1;
  o.pass = ratio < 0.10 && finite && change < 0.20 && elapsed <= 600.0;
  o.detail = "train mpjpe " + num(initial, "%.2f") + " -> " + num(after_phase1, "%.2f") + " mm after " +
             std::to_string(cfg.phase1.epochs) + " epochs (" + num(100.0 * ratio, "%.1f") + "% of initial, need < 10%); rle " +
             std::to_string(cfg.phase2.epochs) + " epochs -> " + num(after_phase2, "%.2f") + " mm (" +
             num(100.0 * change, "%.1f") + "% change, " + (finite ? "finite" : "NON-FINITE") + "); " +
             num(elapsed, "%.0f") + " s";
  return o;
}

// 7. Byte-stable round trips; corrupted input raises typed errors.
Outcome formats() {
  Rng rng(7);
  bool stable = true;
  for (int trial = 0; trial < 50; ++trial) {
    Shape dims;
    const std::size_t nd = 1 + rng.below(4);
    for (std::size_t d = 0; d < nd; ++d) dims.push_back(1 + rng.below(6));
    std::vector<double> v(shape_numel(dims));
    for (auto& x : v) x = rng.normal(0.0, std::pow(10.0, rng.uniform(-5, 5)));
    const auto bytes = encode_tensor(Tensor::from(dims, v));
    stable = stable && encode_tensor(decode_tensor(bytes)) == bytes;
  }

  TrainConfig tc = TrainConfig::desk();
  tc.phase1 = {1, 1e-3, 8};
  tc.phase2 = {1, 1e-4, 8};
  tc.rle.mode = RleMode::coupling_flow;
  const Checkpoint ckpt = train(tc, ModelConfig::preset(Variant::tiny), overfit_suite(8, 7));
  const auto bytes = encode_checkpoint(ckpt);
  const fs::path tmp = fs::temp_directory_path() / "hpvit_acceptance_ckpt.hpvt";
  save_checkpoint(tmp, ckpt);
  const Checkpoint loaded = load_checkpoint(tmp);
  stable = stable && encode_checkpoint(loaded) == bytes && read_file(tmp) == bytes;
  fs::remove(tmp);

  std::size_t attempts = 0, typed = 0, accepted = 0;
  std::string untyped;
  auto attempt = [&](const std::function<void()>& decode) {
    ++attempts;
    try {
      decode();
      ++accepted;
    } catch (const FormatError&) {
      ++typed;
    } catch (const IntegrityError&) {
      ++typed;
    } catch (const std::exception& e) {
      if (untyped.empty()) untyped = e.what();
    }
  };
  const std::size_t header_end = 12 + (bytes[8] | (bytes[9] << 8) | (bytes[10] << 16) | (std::size_t{bytes[11]} << 24));
  for (int trial = 0; trial < 400; ++trial) {
    auto bad = bytes;
    // Half the flips land in the preamble and header, where parsing is most fragile.
    const std::size_t span = trial % 2 ? header_end : bad.size();
    const std::size_t flips = 1 + rng.below(3);
    for (std::size_t k = 0; k < flips; ++k) bad[rng.below(span)] ^= static_cast<std::uint8_t>(1 + rng.below(255));
    attempt([&] { decode_checkpoint(bad); });
  }
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t cut = trial < 100 ? rng.below(header_end + 64) : rng.below(bytes.size());
    attempt([&] { decode_checkpoint(std::span(bytes.data(), cut)); });
  }
  const auto tensor_bytes = encode_tensor(ckpt.params.at("pos_embed"));
  for (std::size_t cut = 0; cut < tensor_bytes.size(); cut += 7) {
    attempt([&] { decode_tensor(std::span(tensor_bytes.data(), cut)); });
  }
  for (int trial = 0; trial < 200; ++trial) {
    auto bad = tensor_bytes;
    bad[rng.below(24)] ^= static_cast<std::uint8_t>(1 + rng.below(255));
    attempt([&] { decode_tensor(bad); });
  }
  // A flipped payload byte in a tensor block can only be caught by the checksum,
  // and bit flips in the JSON header can leave it valid (e.g. inside a number that
  // is not checked); those count as accepted, not as failures.
  Outcome o;
  o.pass = stable && untyped.empty();
  o.detail = std::string("round trips ") + (stable ? "byte-stable" : "UNSTABLE") + "; " + std::to_string(attempts) +
             " corrupted inputs: " + std::to_string(typed) + " typed errors, " + std::to_string(accepted) + " decoded, " +
             (untyped.empty() ? "0 untyped" : "untyped error: " + untyped);
  return o;
}

// 8. Two CLI runs of synth + train + infer + eval with the same seed.
Outcome determinism(const std::string& cli, const fs::path& workdir) {
  const std::vector<std::string> steps = {
      "synth --seed 5 --set num_samples=12 --out data",
      "train --data data --seed 5 --set phase1_epochs=2 --set phase2_epochs=1 --set phase1_batch=4 "
      "--set phase2_batch=4 --set rle_mode=coupling_flow --out model.hpvt",
      "infer --data data --checkpoint model.hpvt --tta --out pred.jsonl",
      "eval --data data --pred pred.jsonl --out report.json",
  };
  std::vector<fs::path> runs = {workdir / "run1", workdir / "run2"};
  for (const auto& dir : runs) {
    fs::remove_all(dir);
    fs::create_directories(dir);
    int i = 0;
    for (const auto& step : steps) {
      const std::string cmd = "cd '" + dir.string() + "' && '" + cli + "' " + step + " > step" + std::to_string(i++) +
                              ".stdout 2>&1";
      if (std::system(cmd.c_str()) != 0) return {false, "command failed: " + step};
    }
  }
  std::size_t files = 0;
  std::string mismatch;
  for (const auto& entry : fs::recursive_directory_iterator(runs[0])) {
    if (!entry.is_regular_file()) continue;
    const fs::path rel = fs::relative(entry.path(), runs[0]);
    ++files;
    if (!fs::exists(runs[1] / rel) || read_file(entry.path()) != read_file(runs[1] / rel)) {
      if (mismatch.empty()) mismatch = rel.string();
    }
  }
  std::size_t files2 = 0;
  for (const auto& entry : fs::recursive_directory_iterator(runs[1])) files2 += entry.is_regular_file() ? 1 : 0;
  if (files2 != files && mismatch.empty()) mismatch = "file count";
  return {mismatch.empty() && files > 0,
          std::to_string(files) + " files compared" + (mismatch.empty() ? ", all identical" : ", first difference: " + mismatch)};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Acceptance criteria"};
  std::string cli;
  std::string workdir = (fs::temp_directory_path() / "hpvit_acceptance").string();
  std::vector<int> only;
  app.add_option("--cli", cli, "Path to the hpvit executable")->required();
  app.add_option("--workdir", workdir, "Scratch directory for the CLI runs");
  app.add_option("--only", only, "Run only these criteria");
  CLI11_PARSE(app, argc, argv);
  cli = fs::absolute(cli).string();

  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
      {"gradient suite", gradient_suite},
      {"loss equivalence", loss_equivalence},
      {"metric oracles", metric_oracles},
      {"flip involution and tta", flip_and_tta},
      {"ensemble dominance", ensemble_dominance},
      {"overfit run", overfit_run},
      {"formats", formats},
      {"determinism", [&] { return determinism(cli, workdir); }},
  };

  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const int id = static_cast<int>(i) + 1;
    if (!only.empty() && std::find(only.begin(), only.end(), id) == only.end()) continue;
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failed += o.pass ? 0 : 1;
    std::cout << (o.pass ? "PASS" : "FAIL") << " " << id << " " << criteria[i].first << ": " << o.detail << std::endl;
  }
  return failed == 0 ? 0 : 1;
}
