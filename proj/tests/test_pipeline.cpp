#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include <json.hpp>

#include "hpvit/augment.hpp"
#include "hpvit/checkpoint.hpp"
#include "hpvit/dataset.hpp"
#include "hpvit/errors.hpp"
#include "hpvit/infer.hpp"
#include "hpvit/kv_config.hpp"
#include "hpvit/metrics.hpp"
#include "hpvit/synth.hpp"
#include "hpvit/tensor_io.hpp"
#include "hpvit/train.hpp"

using namespace hpvit;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("hpvit_test_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::vector<std::uint8_t> slurp(const fs::path& p) { return read_file(p); }

// Small model so whole training runs fit in a unit test.
ModelConfig small_model() {
  ModelConfig c = ModelConfig::preset(Variant::tiny);
  c.image_size = 32;
  c.embed_dim = 16;
  c.heads = 2;
  c.depth = 1;
  c.decoder_depth = 1;
  return c;
}

TrainConfig short_run() {
  TrainConfig t = TrainConfig::desk();
  t.phase1 = {2, 1e-3, 4};
  t.phase2 = {1, 1e-4, 4};
  t.seed = 3;
  return t;
}

std::vector<Sample> synth_samples(std::size_t n, std::size_t size) {
  SyntheticConfig cfg;
  cfg.num_samples = n;
  cfg.image_size = size;
  const Camera cam{cfg.effective_focal(), size};
  std::vector<Sample> out;
  for (std::size_t i = 0; i < n; ++i) {
    const JointSet j = sample_hand(cfg, i);
    out.push_back({render_hand(j, cam), j, true});
  }
  return out;
}

Checkpoint trained_checkpoint(RleMode mode) {
  TrainConfig t = short_run();
  t.rle.mode = mode;
  return train(t, small_model(), synth_samples(8, 32));
}

}  // namespace

TEST_CASE("synthetic hands") {
  SyntheticConfig cfg;
  const Camera cam{cfg.effective_focal(), cfg.image_size};

  SUBCASE("kinematics") {
    for (std::size_t i = 0; i < 20; ++i) {
      const JointSet j = sample_hand(cfg, i);
      CHECK_NOTHROW(j.validate());
      for (const auto& p : j.joints) {
        CHECK(p[2] > 300.0);
        CHECK(p[2] < 560.0);
      }
      // Bone lengths are jittered copies of the configured ones.
      const auto& parents = joint_parents();
      for (std::size_t b = 0; b < kNumBones; ++b) {
        const auto& c = j[b + 1];
        const auto& p = j[static_cast<std::size_t>(parents[b + 1])];
        const double len = std::hypot(c[0] - p[0], c[1] - p[1], c[2] - p[2]);
        CHECK(std::abs(len - cfg.bone_lengths[b]) < 6.0 * cfg.noise_std + 1e-9);
      }
    }
    SyntheticConfig exact = cfg;
    exact.noise_std = 0.0;
    const JointSet j = sample_hand(exact, 0);
    const auto& c = j[4];
    const auto& p = j[3];
    CHECK(std::hypot(c[0] - p[0], c[1] - p[1], c[2] - p[2]) == doctest::Approx(exact.bone_lengths[3]).epsilon(1e-12));
  }

  SUBCASE("rendered blob centre matches the projection") {
    for (std::size_t i = 0; i < 10; ++i) {
      const JointSet j = sample_hand(cfg, i);
      for (std::size_t k = 0; k < kNumJoints; ++k) {
        const auto uv = cam.project(j[k]);
        const double f = cam.focal;
        const double u = f * j[k][0] / j[k][2] + 32.0, v = f * j[k][1] / j[k][2] + 32.0;
        CHECK(uv[0] == doctest::Approx(u).epsilon(1e-12));
        CHECK(uv[1] == doctest::Approx(v).epsilon(1e-12));
        if (u < 3 || u > 61 || v < 3 || v > 61) continue;
        RenderOptions only;
        only.only_joint = k;
        const Tensor img = render_hand(j, cam, only);
        // Intensity-weighted centroid over all channels.
        double sw = 0.0, su = 0.0, sv = 0.0;
        for (std::size_t ch = 0; ch < 3; ++ch)
          for (std::size_t r = 0; r < 64; ++r)
            for (std::size_t col = 0; col < 64; ++col) {
              const double w = img[(ch * 64 + r) * 64 + col];
              sw += w;
              su += w * (static_cast<double>(col) + 0.5);
              sv += w * (static_cast<double>(r) + 0.5);
            }
        REQUIRE(sw > 0.0);
        CHECK(std::hypot(su / sw - u, sv / sw - v) < 1.0);
      }
    }
  }

  SUBCASE("image range and determinism") {
    const Tensor a = render_hand(sample_hand(cfg, 5), cam), b = render_hand(sample_hand(cfg, 5), cam);
    for (std::size_t i = 0; i < a.numel(); ++i) {
      REQUIRE(a[i] == b[i]);
      REQUIRE(a[i] >= 0.0);
      REQUIRE(a[i] <= 1.0);
    }
    CHECK_THROWS_AS(cam.project({0, 0, -1}), DomainError);
  }

  SUBCASE("config validation") {
    SyntheticConfig bad = cfg;
    bad.num_samples = 0;
    CHECK_THROWS_AS(bad.validate(), ConfigError);
    bad = cfg;
    bad.bone_lengths[3] = -1.0;
    CHECK_THROWS_AS(bad.validate(), ConfigError);
  }
}

TEST_CASE("dataset on disk") {
  const fs::path a = scratch("ds_a"), b = scratch("ds_b");
  SyntheticConfig cfg;
  cfg.num_samples = 5;
  cfg.seed = 11;
  synth_generate(cfg, a);
  synth_generate(cfg, b);
  CHECK(slurp(a / "manifest.json") == slurp(b / "manifest.json"));
  for (const auto& entry : fs::directory_iterator(a / "images")) {
    CHECK(slurp(entry.path()) == slurp(b / "images" / entry.path().filename()));
  }

  const Dataset ds = load_dataset(a);
  CHECK(ds.size() == 5);
  CHECK(ds.image_size == 64);
  CHECK(ds.ids() == std::vector<std::string>{"s00000", "s00001", "s00002", "s00003", "s00004"});
  CHECK(ds.ground_truth()[2] == sample_hand(cfg, 2));
  const Camera cam{cfg.effective_focal(), 64};
  const Tensor expected = round_to_f32(render_hand(sample_hand(cfg, 1), cam));
  const Tensor img = ds.load_image(1);
  for (std::size_t i = 0; i < img.numel(); ++i) REQUIRE(img[i] == expected[i]);

  SUBCASE("malformed manifests") {
    const fs::path bad = scratch("ds_bad");
    std::ofstream(bad / "manifest.json") << "{\"version\": 1, \"samples\": [";
    CHECK_THROWS_AS(load_dataset(bad), FormatError);
    std::ofstream(bad / "manifest.json", std::ios::trunc)
        << R"({"version": 1, "image_size": 64, "focal": 80, "seed": 0, "samples": []})";
    CHECK_THROWS_AS(load_dataset(bad), FormatError);
  }
  SUBCASE("wrong image size") {
    save_tensor(a / "images" / "s00003.tnsr", Tensor::zeros({3, 32, 32}));
    CHECK_THROWS_AS(load_dataset(a).load_image(3), ShapeError);
  }
}

TEST_CASE("tensor files") {
  const fs::path dir = scratch("tnsr");
  const Tensor t = round_to_f32(Tensor::from({2, 3}, {0.1, -2.5, 3e10, 1e-30, 0.0, -0.0}));
  save_tensor(dir / "t.tnsr", t);
  const Tensor back = load_tensor(dir / "t.tnsr");
  for (std::size_t i = 0; i < t.numel(); ++i) CHECK(back[i] == t[i]);
  save_tensor(dir / "u.tnsr", back);
  CHECK(slurp(dir / "t.tnsr") == slurp(dir / "u.tnsr"));

  auto bytes = slurp(dir / "t.tnsr");
  SUBCASE("every truncation is a format error") {
    for (std::size_t n = 0; n < bytes.size(); ++n) {
      CHECK_THROWS_AS(decode_tensor(std::span(bytes.data(), n)), FormatError);
    }
  }
  SUBCASE("empty dims") {
    bytes[8] = 0;
    CHECK_THROWS_AS(decode_tensor(bytes), FormatError);
  }
  SUBCASE("version") {
    bytes[4] = 2;
    try {
      decode_tensor(bytes);
      FAIL("expected a format error");
    } catch (const FormatError& e) {
      CHECK(e.offset() == 4);
    }
  }
}

TEST_CASE("checkpoint") {
  const Checkpoint ckpt = trained_checkpoint(RleMode::coupling_flow);
  REQUIRE(ckpt.flow.has_value());
  const auto bytes = encode_checkpoint(ckpt);
  const Checkpoint back = decode_checkpoint(bytes);
  CHECK(encode_checkpoint(back) == bytes);
  CHECK(back.config == ckpt.config);
  CHECK(back.meta.history == ckpt.meta.history);
  CHECK(back.meta.epochs_completed == 3);

  SUBCASE("forward outputs survive the round trip") {
    Parameters rounded;
    for (const auto& [name, t] : ckpt.params) rounded.insert(name, round_to_f32(t));
    const Tensor img = synth_samples(1, 32)[0].image;
    const PosePrediction a = forward(img, rounded, ckpt.config), b = forward(img, back.params, back.config);
    for (std::size_t i = 0; i < a.mu.numel(); ++i) CHECK(a.mu[i] == b.mu[i]);
    for (std::size_t i = 0; i < a.mu.numel(); ++i) CHECK((*a.sigma)[i] == (*b.sigma)[i]);
  }

  SUBCASE("corruption names the tensor") {
    const std::size_t header_len = bytes[8] | (bytes[9] << 8) | (bytes[10] << 16) | (std::size_t{bytes[11]} << 24);
    const auto header = nlohmann::json::parse(bytes.begin() + 12, bytes.begin() + 12 + static_cast<std::ptrdiff_t>(header_len));
    std::size_t checked = 0;
    for (const auto& entry : header.at("tensors")) {
      const std::string name = entry.at("name");
      auto bad = bytes;
      // Last payload byte of this block.
      bad[12 + header_len + entry.at("offset").get<std::size_t>() + entry.at("bytes").get<std::size_t>() - 1] ^= 0x40;
      try {
        decode_checkpoint(bad);
        FAIL("expected an integrity error");
      } catch (const IntegrityError& e) {
        CHECK(std::string(e.what()) == "checkpoint: checksum mismatch in tensor '" + name + "'");
      }
      ++checked;
    }
    CHECK(checked == back.params.size() + back.flow->params.size());
  }

  SUBCASE("version bump") {
    auto bad = bytes;
    bad[4] = 2;
    try {
      decode_checkpoint(bad);
      FAIL("expected a format error");
    } catch (const FormatError& e) {
      CHECK(std::string(e.what()).find("unsupported format version 2") != std::string::npos);
    }
  }

  SUBCASE("framing") {
    auto bad = bytes;
    bad[0] = 'X';
    CHECK_THROWS_AS(decode_checkpoint(bad), FormatError);
    CHECK_THROWS_AS(decode_checkpoint(std::span(bytes.data(), 7)), FormatError);
    auto trailing = bytes;
    trailing.push_back(0);
    CHECK_THROWS_AS(decode_checkpoint(trailing), IntegrityError);
    auto cut = bytes;
    cut.resize(cut.size() - 10);
    CHECK_THROWS_AS(decode_checkpoint(cut), IntegrityError);
  }

  SUBCASE("header disagrees with blocks") {
    // The header claims a second encoder layer that has no tensors.
    auto enc = bytes;
    const std::string needle = "\"depth\":1";
    auto it = std::search(enc.begin(), enc.end(), needle.begin(), needle.end());
    REQUIRE(it != enc.end());
    *(it + static_cast<std::ptrdiff_t>(needle.size()) - 1) = '2';
    try {
      decode_checkpoint(enc);
      FAIL("expected an integrity error");
    } catch (const IntegrityError& e) {
      CHECK(std::string(e.what()).find("missing tensor") != std::string::npos);
    }
  }

  SUBCASE("random byte corruption never crashes") {
    Rng rng(1);
    for (int trial = 0; trial < 300; ++trial) {
      auto bad = bytes;
      const std::size_t flips = 1 + rng.below(4);
      for (std::size_t k = 0; k < flips; ++k) bad[rng.below(bad.size())] ^= static_cast<std::uint8_t>(1 + rng.below(255));
      try {
        decode_checkpoint(bad);
      } catch (const FormatError&) {
      } catch (const IntegrityError&) {
      }
    }
  }
}

TEST_CASE("training") {
  const std::vector<Sample> samples = synth_samples(8, 32);

  SUBCASE("no epochs returns the initialised model") {
    TrainConfig t = short_run();
    t.phase1.epochs = 0;
    t.phase2.epochs = 0;
    const Checkpoint ckpt = train(t, small_model(), samples);
    const Parameters init = init_params(ckpt.config, t.seed);
    for (const auto& [name, tensor] : init) {
      const Tensor& got = ckpt.params.at(name);
      for (std::size_t i = 0; i < tensor.numel(); ++i) REQUIRE(got[i] == tensor[i]);
    }
    CHECK(ckpt.params.size() == init.size());
    CHECK(ckpt.meta.history.size() == 1);
    CHECK(ckpt.meta.history[0].phase == "init");
    CHECK_FALSE(ckpt.flow.has_value());
  }

  SUBCASE("same seed, same history and parameters") {
    const Checkpoint a = train(short_run(), small_model(), samples);
    const Checkpoint b = train(short_run(), small_model(), samples);
    CHECK(a.meta.history == b.meta.history);
    CHECK(encode_checkpoint(a) == encode_checkpoint(b));
    CHECK(a.meta.history.size() == 4);
    CHECK(a.config.head_mode == HeadMode::mu_sigma);
    TrainConfig other = short_run();
    other.seed = 4;
    CHECK_FALSE(train(other, small_model(), samples).meta.history == a.meta.history);
  }

  SUBCASE("output normalisation") {
    ModelConfig c = small_model();
    fit_output_normalization(c, samples);
    Vec3 mean{};
    for (const auto& s : samples)
      for (const auto& p : s.joints.joints)
        for (int d = 0; d < 3; ++d) mean[d] += p[d] / (8.0 * 21.0);
    for (int d = 0; d < 3; ++d) CHECK(c.output_offset[d] == doctest::Approx(mean[d]).epsilon(1e-12));
    double ss = 0.0;
    for (const auto& s : samples)
      for (const auto& p : s.joints.joints)
        for (int d = 0; d < 3; ++d) ss += (p[d] - mean[d]) * (p[d] - mean[d]);
    CHECK(c.output_scale == doctest::Approx(std::sqrt(ss / (8.0 * 21.0 * 3.0))).epsilon(1e-12));
  }

  SUBCASE("adam step") {
    // First Adam step moves each coordinate by lr * sign(g) (bias-corrected m / sqrt(v)).
    Tensor w = Tensor::from({3}, {1.0, -2.0, 0.5}, true);
    Adam opt({w}, 0.1, AdamConfig{});
    w.mutable_grad()[0] = 4.0;
    w.mutable_grad()[1] = -0.25;
    w.mutable_grad()[2] = 0.0;
    opt.step();
    CHECK(w[0] == doctest::Approx(0.9).epsilon(1e-7));
    CHECK(w[1] == doctest::Approx(-1.9).epsilon(1e-7));
    CHECK(w[2] == 0.5);
    CHECK(opt.steps() == 1);
  }

  SUBCASE("config validation") {
    TrainConfig t = TrainConfig::desk();
    t.phase1.lr = 0.0;
    CHECK_THROWS_AS(t.validate(), ConfigError);
    t = TrainConfig::reference();
    CHECK(t.phase1.epochs == 70);
    CHECK(t.phase1.lr == 5e-4);
    CHECK(t.phase1.batch == 64);
    CHECK(t.phase2.epochs == 20);
    CHECK(t.phase2.lr == 1e-4);
    CHECK_THROWS_AS(train(TrainConfig::desk(), small_model(), {}), ContractError);
  }
}

// 64-sample overfit suite, tiny config, desk learning rate.
TEST_CASE("property: phase-1 epoch-mean loss decreases for five epochs") {
  TrainConfig t = TrainConfig::desk();
  t.phase1.epochs = 5;
  t.phase2.epochs = 0;
  t.augment = AugmentConfig::none();
  t.eval_each_epoch = false;
  const Checkpoint ckpt = train(t, ModelConfig::preset(Variant::tiny), synth_samples(64, 64));
  const auto& h = ckpt.meta.history;
  REQUIRE(h.size() == 6);
  for (std::size_t e = 1; e < h.size(); ++e) {
    INFO("epoch " << h[e].epoch << " loss " << h[e].loss << " previous " << h[e - 1].loss);
    CHECK(h[e].loss < h[e - 1].loss);
  }
}

TEST_CASE("inference and prediction files") {
  const fs::path dir = scratch("infer");
  SyntheticConfig cfg;
  cfg.num_samples = 4;
  cfg.image_size = 32;
  synth_generate(cfg, dir / "data");
  const Dataset ds = load_dataset(dir / "data");
  const Checkpoint ckpt = trained_checkpoint(RleMode::gaussian_only);

  const auto plain = infer(ckpt, ds, false);
  REQUIRE(plain.size() == 4);
  for (std::size_t i = 0; i < 4; ++i) {
    const PosePrediction p = forward(ds.load_image(i), ckpt.params, ckpt.config);
    CHECK(plain[i].sample_id == ds.entries[i].id);
    CHECK(plain[i].mu == p.mu_joints());
    CHECK(plain[i].sigma == p.sigma_joints());
  }
  const auto tta = infer(ckpt, ds, true);
  const PosePrediction t0 = tta_predict(
      [&](const Tensor& img) { return forward(img, ckpt.params, ckpt.config); }, ds.load_image(0));
  CHECK(tta[0].mu == t0.mu_joints());

  write_predictions(dir / "a.jsonl", plain);
  write_predictions(dir / "b.jsonl", infer(ckpt, ds, false));
  CHECK(slurp(dir / "a.jsonl") == slurp(dir / "b.jsonl"));
  const auto text = slurp(dir / "a.jsonl");
  CHECK(std::count(text.begin(), text.end(), '\n') == 4);
  CHECK(read_predictions(dir / "a.jsonl") == plain);

  const PredictionSet set = to_prediction_set("m", plain);
  CHECK(set.sample_ids == ds.ids());

  SUBCASE("malformed lines") {
    std::ofstream(dir / "bad.jsonl") << encode_predictions({plain[0]}) << "{\"sample_id\": \"x\", \"mu\": [[1,2]]}\n";
    try {
      read_predictions(dir / "bad.jsonl");
      FAIL("expected a format error");
    } catch (const FormatError& e) {
      CHECK(std::string(e.what()).find("line 2") != std::string::npos);
    }
    // A coordinate that overflows a double is a format error, not infinity.
    std::string rows = "[1e999,0,0]";
    for (int j = 1; j < 21; ++j) rows += ",[0,0,0]";
    std::ofstream(dir / "inf.jsonl") << "{\"sample_id\": \"x\", \"mu\": [" << rows << "]}\n";
    CHECK_THROWS_AS(read_predictions(dir / "inf.jsonl"), FormatError);
  }
  SUBCASE("image size mismatch") {
    SyntheticConfig big = cfg;
    big.image_size = 64;
    synth_generate(big, dir / "big");
    CHECK_THROWS_AS(infer(ckpt, load_dataset(dir / "big"), false), ShapeError);
  }
}

TEST_CASE("key-value config") {
  const KvConfig c = KvConfig::parse("# comment\nseed = 7\n\nlr=0.001\nname =  tiny \nflag = true\n");
  CHECK(c.get_u64("seed", 0) == 7);
  CHECK(c.get_double("lr", 0.0) == 0.001);
  CHECK(c.get_string("name", "") == "tiny");
  CHECK(c.get_bool("flag", false));
  CHECK(c.get_size("absent", 5) == 5);
  CHECK_NOTHROW(c.require_all_used());

  const KvConfig unused = KvConfig::parse("seed = 1\ntypo = 2\n");
  unused.get_u64("seed", 0);
  CHECK_THROWS_AS(unused.require_all_used(), ConfigError);
  CHECK_THROWS_AS(KvConfig::parse("novalue\n"), ConfigError);
  CHECK_THROWS_AS(KvConfig::parse("a = 1\na = 2\n"), ConfigError);
  CHECK_THROWS_AS(KvConfig::parse("a = x1\n").get_double("a", 0), ConfigError);
  CHECK_THROWS_AS(KvConfig::parse("a = maybe\n").get_bool("a", false), ConfigError);
}
