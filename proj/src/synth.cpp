#include "hpvit/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <string>

#include <json.hpp>

#include "hpvit/errors.hpp"
#include "hpvit/rng.hpp"
#include "hpvit/tensor_io.hpp"

namespace hpvit {

namespace {

using Mat = std::array<Vec3, 3>;  // rows

Vec3 operator+(const Vec3& a, const Vec3& b) { return {a[0] + b[0], a[1] + b[1], a[2] + b[2]}; }
Vec3 operator*(double s, const Vec3& a) { return {s * a[0], s * a[1], s * a[2]}; }

Vec3 rotate(const Mat& m, const Vec3& v) {
  Vec3 out{};
  for (int r = 0; r < 3; ++r) out[r] = m[r][0] * v[0] + m[r][1] * v[1] + m[r][2] * v[2];
  return out;
}

Mat compose(const Mat& a, const Mat& b) {
  Mat out{};
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 3; ++c) out[r][c] = a[r][0] * b[0][c] + a[r][1] * b[1][c] + a[r][2] * b[2][c];
  return out;
}

// Rodrigues rotation about a unit axis.
Mat axis_angle(const Vec3& k, double angle) {
  const double c = std::cos(angle), s = std::sin(angle), t = 1.0 - c;
  return {{{t * k[0] * k[0] + c, t * k[0] * k[1] - s * k[2], t * k[0] * k[2] + s * k[1]},
           {t * k[0] * k[1] + s * k[2], t * k[1] * k[1] + c, t * k[1] * k[2] - s * k[0]},
           {t * k[0] * k[2] - s * k[1], t * k[1] * k[2] + s * k[0], t * k[2] * k[2] + c}}};
}

constexpr double deg(double d) { return d * std::numbers::pi / 180.0; }

// Hand frame: palm in the x-y plane, fingers along -y (towards the top of the
// image), palm facing -z. Spread of each metacarpal from the -y axis.
constexpr std::array<double, 5> kSpread = {deg(-55), deg(-14), deg(0), deg(12), deg(25)};

constexpr std::array<std::array<double, 3>, 5> kFinger = {{
    // {min flexion, max flexion, abduction jitter}
    {deg(0), deg(35), deg(12)},
    {deg(-5), deg(60), deg(8)},
    {deg(-5), deg(60), deg(6)},
    {deg(-5), deg(60), deg(6)},
    {deg(-5), deg(60), deg(8)},
}};

constexpr std::array<std::array<double, 3>, 6> kColours = {{
    {1.0, 1.0, 1.0},  // wrist
    {1.0, 0.25, 0.25},
    {1.0, 0.9, 0.2},
    {0.25, 1.0, 0.3},
    {0.2, 0.8, 1.0},
    {0.6, 0.35, 1.0},
}};

std::size_t finger_of(std::size_t joint) { return joint == 0 ? 0 : 1 + (joint - 1) / 4; }

double depth_brightness(double z) { return 0.55 + 0.45 * std::clamp((480.0 - z) / 120.0, 0.0, 1.0); }

std::string sample_id(std::size_t i) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "s%05zu", i);
  return buf;
}

}  // namespace

std::array<double, kNumBones> default_bone_lengths() {
  return {
      34, 32, 29, 24,  // thumb
      78, 40, 24, 20,  // index
      76, 44, 27, 21,  // middle
      72, 41, 26, 20,  // ring
      68, 32, 19, 17,  // little
  };
}

void SyntheticConfig::validate() const {
  if (num_samples == 0) throw ConfigError("synthetic config: num_samples must be positive");
  if (image_size < 8) throw ConfigError("synthetic config: image_size must be at least 8");
  for (double b : bone_lengths) {
    if (!(b > 0.0) || !std::isfinite(b)) throw ConfigError("synthetic config: bone lengths must be positive");
  }
  if (!(noise_std >= 0.0) || !std::isfinite(noise_std)) throw ConfigError("synthetic config: noise_std must be >= 0");
  if (!(focal >= 0.0) || !std::isfinite(focal)) throw ConfigError("synthetic config: focal must be >= 0");
}

std::array<double, 2> Camera::project(const Vec3& p) const {
  if (!(p[2] > 0.0)) throw DomainError("camera: point behind the camera");
  const double c = 0.5 * static_cast<double>(image_size);
  return {focal * p[0] / p[2] + c, focal * p[1] / p[2] + c};
}

JointSet sample_hand(const SyntheticConfig& cfg, std::size_t index) {
  Rng rng = Rng::stream(cfg.seed, {index});
  const auto& parents = joint_parents();
  JointSet local;
  for (std::size_t f = 0; f < 5; ++f) {
    const auto& lim = kFinger[f];
    const double spread = kSpread[f] + rng.uniform(-lim[2], lim[2]);
    Vec3 dir{std::sin(spread), -std::cos(spread), 0.0};
    // Positive flexion curls the finger towards -z.
    const Vec3 axis{std::cos(spread), std::sin(spread), 0.0};
    for (std::size_t k = 0; k < 4; ++k) {
      const std::size_t joint = 1 + 4 * f + k;
      const std::size_t bone = joint - 1;
      if (k > 0) dir = rotate(axis_angle(axis, rng.uniform(lim[0], lim[1])), dir);
      const double len = std::max(0.2 * cfg.bone_lengths[bone],
                                  cfg.bone_lengths[bone] + (cfg.noise_std > 0 ? rng.normal(0.0, cfg.noise_std) : 0.0));
      local[joint] = local[static_cast<std::size_t>(parents[joint])] + len * dir;
    }
  }

  const Mat rot = compose(axis_angle({0, 0, 1}, rng.uniform(deg(-45), deg(45))),
                          compose(axis_angle({0, 1, 0}, rng.uniform(deg(-40), deg(40))),
                                  axis_angle({1, 0, 0}, rng.uniform(deg(-40), deg(40)))));
  Vec3 centroid{};
  for (const auto& p : local.joints) centroid = centroid + (1.0 / kNumJoints) * p;
  const Vec3 target{rng.uniform(-15.0, 15.0), rng.uniform(-15.0, 15.0), rng.uniform(380.0, 460.0)};

  JointSet out;
  for (std::size_t j = 0; j < kNumJoints; ++j) {
    out[j] = rotate(rot, local[j] + (-1.0) * centroid) + target;
  }
  return out;
}

Tensor render_hand(const JointSet& joints, const Camera& camera, const RenderOptions& options) {
  const std::size_t s = camera.image_size;
  std::vector<double> img(3 * s * s, 0.0);
  std::array<std::array<double, 2>, kNumJoints> px{};
  for (std::size_t j = 0; j < kNumJoints; ++j) px[j] = camera.project(joints[j]);

  auto splat = [&](std::size_t r, std::size_t c, double intensity, const std::array<double, 3>& colour) {
    for (std::size_t ch = 0; ch < 3; ++ch) {
      double& v = img[(ch * s + r) * s + c];
      v = std::max(v, intensity * colour[ch]);
    }
  };

  // Each primitive only touches a local window around its pixels.
  auto window = [&](double lo, double hi) {
    const double a = std::clamp(std::floor(lo), 0.0, static_cast<double>(s));
    const double b = std::clamp(std::ceil(hi), 0.0, static_cast<double>(s));
    return std::array<std::size_t, 2>{static_cast<std::size_t>(a), static_cast<std::size_t>(b)};
  };

  constexpr double kHalfWidth = 0.6;
  constexpr double kBlobSigma = 0.9;
  const auto& parents = joint_parents();

  if (options.bones && !options.only_joint) {
    for (std::size_t j = 1; j < kNumJoints; ++j) {
      const auto& a = px[static_cast<std::size_t>(parents[j])];
      const auto& b = px[j];
      const auto& colour = kColours[finger_of(j)];
      const double za = joints[static_cast<std::size_t>(parents[j])][2], zb = joints[j][2];
      const double dx = b[0] - a[0], dy = b[1] - a[1];
      const double len2 = dx * dx + dy * dy;
      const auto cols = window(std::min(a[0], b[0]) - 2.0, std::max(a[0], b[0]) + 2.0);
      const auto rows = window(std::min(a[1], b[1]) - 2.0, std::max(a[1], b[1]) + 2.0);
      for (std::size_t r = rows[0]; r < rows[1]; ++r) {
        for (std::size_t c = cols[0]; c < cols[1]; ++c) {
          const double x = static_cast<double>(c) + 0.5, y = static_cast<double>(r) + 0.5;
          const double t = len2 > 0.0 ? std::clamp(((x - a[0]) * dx + (y - a[1]) * dy) / len2, 0.0, 1.0) : 0.0;
          const double ex = x - (a[0] + t * dx), ey = y - (a[1] + t * dy);
          const double coverage = std::clamp(kHalfWidth + 0.5 - std::sqrt(ex * ex + ey * ey), 0.0, 1.0);
          if (coverage > 0.0) splat(r, c, 0.7 * coverage * depth_brightness(za + t * (zb - za)), colour);
        }
      }
    }
  }

  if (options.blobs || options.only_joint) {
    for (std::size_t j = 0; j < kNumJoints; ++j) {
      if (options.only_joint && *options.only_joint != j) continue;
      const auto& p = px[j];
      const auto cols = window(p[0] - 3.0 * kBlobSigma, p[0] + 3.0 * kBlobSigma);
      const auto rows = window(p[1] - 3.0 * kBlobSigma, p[1] + 3.0 * kBlobSigma);
      const double peak = depth_brightness(joints[j][2]);
      for (std::size_t r = rows[0]; r < rows[1]; ++r) {
        for (std::size_t c = cols[0]; c < cols[1]; ++c) {
          const double ex = static_cast<double>(c) + 0.5 - p[0], ey = static_cast<double>(r) + 0.5 - p[1];
          splat(r, c, peak * std::exp(-(ex * ex + ey * ey) / (2.0 * kBlobSigma * kBlobSigma)), kColours[finger_of(j)]);
        }
      }
    }
  }
  return Tensor::from({3, s, s}, std::move(img));
}

void synth_generate(const SyntheticConfig& cfg, const std::filesystem::path& dir) {
  cfg.validate();
  std::filesystem::create_directories(dir / "images");
  const Camera camera{cfg.effective_focal(), cfg.image_size};
  nlohmann::json samples = nlohmann::json::array();
  for (std::size_t i = 0; i < cfg.num_samples; ++i) {
    const std::string id = sample_id(i);
    const JointSet joints = sample_hand(cfg, i);
    const std::string rel = "images/" + id + ".tnsr";
    save_tensor(dir / rel, render_hand(joints, camera));
    samples.push_back({{"id", id}, {"image", rel}, {"joints", joints.to_rows()}});
  }
  const nlohmann::json manifest = {{"version", 1},
                                   {"image_size", cfg.image_size},
                                   {"focal", camera.focal},
                                   {"seed", cfg.seed},
                                   {"samples", samples}};
  const std::string text = manifest.dump(1) + "\n";
  write_file(dir / "manifest.json", std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

}  // namespace hpvit
