#include "hpvit/augment.hpp"

#include <algorithm>
#include <cmath>

#include "hpvit/errors.hpp"
#include "hpvit/ops.hpp"

namespace hpvit {

void AugmentConfig::validate() const {
  for (double p : {p_vflip, p_blur, p_median, p_dropout}) {
    if (!(p >= 0.0 && p <= 1.0)) throw ConfigError("augment config: probabilities must lie in [0, 1]");
  }
  if (!(dropout_max_frac > 0.0 && dropout_max_frac <= 0.5)) {
    throw ConfigError("augment config: dropout_max_frac must lie in (0, 0.5]");
  }
  for (double g : hsv_gains) {
    if (!(g >= 0.0) || !std::isfinite(g)) throw ConfigError("augment config: hsv gains must be non-negative");
  }
}

AugmentConfig AugmentConfig::none() {
  AugmentConfig c;
  c.p_vflip = c.p_blur = c.p_median = c.p_dropout = 0.0;
  c.hsv_gains = {0.0, 0.0, 0.0};
  return c;
}

namespace {

struct ImageDims {
  std::size_t c, h, w;
};

ImageDims image_dims(const Tensor& image, const char* op) {
  if (image.ndim() != 3) throw ShapeError(std::string(op) + ": expected [C x H x W], got " + shape_str(image.dims()));
  return {image.dim(0), image.dim(1), image.dim(2)};
}

}  // namespace

Tensor vertical_flip_image(const Tensor& image) {
  const auto [c, h, w] = image_dims(image, "vertical_flip");
  const auto src = image.data();
  std::vector<double> out(src.size());
  for (std::size_t ch = 0; ch < c; ++ch)
    for (std::size_t y = 0; y < h; ++y)
      std::copy_n(src.begin() + static_cast<std::ptrdiff_t>((ch * h + (h - 1 - y)) * w), w,
                  out.begin() + static_cast<std::ptrdiff_t>((ch * h + y) * w));
  return Tensor::from(image.dims(), std::move(out));
}

JointSet vertical_flip_joints(const JointSet& joints) {
  JointSet out = joints;
  for (auto& j : out.joints) j[1] = -j[1];
  return out;
}

Sample vertical_flip_sample(const Sample& s) {
  if (!s.camera_normalized) throw ContractError("vertical_flip_sample: joints must be in the camera-normalised frame");
  return {vertical_flip_image(s.image), vertical_flip_joints(s.joints), s.camera_normalized};
}

Tensor coarse_dropout(const Tensor& image, Rng& rng, const AugmentConfig& cfg) {
  const auto [c, h, w] = image_dims(image, "coarse_dropout");
  if (cfg.dropout_max_holes == 0 || !rng.bernoulli(cfg.p_dropout)) return image.detach();
  std::vector<double> out(image.data().begin(), image.data().end());
  const std::size_t max_h = std::max<std::size_t>(1, static_cast<std::size_t>(cfg.dropout_max_frac * static_cast<double>(h)));
  const std::size_t max_w = std::max<std::size_t>(1, static_cast<std::size_t>(cfg.dropout_max_frac * static_cast<double>(w)));
  const std::size_t holes = 1 + rng.below(cfg.dropout_max_holes);
  for (std::size_t k = 0; k < holes; ++k) {
    const std::size_t hh = 1 + rng.below(max_h);
    const std::size_t hw = 1 + rng.below(max_w);
    const std::size_t y0 = rng.below(h - hh + 1);
    const std::size_t x0 = rng.below(w - hw + 1);
    for (std::size_t ch = 0; ch < c; ++ch)
      for (std::size_t y = y0; y < y0 + hh; ++y)
        for (std::size_t x = x0; x < x0 + hw; ++x) out[(ch * h + y) * w + x] = 0.5;
  }
  return Tensor::from(image.dims(), std::move(out));
}

Tensor blur(const Tensor& image, BlurKind kind) {
  const auto [c, h, w] = image_dims(image, "blur");
  if (h < 3 || w < 3) throw ShapeError("blur: image must be at least 3x3, got " + shape_str(image.dims()));
  const auto src = image.data();
  std::vector<double> out(src.size());
  std::array<double, 9> win{};
  auto clampi = [](std::ptrdiff_t v, std::size_t n) {
    return static_cast<std::size_t>(std::clamp<std::ptrdiff_t>(v, 0, static_cast<std::ptrdiff_t>(n) - 1));
  };
  for (std::size_t ch = 0; ch < c; ++ch) {
    for (std::size_t y = 0; y < h; ++y) {
      for (std::size_t x = 0; x < w; ++x) {
        std::size_t k = 0;
        for (int dy = -1; dy <= 1; ++dy) {
          const std::size_t yy = clampi(static_cast<std::ptrdiff_t>(y) + dy, h);
          for (int dx = -1; dx <= 1; ++dx) {
            const std::size_t xx = clampi(static_cast<std::ptrdiff_t>(x) + dx, w);
            win[k++] = src[(ch * h + yy) * w + xx];
          }
        }
        double v;
        if (kind == BlurKind::box3) {
          v = 0.0;
          for (double p : win) v += p;
          v /= 9.0;
        } else {
          std::nth_element(win.begin(), win.begin() + 4, win.end());
          v = win[4];
        }
        out[(ch * h + y) * w + x] = v;
      }
    }
  }
  return Tensor::from(image.dims(), std::move(out));
}

namespace {

void rgb_to_hsv(double r, double g, double b, double& hh, double& s, double& v) {
  const double mx = std::max({r, g, b});
  const double mn = std::min({r, g, b});
  const double d = mx - mn;
  v = mx;
  s = mx > 0.0 ? d / mx : 0.0;
  if (d <= 0.0) {
    hh = 0.0;
    return;
  }
  if (mx == r) {
    hh = (g - b) / d;
  } else if (mx == g) {
    hh = 2.0 + (b - r) / d;
  } else {
    hh = 4.0 + (r - g) / d;
  }
  hh /= 6.0;
  if (hh < 0.0) hh += 1.0;
}

void hsv_to_rgb(double hh, double s, double v, double& r, double& g, double& b) {
  const double h6 = hh * 6.0;
  const double sector = std::floor(h6);
  const double f = h6 - sector;
  const double p = v * (1.0 - s);
  const double q = v * (1.0 - s * f);
  const double t = v * (1.0 - s * (1.0 - f));
  switch (static_cast<int>(sector) % 6) {
    case 0: r = v, g = t, b = p; break;
    case 1: r = q, g = v, b = p; break;
    case 2: r = p, g = v, b = t; break;
    case 3: r = p, g = q, b = v; break;
    case 4: r = t, g = p, b = v; break;
    default: r = v, g = p, b = q; break;
  }
}

}  // namespace

Tensor hsv_jitter(const Tensor& image, Rng& rng, const std::array<double, 3>& gains) {
  const auto [c, h, w] = image_dims(image, "hsv_jitter");
  if (c != 3) throw ShapeError("hsv_jitter: expected 3 channels, got " + std::to_string(c));
  const double dh = rng.uniform(-1.0, 1.0) * gains[0];
  const double fs = 1.0 + rng.uniform(-1.0, 1.0) * gains[1];
  const double fv = 1.0 + rng.uniform(-1.0, 1.0) * gains[2];
  const auto src = image.data();
  const std::size_t plane = h * w;
  std::vector<double> out(src.size());
  for (std::size_t i = 0; i < plane; ++i) {
    double hh, s, v;
    rgb_to_hsv(src[i], src[plane + i], src[2 * plane + i], hh, s, v);
    hh = hh + dh;
    hh -= std::floor(hh);
    s = std::clamp(s * fs, 0.0, 1.0);
    v = std::clamp(v * fv, 0.0, 1.0);
    double r, g, b;
    hsv_to_rgb(hh, s, v, r, g, b);
    out[i] = std::clamp(r, 0.0, 1.0);
    out[plane + i] = std::clamp(g, 0.0, 1.0);
    out[2 * plane + i] = std::clamp(b, 0.0, 1.0);
  }
  return Tensor::from(image.dims(), std::move(out));
}

Sample augment_sample(const Sample& s, Rng& rng, const AugmentConfig& cfg) {
  cfg.validate();
  Sample out{s.image.detach(), s.joints, s.camera_normalized};
  if (rng.bernoulli(cfg.p_vflip)) out = vertical_flip_sample(out);
  if (rng.bernoulli(cfg.p_blur)) out.image = blur(out.image, BlurKind::box3);
  if (rng.bernoulli(cfg.p_median)) out.image = blur(out.image, BlurKind::median3);
  out.image = coarse_dropout(out.image, rng, cfg);
  if (cfg.hsv_gains != std::array<double, 3>{0.0, 0.0, 0.0}) out.image = hsv_jitter(out.image, rng, cfg.hsv_gains);
  return out;
}

PosePrediction tta_predict(const ForwardFn& model_forward, const Tensor& image) {
  const PosePrediction plain = model_forward(image);
  const PosePrediction flipped = model_forward(vertical_flip_image(image));
  // un-flip: negate the y column
  std::vector<double> sign(flipped.mu.numel());
  for (std::size_t i = 0; i < sign.size(); ++i) sign[i] = (i % 3 == 1) ? -1.0 : 1.0;
  const Tensor sign_t = Tensor::from(flipped.mu.dims(), std::move(sign));
  PosePrediction out;
  out.mu = scale(add(plain.mu, mul(flipped.mu, sign_t)), 0.5);
  if (plain.sigma && flipped.sigma) out.sigma = scale(add(*plain.sigma, *flipped.sigma), 0.5);
  return out;
}

}  // namespace hpvit
