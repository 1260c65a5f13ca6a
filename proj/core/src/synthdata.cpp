#include "amenable/synthdata.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <fstream>
#include <numbers>
#include <sstream>

#include <nlohmann/json.hpp>

namespace amenable::synth {

namespace fs = std::filesystem;
using nlohmann::ordered_json;

std::string to_string(ArtefactKind kind) {
  switch (kind) {
    case ArtefactKind::kNone: return "none";
    case ArtefactKind::kGaussianNoise: return "gaussian_noise";
    case ArtefactKind::kStripe: return "stripe";
    case ArtefactKind::kBlur: return "blur";
    case ArtefactKind::kChannelMisalign: return "channel_misalign";
  }
  return "?";
}

std::string to_string(HardKind kind) {
  switch (kind) {
    case HardKind::kNone: return "none";
    case HardKind::kLowContrast: return "low_contrast";
    case HardKind::kTinyTarget: return "tiny_target";
  }
  return "?";
}

ArtefactKind artefact_kind_from_string(const std::string& s) {
  for (auto k : {ArtefactKind::kNone, ArtefactKind::kGaussianNoise, ArtefactKind::kStripe, ArtefactKind::kBlur,
                 ArtefactKind::kChannelMisalign})
    if (to_string(k) == s) return k;
  throw ConfigError("unknown artefact kind '" + s + "'");
}

HardKind hard_kind_from_string(const std::string& s) {
  for (auto k : {HardKind::kNone, HardKind::kLowContrast, HardKind::kTinyTarget})
    if (to_string(k) == s) return k;
  throw ConfigError("unknown hard kind '" + s + "'");
}

namespace {

struct GroupCounts {
  std::size_t present = 0, absent = 0, hard = 0;
};

GroupCounts group_counts(std::size_t n, const GeneratorConfig& c) {
  GroupCounts g;
  g.present = static_cast<std::size_t>(std::llround(static_cast<double>(n) * c.target_rate));
  g.present = std::min(g.present, n);
  g.absent = n - g.present;
  g.hard = static_cast<std::size_t>(std::llround(static_cast<double>(g.present) * c.hard_rate));
  if (c.hard_rate > 0.0 && g.hard == 0 && g.present > 0) g.hard = 1;
  if (c.hard_rate < 1.0 && g.hard == g.present && g.present > 1) g.hard = g.present - 1;
  return g;
}

// Count of flagged members of a group of size n at the given rate; keeps
// both flagged and unflagged members present whenever 0 < rate < 1 allows it.
std::size_t flagged_count(std::size_t n, double rate) {
  if (n == 0 || rate <= 0.0) return 0;
  auto k = static_cast<std::size_t>(std::llround(static_cast<double>(n) * rate));
  k = std::clamp<std::size_t>(k, 1, n);
  if (rate < 1.0 && k == n && n > 1) k = n - 1;
  return k;
}

bool in_unit(double v) { return v >= 0.0 && v <= 1.0; }

}  // namespace

void GeneratorConfig::validate() const {
  if (height < 8 || width < 8 || channels == 0) throw ConfigError("data: raster must be at least 8 x 8 with >= 1 channel");
  if (channels != 1 && channels != 3) throw ConfigError("data.channels must be 1 or 3");
  if (train < min_train) throw ConfigError("data.train must be >= " + std::to_string(min_train));
  if (validation == 0 || holdout == 0) throw ConfigError("data: validation and holdout splits must be nonempty");
  for (auto [name, v] : {std::pair{"target_rate", target_rate}, {"artefact_rate", artefact_rate},
                         {"artefact_in_roi_rate", artefact_in_roi_rate}, {"hard_rate", hard_rate},
                         {"low_contrast_share", low_contrast_share}})
    if (!in_unit(v)) throw ConfigError(std::string("data.") + name + " must lie in [0,1]");
  if (!(radius_min > 0 && radius_min <= radius_max && radius_max < 0.5))
    throw ConfigError("data: need 0 < radius_min <= radius_max < 0.5");
  if (!(contrast_min >= 0 && contrast_min <= contrast_max)) throw ConfigError("data: bad contrast range");
  if (!(artefact_severity_min > 0 && artefact_severity_min <= artefact_severity_max && artefact_severity_max <= 1))
    throw ConfigError("data: artefact severities must lie in (0,1]");
  if (!(hard_severity_min > 0 && hard_severity_min <= hard_severity_max && hard_severity_max <= 1))
    throw ConfigError("data: hard severities must lie in (0,1]");
  if (strength.noise_sigma < 0 || strength.stripe_amplitude < 0 || strength.misalign_pixels < 0)
    throw ConfigError("data: corruption strengths must be nonnegative");
  if (artefact_kind_weights.size() != 4) throw ConfigError("data.artefact_kind_weights needs 4 entries");
  double wsum = 0;
  for (double w : artefact_kind_weights) {
    if (w < 0) throw ConfigError("data.artefact_kind_weights must be nonnegative");
    wsum += w;
  }
  if (artefact_rate > 0 && wsum <= 0) throw ConfigError("data.artefact_kind_weights sum to zero");
  if (hard_rate > 0 && target_rate <= 0) throw ConfigError("data: hard cases need target_rate > 0");

  // Every populated axis must be realizable in every split, and a rate of 1
  // on one axis empties the clean side of the other.
  if (artefact_rate > 0 && hard_rate > 0 && (artefact_rate >= 1.0 || hard_rate >= 1.0))
    throw ConfigError("data: artefact_rate and hard_rate must be < 1 so all four quadrants are populated");
  for (std::size_t n : {train, validation, holdout}) {
    const auto g = group_counts(n, *this);
    if (hard_rate > 0 && (static_cast<double>(g.present) * hard_rate < 0.5 || g.hard == 0))
      throw ConfigError("data: hard_rate leaves no hard samples in a split of " + std::to_string(n));
    if (artefact_rate > 0 && static_cast<double>(n) * artefact_rate < 0.5)
      throw ConfigError("data: artefact_rate leaves no artefacts in a split of " + std::to_string(n));
    if (artefact_rate > 0 && hard_rate > 0 && (g.hard < 2 || g.present - g.hard < 2))
      throw ConfigError("data: split of " + std::to_string(n) + " too small to populate all four quadrants");
  }
}

namespace {

// Pixel set of the corruption region.
bool in_region(const Region& roi, bool in_roi, std::size_t y, std::size_t x) {
  return roi.contains(y, x) == in_roi;
}

Region bounding_box(const Mask& mask, std::size_t h, std::size_t w, std::size_t margin) {
  std::size_t y0 = h, x0 = w, y1 = 0, x1 = 0;
  for (std::size_t y = 0; y < h; ++y)
    for (std::size_t x = 0; x < w; ++x)
      if (mask[y * w + x] > 0.5) {
        y0 = std::min(y0, y);
        x0 = std::min(x0, x);
        y1 = std::max(y1, y + 1);
        x1 = std::max(x1, x + 1);
      }
  if (y1 == 0) return {};
  return {y0 >= margin ? y0 - margin : 0, x0 >= margin ? x0 - margin : 0, std::min(h, y1 + margin),
          std::min(w, x1 + margin)};
}

void clamp_unit(Raster& r) {
  for (auto& v : r.data) v = std::clamp(v, 0.0, 1.0);
}

struct SamplePlan {
  bool present = false, artefact = false, in_roi = false, hard = false;
};

std::vector<SamplePlan> plan_split(std::size_t n, const GeneratorConfig& c, Rng& rng) {
  const auto g = group_counts(n, c);
  std::vector<SamplePlan> plans;
  plans.reserve(n);
  auto add_group = [&](std::size_t count, bool present, bool hard) {
    const std::size_t n_art = flagged_count(count, c.artefact_rate);
    const std::size_t n_roi = flagged_count(n_art, c.artefact_in_roi_rate);
    for (std::size_t i = 0; i < count; ++i)
      plans.push_back({present, i < n_art, i < n_roi, hard});
  };
  add_group(g.present - g.hard, true, false);
  add_group(g.hard, true, true);
  add_group(g.absent, false, false);
  for (std::size_t i = plans.size(); i > 1; --i) std::swap(plans[i - 1], plans[uniform_index(rng, i)]);
  return plans;
}

ArtefactKind pick_kind(const std::vector<double>& weights, Rng& rng) {
  double total = 0;
  for (double w : weights) total += w;
  double u = uniform01(rng) * total;
  const ArtefactKind kinds[] = {ArtefactKind::kGaussianNoise, ArtefactKind::kStripe, ArtefactKind::kBlur,
                                ArtefactKind::kChannelMisalign};
  for (std::size_t i = 0; i < 4; ++i) {
    if (u < weights[i]) return kinds[i];
    u -= weights[i];
  }
  for (std::size_t i = 4; i-- > 0;)
    if (weights[i] > 0) return kinds[i];
  return ArtefactKind::kGaussianNoise;
}

ImageSample render(std::size_t id, const SamplePlan& plan, const GeneratorConfig& c, Rng& rng) {
  const std::size_t H = c.height, W = c.width, C = c.channels;
  ImageSample s;
  s.id = id;
  s.raster = Raster(H, W, C);
  s.mask.assign(H * W, 0.0);

  const double base = uniform(rng, c.background_min, c.background_max);
  double fy[2], fx[2], ph[2];
  for (int k = 0; k < 2; ++k) {
    fy[k] = uniform(rng, -2.0, 2.0);
    fx[k] = uniform(rng, -2.0, 2.0);
    ph[k] = uniform(rng, 0.0, 2.0 * std::numbers::pi);
  }
  static constexpr double kChannelGain[3] = {1.0, 0.85, 0.7};
  for (std::size_t y = 0; y < H; ++y)
    for (std::size_t x = 0; x < W; ++x) {
      double tex = 0;
      for (int k = 0; k < 2; ++k)
        tex += c.texture_amplitude *
               std::sin(2.0 * std::numbers::pi * (fy[k] * static_cast<double>(y) / static_cast<double>(H) +
                                                   fx[k] * static_cast<double>(x) / static_cast<double>(W)) +
                        ph[k]);
      for (std::size_t ch = 0; ch < C; ++ch)
        s.raster.at(y, x, ch) = base + tex + c.pixel_noise * standard_normal(rng);
    }

  const double side = static_cast<double>(std::min(H, W));
  const double radius = std::max(1.0, side * uniform(rng, c.radius_min, c.radius_max));
  const double cy = uniform(rng, radius + 0.5, static_cast<double>(H) - radius - 1.5);
  const double cx = uniform(rng, radius + 0.5, static_cast<double>(W) - radius - 1.5);
  const double gap = uniform(rng, c.contrast_min, c.contrast_max);
  Mask disc(H * W, 0.0);
  for (std::size_t y = 0; y < H; ++y)
    for (std::size_t x = 0; x < W; ++x) {
      const double dy = static_cast<double>(y) - cy, dx = static_cast<double>(x) - cx;
      if (dy * dy + dx * dx <= radius * radius) disc[y * W + x] = 1.0;
    }
  s.roi = bounding_box(disc, H, W, 1);
  s.target_present = plan.present;
  if (plan.present) {
    s.mask = disc;
    for (std::size_t y = 0; y < H; ++y)
      for (std::size_t x = 0; x < W; ++x)
        if (disc[y * W + x] > 0.5)
          for (std::size_t ch = 0; ch < C; ++ch) s.raster.at(y, x, ch) += gap * kChannelGain[ch];
  }
  clamp_unit(s.raster);

  if (plan.hard) {
    const bool low = uniform01(rng) < c.low_contrast_share;
    s.hard_flag = true;
    s.hard_kind = low ? HardKind::kLowContrast : HardKind::kTinyTarget;
    auto hard = make_hard(s.raster, s.mask, s.hard_kind, uniform(rng, c.hard_severity_min, c.hard_severity_max), rng);
    s.raster = std::move(hard.raster);
    s.mask = std::move(hard.mask);
  }
  if (plan.artefact) {
    s.artefact_flag = true;
    s.artefact_in_roi = plan.in_roi;
    s.artefact_kind = pick_kind(c.artefact_kind_weights, rng);
    const double sev = uniform(rng, c.artefact_severity_min, c.artefact_severity_max);
    s.raster = corrupt(s.raster, s.artefact_kind, s.roi, s.artefact_in_roi, sev, rng, c.strength);
  }
  // Stored rasters are float32 on disk; round now so save/load is lossless.
  for (auto& v : s.raster.data) v = static_cast<double>(static_cast<float>(v));
  return s;
}

}  // namespace

Raster corrupt(const Raster& raster, ArtefactKind kind, const Region& roi, bool in_roi, double severity, Rng& rng,
               const CorruptionStrength& strength) {
  if (!(severity > 0.0 && severity <= 1.0)) throw Error("corrupt: severity must lie in (0,1]");
  const std::size_t H = raster.height, W = raster.width, C = raster.channels;
  Raster out = raster;
  switch (kind) {
    case ArtefactKind::kNone: throw Error("corrupt: artefact kind 'none' is not a corruption");
    case ArtefactKind::kGaussianNoise: {
      const double sigma = strength.noise_sigma * severity;
      for (std::size_t y = 0; y < H; ++y)
        for (std::size_t x = 0; x < W; ++x)
          for (std::size_t ch = 0; ch < C; ++ch) {
            const double n = standard_normal(rng);
            if (in_region(roi, in_roi, y, x)) out.at(y, x, ch) += sigma * n;
          }
      break;
    }
    case ArtefactKind::kStripe: {
      const double amp = strength.stripe_amplitude * severity;
      const double angle = uniform(rng, 0.0, std::numbers::pi);
      const double period = uniform(rng, 3.0, 5.0);
      const double phase = uniform(rng, 0.0, 2.0 * std::numbers::pi);
      const double ky = std::sin(angle), kx = std::cos(angle);
      for (std::size_t y = 0; y < H; ++y)
        for (std::size_t x = 0; x < W; ++x) {
          if (!in_region(roi, in_roi, y, x)) continue;
          const double t = (ky * static_cast<double>(y) + kx * static_cast<double>(x)) / period;
          const double v = amp * std::sin(2.0 * std::numbers::pi * t + phase);
          for (std::size_t ch = 0; ch < C; ++ch) out.at(y, x, ch) += v;
        }
      break;
    }
    case ArtefactKind::kBlur: {
      // Blend toward a box blur; continuous in severity.
      const long r = static_cast<long>(strength.blur_radius);
      for (std::size_t y = 0; y < H; ++y)
        for (std::size_t x = 0; x < W; ++x) {
          if (!in_region(roi, in_roi, y, x)) continue;
          for (std::size_t ch = 0; ch < C; ++ch) {
            double acc = 0;
            int cnt = 0;
            for (long dy = -r; dy <= r; ++dy)
              for (long dx = -r; dx <= r; ++dx) {
                const long yy = static_cast<long>(y) + dy, xx = static_cast<long>(x) + dx;
                if (yy < 0 || xx < 0 || yy >= static_cast<long>(H) || xx >= static_cast<long>(W)) continue;
                acc += raster.at(static_cast<std::size_t>(yy), static_cast<std::size_t>(xx), ch);
                ++cnt;
              }
            out.at(y, x, ch) = (1.0 - severity) * raster.at(y, x, ch) + severity * acc / cnt;
          }
        }
      break;
    }
    case ArtefactKind::kChannelMisalign: {
      // Shift content; with three channels the outer two move in opposite
      // directions, with one channel the whole region moves.
      const long shift = std::lround(strength.misalign_pixels * severity);
      const bool horizontal = uniform01(rng) < 0.5;
      if (shift == 0) break;
      for (std::size_t y = 0; y < H; ++y)
        for (std::size_t x = 0; x < W; ++x) {
          if (!in_region(roi, in_roi, y, x)) continue;
          for (std::size_t ch = 0; ch < C; ++ch) {
            long s = C == 1 ? shift : (ch == 0 ? shift : (ch == 2 ? -shift : 0));
            if (s == 0) continue;
            long yy = static_cast<long>(y), xx = static_cast<long>(x);
            (horizontal ? xx : yy) -= s;
            yy = std::clamp(yy, 0L, static_cast<long>(H) - 1);
            xx = std::clamp(xx, 0L, static_cast<long>(W) - 1);
            out.at(y, x, ch) = raster.at(static_cast<std::size_t>(yy), static_cast<std::size_t>(xx), ch);
          }
        }
      break;
    }
  }
  clamp_unit(out);
  return out;
}

namespace {

struct RingStats {
  double target_mean = 0, background_mean = 0;
};

RingStats ring_stats(const Raster& raster, const Mask& mask) {
  const std::size_t H = raster.height, W = raster.width;
  const Region box = bounding_box(mask, H, W, 2);
  double ts = 0, bs = 0;
  std::size_t tn = 0, bn = 0;
  for (std::size_t y = box.y0; y < box.y1; ++y)
    for (std::size_t x = box.x0; x < box.x1; ++x) {
      if (mask[y * W + x] > 0.5) {
        ts += raster.at(y, x, 0);
        ++tn;
      } else {
        bs += raster.at(y, x, 0);
        ++bn;
      }
    }
  return {tn ? ts / static_cast<double>(tn) : 0.0, bn ? bs / static_cast<double>(bn) : 0.0};
}

}  // namespace

double target_contrast(const Raster& raster, const Mask& mask) {
  const auto st = ring_stats(raster, mask);
  return st.target_mean - st.background_mean;
}

HardResult make_hard(const Raster& raster, const Mask& mask, HardKind kind, double severity, Rng& /*rng*/) {
  const std::size_t H = raster.height, W = raster.width, C = raster.channels;
  if (mask.size() != H * W) throw ShapeError("make_hard: mask does not match raster");
  if (std::none_of(mask.begin(), mask.end(), [](double v) { return v > 0.5; }))
    throw Error("make_hard: target absent");
  if (!(severity >= 0.0 && severity <= 1.0)) throw Error("make_hard: severity must lie in [0,1]");
  HardResult out{raster, mask};
  if (kind == HardKind::kNone || severity == 0.0) return out;

  // Per-channel mean gap between target and its local background ring.
  std::vector<double> gap(C);
  const Region box = bounding_box(mask, H, W, 2);
  for (std::size_t ch = 0; ch < C; ++ch) {
    double ts = 0, bs = 0;
    std::size_t tn = 0, bn = 0;
    for (std::size_t y = box.y0; y < box.y1; ++y)
      for (std::size_t x = box.x0; x < box.x1; ++x) {
        const bool t = mask[y * W + x] > 0.5;
        (t ? ts : bs) += raster.at(y, x, ch);
        ++(t ? tn : bn);
      }
    gap[ch] = (tn ? ts / static_cast<double>(tn) : 0.0) - (bn ? bs / static_cast<double>(bn) : 0.0);
  }

  if (kind == HardKind::kLowContrast) {
    for (std::size_t y = 0; y < H; ++y)
      for (std::size_t x = 0; x < W; ++x)
        if (mask[y * W + x] > 0.5)
          for (std::size_t ch = 0; ch < C; ++ch) out.raster.at(y, x, ch) -= severity * gap[ch];
  } else {
    double cy = 0, cx = 0, n = 0;
    for (std::size_t y = 0; y < H; ++y)
      for (std::size_t x = 0; x < W; ++x)
        if (mask[y * W + x] > 0.5) {
          cy += static_cast<double>(y);
          cx += static_cast<double>(x);
          n += 1;
        }
    cy /= n;
    cx /= n;
    // Keep the (up to) four target pixels nearest the centroid; ties by index.
    std::vector<std::pair<double, std::size_t>> order;
    for (std::size_t k = 0; k < H * W; ++k)
      if (mask[k] > 0.5) {
        const double dy = static_cast<double>(k / W) - cy, dx = static_cast<double>(k % W) - cx;
        order.emplace_back(dy * dy + dx * dx, k);
      }
    std::sort(order.begin(), order.end());
    Mask tiny(H * W, 0.0);
    for (std::size_t i = 0; i < std::min<std::size_t>(4, order.size()); ++i) tiny[order[i].second] = 1.0;
    for (std::size_t k = 0; k < H * W; ++k)
      if (mask[k] > 0.5 && tiny[k] < 0.5)
        for (std::size_t ch = 0; ch < C; ++ch) out.raster.data[k * C + ch] -= gap[ch];
    out.mask = std::move(tiny);
  }
  clamp_unit(out.raster);
  return out;
}

SplitDataset generate(const GeneratorConfig& cfg) {
  cfg.validate();
  SplitDataset data;
  data.config = cfg;
  std::size_t next_id = 0;
  const std::pair<const char*, std::size_t> splits[] = {
      {"train", cfg.train}, {"validation", cfg.validation}, {"holdout", cfg.holdout}};
  std::vector<ImageSample>* targets[] = {&data.train, &data.validation, &data.holdout};
  for (std::size_t si = 0; si < 3; ++si) {
    Rng plan_rng = make_rng(cfg.seed, std::string("plan/") + splits[si].first);
    const auto plans = plan_split(splits[si].second, cfg, plan_rng);
    targets[si]->reserve(plans.size());
    for (const auto& plan : plans) {
      Rng rng = make_rng(cfg.seed, "sample", next_id);
      targets[si]->push_back(render(next_id, plan, cfg, rng));
      ++next_id;
    }
  }
  return data;
}

nn::Tensor to_tensor(const std::vector<ImageSample>& samples) {
  if (samples.empty()) throw ShapeError("to_tensor: no samples");
  const auto& r0 = samples.front().raster;
  const std::size_t H = r0.height, W = r0.width, C = r0.channels;
  nn::Tensor t({samples.size(), C, H, W});
  for (std::size_t n = 0; n < samples.size(); ++n) {
    const auto& r = samples[n].raster;
    if (r.height != H || r.width != W || r.channels != C) throw ShapeError("to_tensor: raster shapes differ");
    auto out = t.sample(n);
    for (std::size_t ch = 0; ch < C; ++ch)
      for (std::size_t k = 0; k < H * W; ++k) out[ch * H * W + k] = r.data[k * C + ch];
  }
  return t;
}

nn::Tensor mask_tensor(const std::vector<ImageSample>& samples) {
  if (samples.empty()) throw ShapeError("mask_tensor: no samples");
  const auto& r0 = samples.front().raster;
  nn::Tensor t({samples.size(), 1, r0.height, r0.width});
  for (std::size_t n = 0; n < samples.size(); ++n) {
    if (samples[n].mask.size() != r0.height * r0.width) throw ShapeError("mask_tensor: mask shapes differ");
    std::copy(samples[n].mask.begin(), samples[n].mask.end(), t.sample(n).begin());
  }
  return t;
}

nn::Tensor class_tensor(const std::vector<ImageSample>& samples) {
  if (samples.empty()) throw ShapeError("class_tensor: no samples");
  nn::Tensor t({samples.size(), 1});
  for (std::size_t n = 0; n < samples.size(); ++n) t[n] = samples[n].class_label();
  return t;
}

// ---------------------------------------------------------------------------
// Persistence

namespace {

static_assert(std::endian::native == std::endian::little, "dataset I/O assumes a little-endian host");

ordered_json config_json(const GeneratorConfig& c) {
  return ordered_json{{"train", c.train},
                      {"validation", c.validation},
                      {"holdout", c.holdout},
                      {"height", c.height},
                      {"width", c.width},
                      {"channels", c.channels},
                      {"target_rate", c.target_rate},
                      {"radius_min", c.radius_min},
                      {"radius_max", c.radius_max},
                      {"contrast_min", c.contrast_min},
                      {"contrast_max", c.contrast_max},
                      {"background_min", c.background_min},
                      {"background_max", c.background_max},
                      {"texture_amplitude", c.texture_amplitude},
                      {"pixel_noise", c.pixel_noise},
                      {"artefact_rate", c.artefact_rate},
                      {"artefact_in_roi_rate", c.artefact_in_roi_rate},
                      {"artefact_kind_weights", c.artefact_kind_weights},
                      {"artefact_severity_min", c.artefact_severity_min},
                      {"artefact_severity_max", c.artefact_severity_max},
                      {"noise_sigma", c.strength.noise_sigma},
                      {"stripe_amplitude", c.strength.stripe_amplitude},
                      {"blur_radius", c.strength.blur_radius},
                      {"misalign_pixels", c.strength.misalign_pixels},
                      {"hard_rate", c.hard_rate},
                      {"low_contrast_share", c.low_contrast_share},
                      {"hard_severity_min", c.hard_severity_min},
                      {"hard_severity_max", c.hard_severity_max},
                      {"min_train", c.min_train},
                      {"seed", c.seed}};
}

GeneratorConfig config_from_json(const ordered_json& j) {
  GeneratorConfig c;
  c.train = j.at("train");
  c.validation = j.at("validation");
  c.holdout = j.at("holdout");
  c.height = j.at("height");
  c.width = j.at("width");
  c.channels = j.at("channels");
  c.target_rate = j.at("target_rate");
  c.radius_min = j.at("radius_min");
  c.radius_max = j.at("radius_max");
  c.contrast_min = j.at("contrast_min");
  c.contrast_max = j.at("contrast_max");
  c.background_min = j.at("background_min");
  c.background_max = j.at("background_max");
  c.texture_amplitude = j.at("texture_amplitude");
  c.pixel_noise = j.at("pixel_noise");
  c.artefact_rate = j.at("artefact_rate");
  c.artefact_in_roi_rate = j.at("artefact_in_roi_rate");
  c.artefact_kind_weights = j.at("artefact_kind_weights").get<std::vector<double>>();
  c.artefact_severity_min = j.at("artefact_severity_min");
  c.artefact_severity_max = j.at("artefact_severity_max");
  c.strength.noise_sigma = j.at("noise_sigma");
  c.strength.stripe_amplitude = j.at("stripe_amplitude");
  c.strength.blur_radius = j.at("blur_radius");
  c.strength.misalign_pixels = j.at("misalign_pixels");
  c.hard_rate = j.at("hard_rate");
  c.low_contrast_share = j.at("low_contrast_share");
  c.hard_severity_min = j.at("hard_severity_min");
  c.hard_severity_max = j.at("hard_severity_max");
  c.min_train = j.at("min_train");
  c.seed = j.at("seed");
  return c;
}

void write_f32(std::ostream& os, double v) {
  const float f = static_cast<float>(v);
  os.write(reinterpret_cast<const char*>(&f), sizeof f);
}

double read_f32(std::istream& is) {
  float f = 0;
  if (!is.read(reinterpret_cast<char*>(&f), sizeof f)) throw ArtifactError("truncated dataset blob");
  return static_cast<double>(f);
}

}  // namespace

void save_dataset(const fs::path& dir, const SplitDataset& data) {
  fs::create_directories(dir);
  const auto& c = data.config;
  ordered_json manifest;
  manifest["version"] = kDatasetVersion;
  manifest["seed"] = c.seed;
  manifest["config"] = config_json(c);
  manifest["raster_shape"] = {c.height, c.width, c.channels};
  manifest["label_shape"] = {c.height, c.width};
  manifest["samples"] = ordered_json::array();
  std::ofstream sb(dir / "samples.bin", std::ios::binary), lb(dir / "labels.bin", std::ios::binary);
  if (!sb || !lb) throw ArtifactError("cannot write dataset blobs in " + dir.string());
  const std::pair<const char*, const std::vector<ImageSample>*> splits[] = {
      {"train", &data.train}, {"validation", &data.validation}, {"holdout", &data.holdout}};
  for (const auto& [name, samples] : splits)
    for (const auto& s : *samples) {
      manifest["samples"].push_back({{"id", s.id},
                                     {"split", name},
                                     {"target_present", s.target_present},
                                     {"roi", {s.roi.y0, s.roi.x0, s.roi.y1, s.roi.x1}},
                                     {"artefact_flag", s.artefact_flag},
                                     {"artefact_kind", to_string(s.artefact_kind)},
                                     {"artefact_in_roi", s.artefact_in_roi},
                                     {"hard_flag", s.hard_flag},
                                     {"hard_kind", to_string(s.hard_kind)}});
      for (double v : s.raster.data) write_f32(sb, v);
      for (double v : s.mask) write_f32(lb, v);
    }
  std::ofstream js(dir / "manifest.json");
  if (!js) throw ArtifactError("cannot write " + (dir / "manifest.json").string());
  js << manifest.dump(1) << '\n';
}

SplitDataset load_dataset(const fs::path& dir) {
  std::ifstream js(dir / "manifest.json");
  if (!js) throw ArtifactError("missing dataset manifest in " + dir.string());
  SplitDataset data;
  try {
    const auto manifest = ordered_json::parse(js);
    if (manifest.value("version", "") != kDatasetVersion) throw ArtifactError("unsupported dataset version");
    data.config = config_from_json(manifest.at("config"));
    std::ifstream sb(dir / "samples.bin", std::ios::binary), lb(dir / "labels.bin", std::ios::binary);
    if (!sb || !lb) throw ArtifactError("missing dataset blobs in " + dir.string());
    const auto& c = data.config;
    for (const auto& m : manifest.at("samples")) {
      ImageSample s;
      s.id = m.at("id");
      s.target_present = m.at("target_present");
      const auto roi = m.at("roi").get<std::vector<std::size_t>>();
      s.roi = {roi.at(0), roi.at(1), roi.at(2), roi.at(3)};
      s.artefact_flag = m.at("artefact_flag");
      s.artefact_kind = artefact_kind_from_string(m.at("artefact_kind"));
      s.artefact_in_roi = m.at("artefact_in_roi");
      s.hard_flag = m.at("hard_flag");
      s.hard_kind = hard_kind_from_string(m.at("hard_kind"));
      s.raster = Raster(c.height, c.width, c.channels);
      for (auto& v : s.raster.data) v = read_f32(sb);
      s.mask.resize(c.height * c.width);
      for (auto& v : s.mask) v = read_f32(lb);
      const auto split = m.at("split").get<std::string>();
      if (split == "train") data.train.push_back(std::move(s));
      else if (split == "validation") data.validation.push_back(std::move(s));
      else if (split == "holdout") data.holdout.push_back(std::move(s));
      else throw ArtifactError("unknown split '" + split + "'");
    }
  } catch (const nlohmann::json::exception& e) {
    throw ArtifactError("malformed dataset manifest in " + dir.string() + ": " + e.what());
  }
  return data;
}

std::string dataset_checksum(const fs::path& dir) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (const char* name : {"samples.bin", "labels.bin"}) {
    std::ifstream in(dir / name, std::ios::binary);
    if (!in) throw ArtifactError("missing " + (dir / name).string());
    char buf[4096];
    while (in.read(buf, sizeof buf) || in.gcount() > 0) {
      for (std::streamsize i = 0; i < in.gcount(); ++i) {
        h ^= static_cast<unsigned char>(buf[i]);
        h *= 0x100000001b3ULL;
      }
      if (!in) break;
    }
  }
  std::ostringstream os;
  os << std::hex << h;
  return os.str();
}

}  // namespace amenable::synth
