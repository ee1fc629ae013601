#include "chestprog/phantom.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

namespace chestprog::synthio {
namespace {

enum Stream : std::uint64_t { kSubject = 0, kNoise = 1, kEmphysema = 2, kCalcium = 3 };

std::mt19937_64 stream_rng(std::uint64_t seed, std::uint64_t stream) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream), 0x5eedu};
  return std::mt19937_64(seq);
}

constexpr std::uint8_t kOutside = 0;
constexpr std::uint8_t kOther = 1;
constexpr std::uint8_t label_of(Anatomy a) { return static_cast<std::uint8_t>(2 + static_cast<int>(a)); }

double sq(double v) { return v * v; }

void check_range(double v, double lo, double hi, const char* name) {
  if (!(v >= lo && v <= hi)) {
    throw Error(ErrorCode::kInvalidArgument, std::string("phantom ") + name + " must lie in [" +
                                                 std::to_string(lo) + ", " + std::to_string(hi) + "]");
  }
}

}  // namespace

void validate(const PhantomSpec& spec) {
  if (spec.dims.x <= 0 || spec.dims.y <= 0 || spec.dims.z <= 0) {
    throw Error(ErrorCode::kInvalidArgument, "phantom dims must be positive");
  }
  check_range(spec.signatures.calcification_density, 0.0, 0.1, "calcification_density");
  check_range(spec.signatures.vertebral_hu_reduction, 0.0, 300.0, "vertebral_hu_reduction");
  check_range(spec.signatures.emphysema_fraction, 0.0, 0.9, "emphysema_fraction");
  check_range(spec.signatures.heart_enlargement, 1.0, 1.5, "heart_enlargement");
  check_range(spec.noise_sigma, 0.0, 200.0, "noise_sigma");
  if (spec.censor_days < 0) throw Error(ErrorCode::kInvalidArgument, "censor_days must be nonnegative");
}

StudyRecord generate_phantom(const PhantomSpec& spec) {
  validate(spec);
  const Dims d = spec.dims;
  const std::string id = spec.id.empty() ? "phantom-" + std::to_string(spec.seed) : spec.id;

  // Per-subject variability is drawn identically for case and control of the same seed.
  auto subject = stream_rng(spec.seed, kSubject);
  std::uniform_real_distribution<double> offset_dist(-10.0, 10.0);
  std::array<double, kAnatomyCount + 2> offsets{};
  for (auto& o : offsets) o = offset_dist(subject);
  const double body_scale = std::uniform_real_distribution<double>(0.95, 1.0)(subject);

  const double heart_scale = spec.case_flag ? std::cbrt(spec.signatures.heart_enlargement) : 1.0;
  const double hrx = 0.11 * heart_scale, hry = 0.09 * heart_scale, hrz = 0.30 * heart_scale;

  std::vector<std::uint8_t> labels(d.count(), kOutside);
  for (int k = 0; k < d.z; ++k) {
    const double w = (k + 0.5) / d.z;
    for (int j = 0; j < d.y; ++j) {
      const double v = (j + 0.5) / d.y;
      for (int i = 0; i < d.x; ++i) {
        const double u = (i + 0.5) / d.x;
        auto ellipse = [&](double cx, double cy, double rx, double ry) {
          return sq((u - cx) / rx) + sq((v - cy) / ry) <= 1.0;
        };
        std::uint8_t lab = kOutside;
        if (ellipse(0.5, 0.5, 0.45 * body_scale, 0.35 * body_scale)) {
          lab = label_of(Anatomy::kBodyFat);
          if (ellipse(0.5, 0.5, 0.41 * body_scale, 0.31 * body_scale)) lab = label_of(Anatomy::kMuscle);
          if (ellipse(0.5, 0.5, 0.37 * body_scale, 0.27 * body_scale)) lab = kOther;
          const double lung_z = sq((w - 0.5) / 0.45);
          if (sq((u - 0.32) / 0.12) + sq((v - 0.48) / 0.17) + lung_z <= 1.0 ||
              sq((u - 0.68) / 0.12) + sq((v - 0.48) / 0.17) + lung_z <= 1.0) {
            lab = label_of(Anatomy::kLungs);
          }
          const double hz = sq((w - 0.5) / hrz);
          if (sq((u - 0.5) / (hrx + 0.02)) + sq((v - 0.42) / (hry + 0.02)) +
                  sq((w - 0.5) / (hrz + 0.05)) <= 1.0) {
            lab = label_of(Anatomy::kEpicardialFat);
          }
          if (sq((u - 0.5) / hrx) + sq((v - 0.42) / hry) + hz <= 1.0) lab = label_of(Anatomy::kHeart);
          if (sq((u - 0.5) / 0.035) + sq((v - 0.58) / 0.035) <= 1.0) lab = label_of(Anatomy::kAorta);
          if (sq((u - 0.5) / 0.05) + sq((v - 0.72) / 0.05) <= 1.0) lab = label_of(Anatomy::kSpinalColumn);
        }
        labels[d.index(i, j, k)] = lab;
      }
    }
  }

  std::array<std::vector<std::uint8_t>, kAnatomyCount> bits;
  for (auto& b : bits) b.assign(d.count(), 0);
  for (std::size_t idx = 0; idx < labels.size(); ++idx) {
    if (labels[idx] >= 2) bits[labels[idx] - 2][idx] = 1;
  }
  for (std::size_t a = 0; a < kAnatomyCount; ++a) {
    if (std::find(bits[a].begin(), bits[a].end(), 1) == bits[a].end()) {
      throw Error(ErrorCode::kPhantomTooSmall, "dims " + to_string(d) + " leave no room for " +
                                                   std::string(to_string(static_cast<Anatomy>(a))));
    }
  }

  auto base_hu = [&](std::uint8_t lab) {
    switch (lab) {
      case kOutside: return TissueHu::kAir + offsets[0];
      case kOther: return TissueHu::kSoftTissue + offsets[1];
      default: break;
    }
    const double off = offsets[lab];
    switch (static_cast<Anatomy>(lab - 2)) {
      case Anatomy::kMuscle: return TissueHu::kMuscle + off;
      case Anatomy::kBodyFat: return TissueHu::kBodyFat + off;
      case Anatomy::kAorta: return TissueHu::kAorta + off;
      case Anatomy::kSpinalColumn: return TissueHu::kSpinalColumn + off;
      case Anatomy::kEpicardialFat: return TissueHu::kEpicardialFat + off;
      case Anatomy::kHeart: return TissueHu::kHeart + off;
      case Anatomy::kLungs: return TissueHu::kLungs + off;
    }
    return 0.0;
  };

  auto noise_rng = stream_rng(spec.seed, kNoise);
  std::normal_distribution<double> noise(0.0, 1.0);
  std::vector<double> hu(d.count());
  for (std::size_t idx = 0; idx < hu.size(); ++idx) {
    hu[idx] = base_hu(labels[idx]) + spec.noise_sigma * noise(noise_rng);
  }

  if (spec.case_flag) {
    const auto& sig = spec.signatures;
    const auto spine = label_of(Anatomy::kSpinalColumn);
    for (std::size_t idx = 0; idx < hu.size(); ++idx) {
      if (labels[idx] == spine) hu[idx] -= sig.vertebral_hu_reduction;
    }

    // Exact emphysema count: a seeded partial shuffle over lung voxels.
    std::vector<std::size_t> lung;
    for (std::size_t idx = 0; idx < labels.size(); ++idx) {
      if (labels[idx] == label_of(Anatomy::kLungs)) lung.push_back(idx);
    }
    auto emph_rng = stream_rng(spec.seed, kEmphysema);
    const auto n_emph = static_cast<std::size_t>(std::llround(sig.emphysema_fraction * lung.size()));
    std::uniform_real_distribution<double> emph_hu(-1024.0, -964.0);
    for (std::size_t t = 0; t < n_emph; ++t) {
      std::uniform_int_distribution<std::size_t> pick(t, lung.size() - 1);
      std::swap(lung[t], lung[pick(emph_rng)]);
      hu[lung[t]] = emph_hu(emph_rng);
    }

    auto calc_rng = stream_rng(spec.seed, kCalcium);
    std::uniform_real_distribution<double> calc_hu(450.0, 900.0);
    for (Anatomy a : {Anatomy::kAorta, Anatomy::kHeart}) {
      const auto lab = label_of(a);
      std::vector<std::size_t> voxels;
      for (std::size_t idx = 0; idx < labels.size(); ++idx) {
        if (labels[idx] == lab) voxels.push_back(idx);
      }
      const auto n_foci =
          static_cast<std::size_t>(std::llround(sig.calcification_density * voxels.size() / 4.0));
      std::uniform_int_distribution<std::size_t> pick(0, voxels.size() - 1);
      for (std::size_t f = 0; f < n_foci; ++f) {
        const std::size_t seed_idx = voxels[pick(calc_rng)];
        const int i = static_cast<int>(seed_idx % d.x);
        const int j = static_cast<int>((seed_idx / d.x) % d.y);
        const int k = static_cast<int>(seed_idx / (static_cast<std::size_t>(d.x) * d.y));
        const double peak = calc_hu(calc_rng);
        for (int dj = 0; dj < 2; ++dj) {
          for (int di = 0; di < 2; ++di) {
            if (!d.contains(i + di, j + dj, k)) continue;
            const auto idx = d.index(i + di, j + dj, k);
            if (labels[idx] == lab) hu[idx] = peak;
          }
        }
      }
    }
  }

  std::vector<std::int16_t> data(hu.size());
  for (std::size_t idx = 0; idx < hu.size(); ++idx) {
    data[idx] = static_cast<std::int16_t>(std::clamp<long>(std::lround(hu[idx]), -1024, 3071));
  }
  std::vector<AnatomyMask> masks;
  masks.reserve(kAnatomyCount);
  for (std::size_t a = 0; a < kAnatomyCount; ++a) {
    masks.emplace_back(static_cast<Anatomy>(a), d, std::move(bits[a]));
  }
  return StudyRecord(id, Volume(d, spec.spacing, std::move(data)), std::move(masks),
                     spec.case_flag ? 1 : 0, spec.censor_days, spec.match_group);
}

std::vector<PhantomSpec> signal_cohort(int n_pairs, Dims dims, std::uint64_t seed, Spacing spacing) {
  if (n_pairs < 0) throw Error(ErrorCode::kInvalidArgument, "n_pairs must be nonnegative");
  std::vector<PhantomSpec> specs;
  specs.reserve(static_cast<std::size_t>(n_pairs) * 2);
  for (int p = 0; p < n_pairs; ++p) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(p), 0xc0707u};
    std::mt19937_64 rng(seq);
    std::uniform_real_distribution<double> jitter(0.5, 1.5);
    std::uniform_int_distribution<std::int64_t> death_day(180, 1825);

    char buf[32];
    std::snprintf(buf, sizeof(buf), "pair%03d", p);
    PhantomSpec case_spec;
    case_spec.seed = rng();
    case_spec.dims = dims;
    case_spec.spacing = spacing;
    case_spec.case_flag = true;
    case_spec.signatures.calcification_density = 0.02 * jitter(rng);
    case_spec.signatures.vertebral_hu_reduction = 100.0 * jitter(rng);
    case_spec.signatures.emphysema_fraction = 0.2 * jitter(rng);
    case_spec.signatures.heart_enlargement = 1.0 + 0.2 * jitter(rng);
    case_spec.id = std::string(buf) + "_case";
    case_spec.match_group = p;
    case_spec.censor_days = death_day(rng);

    PhantomSpec control = case_spec;
    control.seed = rng();
    control.case_flag = false;
    control.id = std::string(buf) + "_control";
    control.censor_days = 1825;

    specs.push_back(case_spec);
    specs.push_back(control);
  }
  return specs;
}

}  // namespace chestprog::synthio
