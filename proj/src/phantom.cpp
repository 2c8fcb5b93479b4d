#include "vfm/phantom.hpp"

#include <cmath>
#include <limits>
#include <random>
#include <stdexcept>

namespace vfm {
namespace {

constexpr double kPi = 3.14159265358979323846;

double uniform01(std::mt19937_64& rng) {
  // 53-bit mantissa draw in [0, 1); avoids distribution-object portability gaps
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

/// Box-Muller standard normal; consumes two uniforms per pair.
class NormalDraw {
 public:
  explicit NormalDraw(std::uint64_t seed) : rng_(seed) {}

  double next() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    double u1 = uniform01(rng_);
    while (u1 <= 0.0) u1 = uniform01(rng_);
    const double u2 = uniform01(rng_);
    const double mag = std::sqrt(-2.0 * std::log(u1));
    spare_ = mag * std::sin(2.0 * kPi * u2);
    have_spare_ = true;
    return mag * std::cos(2.0 * kPi * u2);
  }

 private:
  std::mt19937_64 rng_;
  bool have_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace

CavityBox cavity_bounding_box(const Segmentation& seg, const PolarGrid& grid) {
  validate_segmentation(seg, grid);
  int i_min = grid.n_r, i_max = -1, j_min = grid.n_theta, j_max = -1;
  for (int i = 0; i < grid.n_r; ++i)
    for (int j = 0; j < grid.n_theta; ++j)
      if (seg.mask(i, j)) {
        i_min = std::min(i_min, i);
        i_max = std::max(i_max, i);
        j_min = std::min(j_min, j);
        j_max = std::max(j_max, j);
      }
  return CavityBox{grid.radius(i_min), grid.radius(i_max), grid.angle(j_min),
                   grid.angle(j_max)};
}

StreamField::StreamField(StreamFunctionSpec spec, CavityBox box)
    : spec_(std::move(spec)), box_(box) {
  const double r_span = box_.r_max - box_.r_min;
  const double t_span = box_.theta_max - box_.theta_min;
  if (!(r_span > 0.0) || !(t_span > 0.0))
    throw std::invalid_argument("StreamField: cavity bounding box has no extent");
  kr_scale_ = kPi / r_span;
  kt_scale_ = kPi / t_span;
}

double StreamField::psi(double r, double theta) const {
  double s = 0.0;
  for (const auto& t : spec_.terms)
    s += t.amplitude * std::sin(t.mode_r * kr_scale_ * (r - box_.r_min)) *
         std::sin(t.mode_theta * kt_scale_ * (theta - box_.theta_min));
  return s;
}

double StreamField::v_r(double r, double theta) const {
  // (1/r) dpsi/dtheta
  double s = 0.0;
  for (const auto& t : spec_.terms) {
    const double kt = t.mode_theta * kt_scale_;
    s += t.amplitude * std::sin(t.mode_r * kr_scale_ * (r - box_.r_min)) * kt *
         std::cos(kt * (theta - box_.theta_min));
  }
  return s / r;
}

double StreamField::v_theta(double r, double theta) const {
  // -dpsi/dr
  double s = 0.0;
  for (const auto& t : spec_.terms) {
    const double kr = t.mode_r * kr_scale_;
    s += t.amplitude * kr * std::cos(kr * (r - box_.r_min)) *
         std::sin(t.mode_theta * kt_scale_ * (theta - box_.theta_min));
  }
  return -s;
}

double StreamField::dvr_dr(double r, double theta) const {
  // d/dr [ (1/r) dpsi/dtheta ] = (1/r) d2psi/drdtheta - (1/r^2) dpsi/dtheta
  double mixed = 0.0, dtheta_part = 0.0;
  for (const auto& t : spec_.terms) {
    const double kr = t.mode_r * kr_scale_;
    const double kt = t.mode_theta * kt_scale_;
    const double ct = kt * std::cos(kt * (theta - box_.theta_min));
    mixed += t.amplitude * kr * std::cos(kr * (r - box_.r_min)) * ct;
    dtheta_part += t.amplitude * std::sin(kr * (r - box_.r_min)) * ct;
  }
  return mixed / r - dtheta_part / (r * r);
}

double StreamField::dvtheta_dtheta(double r, double theta) const {
  // -d2psi/drdtheta
  double s = 0.0;
  for (const auto& t : spec_.terms) {
    const double kr = t.mode_r * kr_scale_;
    const double kt = t.mode_theta * kt_scale_;
    s += t.amplitude * kr * std::cos(kr * (r - box_.r_min)) * kt *
         std::cos(kt * (theta - box_.theta_min));
  }
  return -s;
}

VelocityField stream_function_field(const StreamFunctionSpec& spec,
                                    const PolarGrid& grid,
                                    const Segmentation& seg) {
  const StreamField f(spec, cavity_bounding_box(seg, grid));
  VelocityField out = VelocityField::zero(grid.n_r, grid.n_theta);
  for (int i = 0; i < grid.n_r; ++i)
    for (int j = 0; j < grid.n_theta; ++j)
      if (seg.mask(i, j)) {
        out.v_r(i, j) = f.v_r(grid.radius(i), grid.angle(j));
        out.v_theta(i, j) = f.v_theta(grid.radius(i), grid.angle(j));
      }
  return out;
}

void DopplerFrame::validate() const {
  if (v_d.rows() != grid.n_r || v_d.cols() != grid.n_theta ||
      weights.rows() != grid.n_r || weights.cols() != grid.n_theta ||
      valid.rows() != grid.n_r || valid.cols() != grid.n_theta)
    throw std::invalid_argument("DopplerFrame: lattice shapes do not match grid");
  validate_segmentation(seg, grid);
  for (int i = 0; i < grid.n_r; ++i)
    for (int j = 0; j < grid.n_theta; ++j) {
      if (valid(i, j) && !seg.mask(i, j))
        throw std::invalid_argument("DopplerFrame: valid cell outside the cavity");
      if (valid(i, j) && !std::isfinite(v_d(i, j)))
        throw std::invalid_argument("DopplerFrame: non-finite Doppler value at a valid cell");
      if (weights(i, j) < 0.0 || weights(i, j) > 1.0)
        throw std::invalid_argument("DopplerFrame: weight outside [0, 1]");
    }
}

DopplerFrame synthesize_doppler(const VelocityField& field,
                                const Segmentation& seg, const PolarGrid& grid,
                                double snr_db, std::uint64_t seed) {
  validate_segmentation(seg, grid);
  if (!field.all_finite())
    throw std::invalid_argument("synthesize_doppler: non-finite velocity field");

  DopplerFrame frame;
  frame.grid = grid;
  frame.seg = seg;
  frame.v_d = Lattice::Zero(grid.n_r, grid.n_theta);
  frame.weights = Lattice::Zero(grid.n_r, grid.n_theta);
  frame.valid = seg.mask;

  double sum_sq = 0.0;
  int count = 0;
  for (int i = 0; i < grid.n_r; ++i)
    for (int j = 0; j < grid.n_theta; ++j)
      if (seg.mask(i, j)) {
        sum_sq += field.v_r(i, j) * field.v_r(i, j);
        ++count;
      }
  const double rms = std::sqrt(sum_sq / count);
  const double sigma = std::isinf(snr_db) ? 0.0 : rms * std::pow(10.0, -snr_db / 20.0);

  NormalDraw noise(seed);
  for (int i = 0; i < grid.n_r; ++i)
    for (int j = 0; j < grid.n_theta; ++j)
      if (seg.mask(i, j)) {
        frame.v_d(i, j) = field.v_r(i, j) + (sigma > 0.0 ? sigma * noise.next() : 0.0);
        frame.weights(i, j) = 1.0;
      }
  return frame;
}

Lattice radial_power_weights(const PolarGrid& grid, const Segmentation& seg) {
  Lattice w = Lattice::Zero(grid.n_r, grid.n_theta);
  const double r_far = grid.radius(grid.n_r - 1);
  for (int i = 0; i < grid.n_r; ++i)
    for (int j = 0; j < grid.n_theta; ++j)
      if (seg.mask(i, j)) w(i, j) = 0.25 + 0.75 * (1.0 - grid.radius(i) / (2.0 * r_far));
  return w;
}

void DegradeSpec::validate() const {
  if (mode == DegradeMode::truncate) {
    if (pct < 0.0 || pct >= 100.0)
      throw std::invalid_argument("DegradeSpec: pct must lie in [0, 100)");
  } else {
    if (m <= 0 || n < 0 || n >= m)
      throw std::invalid_argument("DegradeSpec: sparse modes need 0 <= n < m");
  }
}

DopplerFrame degrade(const DopplerFrame& frame, const DegradeSpec& spec) {
  spec.validate();
  frame.validate();
  const int n_theta = frame.grid.n_theta;
  std::vector<bool> keep(n_theta, true);

  switch (spec.mode) {
    case DegradeMode::sparse_deterministic: {
      const int center = n_theta / 2;
      for (int j = 0; j < n_theta; ++j) {
        const int phase = std::abs(j - center) % spec.m;
        keep[j] = (phase == 0) || (phase > spec.n);
      }
      break;
    }
    case DegradeMode::sparse_random: {
      std::mt19937_64 rng(spec.seed);
      for (int g0 = 0; g0 < n_theta; g0 += spec.m) {
        const int g_len = std::min(spec.m, n_theta - g0);
        const int n_max = std::min(spec.n, g_len);
        const int block = static_cast<int>(rng() % static_cast<std::uint64_t>(n_max + 1));
        const int offset =
            static_cast<int>(rng() % static_cast<std::uint64_t>(g_len - block + 1));
        for (int j = g0 + offset; j < g0 + offset + block; ++j) keep[j] = false;
      }
      break;
    }
    case DegradeMode::truncate: {
      const int removed = static_cast<int>(std::ceil(spec.pct / 100.0 * n_theta));
      const int left = removed / 2;
      const int right = removed - left;
      for (int j = 0; j < left; ++j) keep[j] = false;
      for (int j = n_theta - right; j < n_theta; ++j) keep[j] = false;
      break;
    }
  }

  DopplerFrame out = frame;
  for (int j = 0; j < n_theta; ++j) {
    if (keep[j]) continue;
    for (int i = 0; i < frame.grid.n_r; ++i)
      if (out.valid(i, j)) {
        out.valid(i, j) = false;
        out.weights(i, j) = 0.0;
      }
  }
  return out;
}

}  // namespace vfm
