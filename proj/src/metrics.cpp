#include "vfm/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace vfm {

namespace {

double median_inplace(std::vector<double>& v) {
  const size_t n = v.size();
  std::sort(v.begin(), v.end());
  return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

}  // namespace

double squared_correlation(const VelocityField& est, const VelocityField& ref,
                           const BoolLattice& mask, Component component) {
  const Lattice& e = component == Component::radial ? est.v_r : est.v_theta;
  const Lattice& r = component == Component::radial ? ref.v_r : ref.v_theta;
  if (e.rows() != mask.rows() || e.cols() != mask.cols() ||
      r.rows() != mask.rows() || r.cols() != mask.cols())
    throw std::invalid_argument("squared_correlation: shape mismatch");

  PearsonAccumulator acc;
  for (Eigen::Index i = 0; i < mask.rows(); ++i)
    for (Eigen::Index j = 0; j < mask.cols(); ++j)
      if (mask(i, j)) acc.add(e(i, j), r(i, j));
  if (acc.count() < 2)
    throw std::invalid_argument("squared_correlation: need at least 2 masked samples");
  return acc.r2();
}

void PearsonAccumulator::add(double x, double y) {
  ++n_;
  sx_ += x;
  sy_ += y;
  sxx_ += x * x;
  syy_ += y * y;
  sxy_ += x * y;
}

double PearsonAccumulator::r2() const {
  const double n = static_cast<double>(n_);
  const double cov = sxy_ - sx_ * sy_ / n;
  const double var_x = sxx_ - sx_ * sx_ / n;
  const double var_y = syy_ - sy_ * sy_ / n;
  if (var_y <= 0.0)
    throw std::invalid_argument("correlation undefined: constant reference");
  if (var_x <= 0.0) return 0.0;  // constant estimate carries no signal
  const double r = cov / std::sqrt(var_x * var_y);
  return r * r;
}

double nrmse_pct(const VelocityField& est, const VelocityField& ref,
                 const BoolLattice& mask) {
  double max_speed_sq = 0.0, err_sq = 0.0;
  long n = 0;
  for (Eigen::Index i = 0; i < mask.rows(); ++i)
    for (Eigen::Index j = 0; j < mask.cols(); ++j) {
      if (!mask(i, j)) continue;
      const double sr = ref.v_r(i, j), st = ref.v_theta(i, j);
      max_speed_sq = std::max(max_speed_sq, sr * sr + st * st);
      const double dr = est.v_r(i, j) - sr;
      const double dt = est.v_theta(i, j) - st;
      err_sq += dr * dr + dt * dt;
      ++n;
    }
  if (n == 0) throw std::invalid_argument("nrmse: empty mask");
  if (max_speed_sq <= 0.0)
    throw std::invalid_argument("nrmse: reference has zero maximum speed");
  return 100.0 * std::sqrt(err_sq / n) / std::sqrt(max_speed_sq);
}

RobustAggregate aggregate_robust(std::vector<double> values, MadKind kind) {
  if (values.empty()) throw std::invalid_argument("aggregate_robust: empty list");
  RobustAggregate out;
  out.median = median_inplace(values);
  std::vector<double> dev(values.size());
  for (size_t k = 0; k < values.size(); ++k)
    dev[k] = std::abs(values[k] - out.median);
  double mad;
  if (kind == MadKind::median_ad) {
    mad = median_inplace(dev);
  } else {
    mad = 0.0;
    for (double d : dev) mad += d;
    mad /= static_cast<double>(dev.size());
  }
  out.robust_std = 1.4826 * mad;
  return out;
}

MetricsReport frame_metrics(const VelocityField& est, const VelocityField& ref,
                            const BoolLattice& mask) {
  return MetricsReport{squared_correlation(est, ref, mask, Component::radial),
                       squared_correlation(est, ref, mask, Component::angular),
                       nrmse_pct(est, ref, mask)};
}

}  // namespace vfm
