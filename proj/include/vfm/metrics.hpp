#pragma once

#include <vector>

#include "vfm/field.hpp"
#include "vfm/lattice.hpp"

namespace vfm {

enum class Component { radial, angular };

/// Squared Pearson correlation between estimate and reference over masked
/// cells of one component. Affine maps of the estimate leave it unchanged; a
/// constant reference is an error, a constant estimate scores 0.
double squared_correlation(const VelocityField& est, const VelocityField& ref,
                           const BoolLattice& mask, Component component);

/// Vector RMS error over masked cells, normalized by the reference's maximum
/// speed over the same cells, as a percentage.
double nrmse_pct(const VelocityField& est, const VelocityField& ref,
                 const BoolLattice& mask);

enum class MadKind {
  median_ad,  // median absolute deviation (default; 1.4826 is its Gaussian factor)
  mean_ad,
};

struct RobustAggregate {
  double median = 0.0;
  double robust_std = 0.0;  // 1.4826 * MAD
};

RobustAggregate aggregate_robust(std::vector<double> values,
                                 MadKind kind = MadKind::median_ad);

/// Streaming Pearson correlation for pooled multi-frame statistics.
class PearsonAccumulator {
 public:
  void add(double x, double y);
  double r2() const;
  long count() const { return n_; }

 private:
  long n_ = 0;
  double sx_ = 0, sy_ = 0, sxx_ = 0, syy_ = 0, sxy_ = 0;
};

struct MetricsReport {
  double r2_vr = 0.0;
  double r2_vtheta = 0.0;
  double nrmse = 0.0;
};

MetricsReport frame_metrics(const VelocityField& est, const VelocityField& ref,
                            const BoolLattice& mask);

}  // namespace vfm
