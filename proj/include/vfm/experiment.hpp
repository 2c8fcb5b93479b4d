#pragma once

#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "vfm/ivfm.hpp"
#include "vfm/metrics.hpp"
#include "vfm/phantom.hpp"
#include "vfm/pinn.hpp"

namespace vfm {

/// Synthetic cine: a primary vortex whose amplitude follows a half-cycle
/// envelope (so no frame degenerates to zero flow) plus an optional weaker
/// second radial mode on a full cycle, which varies the flow structure over
/// the cine.
struct CineSpec {
  int frames = 10;
  PolarGrid grid;
  int margin = 2;
  double amplitude = 0.02;  // peak stream-function amplitude [m^2/s]
  double cycles = 0.5;
  bool second_mode = true;
  double snr_db = std::numeric_limits<double>::infinity();
  std::uint64_t seed = 0;
};

struct CineFrame {
  std::string id;
  DopplerFrame frame;
  VelocityField reference;
  BoundaryConditionSet bc;
};

StreamFunctionSpec cine_stream_spec(const CineSpec& spec, int frame_index);
std::vector<CineFrame> generate_cine(const CineSpec& spec);

/// Boundary conditions for a frame without an explicit wall-velocity source:
/// mask-derived normals, wall at rest.
BoundaryConditionSet frame_boundary(const DopplerFrame& frame);

struct ReconstructOptions {
  std::string method = "ivfm";  // ivfm | rb-pinn | al-pinn
  int iters = 2500;
  std::string pretrained;  // weight file for warm starts
  double lambda_s = 1e-6;
  std::uint64_t seed = 0;
  bool single_stage = false;
};

struct MethodResult {
  VelocityField field;
  double wall_clock_s = 0.0;
  nlohmann::json diagnostics = nlohmann::json::object();
};

MethodResult reconstruct_frame(const DopplerFrame& frame,
                               const BoundaryConditionSet& bc,
                               const ReconstructOptions& opts);

PinnConfig make_pinn_config(const ReconstructOptions& opts);

/// Runs fn(k) for k in [0, n) on `jobs` worker threads. Tasks must be
/// independent; results are whatever fn writes into caller-owned slots.
void parallel_for_index(int n, int jobs, const std::function<void(int)>& fn);

/// Intersection of the valid masks of several frames (the common region kept
/// by every degradation of a set).
BoolLattice common_valid_region(const std::vector<DopplerFrame>& frames);

// ---------------------------------------------------------------------------
// Experiment tables.
// ---------------------------------------------------------------------------

struct MetricsRow {
  std::string frame_id;
  std::string method;
  double r2_vr = 0.0;
  double r2_vtheta = 0.0;
  double nrmse_pct = 0.0;
};

std::string metrics_csv(const std::vector<MetricsRow>& rows);

struct AblationRow {
  bool pretrained = false;
  bool dual_stage = false;
  double r2_vr_pooled = 0.0;
  double r2_vtheta_pooled = 0.0;
  double median_nrmse = 0.0;
  double robust_std_nrmse = 0.0;
};

/// Table-style 2x2 sweep {pretrained?} x {dual-stage?} at a fixed iteration
/// budget; pretraining runs once on `reference_index` and is reused.
std::vector<AblationRow> run_ablation(const std::vector<CineFrame>& cine,
                                      int reference_index, int iters,
                                      std::uint64_t seed,
                                      const std::string& weights_path,
                                      int jobs = 1);

struct MethodSummary {
  std::string method;
  double r2_vr_pooled = 0.0;
  double r2_vtheta_pooled = 0.0;
  double median_nrmse = 0.0;
  double robust_std_nrmse = 0.0;
  double median_wall_clock_s = 0.0;
};

/// Pooled metrics of one method over a cine, restricted to `region` when
/// given (otherwise each frame's cavity).
MethodSummary summarize_method(const std::vector<CineFrame>& cine,
                               const std::vector<VelocityField>& estimates,
                               const std::vector<double>& wall_clocks,
                               const std::string& method,
                               const std::optional<BoolLattice>& region = {});

}  // namespace vfm
