#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Core>
#include <Eigen/SparseCore>

#include "vfm/mlp.hpp"
#include "vfm/optim.hpp"
#include "vfm/phantom.hpp"
#include "vfm/physics.hpp"
#include "vfm/tape.hpp"

namespace vfm {

/// Per-frame affine input map (cavity bounding box -> [-1, 1]^2) and output
/// velocity scale (max |v_d| over the valid cavity). The network operates in
/// normalized space; losses are assembled in physical units via these maps.
struct Normalization {
  double r_min = 0.0, r_max = 1.0;
  double theta_min = 0.0, theta_max = 1.0;
  double v_scale = 1.0;

  double xr(double r) const { return 2.0 * (r - r_min) / (r_max - r_min) - 1.0; }
  double xt(double theta) const {
    return 2.0 * (theta - theta_min) / (theta_max - theta_min) - 1.0;
  }
  double dxr_dr() const { return 2.0 / (r_max - r_min); }
  double dxt_dtheta() const { return 2.0 / (theta_max - theta_min); }
};

Normalization make_normalization(const DopplerFrame& frame);

struct PinnConfig {
  double mu4 = 3.162277660168379e-08;  // 10^-7.5
  HuberConfig huber{1.0};
  optim::DualStageConfig dual_stage;
  double eta_lambda = 1e-5;  // multiplier ascent rate
  double eta_mu = 1e-5;      // penalty ascent rate
  std::string init_weights;  // optional pre-optimized weight file
  std::uint64_t seed = 0;
  bool single_stage = false;  // first-order stage only, full iteration budget

  // Loss-balancing constants.
  double rb_alpha = 0.999;
  double rb_rho_expectation = 0.999;
  double rb_temperature = 1.0;
  double rb_eps = 1e-12;
};

/// Everything fixed per solve: collocation batch over all cavity cells,
/// data/boundary gathers, the smoothing operator, and the normalization.
struct PinnProblem {
  PolarGrid grid;
  CellIndexMap cavity;
  Eigen::MatrixXd inputs;  // 2xN normalized coordinates, one column per cavity cell
  Eigen::RowVectorXd radius_row;

  std::vector<int> valid_cols;
  Eigen::RowVectorXd vd_valid;
  Eigen::RowVectorXd w_valid;

  std::vector<int> bc_cols;
  Eigen::RowVectorXd bc_normal_r, bc_normal_theta;
  Eigen::RowVectorXd bc_wall_v_r, bc_wall_v_theta;

  Eigen::SparseMatrix<double> smooth;
  Normalization norm;
  HuberConfig huber;
  double mu4 = 0.0;

  int n_collocation() const { return static_cast<int>(inputs.cols()); }
  int n_boundary() const { return static_cast<int>(bc_cols.size()); }
};

PinnProblem build_pinn_problem(const DopplerFrame& frame,
                               const BoundaryConditionSet& bc,
                               const PinnConfig& cfg);

/// Physical-unit evaluation rows on the tape (all 1xN over the batch).
struct FieldRows {
  ad::Tape::NodeId v_r = -1;
  ad::Tape::NodeId v_theta = -1;
  ad::Tape::NodeId dvr_dr = -1;
  ad::Tape::NodeId dvtheta_dtheta = -1;
};

FieldRows physical_rows(ad::Tape& tape, const TapeNet& net,
                        const PinnProblem& problem);

struct LossNodes {
  ad::Tape::NodeId l1 = -1;
  ad::Tape::NodeId l2 = -1;
  ad::Tape::NodeId l3 = -1;
  ad::Tape::NodeId l4 = -1;
  ad::Tape::NodeId c1_vec = -1;  // raw residuals over collocation points
  ad::Tape::NodeId c2_vec = -1;  // raw residuals over boundary samples
};

/// L1 = sum_valid w huber(v_r - v_d); L2 = sum_cavity huber(C1) from the
/// derivative rows; L3 = sum_boundary huber(C2); L4 = |S v_r|^2 + |S v_t|^2
/// with the finite-difference smoothing operator.
LossNodes assemble_losses_from_rows(ad::Tape& tape, const FieldRows& rows,
                                    const PinnProblem& problem);
LossNodes assemble_losses(ad::Tape& tape, const TapeNet& net,
                          const PinnProblem& problem);

/// Unweighted loss values at fixed parameters (no optimization).
LossBreakdown pinn_loss_breakdown(const MlpParams& params,
                                  const DopplerFrame& frame,
                                  const BoundaryConditionSet& bc,
                                  const PinnConfig& cfg);

// ---------------------------------------------------------------------------
// Relative loss balancing with random lookback.
// ---------------------------------------------------------------------------

struct RbState {
  Eigen::Vector3d mu = Eigen::Vector3d::Ones();
  Eigen::Vector3d loss_first = Eigen::Vector3d::Zero();
  Eigen::Vector3d loss_prev = Eigen::Vector3d::Zero();
  double alpha = 0.999;
  double rho_expectation = 0.999;
  double temperature = 1.0;
  double eps = 1e-12;
  std::mt19937_64 rng{0};
  int iter = 0;

  static RbState init(const PinnConfig& cfg);
};

/// n_loss * softmax of losses / (T * reference + eps), elementwise over the
/// three balanced losses.
Eigen::Vector3d rb_balance_weights(const Eigen::Vector3d& losses,
                                   const Eigen::Vector3d& reference,
                                   double temperature, double eps);

/// Feeds the unweighted (L1, L2, L3) of the current iteration; from the
/// second call on, mu is updated with the exponential-decay / random-lookback
/// rule. The first call only records the baseline.
void rb_step(RbState& state, const Eigen::Vector3d& losses);

// ---------------------------------------------------------------------------
// Augmented-Lagrangian multipliers.
// ---------------------------------------------------------------------------

struct AlState {
  Eigen::VectorXd lambda1;  // over collocation points
  Eigen::VectorXd lambda2;  // over boundary samples
  double mu = 2.0;
  double eta_lambda = 1e-5;
  double eta_mu = 1e-5;
  // Running residual sums; multipliers are eta_lambda times these, kept
  // explicitly so lambda after k steps is exactly eta_lambda * sum of
  // residual vectors.
  Eigen::VectorXd c1_sum;
  Eigen::VectorXd c2_sum;

  static AlState init(int n_collocation, int n_boundary, const PinnConfig& cfg);
};

/// Ascent update from the current iteration's raw residual vectors and huber
/// penalty losses: lambda_j += eta_lambda * C_j, mu += eta_mu * 0.5 (L2 + L3).
void al_step(AlState& state, const Eigen::VectorXd& c1,
             const Eigen::VectorXd& c2, double l2, double l3);

// ---------------------------------------------------------------------------
// Solvers.
// ---------------------------------------------------------------------------

struct SolveDiagnostics {
  std::vector<double> loss_history;
  int stage1_iters = 0;
  int stage2_steps = 0;
  LossBreakdown final_losses;  // unweighted
  double final_total = 0.0;
  Eigen::Vector3d final_mu = Eigen::Vector3d::Ones();  // adaptive loss weights
  double final_penalty_mu = 0.0;                       // AL penalty coefficient
  Eigen::VectorXd lambda1;
  Eigen::VectorXd lambda2;
  Eigen::VectorXd c1_iteration_sum;
  double wall_clock_s = 0.0;
};

struct PinnSolution {
  VelocityField field;  // grid predictions, zero outside the cavity
  MlpParams params;
  SolveDiagnostics diag;
};

PinnSolution rb_pinn_solve(const DopplerFrame& frame,
                           const BoundaryConditionSet& bc,
                           const PinnConfig& cfg);
PinnSolution al_pinn_solve(const DopplerFrame& frame,
                           const BoundaryConditionSet& bc,
                           const PinnConfig& cfg);

/// Full-budget solve from random initialization; saves the resulting
/// parameters (plus normalization metadata) for warm-starting later solves.
void pretrain_reference(const DopplerFrame& frame, const BoundaryConditionSet& bc,
                        const PinnConfig& cfg, const std::string& out_path);

}  // namespace vfm
