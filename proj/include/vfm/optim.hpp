#pragma once

#include <deque>
#include <functional>
#include <vector>

#include <Eigen/Core>

namespace vfm::optim {

using Closure = std::function<double(const Eigen::VectorXd& params,
                                     Eigen::VectorXd& grad_out)>;

struct AdamWConfig {
  double lr = 1e-5;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 1e-2;

  void validate() const;
};

struct AdamWState {
  Eigen::VectorXd m;
  Eigen::VectorXd v;
  long t = 0;

  static AdamWState init(Eigen::Index n) {
    return {Eigen::VectorXd::Zero(n), Eigen::VectorXd::Zero(n), 0};
  }
};

/// One bias-corrected AdamW update with decoupled weight decay. Throws on a
/// non-finite gradient, leaving state and params untouched for diagnosis.
void adamw_step(AdamWState& state, Eigen::VectorXd& params,
                const Eigen::VectorXd& grads, const AdamWConfig& cfg);

struct LbfgsConfig {
  int max_iter_per_step = 10;
  int history_size = 10;
  double wolfe_c1 = 1e-4;
  double wolfe_c2 = 0.9;
  double tol_grad = 1e-9;
  double tol_change = 1e-11;
  int max_line_search_evals = 25;

  void validate() const;
};

struct WolfeRecord {
  double f0;      // loss at the step origin
  double g0p;     // directional derivative at origin
  double alpha;   // accepted step length
  double f1;      // loss at the accepted point
  double g1p;     // directional derivative at the accepted point
};

/// Two-loop-recursion L-BFGS with a strong-Wolfe cubic-interpolation line
/// search. State (curvature pairs, cached gradient) persists across step()
/// calls so a chunked schedule behaves like one continuous run.
class Lbfgs {
 public:
  explicit Lbfgs(LbfgsConfig cfg);

  /// Runs up to max_iter_per_step iterations; stops early on tol_grad /
  /// tol_change or line-search failure. Guarantees the returned params never
  /// have a higher loss than the entry point. Returns the final loss.
  double step(const Closure& closure, Eigen::VectorXd& params);

  bool converged() const { return converged_; }
  void enable_wolfe_trace(bool on) { trace_enabled_ = on; }
  const std::vector<WolfeRecord>& wolfe_trace() const { return trace_; }

 private:
  Eigen::VectorXd search_direction(const Eigen::VectorXd& grad) const;

  LbfgsConfig cfg_;
  std::deque<Eigen::VectorXd> s_hist_;
  std::deque<Eigen::VectorXd> y_hist_;
  std::deque<double> rho_hist_;
  Eigen::VectorXd grad_;
  double f_ = 0.0;
  bool have_state_ = false;
  bool converged_ = false;
  bool first_direction_ = true;
  bool trace_enabled_ = false;
  std::vector<WolfeRecord> trace_;
};

/// Fresh-state convenience wrapper: one optimization step from scratch.
Eigen::VectorXd lbfgs_minimize(const Closure& closure, Eigen::VectorXd params,
                               const LbfgsConfig& cfg);

struct DualStageConfig {
  int total_iters = 2500;
  double stage_split = 0.9;  // fraction of iterations handled by AdamW
  AdamWConfig adamw;
  LbfgsConfig lbfgs;

  void validate() const;
  int stage1_iters() const;
  int stage2_steps() const;
};

struct DualStageResult {
  Eigen::VectorXd params;
  std::vector<double> loss_history;  // stage-1 per iteration, stage-2 per step
  int stage1_iters = 0;
  int stage2_steps = 0;
};

/// First-order stage then quasi-Newton fine-tuning. stage1 is invoked exactly
/// once per AdamW iteration (solvers hook their per-iteration bookkeeping,
/// e.g. loss-weight updates, inside it); stage2 must be a deterministic
/// frozen-weight closure since the line search re-evaluates it freely.
DualStageResult dual_stage_optimize(const Closure& stage1, const Closure& stage2,
                                    Eigen::VectorXd params,
                                    const DualStageConfig& cfg);

}  // namespace vfm::optim
