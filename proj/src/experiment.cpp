#include "vfm/experiment.hpp"

#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <mutex>
#include <sstream>
#include <stdexcept>
#include <thread>

namespace vfm {

namespace {
constexpr double kPi = 3.14159265358979323846;
}

StreamFunctionSpec cine_stream_spec(const CineSpec& spec, int frame_index) {
  const double t = (frame_index + 0.5) / spec.frames;
  StreamFunctionSpec s;
  s.terms.push_back({spec.amplitude * std::sin(2.0 * kPi * spec.cycles * t), 1, 1});
  if (spec.second_mode)
    s.terms.push_back({0.2 * spec.amplitude * std::sin(2.0 * kPi * t), 2, 1});
  return s;
}

std::vector<CineFrame> generate_cine(const CineSpec& spec) {
  if (spec.frames < 1)
    throw std::invalid_argument("generate_cine: need at least one frame");
  const Segmentation seg = sector_segmentation(spec.grid, spec.margin);
  std::vector<CineFrame> cine;
  cine.reserve(spec.frames);
  for (int k = 0; k < spec.frames; ++k) {
    CineFrame cf;
    char id[32];
    std::snprintf(id, sizeof(id), "frame_%04d", k);
    cf.id = id;
    cf.reference = stream_function_field(cine_stream_spec(spec, k), spec.grid, seg);
    cf.frame = synthesize_doppler(cf.reference, seg, spec.grid, spec.snr_db,
                                  spec.seed + static_cast<std::uint64_t>(k));
    cf.bc = extract_boundary(seg, spec.grid, nullptr);
    cine.push_back(std::move(cf));
  }
  return cine;
}

BoundaryConditionSet frame_boundary(const DopplerFrame& frame) {
  return extract_boundary(frame.seg, frame.grid, nullptr);
}

PinnConfig make_pinn_config(const ReconstructOptions& opts) {
  PinnConfig cfg;
  cfg.dual_stage.total_iters = opts.iters;
  cfg.init_weights = opts.pretrained;
  cfg.seed = opts.seed;
  cfg.single_stage = opts.single_stage;
  return cfg;
}

namespace {

nlohmann::json pinn_diagnostics(const PinnSolution& sol, bool relobralo) {
  nlohmann::json d;
  d["loss_history"] = sol.diag.loss_history;
  d["stage1_iters"] = sol.diag.stage1_iters;
  d["stage2_steps"] = sol.diag.stage2_steps;
  d["final_losses"] = {{"l1", sol.diag.final_losses.l1},
                       {"l2", sol.diag.final_losses.l2},
                       {"l3", sol.diag.final_losses.l3},
                       {"l4", sol.diag.final_losses.l4}};
  d["final_total"] = sol.diag.final_total;
  if (relobralo) {
    d["mu"] = {sol.diag.final_mu(0), sol.diag.final_mu(1), sol.diag.final_mu(2)};
  } else {
    d["mu"] = sol.diag.final_penalty_mu;
    d["lambda1_linf"] = sol.diag.lambda1.size()
                            ? sol.diag.lambda1.lpNorm<Eigen::Infinity>()
                            : 0.0;
    d["lambda2_linf"] = sol.diag.lambda2.size()
                            ? sol.diag.lambda2.lpNorm<Eigen::Infinity>()
                            : 0.0;
  }
  d["wall_clock_s"] = sol.diag.wall_clock_s;
  return d;
}

}  // namespace

MethodResult reconstruct_frame(const DopplerFrame& frame,
                               const BoundaryConditionSet& bc,
                               const ReconstructOptions& opts) {
  MethodResult out;
  if (opts.method == "ivfm") {
    const auto t0 = std::chrono::steady_clock::now();
    const IvfmSolution sol = ivfm_solve(frame, bc, opts.lambda_s);
    out.wall_clock_s =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    out.field = sol.field;
    out.diagnostics["constraint_residual_inf"] = sol.constraint_residual_inf;
    out.diagnostics["fallback_used"] = sol.fallback_used;
    out.diagnostics["lambda_s"] = opts.lambda_s;
    out.diagnostics["wall_clock_s"] = out.wall_clock_s;
  } else if (opts.method == "rb-pinn" || opts.method == "al-pinn") {
    const PinnConfig cfg = make_pinn_config(opts);
    const bool rb = opts.method == "rb-pinn";
    const PinnSolution sol =
        rb ? rb_pinn_solve(frame, bc, cfg) : al_pinn_solve(frame, bc, cfg);
    out.field = sol.field;
    out.wall_clock_s = sol.diag.wall_clock_s;
    out.diagnostics = pinn_diagnostics(sol, rb);
  } else {
    throw std::invalid_argument("unknown method: " + opts.method);
  }
  return out;
}

void parallel_for_index(int n, int jobs, const std::function<void(int)>& fn) {
  jobs = std::max(1, std::min(jobs, n));
  if (jobs == 1) {
    for (int k = 0; k < n; ++k) fn(k);
    return;
  }
  std::atomic<int> next{0};
  std::vector<std::thread> pool;
  std::exception_ptr error;
  std::mutex error_mutex;
  for (int w = 0; w < jobs; ++w) {
    pool.emplace_back([&] {
      for (int k = next.fetch_add(1); k < n; k = next.fetch_add(1)) {
        try {
          fn(k);
        } catch (...) {
          std::lock_guard<std::mutex> lock(error_mutex);
          if (!error) error = std::current_exception();
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  if (error) std::rethrow_exception(error);
}

BoolLattice common_valid_region(const std::vector<DopplerFrame>& frames) {
  if (frames.empty())
    throw std::invalid_argument("common_valid_region: no frames");
  BoolLattice region = frames.front().valid;
  for (const auto& f : frames) {
    if (f.valid.rows() != region.rows() || f.valid.cols() != region.cols())
      throw std::invalid_argument("common_valid_region: shape mismatch");
    region = region && f.valid;
  }
  return region;
}

std::string metrics_csv(const std::vector<MetricsRow>& rows) {
  std::ostringstream out;
  out << "frame_id,method,r2_vr,r2_vtheta,nrmse_pct\n";
  out.precision(12);
  for (const auto& r : rows)
    out << r.frame_id << ',' << r.method << ',' << r.r2_vr << ',' << r.r2_vtheta
        << ',' << r.nrmse_pct << '\n';
  return out.str();
}

MethodSummary summarize_method(const std::vector<CineFrame>& cine,
                               const std::vector<VelocityField>& estimates,
                               const std::vector<double>& wall_clocks,
                               const std::string& method,
                               const std::optional<BoolLattice>& region) {
  if (cine.size() != estimates.size())
    throw std::invalid_argument("summarize_method: estimate count mismatch");
  MethodSummary s;
  s.method = method;
  PearsonAccumulator acc_r, acc_t;
  std::vector<double> nrmses;
  for (size_t k = 0; k < cine.size(); ++k) {
    const BoolLattice mask = region ? (*region && cine[k].frame.seg.mask)
                                    : cine[k].frame.seg.mask;
    for (Eigen::Index i = 0; i < mask.rows(); ++i)
      for (Eigen::Index j = 0; j < mask.cols(); ++j)
        if (mask(i, j)) {
          acc_r.add(estimates[k].v_r(i, j), cine[k].reference.v_r(i, j));
          acc_t.add(estimates[k].v_theta(i, j), cine[k].reference.v_theta(i, j));
        }
    nrmses.push_back(nrmse_pct(estimates[k], cine[k].reference, mask));
  }
  s.r2_vr_pooled = acc_r.r2();
  s.r2_vtheta_pooled = acc_t.r2();
  const RobustAggregate agg = aggregate_robust(nrmses);
  s.median_nrmse = agg.median;
  s.robust_std_nrmse = agg.robust_std;
  if (!wall_clocks.empty())
    s.median_wall_clock_s = aggregate_robust(wall_clocks).median;
  return s;
}

std::vector<AblationRow> run_ablation(const std::vector<CineFrame>& cine,
                                      int reference_index, int iters,
                                      std::uint64_t seed,
                                      const std::string& weights_path, int jobs) {
  if (cine.empty()) throw std::invalid_argument("run_ablation: empty cine");
  if (reference_index < 0 || reference_index >= static_cast<int>(cine.size()))
    throw std::invalid_argument("run_ablation: reference index out of range");

  ReconstructOptions pre;
  pre.method = "rb-pinn";
  pre.iters = iters;
  pre.seed = seed;
  pretrain_reference(cine[reference_index].frame, cine[reference_index].bc,
                     make_pinn_config(pre), weights_path);

  std::vector<AblationRow> rows;
  for (const bool pretrained : {false, true}) {
    for (const bool dual : {false, true}) {
      std::vector<VelocityField> estimates(cine.size());
      std::vector<double> clocks(cine.size());
      parallel_for_index(static_cast<int>(cine.size()), jobs, [&](int k) {
        ReconstructOptions opts;
        opts.method = "rb-pinn";
        opts.iters = iters;
        opts.seed = seed;
        opts.single_stage = !dual;
        if (pretrained) opts.pretrained = weights_path;
        const MethodResult res =
            reconstruct_frame(cine[k].frame, cine[k].bc, opts);
        estimates[k] = res.field;
        clocks[k] = res.wall_clock_s;
      });
      const MethodSummary s = summarize_method(cine, estimates, clocks, "rb-pinn");
      AblationRow row;
      row.pretrained = pretrained;
      row.dual_stage = dual;
      row.r2_vr_pooled = s.r2_vr_pooled;
      row.r2_vtheta_pooled = s.r2_vtheta_pooled;
      row.median_nrmse = s.median_nrmse;
      row.robust_std_nrmse = s.robust_std_nrmse;
      rows.push_back(row);
    }
  }
  return rows;
}

}  // namespace vfm
