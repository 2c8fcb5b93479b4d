// Command-line front end: phantom generation, degradation protocols,
// reconstruction with all three solvers, evaluation tables, experiment
// orchestration, and quiver rendering.

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "vfm/experiment.hpp"
#include "vfm/frame_io.hpp"
#include "vfm/plot.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

vfm::PolarGrid default_sector_grid(int n_r, int n_theta) {
  // r in [0.02, 0.12] m, 68 degree aperture centered on the probe axis.
  const double aperture = 68.0 * 3.14159265358979323846 / 180.0;
  return vfm::build_grid(n_r, n_theta, 0.02, 0.1 / (n_r - 1), -aperture / 2.0,
                         aperture / (n_theta - 1));
}

std::vector<std::string> collect_json_files(const std::vector<std::string>& inputs) {
  std::vector<std::string> files;
  for (const auto& in : inputs) {
    if (fs::is_directory(in)) {
      for (const auto& e : fs::directory_iterator(in))
        if (e.path().extension() == ".json") files.push_back(e.path().string());
    } else {
      files.push_back(in);
    }
  }
  std::sort(files.begin(), files.end());
  if (files.empty()) throw std::invalid_argument("no input files found");
  return files;
}

std::string snr_to_string(double snr_db) {
  if (std::isinf(snr_db)) return "inf";
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%g", snr_db);
  return buf;
}

struct GenerateArgs {
  int frames = 100;
  int n_r = 200;
  int n_theta = 80;
  int margin = 2;
  double snr = 50.0;
  bool noiseless = false;
  double amplitude = 0.02;
  double cycles = 0.5;
  bool single_mode = false;
  std::uint64_t seed = 0;
  std::string out;
};

int run_generate(const GenerateArgs& a) {
  vfm::CineSpec spec;
  spec.frames = a.frames;
  spec.grid = default_sector_grid(a.n_r, a.n_theta);
  spec.margin = a.margin;
  spec.amplitude = a.amplitude;
  spec.cycles = a.cycles;
  spec.second_mode = !a.single_mode;
  spec.snr_db = a.noiseless ? std::numeric_limits<double>::infinity() : a.snr;
  spec.seed = a.seed;

  fs::create_directories(a.out);
  const auto cine = vfm::generate_cine(spec);
  for (size_t k = 0; k < cine.size(); ++k) {
    vfm::FrameFile f;
    f.frame_id = cine[k].id;
    f.frame = cine[k].frame;
    f.reference = cine[k].reference;
    f.provenance = {{"generator", "stream-function-cine"},
                    {"seed", a.seed},
                    {"snr_db", snr_to_string(spec.snr_db)},
                    {"amplitude", a.amplitude},
                    {"cycles", a.cycles},
                    {"second_mode", spec.second_mode},
                    {"frame_index", k}};
    vfm::write_frame_file(f, (fs::path(a.out) / (cine[k].id + ".json")).string());
  }
  std::cout << "wrote " << cine.size() << " frames to " << a.out << "\n";
  return 0;
}

struct DegradeArgs {
  std::string mode = "sparse";
  int m = 10;
  int n = 9;
  double pct = 0.0;
  std::uint64_t seed = 0;
  std::string out;
  std::vector<std::string> inputs;
};

int run_degrade(const DegradeArgs& a) {
  vfm::DegradeSpec spec;
  if (a.mode == "sparse")
    spec.mode = vfm::DegradeMode::sparse_deterministic;
  else if (a.mode == "sparse-random")
    spec.mode = vfm::DegradeMode::sparse_random;
  else
    spec.mode = vfm::DegradeMode::truncate;
  spec.m = a.m;
  spec.n = a.n;
  spec.pct = a.pct;
  spec.seed = a.seed;
  spec.validate();

  fs::create_directories(a.out);
  for (const auto& path : collect_json_files(a.inputs)) {
    vfm::FrameFile f = vfm::read_frame_file(path);
    f.frame = vfm::degrade(f.frame, spec);
    f.provenance["degrade"] = {{"mode", a.mode}, {"m", a.m},     {"n", a.n},
                               {"pct", a.pct},   {"seed", a.seed}};
    vfm::write_frame_file(f, (fs::path(a.out) / fs::path(path).filename()).string());
  }
  return 0;
}

struct ReconstructArgs {
  std::string method = "ivfm";
  int iters = 2500;
  std::string pretrained;
  double lambda_s = 1e-6;
  std::uint64_t seed = 0;
  int jobs = 1;
  bool single_stage = false;
  std::string out;
  std::vector<std::string> inputs;
};

int run_reconstruct(const ReconstructArgs& a) {
  const auto files = collect_json_files(a.inputs);
  fs::create_directories(a.out);

  vfm::ReconstructOptions opts;
  opts.method = a.method;
  opts.iters = a.iters;
  opts.pretrained = a.pretrained;
  opts.lambda_s = a.lambda_s;
  opts.seed = a.seed;
  opts.single_stage = a.single_stage;

  std::vector<json> summaries(files.size());
  std::vector<int> failed(files.size(), 0);
  vfm::parallel_for_index(static_cast<int>(files.size()), a.jobs, [&](int k) {
    const vfm::FrameFile f = vfm::read_frame_file(files[k]);
    json s{{"frame_id", f.frame_id}};
    try {
      const vfm::BoundaryConditionSet bc = vfm::frame_boundary(f.frame);
      const vfm::MethodResult res = vfm::reconstruct_frame(f.frame, bc, opts);
      vfm::SolutionFile sol;
      sol.frame_id = f.frame_id;
      sol.method = a.method;
      sol.grid = f.frame.grid;
      sol.field = res.field;
      sol.mask = f.frame.seg.mask;
      sol.diagnostics = res.diagnostics;
      vfm::write_solution_file(
          sol, (fs::path(a.out) / (f.frame_id + "." + a.method + ".json")).string());
      s["wall_clock_s"] = res.wall_clock_s;
    } catch (const std::exception& e) {
      s["error"] = e.what();
      failed[k] = 1;
    }
    summaries[k] = std::move(s);
  });

  std::vector<double> clocks;
  for (const auto& s : summaries)
    if (s.contains("wall_clock_s")) clocks.push_back(s["wall_clock_s"].get<double>());
  const double median_clock =
      clocks.empty() ? 0.0 : vfm::aggregate_robust(clocks).median;
  json summary{{"method", a.method},
               {"frames", summaries},
               {"median_wall_clock_s", median_clock}};
  std::ofstream((fs::path(a.out) / ("summary." + a.method + ".json")).string())
      << summary.dump(1) << '\n';
  std::cout << "reconstructed " << clocks.size() << "/" << files.size()
            << " frames, median wall clock " << median_clock << " s\n";
  const int n_failed =
      static_cast<int>(std::count(failed.begin(), failed.end(), 1));
  if (n_failed > 0) std::cerr << n_failed << " frame(s) failed; see summary\n";
  return n_failed > 0 ? 1 : 0;
}

struct EvalArgs {
  std::vector<std::string> frames;
  std::vector<std::string> solutions;
  std::string region = "cavity";
  std::string out;
};

int run_eval(const EvalArgs& a) {
  std::vector<vfm::FrameFile> frames;
  for (const auto& p : collect_json_files(a.frames))
    frames.push_back(vfm::read_frame_file(p));
  std::vector<vfm::SolutionFile> sols;
  for (const auto& p : collect_json_files(a.solutions)) {
    if (fs::path(p).filename().string().starts_with("summary.")) continue;
    sols.push_back(vfm::read_solution_file(p));
  }

  auto find_frame = [&](const std::string& id) -> const vfm::FrameFile* {
    for (const auto& f : frames)
      if (f.frame_id == id) return &f;
    return nullptr;
  };

  std::optional<vfm::BoolLattice> region;
  if (a.region == "common") {
    std::vector<vfm::DopplerFrame> dfs;
    for (const auto& f : frames) dfs.push_back(f.frame);
    region = vfm::common_valid_region(dfs);
  } else if (a.region != "cavity") {
    throw std::invalid_argument("--region must be cavity or common");
  }

  std::vector<std::string> missing;
  std::vector<vfm::MetricsRow> rows;
  std::map<std::string,
           std::pair<vfm::PearsonAccumulator, vfm::PearsonAccumulator>> pooled;
  std::map<std::string, std::vector<double>> nrmses;
  for (const auto& s : sols) {
    const vfm::FrameFile* f = find_frame(s.frame_id);
    if (!f) {
      missing.push_back(s.frame_id);
      continue;
    }
    if (!f->reference)
      throw std::runtime_error("frame " + s.frame_id + " carries no reference field");
    const vfm::BoolLattice mask =
        region ? (*region && f->frame.seg.mask) : f->frame.seg.mask;
    vfm::MetricsRow row;
    row.frame_id = s.frame_id;
    row.method = s.method;
    row.r2_vr = vfm::squared_correlation(s.field, *f->reference, mask,
                                         vfm::Component::radial);
    row.r2_vtheta = vfm::squared_correlation(s.field, *f->reference, mask,
                                             vfm::Component::angular);
    row.nrmse_pct = vfm::nrmse_pct(s.field, *f->reference, mask);
    rows.push_back(row);
    auto& [pr, pt] = pooled[s.method];
    for (Eigen::Index i = 0; i < mask.rows(); ++i)
      for (Eigen::Index j = 0; j < mask.cols(); ++j)
        if (mask(i, j)) {
          pr.add(s.field.v_r(i, j), f->reference->v_r(i, j));
          pt.add(s.field.v_theta(i, j), f->reference->v_theta(i, j));
        }
    nrmses[s.method].push_back(row.nrmse_pct);
  }
  if (!missing.empty()) {
    std::string ids;
    for (const auto& id : missing) ids += " " + id;
    throw std::runtime_error("no frame file for solution id(s):" + ids);
  }

  fs::create_directories(a.out);
  std::ofstream((fs::path(a.out) / "metrics.csv").string()) << vfm::metrics_csv(rows);
  json report;
  report["region"] = a.region;
  for (auto& [method, accs] : pooled) {
    const vfm::RobustAggregate agg = vfm::aggregate_robust(nrmses[method]);
    report["methods"][method] = {{"r2_vr", accs.first.r2()},
                                 {"r2_vtheta", accs.second.r2()},
                                 {"nrmse_median", agg.median},
                                 {"nrmse_robust_std", agg.robust_std},
                                 {"frames", nrmses[method].size()}};
  }
  std::ofstream((fs::path(a.out) / "report.json").string()) << report.dump(1) << '\n';
  std::cout << report.dump(1) << "\n";
  return 0;
}

struct PretrainArgs {
  std::string frame;
  int iters = 2500;
  std::uint64_t seed = 0;
  std::string out;
};

int run_pretrain(const PretrainArgs& a) {
  const vfm::FrameFile f = vfm::read_frame_file(a.frame);
  vfm::ReconstructOptions opts;
  opts.method = "rb-pinn";
  opts.iters = a.iters;
  opts.seed = a.seed;
  vfm::pretrain_reference(f.frame, vfm::frame_boundary(f.frame),
                          vfm::make_pinn_config(opts), a.out);
  std::cout << "wrote pre-optimized weights to " << a.out << "\n";
  return 0;
}

struct PlotArgs {
  std::string input;
  std::string out;
  int decimate = 4;
};

int run_plot(const PlotArgs& a) {
  const vfm::SolutionFile s = vfm::read_solution_file(a.input);
  vfm::QuiverOptions opts;
  opts.decimate = a.decimate;
  vfm::write_quiver_svg(a.out, s.grid, s.field, s.mask, opts);
  std::cout << "wrote " << a.out << "\n";
  return 0;
}

struct ExperimentArgs {
  std::string experiment = "full_vs_sparse";
  std::vector<std::string> methods{"ivfm", "rb-pinn", "al-pinn"};
  int frames = 10;
  int n_r = 40;
  int n_theta = 100;
  int iters = 500;
  double snr = 50.0;
  double lambda_s = 1e-9;
  std::uint64_t seed = 0;
  int jobs = 1;
  std::string out;
};

int run_experiment(const ExperimentArgs& a) {
  if (a.methods.empty()) throw std::invalid_argument("experiment: empty method set");
  fs::create_directories(a.out);

  vfm::CineSpec spec;
  spec.frames = a.frames;
  spec.grid = default_sector_grid(a.n_r, a.n_theta);
  spec.margin = 2;
  spec.snr_db = a.snr;
  spec.seed = a.seed;
  const auto cine = vfm::generate_cine(spec);

  json manifest{{"experiment", a.experiment}, {"frames", a.frames},
                {"nr", a.n_r},                {"ntheta", a.n_theta},
                {"iters", a.iters},           {"snr_db", snr_to_string(a.snr)},
                {"seed", a.seed},             {"methods", a.methods}};
  std::ofstream((fs::path(a.out) / "manifest.json").string()) << manifest.dump(1) << '\n';

  auto solve_cine = [&](const std::vector<vfm::CineFrame>& frames,
                        const std::string& method, const std::string& pretrained,
                        std::vector<double>* clocks) {
    std::vector<vfm::VelocityField> est(frames.size());
    if (clocks) clocks->assign(frames.size(), 0.0);
    vfm::parallel_for_index(static_cast<int>(frames.size()), a.jobs, [&](int k) {
      vfm::ReconstructOptions opts;
      opts.method = method;
      opts.iters = a.iters;
      opts.lambda_s = a.lambda_s;
      opts.seed = a.seed;
      opts.pretrained = pretrained;
      const vfm::MethodResult r =
          vfm::reconstruct_frame(frames[k].frame, frames[k].bc, opts);
      est[k] = r.field;
      if (clocks) (*clocks)[k] = r.wall_clock_s;
    });
    return est;
  };

  auto pretrain_if_needed = [&](const std::string& method) -> std::string {
    if (method == "ivfm") return "";
    const std::string wpath = (fs::path(a.out) / "pretrained.vfmw").string();
    if (!fs::exists(wpath)) {
      vfm::ReconstructOptions opts;
      opts.method = "rb-pinn";
      opts.iters = a.iters;
      opts.seed = a.seed;
      const int ref = a.frames / 2;
      vfm::pretrain_reference(cine[ref].frame, cine[ref].bc,
                              vfm::make_pinn_config(opts), wpath);
    }
    return wpath;
  };

  std::ostringstream csv;
  csv.precision(6);
  if (a.experiment == "ablation") {
    const std::string wpath = (fs::path(a.out) / "ablation_pretrained.vfmw").string();
    const auto rows =
        vfm::run_ablation(cine, a.frames / 2, a.iters, a.seed, wpath, a.jobs);
    csv << "pretrained,dual_stage,r2_vr,r2_vtheta,nrmse_median,nrmse_robust_std\n";
    for (const auto& r : rows)
      csv << (r.pretrained ? "yes" : "no") << ',' << (r.dual_stage ? "yes" : "no")
          << ',' << r.r2_vr_pooled << ',' << r.r2_vtheta_pooled << ','
          << r.median_nrmse << ',' << r.robust_std_nrmse << '\n';
  } else if (a.experiment == "full_vs_sparse") {
    vfm::DegradeSpec dspec;
    dspec.mode = vfm::DegradeMode::sparse_deterministic;
    dspec.m = 10;
    dspec.n = 9;
    std::vector<vfm::CineFrame> sparse = cine;
    for (auto& f : sparse) f.frame = vfm::degrade(f.frame, dspec);

    csv << "method,full_r2_vr,full_r2_vtheta,full_nrmse_median,full_nrmse_robust_std,"
           "sparse_r2_vr,sparse_r2_vtheta,sparse_nrmse_median,sparse_nrmse_robust_std\n";
    for (const auto& method : a.methods) {
      const std::string wpath = pretrain_if_needed(method);
      const auto full_est = solve_cine(cine, method, wpath, nullptr);
      const auto sparse_est = solve_cine(sparse, method, wpath, nullptr);
      const auto full = vfm::summarize_method(cine, full_est, {}, method);
      const auto sp = vfm::summarize_method(sparse, sparse_est, {}, method);
      csv << method << ',' << full.r2_vr_pooled << ',' << full.r2_vtheta_pooled
          << ',' << full.median_nrmse << ',' << full.robust_std_nrmse << ','
          << sp.r2_vr_pooled << ',' << sp.r2_vtheta_pooled << ','
          << sp.median_nrmse << ',' << sp.robust_std_nrmse << '\n';
    }
  } else if (a.experiment == "truncation") {
    const std::vector<double> pcts{20, 40, 50, 60, 70};
    // Metrics restricted to the common region left by the deepest truncation.
    std::vector<std::vector<vfm::CineFrame>> truncated;
    for (const double pct : pcts) {
      vfm::DegradeSpec dspec;
      dspec.mode = vfm::DegradeMode::truncate;
      dspec.pct = pct;
      std::vector<vfm::CineFrame> t = cine;
      for (auto& f : t) f.frame = vfm::degrade(f.frame, dspec);
      truncated.push_back(std::move(t));
    }
    std::vector<vfm::DopplerFrame> deepest;
    for (const auto& f : truncated.back()) deepest.push_back(f.frame);
    const vfm::BoolLattice region = vfm::common_valid_region(deepest);

    csv << "truncation_pct,method,r2_vr,r2_vtheta,nrmse_median,nrmse_robust_std\n";
    for (const auto& method : a.methods) {
      const std::string wpath = pretrain_if_needed(method);
      for (size_t p = 0; p < pcts.size(); ++p) {
        const auto est = solve_cine(truncated[p], method, wpath, nullptr);
        const auto s = vfm::summarize_method(truncated[p], est, {}, method, region);
        csv << pcts[p] << ',' << method << ',' << s.r2_vr_pooled << ','
            << s.r2_vtheta_pooled << ',' << s.median_nrmse << ','
            << s.robust_std_nrmse << '\n';
      }
    }
  } else {  // timing
    csv << "method,median_wall_clock_s,frames\n";
    for (const auto& method : a.methods) {
      const std::string wpath = pretrain_if_needed(method);
      std::vector<double> clocks;
      solve_cine(cine, method, wpath, &clocks);
      csv << method << ',' << vfm::aggregate_robust(clocks).median << ','
          << clocks.size() << '\n';
    }
  }

  const std::string csv_path = (fs::path(a.out) / (a.experiment + ".csv")).string();
  std::ofstream(csv_path) << csv.str();
  std::cout << "wrote " << csv_path << "\n" << csv.str();
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"2D intraventricular vector flow reconstruction from color Doppler"};
  app.require_subcommand(1);

  GenerateArgs gen;
  auto* cmd_gen = app.add_subcommand("generate", "synthesize a phantom Doppler cine");
  cmd_gen->add_option("--frames", gen.frames, "number of frames")->check(CLI::PositiveNumber);
  cmd_gen->add_option("--nr", gen.n_r, "radial samples per scanline");
  cmd_gen->add_option("--ntheta", gen.n_theta, "scanlines");
  cmd_gen->add_option("--margin", gen.margin, "cavity margin in cells");
  cmd_gen->add_option("--snr", gen.snr, "SNR in dB");
  cmd_gen->add_flag("--noiseless", gen.noiseless, "disable noise (snr = inf)");
  cmd_gen->add_option("--amplitude", gen.amplitude, "peak stream-function amplitude");
  cmd_gen->add_option("--cycles", gen.cycles, "envelope cycles over the cine");
  cmd_gen->add_flag("--single-mode", gen.single_mode, "primary vortex only");
  cmd_gen->add_option("--seed", gen.seed, "RNG seed")->envname("VFM_SEED");
  cmd_gen->add_option("--out", gen.out, "output directory")->required();

  DegradeArgs deg;
  auto* cmd_deg = app.add_subcommand("degrade", "apply a scanline degradation protocol");
  cmd_deg->add_option("--mode", deg.mode, "sparse | sparse-random | truncate")
      ->check(CLI::IsMember({"sparse", "sparse-random", "truncate"}));
  cmd_deg->add_option("--m", deg.m, "scanline group size");
  cmd_deg->add_option("--n", deg.n, "masked block length");
  cmd_deg->add_option("--pct", deg.pct, "truncation percentage");
  cmd_deg->add_option("--seed", deg.seed, "RNG seed")->envname("VFM_SEED");
  cmd_deg->add_option("--out", deg.out, "output directory")->required();
  cmd_deg->add_option("inputs", deg.inputs, "frame files or directories")->required();

  ReconstructArgs rec;
  auto* cmd_rec = app.add_subcommand("reconstruct", "estimate vector flow per frame");
  cmd_rec->add_option("--method", rec.method, "ivfm | rb-pinn | al-pinn")
      ->check(CLI::IsMember({"ivfm", "rb-pinn", "al-pinn"}));
  cmd_rec->add_option("--iters", rec.iters, "total optimization iterations");
  cmd_rec->add_option("--pretrained", rec.pretrained, "pre-optimized weight file");
  cmd_rec->add_option("--lambda-s", rec.lambda_s, "smoothing weight (ivfm)");
  cmd_rec->add_option("--seed", rec.seed, "RNG seed")->envname("VFM_SEED");
  cmd_rec->add_option("--jobs", rec.jobs, "frame-level parallelism")->check(CLI::PositiveNumber);
  cmd_rec->add_flag("--single-stage", rec.single_stage, "first-order stage only");
  cmd_rec->add_option("--out", rec.out, "output directory")->required();
  cmd_rec->add_option("inputs", rec.inputs, "frame files or directories")->required();

  EvalArgs ev;
  auto* cmd_ev = app.add_subcommand("eval", "score solutions against references");
  cmd_ev->add_option("--frames", ev.frames, "frame files or directories")->required();
  cmd_ev->add_option("--solutions", ev.solutions, "solution files or directories")->required();
  cmd_ev->add_option("--region", ev.region, "cavity | common");
  cmd_ev->add_option("--out", ev.out, "output directory")->required();

  PretrainArgs pre;
  auto* cmd_pre = app.add_subcommand("pretrain", "produce pre-optimized weights from one frame");
  cmd_pre->add_option("--frame", pre.frame, "reference frame file")->required();
  cmd_pre->add_option("--iters", pre.iters, "total optimization iterations");
  cmd_pre->add_option("--seed", pre.seed, "RNG seed")->envname("VFM_SEED");
  cmd_pre->add_option("--out", pre.out, "weight file path")->required();

  PlotArgs plot;
  auto* cmd_plot = app.add_subcommand("plot", "render a solution as an SVG quiver");
  cmd_plot->add_option("--input", plot.input, "solution file")->required();
  cmd_plot->add_option("--decimate", plot.decimate, "keep 1-in-N cells per axis");
  cmd_plot->add_option("--out", plot.out, "SVG path")->required();

  ExperimentArgs ex;
  auto* cmd_ex = app.add_subcommand("experiment", "run a full study end to end");
  cmd_ex->add_option("--exp", ex.experiment, "ablation | full_vs_sparse | truncation | timing")
      ->check(CLI::IsMember({"ablation", "full_vs_sparse", "truncation", "timing"}));
  cmd_ex->add_option("--methods", ex.methods, "method subset")->delimiter(',');
  cmd_ex->add_option("--frames", ex.frames, "cine length");
  cmd_ex->add_option("--nr", ex.n_r, "radial samples");
  cmd_ex->add_option("--ntheta", ex.n_theta, "scanlines");
  cmd_ex->add_option("--iters", ex.iters, "PINN iteration budget");
  cmd_ex->add_option("--snr", ex.snr, "SNR in dB");
  cmd_ex->add_option("--lambda-s", ex.lambda_s, "smoothing weight (ivfm)");
  cmd_ex->add_option("--seed", ex.seed, "RNG seed")->envname("VFM_SEED");
  cmd_ex->add_option("--jobs", ex.jobs, "frame-level parallelism");
  cmd_ex->add_option("--out", ex.out, "report directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (*cmd_gen) return run_generate(gen);
    if (*cmd_deg) return run_degrade(deg);
    if (*cmd_rec) return run_reconstruct(rec);
    if (*cmd_ev) return run_eval(ev);
    if (*cmd_pre) return run_pretrain(pre);
    if (*cmd_plot) return run_plot(plot);
    if (*cmd_ex) return run_experiment(ex);
  } catch (const std::invalid_argument& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
