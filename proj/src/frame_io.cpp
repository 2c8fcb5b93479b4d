#include "vfm/frame_io.hpp"

#include <fstream>
#include <stdexcept>

namespace vfm {

namespace {

nlohmann::json grid_to_json(const PolarGrid& g) {
  return {{"n_r", g.n_r},     {"n_theta", g.n_theta}, {"r0", g.r0},
          {"dr", g.dr},       {"theta0", g.theta0},   {"dtheta", g.dtheta}};
}

PolarGrid grid_from_json(const nlohmann::json& j) {
  return build_grid(j.at("n_r").get<int>(), j.at("n_theta").get<int>(),
                    j.at("r0").get<double>(), j.at("dr").get<double>(),
                    j.at("theta0").get<double>(), j.at("dtheta").get<double>());
}

nlohmann::json load_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw std::runtime_error("malformed JSON in " + path + ": " + e.what());
  }
  return j;
}

void dump_json(const nlohmann::json& j, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path + " for writing");
  out << j.dump(1) << '\n';
  if (!out) throw std::runtime_error("write failed for " + path);
}

}  // namespace

nlohmann::json lattice_to_json(const Lattice& m) {
  nlohmann::json a = nlohmann::json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = 0; j < m.cols(); ++j) a.push_back(m(i, j));
  return a;
}

Lattice lattice_from_json(const nlohmann::json& a, int n_r, int n_theta) {
  if (static_cast<int>(a.size()) != n_r * n_theta)
    throw std::runtime_error("lattice size does not match grid header");
  Lattice m(n_r, n_theta);
  int k = 0;
  for (int i = 0; i < n_r; ++i)
    for (int j = 0; j < n_theta; ++j) m(i, j) = a[k++].get<double>();
  return m;
}

nlohmann::json bool_lattice_to_json(const BoolLattice& m) {
  nlohmann::json a = nlohmann::json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = 0; j < m.cols(); ++j) a.push_back(m(i, j) ? 1 : 0);
  return a;
}

BoolLattice bool_lattice_from_json(const nlohmann::json& a, int n_r, int n_theta) {
  if (static_cast<int>(a.size()) != n_r * n_theta)
    throw std::runtime_error("lattice size does not match grid header");
  BoolLattice m(n_r, n_theta);
  int k = 0;
  for (int i = 0; i < n_r; ++i)
    for (int j = 0; j < n_theta; ++j) m(i, j) = a[k++].get<int>() != 0;
  return m;
}

void write_frame_file(const FrameFile& f, const std::string& path) {
  f.frame.validate();
  nlohmann::json j;
  j["format_version"] = f.format_version;
  j["frame_id"] = f.frame_id;
  j["grid"] = grid_to_json(f.frame.grid);
  j["fields"]["v_d"] = lattice_to_json(f.frame.v_d);
  j["fields"]["weights"] = lattice_to_json(f.frame.weights);
  j["fields"]["seg"] = bool_lattice_to_json(f.frame.seg.mask);
  j["fields"]["valid"] = bool_lattice_to_json(f.frame.valid);
  if (f.reference) {
    j["fields"]["v_r_ref"] = lattice_to_json(f.reference->v_r);
    j["fields"]["v_theta_ref"] = lattice_to_json(f.reference->v_theta);
  }
  j["provenance"] = f.provenance;
  dump_json(j, path);
}

FrameFile read_frame_file(const std::string& path) {
  const nlohmann::json j = load_json(path);
  FrameFile f;
  f.format_version = j.at("format_version").get<int>();
  if (f.format_version != 1)
    throw std::runtime_error("unrecognized frame format_version in " + path);
  f.frame_id = j.at("frame_id").get<std::string>();
  f.frame.grid = grid_from_json(j.at("grid"));
  const int n_r = f.frame.grid.n_r, n_theta = f.frame.grid.n_theta;
  const auto& fields = j.at("fields");
  f.frame.v_d = lattice_from_json(fields.at("v_d"), n_r, n_theta);
  f.frame.weights = lattice_from_json(fields.at("weights"), n_r, n_theta);
  f.frame.seg.mask = bool_lattice_from_json(fields.at("seg"), n_r, n_theta);
  f.frame.valid = bool_lattice_from_json(fields.at("valid"), n_r, n_theta);
  if (fields.contains("v_r_ref")) {
    VelocityField ref;
    ref.v_r = lattice_from_json(fields.at("v_r_ref"), n_r, n_theta);
    ref.v_theta = lattice_from_json(fields.at("v_theta_ref"), n_r, n_theta);
    f.reference = std::move(ref);
  }
  f.provenance = j.value("provenance", nlohmann::json::object());
  f.frame.validate();
  return f;
}

void write_solution_file(const SolutionFile& s, const std::string& path) {
  nlohmann::json j;
  j["format_version"] = s.format_version;
  j["frame_id"] = s.frame_id;
  j["method"] = s.method;
  j["grid"] = grid_to_json(s.grid);
  j["fields"]["v_r"] = lattice_to_json(s.field.v_r);
  j["fields"]["v_theta"] = lattice_to_json(s.field.v_theta);
  j["fields"]["seg"] = bool_lattice_to_json(s.mask);
  j["diagnostics"] = s.diagnostics;
  dump_json(j, path);
}

SolutionFile read_solution_file(const std::string& path) {
  const nlohmann::json j = load_json(path);
  SolutionFile s;
  s.format_version = j.at("format_version").get<int>();
  if (s.format_version != 1)
    throw std::runtime_error("unrecognized solution format_version in " + path);
  s.frame_id = j.at("frame_id").get<std::string>();
  s.method = j.at("method").get<std::string>();
  s.grid = grid_from_json(j.at("grid"));
  s.field.v_r = lattice_from_json(j.at("fields").at("v_r"), s.grid.n_r, s.grid.n_theta);
  s.field.v_theta =
      lattice_from_json(j.at("fields").at("v_theta"), s.grid.n_r, s.grid.n_theta);
  s.mask = bool_lattice_from_json(j.at("fields").at("seg"), s.grid.n_r, s.grid.n_theta);
  s.diagnostics = j.value("diagnostics", nlohmann::json::object());
  return s;
}

}  // namespace vfm
