#pragma once

#include <optional>
#include <string>

#include <json.hpp>

#include "vfm/field.hpp"
#include "vfm/phantom.hpp"

namespace vfm {

/// On-disk Doppler frame: grid header, row-major numeric lattices (doubles),
/// 0/1 boolean lattices, optional reference field, free-form provenance.
struct FrameFile {
  int format_version = 1;
  std::string frame_id;
  DopplerFrame frame;
  std::optional<VelocityField> reference;
  nlohmann::json provenance = nlohmann::json::object();
};

void write_frame_file(const FrameFile& f, const std::string& path);
FrameFile read_frame_file(const std::string& path);

/// Reconstruction output for one frame; carries the cavity mask so plotting
/// needs no companion file.
struct SolutionFile {
  int format_version = 1;
  std::string frame_id;
  std::string method;
  PolarGrid grid;
  VelocityField field;
  BoolLattice mask;
  nlohmann::json diagnostics = nlohmann::json::object();
};

void write_solution_file(const SolutionFile& s, const std::string& path);
SolutionFile read_solution_file(const std::string& path);

nlohmann::json lattice_to_json(const Lattice& m);
Lattice lattice_from_json(const nlohmann::json& a, int n_r, int n_theta);
nlohmann::json bool_lattice_to_json(const BoolLattice& m);
BoolLattice bool_lattice_from_json(const nlohmann::json& a, int n_r, int n_theta);

}  // namespace vfm
