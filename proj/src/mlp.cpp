#include "vfm/mlp.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <random>
#include <stdexcept>

#include <json.hpp>

namespace vfm {

static_assert(std::endian::native == std::endian::little,
              "weight file IO assumes a little-endian host");

const std::vector<int>& MlpParams::layer_sizes() {
  static const std::vector<int> sizes{2, 60, 60, 60, 60, 60, 60, 2};
  return sizes;
}

int MlpParams::expected_count() {
  const auto& s = layer_sizes();
  int n = 0;
  for (size_t l = 0; l + 1 < s.size(); ++l) n += s[l + 1] * s[l] + s[l + 1];
  return n;
}

int MlpParams::count() const {
  int n = 0;
  for (size_t l = 0; l < weights.size(); ++l)
    n += static_cast<int>(weights[l].size() + biases[l].size());
  return n;
}

bool MlpParams::all_finite() const {
  for (size_t l = 0; l < weights.size(); ++l)
    if (!weights[l].allFinite() || !biases[l].allFinite()) return false;
  return true;
}

namespace {

double uniform01(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

MlpParams make_layers() {
  const auto& s = MlpParams::layer_sizes();
  MlpParams p;
  for (size_t l = 0; l + 1 < s.size(); ++l) {
    p.weights.emplace_back(Eigen::MatrixXd::Zero(s[l + 1], s[l]));
    p.biases.emplace_back(Eigen::VectorXd::Zero(s[l + 1]));
  }
  return p;
}

}  // namespace

MlpParams mlp_init(std::uint64_t seed) {
  MlpParams p = make_layers();
  std::mt19937_64 rng(seed);
  for (auto& w : p.weights) {
    const double bound = std::sqrt(6.0 / (w.cols() + w.rows()));
    for (Eigen::Index r = 0; r < w.rows(); ++r)      // row-major draw order
      for (Eigen::Index c = 0; c < w.cols(); ++c)
        w(r, c) = (2.0 * uniform01(rng) - 1.0) * bound;
  }
  return p;
}

MlpParams mlp_zero() { return make_layers(); }

Eigen::VectorXd flatten(const MlpParams& params) {
  Eigen::VectorXd flat(params.count());
  Eigen::Index k = 0;
  for (size_t l = 0; l < params.weights.size(); ++l) {
    const auto& w = params.weights[l];
    for (Eigen::Index r = 0; r < w.rows(); ++r)
      for (Eigen::Index c = 0; c < w.cols(); ++c) flat(k++) = w(r, c);
    for (Eigen::Index r = 0; r < params.biases[l].size(); ++r)
      flat(k++) = params.biases[l](r);
  }
  return flat;
}

MlpParams unflatten(const Eigen::VectorXd& flat) {
  if (flat.size() != MlpParams::expected_count())
    throw std::invalid_argument("unflatten: parameter count mismatch");
  MlpParams p = make_layers();
  Eigen::Index k = 0;
  for (size_t l = 0; l < p.weights.size(); ++l) {
    auto& w = p.weights[l];
    for (Eigen::Index r = 0; r < w.rows(); ++r)
      for (Eigen::Index c = 0; c < w.cols(); ++c) w(r, c) = flat(k++);
    for (Eigen::Index r = 0; r < p.biases[l].size(); ++r) p.biases[l](r) = flat(k++);
  }
  return p;
}

TapeNet forward_on_tape(ad::Tape& tape, const MlpParams& params,
                        const Eigen::MatrixXd& inputs, bool with_jacobian) {
  if (inputs.rows() != 2)
    throw std::invalid_argument("forward_on_tape: inputs must be 2xN");
  if (!inputs.allFinite())
    throw std::invalid_argument("forward_on_tape: non-finite input");
  if (!params.all_finite())
    throw std::invalid_argument("forward_on_tape: non-finite parameters");

  const auto n_layers = params.weights.size();
  const auto n = inputs.cols();
  TapeNet net;
  for (size_t l = 0; l < n_layers; ++l) {
    net.param_nodes.push_back(tape.leaf(params.weights[l]));
    net.param_nodes.push_back(tape.leaf(params.biases[l]));
  }
  auto weight_node = [&](size_t l) { return net.param_nodes[2 * l]; };
  auto bias_node = [&](size_t l) { return net.param_nodes[2 * l + 1]; };

  ad::Tape::NodeId x = tape.constant(inputs);
  // d(input)/d(input row k) is a constant one-hot row replicated over the batch.
  ad::Tape::NodeId g0 = -1, g1 = -1;
  if (with_jacobian) {
    Eigen::MatrixXd e0 = Eigen::MatrixXd::Zero(2, n), e1 = Eigen::MatrixXd::Zero(2, n);
    e0.row(0).setOnes();
    e1.row(1).setOnes();
    g0 = tape.constant(e0);
    g1 = tape.constant(e1);
  }

  ad::Tape::NodeId act = x;
  for (size_t l = 0; l < n_layers; ++l) {
    const bool hidden = l + 1 < n_layers;
    ad::Tape::NodeId z = tape.add_bias(tape.matmul(weight_node(l), act), bias_node(l));
    ad::Tape::NodeId h0 = -1, h1 = -1;
    if (with_jacobian) {
      h0 = tape.matmul(weight_node(l), g0);
      h1 = tape.matmul(weight_node(l), g1);
    }
    if (hidden) {
      act = tape.tanh(z);
      if (with_jacobian) {
        ad::Tape::NodeId dact = tape.one_minus_square(act);
        g0 = tape.hadamard(dact, h0);
        g1 = tape.hadamard(dact, h1);
      }
    } else {
      act = z;
      g0 = h0;
      g1 = h1;
    }
  }
  net.pred = act;
  net.ddx0 = g0;
  net.ddx1 = g1;
  return net;
}

Eigen::MatrixXd forward(const MlpParams& params, const Eigen::MatrixXd& inputs) {
  ad::Tape tape;
  return tape.value(forward_on_tape(tape, params, inputs, false).pred);
}

EvalBatch forward_with_input_jacobian(const MlpParams& params,
                                      const Eigen::MatrixXd& inputs) {
  ad::Tape tape;
  TapeNet net = forward_on_tape(tape, params, inputs, true);
  return EvalBatch{tape.value(net.pred), tape.value(net.ddx0), tape.value(net.ddx1)};
}

Eigen::VectorXd collect_param_grads(const ad::Tape& tape,
                                    const std::vector<ad::Tape::NodeId>& leaves) {
  Eigen::Index total = 0;
  for (auto id : leaves) total += tape.grad(id).size();
  Eigen::VectorXd out(total);
  Eigen::Index k = 0;
  for (size_t l = 0; l < leaves.size(); l += 2) {
    const auto& gw = tape.grad(leaves[l]);
    for (Eigen::Index r = 0; r < gw.rows(); ++r)
      for (Eigen::Index c = 0; c < gw.cols(); ++c) out(k++) = gw(r, c);
    const auto& gb = tape.grad(leaves[l + 1]);
    for (Eigen::Index r = 0; r < gb.rows(); ++r) out(k++) = gb(r, 0);
  }
  return out;
}

void save_weights(const MlpParams& params, const std::string& path,
                  const std::string& metadata_json) {
  nlohmann::json header;
  header["format"] = "vfm-mlp-weights";
  header["version"] = 1;
  header["layer_sizes"] = MlpParams::layer_sizes();
  header["activation"] = "tanh";
  header["metadata"] = nlohmann::json::parse(metadata_json);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("save_weights: cannot open " + path);
  out << header.dump() << '\n';
  const Eigen::VectorXd flat = flatten(params);
  out.write(reinterpret_cast<const char*>(flat.data()),
            static_cast<std::streamsize>(flat.size() * sizeof(double)));
  if (!out) throw std::runtime_error("save_weights: write failed for " + path);
}

MlpParams load_weights(const std::string& path, std::string* metadata_json) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("load_weights: cannot open " + path);
  std::string header_line;
  if (!std::getline(in, header_line))
    throw std::runtime_error("load_weights: missing header line");
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(header_line);
  } catch (const nlohmann::json::exception& e) {
    throw std::runtime_error(std::string("load_weights: bad header: ") + e.what());
  }
  if (header.value("format", "") != "vfm-mlp-weights")
    throw std::runtime_error("load_weights: not a weight file");
  const auto sizes = header.at("layer_sizes").get<std::vector<int>>();
  if (sizes != MlpParams::layer_sizes())
    throw std::runtime_error("load_weights: architecture mismatch");
  if (header.value("activation", "tanh") != "tanh")
    throw std::runtime_error("load_weights: unsupported activation");

  Eigen::VectorXd flat(MlpParams::expected_count());
  in.read(reinterpret_cast<char*>(flat.data()),
          static_cast<std::streamsize>(flat.size() * sizeof(double)));
  if (in.gcount() != static_cast<std::streamsize>(flat.size() * sizeof(double)))
    throw std::runtime_error("load_weights: truncated payload");
  if (metadata_json) *metadata_json = header.value("metadata", nlohmann::json::object()).dump();
  return unflatten(flat);
}

}  // namespace vfm
