#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "vfm/tape.hpp"

namespace vfm {

/// Coordinate network: input (r, theta), six tanh hidden layers of width 60,
/// linear two-channel output. 18602 trainable scalars in total.
struct MlpParams {
  std::vector<Eigen::MatrixXd> weights;  // per layer, shape (out, in)
  std::vector<Eigen::VectorXd> biases;

  static const std::vector<int>& layer_sizes();
  static int expected_count();  // 18602

  int count() const;
  bool all_finite() const;
};

/// Xavier-uniform weights, zero biases, reproducible per seed.
MlpParams mlp_init(std::uint64_t seed);
MlpParams mlp_zero();

/// Canonical parameter order: per layer, weight rows (out-major, in-minor)
/// then bias entries. All optimizers and the weight file use this order.
Eigen::VectorXd flatten(const MlpParams& params);
MlpParams unflatten(const Eigen::VectorXd& flat);

struct TapeNet {
  ad::Tape::NodeId pred = -1;  // 2xN outputs
  ad::Tape::NodeId ddx0 = -1;  // 2xN derivative of outputs w.r.t. input row 0
  ad::Tape::NodeId ddx1 = -1;  // 2xN derivative w.r.t. input row 1
  std::vector<ad::Tape::NodeId> param_nodes;  // leaves: W0, b0, W1, b1, ...
};

/// Builds the forward pass (and optionally the input-derivative propagation)
/// on a tape. The derivative rows are themselves differentiable w.r.t. the
/// parameters, so losses built from them backpropagate correctly.
TapeNet forward_on_tape(ad::Tape& tape, const MlpParams& params,
                        const Eigen::MatrixXd& inputs, bool with_jacobian);

/// Plain forward pass; runs the identical op sequence as forward_on_tape so
/// predictions are bit-identical between the two entry points.
Eigen::MatrixXd forward(const MlpParams& params, const Eigen::MatrixXd& inputs);

struct EvalBatch {
  Eigen::MatrixXd pred;  // 2xN
  Eigen::MatrixXd ddx0;  // 2xN
  Eigen::MatrixXd ddx1;  // 2xN
};

EvalBatch forward_with_input_jacobian(const MlpParams& params,
                                      const Eigen::MatrixXd& inputs);

/// Flattens the adjoints of the parameter leaves after tape.backward().
Eigen::VectorXd collect_param_grads(const ad::Tape& tape,
                                    const std::vector<ad::Tape::NodeId>& leaves);

/// Weight file: one JSON header line (layer sizes, activation, free-form
/// metadata), then count * 8 bytes of little-endian doubles in canonical
/// parameter order.
void save_weights(const MlpParams& params, const std::string& path,
                  const std::string& metadata_json = "{}");
MlpParams load_weights(const std::string& path, std::string* metadata_json = nullptr);

}  // namespace vfm
