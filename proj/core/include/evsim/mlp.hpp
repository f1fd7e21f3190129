#pragma once

#include <string>
#include <vector>

#include <Eigen/Core>
#include <nlohmann/json_fwd.hpp>

#include "evsim/rng.hpp"

namespace evsim {

// Dense feed-forward net with tanh hidden layers and a linear output.
// W[l] has shape sizes[l+1] x sizes[l]; activations flow as row vectors.
struct Mlp {
  std::vector<int> sizes;
  std::vector<Eigen::MatrixXd> W;
  std::vector<Eigen::VectorXd> b;

  static Mlp zeros(std::vector<int> sizes);

  // Glorot-uniform hidden layers; the output layer is scaled down so a fresh
  // policy is near-uniform. Biases start at zero.
  static Mlp glorot(std::vector<int> sizes, Rng& rng, double out_scale = 0.01);

  int layer_count() const { return static_cast<int>(W.size()); }
  int input_dim() const { return sizes.front(); }
  int output_dim() const { return sizes.back(); }

  bool all_finite() const;
  double max_abs_diff(const Mlp& other) const;
};

// Post-activation values per layer, kept for the backward pass.
// h[0] is the input batch; h[L] is the linear output.
struct ForwardCache {
  std::vector<Eigen::MatrixXd> h;
  const Eigen::MatrixXd& output() const { return h.back(); }
};

// Batched forward pass; rows are samples. Throws NonFiniteError if the
// output contains NaN or infinity.
Eigen::MatrixXd mlp_forward(const Mlp& net, const Eigen::MatrixXd& inputs,
                            ForwardCache* cache = nullptr);

struct Gradients {
  std::vector<Eigen::MatrixXd> dW;
  std::vector<Eigen::VectorXd> db;

  static Gradients zeros_like(const Mlp& net);
  bool all_finite() const;
};

// Reverse-mode gradients of a scalar loss given dLoss/dOutput.
Gradients mlp_backward(const Mlp& net, const ForwardCache& cache,
                       const Eigen::MatrixXd& d_output);

// In-place parameter step: net += scale * grads.
void apply_step(Mlp& net, const Gradients& grads, double scale);

// Numerically stable categorical head over a logits row.
Eigen::VectorXd softmax(const Eigen::VectorXd& logits);
Eigen::VectorXd log_softmax(const Eigen::VectorXd& logits);
int sample_categorical(const Eigen::VectorXd& logits, Rng& rng,
                       double* log_prob = nullptr);

// Policy (7-64-64-2) and value (7-64-64-1) networks trained together.
struct PolicyValueNets {
  Mlp policy;
  Mlp value;

  static PolicyValueNets init(std::uint64_t seed,
                              int obs_dim = 7, int hidden = 64,
                              int actions = 2);
};

// Versioned JSON checkpoint with row-major weight arrays. Round-trips are
// bit-exact.
nlohmann::json checkpoint_to_json(const PolicyValueNets& nets);
PolicyValueNets checkpoint_from_json(const nlohmann::json& doc);
void save_checkpoint(const PolicyValueNets& nets, const std::string& path);
PolicyValueNets load_checkpoint(const std::string& path);

}  // namespace evsim
