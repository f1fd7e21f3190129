#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "evsim/env.hpp"
#include "evsim/mlp.hpp"

namespace evsim {

struct LearnerConfig {
  double discount = 0.8;
  int batch_size = 4096;
  double kl_limit = 0.01;
  int surrogate_epochs = 10;
  double policy_lr = 0.05;
  double value_lr = 1e-3;
  int value_epochs = 5;
  int episodes = 2500;
  int workers = 1;
  std::uint64_t seed = 1;

  void validate() const;
};

// On-policy batch buffer. `ends[t]` marks the final step of an episode.
struct Trajectory {
  std::vector<std::array<double, Observation::kDim>> obs;
  std::vector<int> actions;
  std::vector<double> rewards;
  std::vector<double> log_probs;
  std::vector<double> values;
  std::vector<std::uint8_t> ends;

  std::size_t size() const { return rewards.size(); }
  void append(const Trajectory& other);
};

// G_t = r_t + discount * G_{t+1}, restarting after each episode end.
std::vector<double> discounted_returns(std::span<const double> rewards,
                                       std::span<const std::uint8_t> ends,
                                       double discount);

// Baseline-subtracted advantages, normalized to zero mean / unit variance
// with a 1e-8 guard.
std::vector<double> advantages(std::span<const double> returns,
                               std::span<const double> values);

struct UpdateDiag {
  double kl = 0;              // mean KL(old || new) at the accepted params
  double surrogate_gain = 0;  // surrogate at accepted params minus at start
  int epochs_used = 0;
  bool reverted = false;
  double value_loss_before = 0;
  double value_loss_after = 0;
};

// KL-gated surrogate ascent on the policy net plus MSE descent on the value
// net. Epochs stop early (and the last step is reverted) once the mean KL
// from the collection policy exceeds kl_limit. Throws NonFiniteError and
// leaves the nets untouched if any gradient goes non-finite.
UpdateDiag policy_update(PolicyValueNets& nets, const Trajectory& batch,
                         const LearnerConfig& config);

struct TrainResult {
  PolicyValueNets nets;
  std::vector<double> episode_rewards;  // per training episode, in order
  std::vector<UpdateDiag> updates;
};

using EnvFactory = std::function<Env(int worker_index)>;

// On-policy training loop: collect whole episodes until the batch holds at
// least batch_size steps, then update. Deterministic for a fixed worker
// count. Progress callback (optional) receives (episodes_done, batch diag).
TrainResult train(const EnvFactory& make_env, const LearnerConfig& config,
                  const std::function<void(int, const UpdateDiag&)>& progress = {});

}  // namespace evsim
