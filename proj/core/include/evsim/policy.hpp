#pragma once

#include <memory>
#include <string>

#include "evsim/env.hpp"
#include "evsim/mlp.hpp"
#include "evsim/rng.hpp"

namespace evsim {

class Policy {
 public:
  virtual ~Policy() = default;
  virtual Action act(const Observation& obs, Rng& rng) = 0;
  virtual std::string describe() const = 0;
};

// Charges whenever battery fraction falls strictly below the threshold.
class ThresholdPolicy final : public Policy {
 public:
  explicit ThresholdPolicy(double threshold);

  Action act(const Observation& obs, Rng&) override {
    return obs.battery_frac < threshold_ ? Action::Charge : Action::AcceptRide;
  }
  std::string describe() const override;
  double threshold() const { return threshold_; }

 private:
  double threshold_;
};

// Categorical head over the policy net. Argmax for evaluation, sampling for
// rollout collection.
class MlpPolicy final : public Policy {
 public:
  enum class Mode { Argmax, Sample };

  MlpPolicy(Mlp policy_net, Mode mode);

  Action act(const Observation& obs, Rng& rng) override;
  std::string describe() const override;

  const Mlp& net() const { return net_; }

 private:
  Mlp net_;
  Mode mode_;
};

// Parses "heuristic:<lambda>" or a checkpoint path.
// Throws InvalidParamsError on a bad spec.
std::unique_ptr<Policy> make_policy(const std::string& spec,
                                    MlpPolicy::Mode mode = MlpPolicy::Mode::Argmax);

}  // namespace evsim
