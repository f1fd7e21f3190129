#include "evsim/policy.hpp"

#include <cstdio>
#include <utility>

#include "evsim/errors.hpp"

namespace evsim {

ThresholdPolicy::ThresholdPolicy(double threshold) : threshold_(threshold) {
  if (threshold < 0 || threshold > 1) {
    throw InvalidParamsError("threshold must be in [0, 1]");
  }
}

std::string ThresholdPolicy::describe() const {
  char buf[32];
  std::snprintf(buf, sizeof buf, "heuristic:%.4g", threshold_);
  return buf;
}

MlpPolicy::MlpPolicy(Mlp policy_net, Mode mode)
    : net_(std::move(policy_net)), mode_(mode) {
  if (net_.output_dim() != 2) {
    throw InvalidParamsError("policy net must emit 2 action logits");
  }
  if (net_.input_dim() != Observation::kDim) {
    throw InvalidParamsError("policy net must accept 7 features");
  }
}

Action MlpPolicy::act(const Observation& obs, Rng& rng) {
  auto features = obs.array();
  Eigen::MatrixXd x(1, Observation::kDim);
  for (int i = 0; i < Observation::kDim; ++i) x(0, i) = features[i];
  Eigen::VectorXd logits = mlp_forward(net_, x).row(0);
  int a;
  if (mode_ == Mode::Argmax) {
    a = logits[0] >= logits[1] ? 0 : 1;
  } else {
    a = sample_categorical(logits, rng);
  }
  return static_cast<Action>(a);
}

std::string MlpPolicy::describe() const {
  return mode_ == Mode::Argmax ? "mlp:argmax" : "mlp:sample";
}

std::unique_ptr<Policy> make_policy(const std::string& spec,
                                    MlpPolicy::Mode mode) {
  constexpr const char* kPrefix = "heuristic:";
  if (spec.rfind(kPrefix, 0) == 0) {
    std::string arg = spec.substr(std::string(kPrefix).size());
    char* end = nullptr;
    double lambda = std::strtod(arg.c_str(), &end);
    if (arg.empty() || end != arg.c_str() + arg.size()) {
      throw InvalidParamsError("bad heuristic spec: " + spec);
    }
    return std::make_unique<ThresholdPolicy>(lambda);
  }
  PolicyValueNets nets = load_checkpoint(spec);
  return std::make_unique<MlpPolicy>(std::move(nets.policy), mode);
}

}  // namespace evsim
