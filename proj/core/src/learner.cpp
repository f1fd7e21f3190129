#include "evsim/learner.hpp"

#include <algorithm>
#include <cmath>
#include <thread>

#include "evsim/errors.hpp"

namespace evsim {

void LearnerConfig::validate() const {
  if (discount < 0 || discount >= 1) {
    throw InvalidConfigError("discount must be in [0, 1)");
  }
  if (batch_size < 1) throw InvalidConfigError("batch_size must be >= 1");
  if (kl_limit <= 0) throw InvalidConfigError("kl_limit must be > 0");
  if (surrogate_epochs < 1 || value_epochs < 0) {
    throw InvalidConfigError("epoch counts out of range");
  }
  if (policy_lr <= 0 || value_lr <= 0) {
    throw InvalidConfigError("learning rates must be positive");
  }
  if (episodes < 0) throw InvalidConfigError("episodes must be >= 0");
  if (workers < 1) throw InvalidConfigError("workers must be >= 1");
}

void Trajectory::append(const Trajectory& other) {
  obs.insert(obs.end(), other.obs.begin(), other.obs.end());
  actions.insert(actions.end(), other.actions.begin(), other.actions.end());
  rewards.insert(rewards.end(), other.rewards.begin(), other.rewards.end());
  log_probs.insert(log_probs.end(), other.log_probs.begin(),
                   other.log_probs.end());
  values.insert(values.end(), other.values.begin(), other.values.end());
  ends.insert(ends.end(), other.ends.begin(), other.ends.end());
}

std::vector<double> discounted_returns(std::span<const double> rewards,
                                       std::span<const std::uint8_t> ends,
                                       double discount) {
  if (discount < 0 || discount >= 1) {
    throw InvalidParamsError("discount must be in [0, 1)");
  }
  if (rewards.size() != ends.size()) {
    throw InvalidParamsError("rewards/ends length mismatch");
  }
  std::vector<double> returns(rewards.size());
  double running = 0;
  for (std::size_t i = rewards.size(); i-- > 0;) {
    if (ends[i]) running = 0;
    running = rewards[i] + discount * running;
    returns[i] = running;
  }
  return returns;
}

std::vector<double> advantages(std::span<const double> returns,
                               std::span<const double> values) {
  if (returns.size() != values.size()) {
    throw InvalidParamsError("returns/values length mismatch");
  }
  const std::size_t n = returns.size();
  std::vector<double> adv(n);
  double mean = 0;
  for (std::size_t i = 0; i < n; ++i) {
    adv[i] = returns[i] - values[i];
    mean += adv[i];
  }
  if (n == 0) return adv;
  mean /= static_cast<double>(n);
  double var = 0;
  for (double a : adv) var += (a - mean) * (a - mean);
  var /= static_cast<double>(n);
  double denom = std::sqrt(var) + 1e-8;
  for (double& a : adv) a = (a - mean) / denom;
  return adv;
}

namespace {

Eigen::MatrixXd obs_matrix(const Trajectory& batch) {
  const auto n = static_cast<Eigen::Index>(batch.size());
  Eigen::MatrixXd x(n, Observation::kDim);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (int j = 0; j < Observation::kDim; ++j) x(i, j) = batch.obs[i][j];
  }
  return x;
}

// Row-wise log-softmax of a logits matrix.
Eigen::MatrixXd log_softmax_rows(const Eigen::MatrixXd& logits) {
  Eigen::MatrixXd out(logits.rows(), logits.cols());
  for (Eigen::Index i = 0; i < logits.rows(); ++i) {
    double m = logits.row(i).maxCoeff();
    Eigen::ArrayXd shifted = logits.row(i).array() - m;
    out.row(i) = (shifted - std::log(shifted.exp().sum())).matrix();
  }
  return out;
}

double mean_kl(const Eigen::MatrixXd& logp_old,
               const Eigen::MatrixXd& logp_new) {
  double total = 0;
  for (Eigen::Index i = 0; i < logp_old.rows(); ++i) {
    for (Eigen::Index j = 0; j < logp_old.cols(); ++j) {
      total += std::exp(logp_old(i, j)) * (logp_old(i, j) - logp_new(i, j));
    }
  }
  return total / static_cast<double>(logp_old.rows());
}

double surrogate_value(const Eigen::MatrixXd& logp_new,
                       const Trajectory& batch,
                       const std::vector<double>& adv) {
  double total = 0;
  for (std::size_t i = 0; i < batch.size(); ++i) {
    double ratio =
        std::exp(logp_new(static_cast<Eigen::Index>(i), batch.actions[i]) -
                 batch.log_probs[i]);
    total += ratio * adv[i];
  }
  return total / static_cast<double>(batch.size());
}

}  // namespace

UpdateDiag policy_update(PolicyValueNets& nets, const Trajectory& batch,
                         const LearnerConfig& config) {
  config.validate();
  const auto n = static_cast<Eigen::Index>(batch.size());
  if (n < config.batch_size) {
    throw InvalidParamsError("batch smaller than configured batch_size");
  }

  const Eigen::MatrixXd x = obs_matrix(batch);
  const std::vector<double> returns =
      discounted_returns(batch.rewards, batch.ends, config.discount);
  const std::vector<double> adv = advantages(returns, batch.values);

  const PolicyValueNets backup = nets;
  UpdateDiag diag;
  try {
    // ---- policy: surrogate ascent under a mean-KL gate ----
    const Eigen::MatrixXd logp_old = log_softmax_rows(mlp_forward(nets.policy, x));

    ForwardCache cache;
    Eigen::MatrixXd logp_cur = log_softmax_rows(mlp_forward(nets.policy, x, &cache));
    const double surrogate0 = surrogate_value(logp_cur, batch, adv);
    double surrogate_cur = surrogate0;
    double kl_cur = 0;

    for (int epoch = 0; epoch < config.surrogate_epochs; ++epoch) {
      Eigen::MatrixXd d_logits(n, nets.policy.output_dim());
      for (Eigen::Index i = 0; i < n; ++i) {
        const int a = batch.actions[i];
        const double ratio = std::exp(logp_cur(i, a) - batch.log_probs[i]);
        const double coef = ratio * adv[i] / static_cast<double>(n);
        for (Eigen::Index j = 0; j < d_logits.cols(); ++j) {
          const double p = std::exp(logp_cur(i, j));
          d_logits(i, j) = coef * ((j == a ? 1.0 : 0.0) - p);
        }
      }
      const Gradients grads = mlp_backward(nets.policy, cache, d_logits);

      const Mlp before_step = nets.policy;
      apply_step(nets.policy, grads, config.policy_lr);
      logp_cur = log_softmax_rows(mlp_forward(nets.policy, x, &cache));
      const double kl = mean_kl(logp_old, logp_cur);
      if (!std::isfinite(kl)) throw NonFiniteError("non-finite KL");
      if (kl > config.kl_limit) {
        nets.policy = before_step;
        logp_cur = log_softmax_rows(mlp_forward(nets.policy, x, &cache));
        diag.reverted = true;
        break;
      }
      kl_cur = kl;
      surrogate_cur = surrogate_value(logp_cur, batch, adv);
      ++diag.epochs_used;
    }
    diag.kl = kl_cur;
    diag.surrogate_gain = surrogate_cur - surrogate0;

    // ---- value: full-batch MSE descent on the returns ----
    Eigen::Map<const Eigen::VectorXd> g(returns.data(), n);
    ForwardCache vcache;
    Eigen::VectorXd v = mlp_forward(nets.value, x, &vcache).col(0);
    diag.value_loss_before = (v - g).squaredNorm() / static_cast<double>(n);
    for (int epoch = 0; epoch < config.value_epochs; ++epoch) {
      Eigen::MatrixXd d_out = (2.0 / static_cast<double>(n)) * (v - g);
      const Gradients grads = mlp_backward(nets.value, vcache, d_out);
      apply_step(nets.value, grads, -config.value_lr);
      v = mlp_forward(nets.value, x, &vcache).col(0);
    }
    diag.value_loss_after = (v - g).squaredNorm() / static_cast<double>(n);
  } catch (const NonFiniteError&) {
    nets = backup;
    throw;
  }
  return diag;
}

namespace {

struct WorkerYield {
  Trajectory traj;
  std::vector<double> episode_rewards;
};

void collect_worker(Env& env, const Mlp& policy, const Mlp& value, Rng& rng,
                    std::uint64_t base_seed, int worker, long& episode_counter,
                    int step_quota, WorkerYield& out) {
  while (static_cast<int>(out.traj.size()) < step_quota) {
    const std::uint64_t ep_seed = split_seed(
        base_seed, (static_cast<std::uint64_t>(worker + 1) << 40) +
                       static_cast<std::uint64_t>(episode_counter));
    ++episode_counter;
    Observation obs = env.reset(ep_seed);
    double total = 0;
    bool done = false;
    while (!done) {
      const auto features = obs.array();
      Eigen::MatrixXd row(1, Observation::kDim);
      for (int j = 0; j < Observation::kDim; ++j) row(0, j) = features[j];
      const Eigen::VectorXd logits = mlp_forward(policy, row).row(0);
      const double v = mlp_forward(value, row)(0, 0);
      double logp = 0;
      const int a = sample_categorical(logits, rng, &logp);

      const StepResult sr = env.step(static_cast<Action>(a));
      out.traj.obs.push_back(features);
      out.traj.actions.push_back(a);
      out.traj.rewards.push_back(sr.reward);
      out.traj.log_probs.push_back(logp);
      out.traj.values.push_back(v);
      out.traj.ends.push_back(sr.done ? 1 : 0);
      total += sr.reward;
      obs = sr.obs;
      done = sr.done;
    }
    out.episode_rewards.push_back(total);
  }
}

}  // namespace

TrainResult train(const EnvFactory& make_env, const LearnerConfig& config,
                  const std::function<void(int, const UpdateDiag&)>& progress) {
  config.validate();
  TrainResult result;
  result.nets = PolicyValueNets::init(config.seed);

  std::vector<Env> envs;
  std::vector<Rng> rngs;
  std::vector<long> episode_counters(config.workers, 0);
  envs.reserve(config.workers);
  for (int w = 0; w < config.workers; ++w) {
    envs.push_back(make_env(w));
    rngs.emplace_back(split_seed(config.seed, 0xAC710000ULL + w));
  }

  const int quota = (config.batch_size + config.workers - 1) / config.workers;
  int episodes_done = 0;
  while (episodes_done < config.episodes) {
    const Mlp policy_snapshot = result.nets.policy;
    const Mlp value_snapshot = result.nets.value;
    std::vector<WorkerYield> yields(config.workers);

    if (config.workers == 1) {
      collect_worker(envs[0], policy_snapshot, value_snapshot, rngs[0],
                     config.seed, 0, episode_counters[0], config.batch_size,
                     yields[0]);
    } else {
      std::vector<std::thread> threads;
      threads.reserve(config.workers);
      for (int w = 0; w < config.workers; ++w) {
        threads.emplace_back([&, w] {
          collect_worker(envs[w], policy_snapshot, value_snapshot, rngs[w],
                         config.seed, w, episode_counters[w], quota, yields[w]);
        });
      }
      for (auto& t : threads) t.join();
    }

    Trajectory batch;
    for (int w = 0; w < config.workers; ++w) {
      batch.append(yields[w].traj);
      result.episode_rewards.insert(result.episode_rewards.end(),
                                    yields[w].episode_rewards.begin(),
                                    yields[w].episode_rewards.end());
      episodes_done += static_cast<int>(yields[w].episode_rewards.size());
    }

    const UpdateDiag diag = policy_update(result.nets, batch, config);
    result.updates.push_back(diag);
    if (progress) progress(episodes_done, diag);
  }
  return result;
}

}  // namespace evsim
