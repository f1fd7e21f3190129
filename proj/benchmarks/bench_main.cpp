#include <array>
#include <cmath>

#include <benchmark/benchmark.h>

#include "evsim/config.hpp"
#include "evsim/env.hpp"
#include "evsim/learner.hpp"
#include "evsim/mlp.hpp"
#include "evsim/policy.hpp"
#include "evsim/world.hpp"

using namespace evsim;

namespace {

const EnvConfig& shared_env_config() {
  static const EnvConfig cfg = [] {
    SimConfig sim;
    return sim.build_env();
  }();
  return cfg;
}

void BM_EnvStep(benchmark::State& state) {
  Env env(shared_env_config());
  Observation obs = env.reset(1);
  ThresholdPolicy policy(0.10);
  Rng unused(1);
  for (auto _ : state) {
    if (env.done()) obs = env.reset(1);
    const StepResult sr = env.step(policy.act(obs, unused));
    benchmark::DoNotOptimize(sr.reward);
    obs = sr.obs;
  }
}
BENCHMARK(BM_EnvStep);

void BM_EpisodeFullWeek(benchmark::State& state) {
  ThresholdPolicy policy(0.10);
  Rng unused(1);
  for (auto _ : state) {
    Env env(shared_env_config());
    Observation obs = env.reset(1);
    double total = 0;
    while (!env.done()) {
      const StepResult sr = env.step(policy.act(obs, unused));
      total += sr.reward;
      obs = sr.obs;
    }
    benchmark::DoNotOptimize(total);
  }
}
BENCHMARK(BM_EpisodeFullWeek)->Unit(benchmark::kMillisecond);

void BM_ChargeSession(benchmark::State& state) {
  const GridSchedule schedule = GridSchedule::defaults();
  ChargingStation station;
  double clock = 0;
  for (auto _ : state) {
    Battery battery{100.0, 12.5};
    const ChargingSession s =
        charge_session(battery, station, 0, clock, schedule);
    benchmark::DoNotOptimize(s.cost_usd);
    clock += 137.0;
    if (clock > 10080.0) clock -= 10080.0;
  }
}
BENCHMARK(BM_ChargeSession);

void BM_TripSample(benchmark::State& state) {
  const EnvConfig& cfg = shared_env_config();
  Rng rng(3);
  int zone = 0;
  double clock = 0;
  for (auto _ : state) {
    const TripRequest t = cfg.trips->sample(zone, clock, rng);
    benchmark::DoNotOptimize(t.fare_usd);
    zone = t.destination;
    clock += 11.0;
    if (clock > 10080.0) clock -= 10080.0;
  }
}
BENCHMARK(BM_TripSample);

void BM_MlpForward(benchmark::State& state) {
  Rng rng(5);
  const Mlp net = Mlp::glorot({7, 64, 64, 2}, rng);
  Eigen::MatrixXd x(static_cast<int>(state.range(0)), 7);
  for (int i = 0; i < x.size(); ++i) x.data()[i] = uniform01(rng);
  for (auto _ : state) {
    benchmark::DoNotOptimize(mlp_forward(net, x).sum());
  }
}
BENCHMARK(BM_MlpForward)->Arg(1)->Arg(256)->Arg(4096);

void BM_MlpBackward(benchmark::State& state) {
  Rng rng(6);
  const Mlp net = Mlp::glorot({7, 64, 64, 2}, rng);
  const int n = static_cast<int>(state.range(0));
  Eigen::MatrixXd x(n, 7);
  Eigen::MatrixXd d(n, 2);
  for (int i = 0; i < x.size(); ++i) x.data()[i] = uniform01(rng);
  for (int i = 0; i < d.size(); ++i) d.data()[i] = uniform01(rng) - 0.5;
  for (auto _ : state) {
    ForwardCache cache;
    mlp_forward(net, x, &cache);
    const Gradients grads = mlp_backward(net, cache, d);
    benchmark::DoNotOptimize(grads.dW.back().sum());
  }
}
BENCHMARK(BM_MlpBackward)->Arg(256)->Arg(4096);

void BM_PolicyUpdate(benchmark::State& state) {
  PolicyValueNets nets = PolicyValueNets::init(7);
  LearnerConfig lc;
  lc.batch_size = 4096;
  Rng rng(8);
  Trajectory batch;
  for (int i = 0; i < lc.batch_size; ++i) {
    std::array<double, Observation::kDim> obs{};
    for (double& v : obs) v = uniform01(rng);
    batch.obs.push_back(obs);
    batch.actions.push_back(static_cast<int>(uniform_index(rng, 2)));
    batch.rewards.push_back(uniform01(rng) * 10.0);
    batch.log_probs.push_back(std::log(0.5));
    batch.values.push_back(0.0);
    batch.ends.push_back(i % 500 == 499 ? 1 : 0);
  }
  batch.ends.back() = 1;
  for (auto _ : state) {
    PolicyValueNets copy = nets;
    const UpdateDiag diag = policy_update(copy, batch, lc);
    benchmark::DoNotOptimize(diag.kl);
  }
}
BENCHMARK(BM_PolicyUpdate)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
