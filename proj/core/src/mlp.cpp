#include "evsim/mlp.hpp"

#include <cmath>
#include <fstream>

#include <nlohmann/json.hpp>

#include "evsim/errors.hpp"

namespace evsim {

using nlohmann::json;

Mlp Mlp::zeros(std::vector<int> sizes) {
  Mlp net;
  net.sizes = std::move(sizes);
  for (std::size_t l = 0; l + 1 < net.sizes.size(); ++l) {
    net.W.emplace_back(Eigen::MatrixXd::Zero(net.sizes[l + 1], net.sizes[l]));
    net.b.emplace_back(Eigen::VectorXd::Zero(net.sizes[l + 1]));
  }
  return net;
}

Mlp Mlp::glorot(std::vector<int> sizes, Rng& rng, double out_scale) {
  Mlp net = zeros(std::move(sizes));
  for (int l = 0; l < net.layer_count(); ++l) {
    int fan_in = net.sizes[l];
    int fan_out = net.sizes[l + 1];
    double limit = std::sqrt(6.0 / (fan_in + fan_out));
    if (l == net.layer_count() - 1) limit *= out_scale;
    for (int r = 0; r < net.W[l].rows(); ++r) {
      for (int c = 0; c < net.W[l].cols(); ++c) {
        net.W[l](r, c) = (2.0 * uniform01(rng) - 1.0) * limit;
      }
    }
  }
  return net;
}

bool Mlp::all_finite() const {
  for (const auto& w : W) {
    if (!w.allFinite()) return false;
  }
  for (const auto& v : b) {
    if (!v.allFinite()) return false;
  }
  return true;
}

double Mlp::max_abs_diff(const Mlp& other) const {
  double m = 0;
  for (std::size_t l = 0; l < W.size(); ++l) {
    m = std::max(m, (W[l] - other.W[l]).cwiseAbs().maxCoeff());
    m = std::max(m, (b[l] - other.b[l]).cwiseAbs().maxCoeff());
  }
  return m;
}

Eigen::MatrixXd mlp_forward(const Mlp& net, const Eigen::MatrixXd& inputs,
                            ForwardCache* cache) {
  if (inputs.cols() != net.input_dim()) {
    throw InvalidParamsError("mlp input width mismatch");
  }
  if (cache) {
    cache->h.clear();
    cache->h.push_back(inputs);
  }
  Eigen::MatrixXd h = inputs;
  for (int l = 0; l < net.layer_count(); ++l) {
    Eigen::MatrixXd z =
        (h * net.W[l].transpose()).rowwise() + net.b[l].transpose();
    h = (l + 1 < net.layer_count()) ? z.array().tanh().matrix() : z;
    if (cache) cache->h.push_back(h);
  }
  if (!h.allFinite()) throw NonFiniteError("mlp forward produced non-finite");
  return h;
}

Gradients Gradients::zeros_like(const Mlp& net) {
  Gradients g;
  for (int l = 0; l < net.layer_count(); ++l) {
    g.dW.emplace_back(Eigen::MatrixXd::Zero(net.W[l].rows(), net.W[l].cols()));
    g.db.emplace_back(Eigen::VectorXd::Zero(net.b[l].size()));
  }
  return g;
}

bool Gradients::all_finite() const {
  for (const auto& w : dW) {
    if (!w.allFinite()) return false;
  }
  for (const auto& v : db) {
    if (!v.allFinite()) return false;
  }
  return true;
}

Gradients mlp_backward(const Mlp& net, const ForwardCache& cache,
                       const Eigen::MatrixXd& d_output) {
  const int L = net.layer_count();
  Gradients g;
  g.dW.resize(L);
  g.db.resize(L);
  Eigen::MatrixXd delta = d_output;
  for (int l = L - 1; l >= 0; --l) {
    g.dW[l] = delta.transpose() * cache.h[l];
    g.db[l] = delta.colwise().sum();
    if (l > 0) {
      // tanh'(z) = 1 - tanh(z)^2, and cache.h[l] holds tanh(z).
      delta = (delta * net.W[l]).cwiseProduct(
          (1.0 - cache.h[l].array().square()).matrix());
    }
  }
  if (!g.all_finite()) throw NonFiniteError("mlp backward produced non-finite");
  return g;
}

void apply_step(Mlp& net, const Gradients& grads, double scale) {
  for (int l = 0; l < net.layer_count(); ++l) {
    net.W[l] += scale * grads.dW[l];
    net.b[l] += scale * grads.db[l];
  }
}

Eigen::VectorXd log_softmax(const Eigen::VectorXd& logits) {
  double m = logits.maxCoeff();
  Eigen::ArrayXd shifted = logits.array() - m;
  double lse = std::log(shifted.exp().sum());
  return (shifted - lse).matrix();
}

Eigen::VectorXd softmax(const Eigen::VectorXd& logits) {
  return log_softmax(logits).array().exp().matrix();
}

int sample_categorical(const Eigen::VectorXd& logits, Rng& rng,
                       double* log_prob) {
  Eigen::VectorXd logp = log_softmax(logits);
  Eigen::VectorXd p = logp.array().exp().matrix();
  double u = uniform01(rng);
  double acc = 0;
  int action = static_cast<int>(p.size()) - 1;
  for (int i = 0; i < p.size(); ++i) {
    acc += p[i];
    if (u < acc) {
      action = i;
      break;
    }
  }
  if (log_prob) *log_prob = logp[action];
  return action;
}

PolicyValueNets PolicyValueNets::init(std::uint64_t seed, int obs_dim,
                                      int hidden, int actions) {
  Rng rng(mix_seed(seed));
  PolicyValueNets nets;
  nets.policy = Mlp::glorot({obs_dim, hidden, hidden, actions}, rng);
  nets.value = Mlp::glorot({obs_dim, hidden, hidden, 1}, rng, 1.0);
  return nets;
}

namespace {

json net_to_json(const Mlp& net) {
  json out;
  for (int l = 0; l < net.layer_count(); ++l) {
    std::vector<double> w(net.W[l].size());
    // row-major export
    for (int r = 0; r < net.W[l].rows(); ++r) {
      for (int c = 0; c < net.W[l].cols(); ++c) {
        w[static_cast<std::size_t>(r) * net.W[l].cols() + c] = net.W[l](r, c);
      }
    }
    std::vector<double> bias(net.b[l].data(), net.b[l].data() + net.b[l].size());
    out["W" + std::to_string(l + 1)] = w;
    out["b" + std::to_string(l + 1)] = bias;
  }
  return out;
}

Mlp net_from_json(const std::vector<int>& sizes, const json& doc) {
  Mlp net = Mlp::zeros(sizes);
  for (int l = 0; l < net.layer_count(); ++l) {
    const auto w = doc.at("W" + std::to_string(l + 1)).get<std::vector<double>>();
    const auto bias =
        doc.at("b" + std::to_string(l + 1)).get<std::vector<double>>();
    if (w.size() != static_cast<std::size_t>(net.W[l].size()) ||
        bias.size() != static_cast<std::size_t>(net.b[l].size())) {
      throw ParseError("checkpoint layer shape mismatch");
    }
    for (int r = 0; r < net.W[l].rows(); ++r) {
      for (int c = 0; c < net.W[l].cols(); ++c) {
        net.W[l](r, c) = w[static_cast<std::size_t>(r) * net.W[l].cols() + c];
      }
    }
    for (int i = 0; i < net.b[l].size(); ++i) net.b[l][i] = bias[i];
  }
  return net;
}

}  // namespace

json checkpoint_to_json(const PolicyValueNets& nets) {
  return json{
      {"version", 1},
      {"arch",
       {{"policy_sizes", nets.policy.sizes}, {"value_sizes", nets.value.sizes}}},
      {"policy", net_to_json(nets.policy)},
      {"value", net_to_json(nets.value)},
  };
}

PolicyValueNets checkpoint_from_json(const json& doc) {
  if (!doc.is_object() || doc.value("version", 0) != 1) {
    throw ParseError("unsupported checkpoint document");
  }
  PolicyValueNets nets;
  auto psizes = doc.at("arch").at("policy_sizes").get<std::vector<int>>();
  auto vsizes = doc.at("arch").at("value_sizes").get<std::vector<int>>();
  nets.policy = net_from_json(psizes, doc.at("policy"));
  nets.value = net_from_json(vsizes, doc.at("value"));
  return nets;
}

void save_checkpoint(const PolicyValueNets& nets, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write checkpoint: " + path);
  out << checkpoint_to_json(nets).dump(2) << '\n';
  if (!out) throw IoError("short write: " + path);
}

PolicyValueNets load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open checkpoint: " + path);
  json doc;
  try {
    in >> doc;
  } catch (const json::exception& e) {
    throw ParseError(std::string("checkpoint JSON: ") + e.what());
  }
  return checkpoint_from_json(doc);
}

}  // namespace evsim
