#include "mtd/qnetwork.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace mtd {

Eigen::VectorXd normalize_observation(const Observation& obs, int downtime) {
  const int m = obs.num_servers();
  Eigen::VectorXd x(m * kObsFields);
  const double inv_downtime = 1.0 / downtime;
  auto scaled = [](int v, double scale) { return std::min(1.0, v / scale); };
  for (int i = 0; i < m; ++i) {
    const int base = i * kObsFields;
    x[base + 0] = obs.status(i);
    x[base + 1] = obs.time_to_up(i) * inv_downtime;
    x[base + 2] = scaled(obs.progress(i), 30.0);
    if (obs.player == Player::kAdversary) {
      x[base + 3] = obs.control(i);
      x[base + 4] = scaled(obs.adversary_time_since_probe(i), 100.0);
    } else {
      x[base + 3] = scaled(obs.defender_time_since_probe(i), 100.0);
      x[base + 4] = scaled(obs.time_since_reimage(i), 100.0);
    }
  }
  return x;
}

QNetwork::QNetwork(std::vector<int> layer_sizes) {
  if (layer_sizes.size() < 2) throw std::invalid_argument("network needs at least two layer sizes");
  for (std::size_t l = 1; l < layer_sizes.size(); ++l) {
    if (layer_sizes[l - 1] < 1 || layer_sizes[l] < 1) {
      throw std::invalid_argument("layer sizes must be positive");
    }
    layers_.push_back({Eigen::MatrixXd::Zero(layer_sizes[l], layer_sizes[l - 1]),
                       Eigen::VectorXd::Zero(layer_sizes[l])});
  }
}

QNetwork QNetwork::for_servers(int num_servers, int hidden) {
  return QNetwork({kObsFields * num_servers, hidden, hidden, num_servers + 1});
}

void QNetwork::initialize(Rng& rng) {
  for (auto& layer : layers_) {
    const double limit =
        std::sqrt(6.0 / static_cast<double>(layer.weights.rows() + layer.weights.cols()));
    std::uniform_real_distribution<double> dist(-limit, limit);
    for (Eigen::Index c = 0; c < layer.weights.cols(); ++c) {
      for (Eigen::Index r = 0; r < layer.weights.rows(); ++r) layer.weights(r, c) = dist(rng);
    }
    layer.bias.setZero();
  }
}

std::vector<int> QNetwork::layer_sizes() const {
  std::vector<int> sizes{input_size()};
  for (const auto& layer : layers_) sizes.push_back(static_cast<int>(layer.weights.rows()));
  return sizes;
}

Eigen::VectorXd QNetwork::forward(const Eigen::VectorXd& input) const {
  if (input.size() != input_size()) {
    throw std::invalid_argument("network input has length " + std::to_string(input.size()) +
                                ", expected " + std::to_string(input_size()));
  }
  Eigen::VectorXd h = input;
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    Eigen::VectorXd z = layers_[l].weights * h + layers_[l].bias;
    h = l + 1 < layers_.size() ? Eigen::VectorXd(z.array().tanh()) : z;
  }
  return h;
}

Eigen::MatrixXd QNetwork::forward_batch(const Eigen::MatrixXd& inputs) const {
  if (inputs.rows() != input_size()) throw std::invalid_argument("batch input size mismatch");
  Eigen::MatrixXd h = inputs;
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    Eigen::MatrixXd z = (layers_[l].weights * h).colwise() + layers_[l].bias;
    h = l + 1 < layers_.size() ? Eigen::MatrixXd(z.array().tanh()) : z;
  }
  return h;
}

int QNetwork::greedy_action(const Eigen::VectorXd& input) const {
  const Eigen::VectorXd q = forward(input);
  int best = 0;
  for (int a = 1; a < q.size(); ++a) {
    if (q[a] > q[best]) best = a;
  }
  return best;
}

double QNetwork::loss_and_gradient(const Eigen::MatrixXd& inputs, std::span<const int> actions,
                                   std::span<const double> targets,
                                   ParameterSet* gradient) const {
  const auto batch = inputs.cols();
  if (batch == 0 || static_cast<std::size_t>(batch) != actions.size() ||
      actions.size() != targets.size()) {
    throw std::invalid_argument("batch inputs, actions and targets must be nonempty and aligned");
  }
  // Keep every layer's activation for the backward pass.
  std::vector<Eigen::MatrixXd> activations{inputs};
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    Eigen::MatrixXd z = (layers_[l].weights * activations.back()).colwise() + layers_[l].bias;
    activations.push_back(l + 1 < layers_.size() ? Eigen::MatrixXd(z.array().tanh()) : z);
  }
  const Eigen::MatrixXd& q = activations.back();

  Eigen::MatrixXd delta = Eigen::MatrixXd::Zero(q.rows(), batch);
  double loss = 0.0;
  for (Eigen::Index i = 0; i < batch; ++i) {
    const int a = actions[i];
    if (a < 0 || a >= q.rows()) throw std::out_of_range("action index outside network output");
    const double err = targets[i] - q(a, i);
    loss += err * err;
    delta(a, i) = -2.0 * err / static_cast<double>(batch);
  }
  loss /= static_cast<double>(batch);

  if (gradient != nullptr) {
    if (gradient->layers.size() != layers_.size()) *gradient = zeros_like();
    for (std::size_t l = layers_.size(); l-- > 0;) {
      gradient->layers[l].weights.noalias() = delta * activations[l].transpose();
      gradient->layers[l].bias = delta.rowwise().sum();
      if (l > 0) {
        Eigen::MatrixXd back = layers_[l].weights.transpose() * delta;
        delta = back.array() * (1.0 - activations[l].array().square());
      }
    }
  }
  return loss;
}

ParameterSet QNetwork::zeros_like() const {
  ParameterSet p;
  for (const auto& layer : layers_) {
    p.layers.push_back({Eigen::MatrixXd::Zero(layer.weights.rows(), layer.weights.cols()),
                        Eigen::VectorXd::Zero(layer.bias.size())});
  }
  return p;
}

bool QNetwork::all_finite() const {
  return std::all_of(layers_.begin(), layers_.end(), [](const DenseLayer& l) {
    return l.weights.allFinite() && l.bias.allFinite();
  });
}

std::size_t QNetwork::parameter_count() const {
  std::size_t n = 0;
  for (const auto& l : layers_) n += l.weights.size() + l.bias.size();
  return n;
}

namespace {

template <typename Layers>
auto& locate(Layers& layers, std::size_t index) {
  for (auto& l : layers) {
    const auto w = static_cast<std::size_t>(l.weights.size());
    if (index < w) return l.weights.data()[index];
    index -= w;
    const auto b = static_cast<std::size_t>(l.bias.size());
    if (index < b) return l.bias.data()[index];
    index -= b;
  }
  throw std::out_of_range("parameter index out of range");
}

}  // namespace

double QNetwork::parameter(std::size_t index) const { return locate(layers_, index); }
void QNetwork::set_parameter(std::size_t index, double value) { locate(layers_, index) = value; }
double flat_value(const ParameterSet& params, std::size_t index) {
  return locate(params.layers, index);
}

Optimizer::Optimizer(const QNetwork& net, Options options)
    : options_(options), first_moment_(net.zeros_like()), second_moment_(net.zeros_like()) {}

void Optimizer::apply(QNetwork& net, const ParameterSet& gradient) {
  ++steps_;
  auto& layers = net.layers();
  if (!options_.adam) {
    for (std::size_t l = 0; l < layers.size(); ++l) {
      layers[l].weights -= options_.learning_rate * gradient.layers[l].weights;
      layers[l].bias -= options_.learning_rate * gradient.layers[l].bias;
    }
    return;
  }
  const double b1 = options_.beta1;
  const double b2 = options_.beta2;
  const double correction1 = 1.0 - std::pow(b1, static_cast<double>(steps_));
  const double correction2 = 1.0 - std::pow(b2, static_cast<double>(steps_));
  const double step = options_.learning_rate * std::sqrt(correction2) / correction1;
  auto update = [&](auto& param, auto& m, auto& v, const auto& g) {
    m = b1 * m + (1.0 - b1) * g;
    v = b2 * v + (1.0 - b2) * g.cwiseProduct(g);
    param.array() -= step * m.array() / (v.array().sqrt() + options_.epsilon);
  };
  for (std::size_t l = 0; l < layers.size(); ++l) {
    update(layers[l].weights, first_moment_.layers[l].weights, second_moment_.layers[l].weights,
           gradient.layers[l].weights);
    update(layers[l].bias, first_moment_.layers[l].bias, second_moment_.layers[l].bias,
           gradient.layers[l].bias);
  }
}

}  // namespace mtd
