#pragma once

#include <Eigen/Dense>
#include <span>
#include <stdexcept>
#include <vector>

#include "mtd/env.hpp"
#include "mtd/rng.hpp"

namespace mtd {

class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Maps a raw observation into the bounded network input: flags stay 0/1,
/// time_to_up is divided by the downtime, probe counts by 30 and elapsed
/// times by 100, both clamped to 1.
Eigen::VectorXd normalize_observation(const Observation& obs, int downtime);

struct DenseLayer {
  Eigen::MatrixXd weights;  // out x in
  Eigen::VectorXd bias;
};

/// Gradient (or optimizer moment) with the same shapes as a network.
struct ParameterSet {
  std::vector<DenseLayer> layers;
};

/// Feed-forward Q approximator: tanh hidden layers, linear output with one
/// entry per action index (0 = no-op, i + 1 = server i).
class QNetwork {
 public:
  QNetwork() = default;
  explicit QNetwork(std::vector<int> layer_sizes);

  /// Input 5*M, two hidden layers, output M + 1.
  static QNetwork for_servers(int num_servers, int hidden);

  /// Uniform in +-sqrt(6 / (fan_in + fan_out)); zero biases.
  void initialize(Rng& rng);

  Eigen::VectorXd forward(const Eigen::VectorXd& input) const;
  /// Column-per-sample batch forward.
  Eigen::MatrixXd forward_batch(const Eigen::MatrixXd& inputs) const;

  /// Greedy action index; ties go to the lowest index.
  int greedy_action(const Eigen::VectorXd& input) const;

  /// Mean squared TD error over the batch and its gradient. Only the
  /// predicted value of each taken action contributes.
  double loss_and_gradient(const Eigen::MatrixXd& inputs, std::span<const int> actions,
                           std::span<const double> targets, ParameterSet* gradient) const;

  int input_size() const { return static_cast<int>(layers_.front().weights.cols()); }
  int output_size() const { return static_cast<int>(layers_.back().weights.rows()); }
  std::vector<int> layer_sizes() const;

  std::vector<DenseLayer>& layers() { return layers_; }
  const std::vector<DenseLayer>& layers() const { return layers_; }

  ParameterSet zeros_like() const;
  bool all_finite() const;

  /// Flat parameter view (layer by layer, weights column-major then bias).
  std::size_t parameter_count() const;
  double parameter(std::size_t index) const;
  void set_parameter(std::size_t index, double value);

 private:
  std::vector<DenseLayer> layers_;
};

double flat_value(const ParameterSet& params, std::size_t index);

/// Adaptive-moment (Adam) or plain gradient-descent parameter updates.
class Optimizer {
 public:
  struct Options {
    bool adam = true;
    double learning_rate = 0.0005;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
  };

  Optimizer(const QNetwork& net, Options options);
  void apply(QNetwork& net, const ParameterSet& gradient);
  long steps() const { return steps_; }

 private:
  Options options_;
  ParameterSet first_moment_;
  ParameterSet second_moment_;
  long steps_ = 0;
};

}  // namespace mtd
