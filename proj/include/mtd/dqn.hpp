#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "mtd/config.hpp"
#include "mtd/policy.hpp"
#include "mtd/qnetwork.hpp"

namespace mtd {

/// One transition, stored with already normalized observations.
struct Experience {
  Eigen::VectorXd obs;
  int action = 0;
  Eigen::VectorXd next_obs;
  double reward = 0.0;
  bool truncated = false;  // last step of an episode (time limit, not terminal)
};

/// Fixed-capacity ring buffer; once full, each push overwrites the oldest entry.
class ReplayBuffer {
 public:
  explicit ReplayBuffer(std::size_t capacity);

  void push(Experience e);
  std::size_t size() const { return items_.size(); }
  std::size_t capacity() const { return capacity_; }
  /// i = 0 is the oldest stored transition.
  const Experience& at(std::size_t i) const;

  /// `count` indices drawn uniformly with replacement.
  std::vector<const Experience*> sample(std::size_t count, Rng& rng) const;

 private:
  std::size_t capacity_;
  std::size_t next_ = 0;
  std::vector<Experience> items_;
};

/// Linear decay from 1 at step 0 to epsilon_final at
/// epsilon_fraction * total_steps, flat afterwards.
double epsilon_at(const TrainConfig& tc, long total_steps, long step);

/// r + gamma * max_a' Q(next, a'). Truncated transitions keep the bootstrap.
std::vector<double> td_targets(std::span<const Experience* const> batch, const QNetwork& net,
                               double gamma);

/// One optimizer update on the batch; returns the loss before the update.
/// `target_net` (may be null) supplies the bootstrap values. Throws
/// NumericalError if the loss or any parameter stops being finite.
double train_step(QNetwork& net, Optimizer& optimizer, std::span<const Experience* const> batch,
                  double gamma, const QNetwork* target_net = nullptr);

struct LearningPoint {
  long step = 0;  // global environment steps after the episode
  int episode = 0;
  double return_discounted = 0.0;
  double return_raw = 0.0;
};

struct BestResponse {
  PurePolicy policy;
  std::shared_ptr<const QNetwork> network;
  std::vector<LearningPoint> curve;
};

using EpisodeCallback = std::function<void(const LearningPoint&)>;

/// Deep Q-learning against a frozen opponent mixture. The opponent's pure
/// policy is drawn once per episode. All randomness derives from `seed`.
BestResponse train_best_response(Player learner, const std::vector<PurePolicy>& opponents,
                                 const MixedStrategy& opponent_mix, const Config& config,
                                 std::uint64_t seed, std::string label,
                                 const EpisodeCallback& on_episode = {});

}  // namespace mtd
