#include "mtd/dqn.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "mtd/env.hpp"

namespace mtd {

ReplayBuffer::ReplayBuffer(std::size_t capacity) : capacity_(capacity) {
  if (capacity == 0) throw std::invalid_argument("replay buffer capacity must be positive");
  items_.reserve(capacity);
}

void ReplayBuffer::push(Experience e) {
  if (items_.size() < capacity_) {
    items_.push_back(std::move(e));
  } else {
    items_[next_] = std::move(e);
  }
  next_ = (next_ + 1) % capacity_;
}

const Experience& ReplayBuffer::at(std::size_t i) const {
  if (i >= items_.size()) throw std::out_of_range("replay index out of range");
  // Before the first wrap next_ == size, so the oldest is at 0.
  const std::size_t oldest = items_.size() < capacity_ ? 0 : next_;
  return items_[(oldest + i) % items_.size()];
}

std::vector<const Experience*> ReplayBuffer::sample(std::size_t count, Rng& rng) const {
  if (items_.empty()) throw std::logic_error("sampling from an empty replay buffer");
  std::uniform_int_distribution<std::size_t> pick(0, items_.size() - 1);
  std::vector<const Experience*> out(count);
  for (auto& p : out) p = &items_[pick(rng)];
  return out;
}

double epsilon_at(const TrainConfig& tc, long total_steps, long step) {
  const double horizon = tc.epsilon_fraction * static_cast<double>(total_steps);
  if (step <= 0) return 1.0;
  if (static_cast<double>(step) >= horizon) return tc.epsilon_final;
  return 1.0 + (tc.epsilon_final - 1.0) * (static_cast<double>(step) / horizon);
}

namespace {

Eigen::MatrixXd stack(std::span<const Experience* const> batch, bool next) {
  const auto rows = (next ? batch[0]->next_obs : batch[0]->obs).size();
  Eigen::MatrixXd m(rows, static_cast<Eigen::Index>(batch.size()));
  for (std::size_t i = 0; i < batch.size(); ++i) {
    m.col(static_cast<Eigen::Index>(i)) = next ? batch[i]->next_obs : batch[i]->obs;
  }
  return m;
}

}  // namespace

std::vector<double> td_targets(std::span<const Experience* const> batch, const QNetwork& net,
                               double gamma) {
  if (batch.empty()) throw std::invalid_argument("empty batch");
  const Eigen::MatrixXd q_next = net.forward_batch(stack(batch, true));
  std::vector<double> targets(batch.size());
  for (std::size_t i = 0; i < batch.size(); ++i) {
    targets[i] = batch[i]->reward + gamma * q_next.col(static_cast<Eigen::Index>(i)).maxCoeff();
  }
  return targets;
}

double train_step(QNetwork& net, Optimizer& optimizer, std::span<const Experience* const> batch,
                  double gamma, const QNetwork* target_net) {
  const std::vector<double> targets = td_targets(batch, target_net ? *target_net : net, gamma);
  std::vector<int> actions(batch.size());
  for (std::size_t i = 0; i < batch.size(); ++i) actions[i] = batch[i]->action;
  ParameterSet grad;
  const double loss = net.loss_and_gradient(stack(batch, false), actions, targets, &grad);
  if (!std::isfinite(loss)) throw NumericalError("training loss is not finite");
  optimizer.apply(net, grad);
  if (!net.all_finite()) {
    throw NumericalError("network parameters became non-finite after update " +
                         std::to_string(optimizer.steps()));
  }
  return loss;
}

BestResponse train_best_response(Player learner, const std::vector<PurePolicy>& opponents,
                                 const MixedStrategy& opponent_mix, const Config& config,
                                 std::uint64_t seed, std::string label,
                                 const EpisodeCallback& on_episode) {
  config.validate();
  opponent_mix.validate();
  if (opponents.empty() || opponents.size() != opponent_mix.weights.size()) {
    throw std::invalid_argument("opponent set and mixture must be nonempty and aligned");
  }
  const Player other = learner == Player::kAdversary ? Player::kDefender : Player::kAdversary;
  for (const auto& p : opponents) {
    if (p.player() != other) throw std::invalid_argument("opponent policy plays the wrong side");
  }

  const EnvConfig& ec = config.env;
  const TrainConfig& tc = config.train;
  const int downtime = ec.downtime;
  const long total_steps = static_cast<long>(tc.episodes) * ec.horizon;

  auto net = std::make_shared<QNetwork>(QNetwork::for_servers(ec.num_servers, tc.hidden));
  Rng init_rng = make_rng(seed, "init");
  net->initialize(init_rng);
  Optimizer optimizer(*net, {tc.optimizer == OptimizerKind::kAdam, tc.learning_rate});
  std::unique_ptr<QNetwork> target;
  if (tc.target_update > 0) target = std::make_unique<QNetwork>(*net);

  ReplayBuffer buffer(static_cast<std::size_t>(tc.buffer_size));
  Rng explore_rng = make_rng(seed, "explore");
  Rng replay_rng = make_rng(seed, "replay");
  Rng mix_rng = make_rng(seed, "opponent-mix");
  const int num_actions = ec.num_servers + 1;

  MtdEnv env(ec);
  BestResponse out{PurePolicy::heuristic(learner, HeuristicKind::kNoOp, config.heuristics,
                                         ec.knowledge_gain),
                   nullptr, {}};
  long step = 0;
  for (int episode = 0; episode < tc.episodes; ++episode) {
    const std::uint64_t episode_seed = derive_seed(seed, static_cast<std::uint64_t>(episode));
    const PurePolicy& opponent = opponents[sample(opponent_mix, mix_rng)];
    Rng opponent_rng(derive_seed(episode_seed, "opponent"));
    env.reset(derive_seed(episode_seed, "env"));

    Eigen::VectorXd x = normalize_observation(env.observe(learner), downtime);
    Observation opp_obs = env.observe(other);
    double discount = 1.0;
    LearningPoint point;
    point.episode = episode;
    while (!env.done()) {
      int a;
      if (uniform01(explore_rng) < epsilon_at(tc, total_steps, step)) {
        a = uniform_index(explore_rng, num_actions);
      } else {
        a = net->greedy_action(x);
      }
      const Action mine = action_from_index(a);
      const Action theirs = opponent.act(opp_obs, env.tau(), opponent_rng);
      StepOutcome s = learner == Player::kAdversary ? env.step(mine, theirs)
                                                    : env.step(theirs, mine);
      const double r = learner == Player::kAdversary ? s.reward_adversary : s.reward_defender;
      Eigen::VectorXd next = normalize_observation(
          learner == Player::kAdversary ? s.obs_adversary : s.obs_defender, downtime);
      opp_obs = std::move(learner == Player::kAdversary ? s.obs_defender : s.obs_adversary);

      buffer.push({x, a, next, r, s.done});
      point.return_discounted += discount * r;
      point.return_raw += r;
      discount *= ec.gamma;
      x = std::move(next);
      ++step;

      if (buffer.size() >= static_cast<std::size_t>(tc.batch_size)) {
        const auto batch = buffer.sample(static_cast<std::size_t>(tc.batch_size), replay_rng);
        train_step(*net, optimizer, batch, ec.gamma, target.get());
        if (target && optimizer.steps() % tc.target_update == 0) *target = *net;
      }
    }
    point.step = step;
    out.curve.push_back(point);
    if (on_episode) on_episode(point);
  }
  out.network = net;
  out.policy = PurePolicy::q_network(learner, net, downtime, std::move(label));
  return out;
}

}  // namespace mtd
