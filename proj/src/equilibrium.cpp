#include "mtd/equilibrium.hpp"

#include <gmpxx.h>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <iomanip>
#include <istream>
#include <limits>
#include <map>
#include <ostream>
#include <sstream>
#include <thread>

namespace mtd {

void EmpiricalGame::validate() const {
  const auto r = static_cast<Eigen::Index>(row_labels.size());
  const auto c = static_cast<Eigen::Index>(col_labels.size());
  if (r == 0 || c == 0) throw std::invalid_argument("game needs at least one row and column");
  for (const auto* m : {&adversary, &defender, &se_adversary, &se_defender}) {
    if (m->rows() != r || m->cols() != c) throw std::invalid_argument("game matrix shape mismatch");
  }
  if (!adversary.allFinite() || !defender.allFinite()) {
    throw std::invalid_argument("game payoffs must be finite");
  }
}

EmpiricalGame make_game(const Eigen::MatrixXd& a, const Eigen::MatrixXd& d) {
  EmpiricalGame g;
  for (Eigen::Index i = 0; i < a.rows(); ++i) g.row_labels.push_back("r" + std::to_string(i));
  for (Eigen::Index j = 0; j < a.cols(); ++j) g.col_labels.push_back("c" + std::to_string(j));
  g.adversary = a;
  g.defender = d;
  g.se_adversary = Eigen::MatrixXd::Zero(a.rows(), a.cols());
  g.se_defender = Eigen::MatrixXd::Zero(a.rows(), a.cols());
  g.validate();
  return g;
}

std::uint64_t pair_seed(std::uint64_t seed, const std::string& adversary_label,
                        const std::string& defender_label) {
  return derive_seed(seed, "pair:" + adversary_label + '\x1f' + defender_label);
}

PairEvaluator monte_carlo_evaluator(const EnvConfig& config, int episodes, std::uint64_t seed) {
  return [config, episodes, seed](const PurePolicy& a, const PurePolicy& d) {
    return evaluate_pair(a, d, config, episodes, pair_seed(seed, a.label(), d.label()));
  };
}

namespace {

void check_unique(const std::vector<PurePolicy>& set) {
  std::map<std::string, int> seen;
  for (const auto& p : set) {
    if (p.label().find_first_of(",\n") != std::string::npos) {
      throw std::invalid_argument("policy label '" + p.label() + "' contains ',' or newline");
    }
    if (seen[p.label()]++) throw std::invalid_argument("duplicate policy label " + p.label());
  }
}

}  // namespace

int extend_game(EmpiricalGame& game, const std::vector<PurePolicy>& adversaries,
                const std::vector<PurePolicy>& defenders, const PairEvaluator& evaluate,
                int jobs) {
  check_unique(adversaries);
  check_unique(defenders);
  const int old_r = game.rows();
  const int old_c = game.cols();
  const int r = static_cast<int>(adversaries.size());
  const int c = static_cast<int>(defenders.size());
  if (r < old_r || c < old_c) throw std::invalid_argument("policy sets may not shrink");
  for (int i = 0; i < old_r; ++i) {
    if (adversaries[i].label() != game.row_labels[i]) {
      throw std::invalid_argument("adversary set does not extend the game rows");
    }
  }
  for (int j = 0; j < old_c; ++j) {
    if (defenders[j].label() != game.col_labels[j]) {
      throw std::invalid_argument("defender set does not extend the game columns");
    }
  }

  auto grow = [&](Eigen::MatrixXd& m) {
    Eigen::MatrixXd bigger = Eigen::MatrixXd::Zero(r, c);
    bigger.topLeftCorner(old_r, old_c) = m.topLeftCorner(old_r, old_c);
    m = std::move(bigger);
  };
  if (old_r == 0 || old_c == 0) {
    game.adversary.resize(0, 0);
    game.defender.resize(0, 0);
    game.se_adversary.resize(0, 0);
    game.se_defender.resize(0, 0);
  }
  for (auto* m : {&game.adversary, &game.defender, &game.se_adversary, &game.se_defender}) {
    grow(*m);
  }
  game.row_labels.clear();
  game.col_labels.clear();
  for (const auto& p : adversaries) game.row_labels.push_back(p.label());
  for (const auto& p : defenders) game.col_labels.push_back(p.label());

  std::vector<std::pair<int, int>> cells;
  for (int i = 0; i < r; ++i) {
    for (int j = 0; j < c; ++j) {
      if (i >= old_r || j >= old_c) cells.emplace_back(i, j);
    }
  }
  std::vector<PairEvaluation> results(cells.size());
  std::vector<std::exception_ptr> errors(cells.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t k = next++; k < cells.size(); k = next++) {
      const auto [i, j] = cells[k];
      try {
        results[k] = evaluate(adversaries[i], defenders[j]);
      } catch (...) {
        errors[k] = std::current_exception();
      }
    }
  };
  const int threads = std::clamp(jobs, 1, std::max(1, static_cast<int>(cells.size())));
  if (threads == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int t = 0; t < threads; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  for (std::size_t k = 0; k < cells.size(); ++k) {
    const auto [i, j] = cells[k];
    if (errors[k]) {
      try {
        std::rethrow_exception(errors[k]);
      } catch (const std::exception& e) {
        throw std::runtime_error("evaluating (" + adversaries[i].label() + ", " +
                                 defenders[j].label() + "): " + e.what());
      }
    }
    game.adversary(i, j) = results[k].adversary;
    game.defender(i, j) = results[k].defender;
    game.se_adversary(i, j) = results[k].se_adversary;
    game.se_defender(i, j) = results[k].se_defender;
  }
  game.validate();
  return static_cast<int>(cells.size());
}

EmpiricalGame build_game(const std::vector<PurePolicy>& adversaries,
                         const std::vector<PurePolicy>& defenders, const PairEvaluator& evaluate,
                         int jobs) {
  if (adversaries.empty() || defenders.empty()) {
    throw std::invalid_argument("build_game needs nonempty policy sets");
  }
  EmpiricalGame game;
  extend_game(game, adversaries, defenders, evaluate, jobs);
  return game;
}

std::pair<double, double> mixed_utility(const EmpiricalGame& game, const MixedStrategy& sigma_a,
                                        const MixedStrategy& sigma_d) {
  if (static_cast<int>(sigma_a.weights.size()) != game.rows() ||
      static_cast<int>(sigma_d.weights.size()) != game.cols()) {
    throw std::invalid_argument("strategy lengths do not match the game shape");
  }
  const Eigen::Map<const Eigen::VectorXd> x(sigma_a.weights.data(), game.rows());
  const Eigen::Map<const Eigen::VectorXd> y(sigma_d.weights.data(), game.cols());
  return {x.dot(game.adversary * y), x.dot(game.defender * y)};
}

std::pair<double, double> regret(const EmpiricalGame& game, const MixedStrategy& sigma_a,
                                 const MixedStrategy& sigma_d) {
  const auto [ua, ud] = mixed_utility(game, sigma_a, sigma_d);
  const Eigen::Map<const Eigen::VectorXd> x(sigma_a.weights.data(), game.rows());
  const Eigen::Map<const Eigen::VectorXd> y(sigma_d.weights.data(), game.cols());
  const double best_a = (game.adversary * y).maxCoeff();
  const double best_d = (game.defender.transpose() * x).maxCoeff();
  return {std::max(0.0, best_a - ua), std::max(0.0, best_d - ud)};
}

double default_tolerance(const EmpiricalGame& game) {
  const double scale = std::max({1.0, game.adversary.cwiseAbs().maxCoeff(),
                                 game.defender.cwiseAbs().maxCoeff()});
  return 1e-6 * scale;
}

namespace {

// Dense tableau over labels 0..m+n-1 plus a right-hand side column. Columns
// [slack_begin, slack_begin + rows) hold the basis inverse for the
// lexicographic ratio test.
struct Tableau {
  std::vector<std::vector<mpq_class>> t;
  std::vector<int> basis;
  int slack_begin = 0;
  int rhs = 0;

  // Pivots `entering` in; returns the label that leaves.
  int pivot(int entering) {
    const int rows = static_cast<int>(t.size());
    int best = -1;
    for (int i = 0; i < rows; ++i) {
      if (sgn(t[i][entering]) <= 0) continue;
      if (best < 0 || lex_less(i, best, entering)) best = i;
    }
    if (best < 0) throw SolverError("unbounded Lemke-Howson pivot");
    const mpq_class p = t[best][entering];
    for (auto& v : t[best]) v /= p;
    for (int i = 0; i < rows; ++i) {
      if (i == best || sgn(t[i][entering]) == 0) continue;
      const mpq_class f = t[i][entering];
      for (std::size_t k = 0; k < t[i].size(); ++k) t[i][k] -= f * t[best][k];
    }
    const int leaving = basis[best];
    basis[best] = entering;
    return leaving;
  }

  bool lex_less(int a, int b, int col) const {
    const mpq_class qa = t[a][rhs] / t[a][col];
    const mpq_class qb = t[b][rhs] / t[b][col];
    if (qa != qb) return qa < qb;
    const int rows = static_cast<int>(t.size());
    for (int k = slack_begin; k < slack_begin + rows; ++k) {
      const mpq_class ra = t[a][k] / t[a][col];
      const mpq_class rb = t[b][k] / t[b][col];
      if (ra != rb) return ra < rb;
    }
    return a < b;
  }

  mpq_class value(int label) const {
    for (std::size_t i = 0; i < basis.size(); ++i) {
      if (basis[i] == label) return t[i][rhs];
    }
    return 0;
  }
};

// Exact copy of m shifted so every entry is at least 1.
std::vector<std::vector<mpq_class>> positive_rational(const Eigen::MatrixXd& m) {
  const mpq_class shift = mpq_class(1) - mpq_class(m.minCoeff());
  std::vector<std::vector<mpq_class>> out(m.rows(), std::vector<mpq_class>(m.cols()));
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) out[i][j] = mpq_class(m(i, j)) + shift;
  }
  return out;
}

std::vector<double> normalized(const std::vector<mpq_class>& v) {
  mpq_class total = 0;
  for (const auto& x : v) total += x;
  if (sgn(total) <= 0) throw SolverError("Lemke-Howson returned the artificial equilibrium");
  std::vector<double> out;
  for (const auto& x : v) out.push_back(mpq_class(x / total).get_d());
  return out;
}

}  // namespace

std::pair<std::vector<double>, std::vector<double>> lemke_howson(const Eigen::MatrixXd& a,
                                                                 const Eigen::MatrixXd& d,
                                                                 int dropped_label) {
  const int m = static_cast<int>(a.rows());
  const int n = static_cast<int>(a.cols());
  if (dropped_label < 0 || dropped_label >= m + n) {
    throw std::out_of_range("dropped label out of range");
  }
  const auto pa = positive_rational(a);
  const auto pd = positive_rational(d);
  const int labels = m + n;

  // Row player's best-response polytope over y: A y + r = 1; r_i has label i.
  Tableau q;
  q.rhs = labels;
  q.slack_begin = 0;
  q.t.assign(m, std::vector<mpq_class>(labels + 1));
  for (int i = 0; i < m; ++i) {
    q.t[i][i] = 1;
    for (int j = 0; j < n; ++j) q.t[i][m + j] = pa[i][j];
    q.t[i][labels] = 1;
    q.basis.push_back(i);
  }
  // Column player's polytope over x: D' x + s = 1; s_j has label m + j.
  Tableau p;
  p.rhs = labels;
  p.slack_begin = m;
  p.t.assign(n, std::vector<mpq_class>(labels + 1));
  for (int j = 0; j < n; ++j) {
    for (int i = 0; i < m; ++i) p.t[j][i] = pd[i][j];
    p.t[j][m + j] = 1;
    p.t[j][labels] = 1;
    p.basis.push_back(m + j);
  }

  Tableau* current = dropped_label < m ? &p : &q;
  int entering = dropped_label;
  const int limit = 100000;
  for (int iter = 0; iter < limit; ++iter) {
    const int leaving = current->pivot(entering);
    if (leaving == dropped_label) {
      std::vector<mpq_class> x(m), y(n);
      for (int i = 0; i < m; ++i) x[i] = p.value(i);
      for (int j = 0; j < n; ++j) y[j] = q.value(m + j);
      return {normalized(x), normalized(y)};
    }
    current = current == &p ? &q : &p;
    entering = leaving;
  }
  throw SolverError("Lemke-Howson exceeded its pivot limit");
}

namespace {

// Mixed strategy on `support` making the opponent indifferent over
// `other_support` with respect to `payoff` (rows = support side).
bool indifference(const Eigen::MatrixXd& payoff, const std::vector<int>& support,
                  const std::vector<int>& other_support, std::size_t size,
                  std::vector<double>& out) {
  const int k = static_cast<int>(support.size());
  Eigen::MatrixXd sys = Eigen::MatrixXd::Zero(k + 1, k + 1);
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(k + 1);
  for (int r = 0; r < k; ++r) {
    for (int c = 0; c < k; ++c) sys(r, c) = payoff(support[c], other_support[r]);
    sys(r, k) = -1.0;
  }
  for (int c = 0; c < k; ++c) sys(k, c) = 1.0;
  rhs[k] = 1.0;
  Eigen::FullPivLU<Eigen::MatrixXd> lu(sys);
  if (!lu.isInvertible()) return false;
  const Eigen::VectorXd sol = lu.solve(rhs);
  out.assign(size, 0.0);
  for (int c = 0; c < k; ++c) {
    if (sol[c] < -1e-12) return false;
    out[support[c]] = std::max(0.0, sol[c]);
  }
  double total = 0.0;
  for (double v : out) total += v;
  if (total <= 0.0) return false;
  for (double& v : out) v /= total;
  return true;
}

bool next_combination(std::vector<int>& c, int n) {
  const int k = static_cast<int>(c.size());
  for (int i = k - 1; i >= 0; --i) {
    if (c[i] < n - k + i) {
      ++c[i];
      for (int j = i + 1; j < k; ++j) c[j] = c[j - 1] + 1;
      return true;
    }
  }
  return false;
}

}  // namespace

bool support_enumeration(const EmpiricalGame& game, double tolerance, MixedStrategy& sigma_a,
                         MixedStrategy& sigma_d) {
  const int m = game.rows();
  const int n = game.cols();
  for (int k = 1; k <= std::min(m, n); ++k) {
    std::vector<int> rows(k);
    for (int i = 0; i < k; ++i) rows[i] = i;
    do {
      std::vector<int> cols(k);
      for (int i = 0; i < k; ++i) cols[i] = i;
      do {
        MixedStrategy x, y;
        // x on `rows` equalizes the defender's payoffs over `cols`.
        if (!indifference(game.defender, rows, cols, m, x.weights)) continue;
        if (!indifference(game.adversary.transpose(), cols, rows, n, y.weights)) continue;
        const auto [ra, rd] = regret(game, x, y);
        if (ra <= tolerance && rd <= tolerance) {
          sigma_a = std::move(x);
          sigma_d = std::move(y);
          return true;
        }
      } while (next_combination(cols, n));
    } while (next_combination(rows, m));
  }
  return false;
}

EquilibriumResult solve_msne(const EmpiricalGame& game, double tolerance) {
  game.validate();
  if (tolerance < 0.0) tolerance = default_tolerance(game);
  EquilibriumResult out;
  auto finish = [&](MixedStrategy x, MixedStrategy y, std::string method) {
    out.sigma_a = std::move(x);
    out.sigma_d = std::move(y);
    std::tie(out.value_a, out.value_d) = mixed_utility(game, out.sigma_a, out.sigma_d);
    std::tie(out.regret_a, out.regret_d) = regret(game, out.sigma_a, out.sigma_d);
    out.method = std::move(method);
    return out;
  };
  const int labels = game.rows() + game.cols();
  for (int k = 0; k < labels; ++k) {
    try {
      auto [x, y] = lemke_howson(game.adversary, game.defender, k);
      MixedStrategy sx{std::move(x)}, sy{std::move(y)};
      const auto [ra, rd] = regret(game, sx, sy);
      if (ra <= tolerance && rd <= tolerance) {
        return finish(std::move(sx), std::move(sy), "lemke-howson label=" + std::to_string(k));
      }
    } catch (const SolverError&) {
      // try the next label
    }
  }
  if (std::min(game.rows(), game.cols()) <= 12) {
    MixedStrategy x, y;
    if (support_enumeration(game, tolerance, x, y)) {
      return finish(std::move(x), std::move(y), "support-enumeration");
    }
  }
  throw SolverError("no equilibrium within regret tolerance " + std::to_string(tolerance));
}

void write_game_csv(std::ostream& out, const EmpiricalGame& game) {
  game.validate();
  out << "adv_policy,def_policy,u_a,u_d,se_a,se_d\n";
  out << std::setprecision(std::numeric_limits<double>::max_digits10);
  for (int i = 0; i < game.rows(); ++i) {
    for (int j = 0; j < game.cols(); ++j) {
      out << game.row_labels[i] << ',' << game.col_labels[j] << ',' << game.adversary(i, j) << ','
          << game.defender(i, j) << ',' << game.se_adversary(i, j) << ','
          << game.se_defender(i, j) << '\n';
    }
  }
}

EmpiricalGame read_game_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || line != "adv_policy,def_policy,u_a,u_d,se_a,se_d") {
    throw std::invalid_argument("game CSV must start with adv_policy,def_policy,u_a,u_d,se_a,se_d");
  }
  struct Cell {
    double v[4];
  };
  std::map<std::pair<std::string, std::string>, Cell> cells;
  EmpiricalGame g;
  auto index_of = [](std::vector<std::string>& labels, const std::string& s) {
    auto it = std::find(labels.begin(), labels.end(), s);
    if (it == labels.end()) labels.push_back(s);
  };
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string fields[6];
    for (auto& f : fields) {
      if (!std::getline(ss, f, ',')) {
        throw std::invalid_argument("game CSV line " + std::to_string(line_no) +
                                    " has fewer than 6 fields");
      }
    }
    Cell c{};
    for (int k = 0; k < 4; ++k) {
      try {
        std::size_t used = 0;
        c.v[k] = std::stod(fields[2 + k], &used);
        if (used != fields[2 + k].size()) throw std::invalid_argument("trailing text");
      } catch (const std::exception&) {
        throw std::invalid_argument("game CSV line " + std::to_string(line_no) +
                                    ": bad number '" + fields[2 + k] + "'");
      }
    }
    index_of(g.row_labels, fields[0]);
    index_of(g.col_labels, fields[1]);
    if (!cells.emplace(std::make_pair(fields[0], fields[1]), c).second) {
      throw std::invalid_argument("game CSV repeats cell " + fields[0] + "," + fields[1]);
    }
  }
  const int r = g.rows(), cn = g.cols();
  g.adversary.resize(r, cn);
  g.defender.resize(r, cn);
  g.se_adversary.resize(r, cn);
  g.se_defender.resize(r, cn);
  for (int i = 0; i < r; ++i) {
    for (int j = 0; j < cn; ++j) {
      auto it = cells.find({g.row_labels[i], g.col_labels[j]});
      if (it == cells.end()) {
        throw std::invalid_argument("game CSV is missing cell " + g.row_labels[i] + "," +
                                    g.col_labels[j]);
      }
      g.adversary(i, j) = it->second.v[0];
      g.defender(i, j) = it->second.v[1];
      g.se_adversary(i, j) = it->second.v[2];
      g.se_defender(i, j) = it->second.v[3];
    }
  }
  g.validate();
  return g;
}

void write_equilibrium_csv(std::ostream& out, const EmpiricalGame& game,
                           const EquilibriumResult& eq) {
  out << "player,policy_label,probability\n";
  out << std::setprecision(std::numeric_limits<double>::max_digits10);
  for (int i = 0; i < game.rows(); ++i) {
    out << "adversary," << game.row_labels[i] << ',' << eq.sigma_a.weights[i] << '\n';
  }
  for (int j = 0; j < game.cols(); ++j) {
    out << "defender," << game.col_labels[j] << ',' << eq.sigma_d.weights[j] << '\n';
  }
  out << "# value_a=" << eq.value_a << " value_d=" << eq.value_d << " regret_a=" << eq.regret_a
      << " regret_d=" << eq.regret_d << " method=" << eq.method << '\n';
}

}  // namespace mtd
