#include "mtd/serialize.hpp"

#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <limits>
#include <map>
#include <sstream>

namespace mtd {

namespace {

std::map<std::string, std::string> heuristic_fields(const HeuristicPolicy& h) {
  std::ostringstream d;
  d << std::setprecision(std::numeric_limits<double>::max_digits10);
  auto num = [&d](double v) {
    d.str("");
    d << v;
    return d.str();
  };
  return {{"p_a", std::to_string(h.params.adversary_period)},
          {"p_d", std::to_string(h.params.defender_period)},
          {"pcp_period", std::to_string(h.params.pcp_period)},
          {"pcp_threshold", std::to_string(h.params.pcp_threshold)},
          {"tau_a", num(h.params.adversary_threshold)},
          {"tau_d", num(h.params.defender_threshold)},
          {"ct_rho_plus_one", h.params.ct_rho_plus_one ? "1" : "0"},
          {"alpha", num(h.knowledge_gain)}};
}

template <typename T>
T parse_number(const std::string& key, const std::string& text) {
  std::istringstream in(text);
  T v{};
  if (!(in >> v) || !(in >> std::ws).eof()) {
    throw FormatError("policy field '" + key + "': cannot parse '" + text + "'");
  }
  return v;
}

// strtod rather than operator>>, which rejects subnormal values.
std::vector<double> parse_doubles(const std::string& line, Eigen::Index count, const char* what) {
  std::vector<double> out;
  const char* p = line.c_str();
  char* end = nullptr;
  while (true) {
    const double v = std::strtod(p, &end);
    if (end == p) break;
    out.push_back(v);
    p = end;
  }
  while (*p == ' ' || *p == '\t' || *p == '\r') ++p;
  if (*p != '\0' || static_cast<Eigen::Index>(out.size()) != count) {
    throw FormatError(std::string("expected ") + std::to_string(count) + " numbers for " + what);
  }
  return out;
}

std::string read_line(std::istream& in, const char* what) {
  std::string line;
  if (!std::getline(in, line)) throw FormatError(std::string("policy file ends before ") + what);
  return line;
}

}  // namespace

void save_policy(std::ostream& out, const PurePolicy& policy) {
  if (const auto* h = policy.as_heuristic()) {
    out << "heuristic " << player_name(policy.player()) << ' ' << heuristic_name(h->kind);
    for (const auto& [k, v] : heuristic_fields(*h)) out << ' ' << k << '=' << v;
    out << '\n';
    return;
  }
  const auto* q = policy.as_q_network();
  const QNetwork& net = *q->network;
  const int servers = net.input_size() / kObsFields;
  out << "MTDPOLICY 1 qnet " << player_name(policy.player()) << ' ' << servers << '\n';
  out << std::setprecision(std::numeric_limits<double>::max_digits10);
  for (const auto& layer : net.layers()) {
    out << layer.weights.rows() << ' ' << layer.weights.cols() << '\n';
    for (Eigen::Index r = 0; r < layer.weights.rows(); ++r) {
      for (Eigen::Index c = 0; c < layer.weights.cols(); ++c) {
        out << (r || c ? " " : "") << layer.weights(r, c);
      }
    }
    out << '\n';
    for (Eigen::Index r = 0; r < layer.bias.size(); ++r) out << (r ? " " : "") << layer.bias[r];
    out << '\n';
  }
}

PurePolicy load_policy(std::istream& in, const Config& config, std::string label) {
  std::istringstream header(read_line(in, "the header"));
  std::string tag;
  header >> tag;
  if (tag == "heuristic") {
    std::string player, name;
    if (!(header >> player >> name)) throw FormatError("heuristic line needs a player and a name");
    HeuristicParams params = config.heuristics;
    double alpha = config.env.knowledge_gain;
    std::string field;
    while (header >> field) {
      const auto eq = field.find('=');
      if (eq == std::string::npos) throw FormatError("expected key=value, got '" + field + "'");
      const std::string k = field.substr(0, eq), v = field.substr(eq + 1);
      if (k == "p_a") params.adversary_period = parse_number<int>(k, v);
      else if (k == "p_d") params.defender_period = parse_number<int>(k, v);
      else if (k == "pcp_period") params.pcp_period = parse_number<int>(k, v);
      else if (k == "pcp_threshold") params.pcp_threshold = parse_number<int>(k, v);
      else if (k == "tau_a") params.adversary_threshold = parse_number<double>(k, v);
      else if (k == "tau_d") params.defender_threshold = parse_number<double>(k, v);
      else if (k == "ct_rho_plus_one") params.ct_rho_plus_one = parse_number<int>(k, v) != 0;
      else if (k == "alpha") alpha = parse_number<double>(k, v);
      else throw FormatError("unknown heuristic field '" + k + "'");
    }
    PurePolicy p = PurePolicy::heuristic(parse_player(player), parse_heuristic(name), params, alpha);
    if (!label.empty()) p.set_label(std::move(label));
    return p;
  }

  std::string version, kind, player;
  int servers = 0;
  if (tag != "MTDPOLICY" || !(header >> version >> kind >> player >> servers) || version != "1" ||
      kind != "qnet") {
    throw FormatError("unrecognized policy header");
  }
  if (servers != config.env.num_servers) {
    throw FormatError("policy was trained for M=" + std::to_string(servers) + " but config has M=" +
                      std::to_string(config.env.num_servers));
  }
  std::vector<int> sizes;
  std::vector<DenseLayer> layers;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream shape(line);
    Eigen::Index rows = 0, cols = 0;
    if (!(shape >> rows >> cols) || rows < 1 || cols < 1) throw FormatError("bad layer shape line");
    DenseLayer layer{Eigen::MatrixXd(rows, cols), Eigen::VectorXd(rows)};
    const auto w = parse_doubles(read_line(in, "layer weights"), rows * cols, "layer weights");
    for (Eigen::Index r = 0; r < rows; ++r) {
      for (Eigen::Index c = 0; c < cols; ++c) layer.weights(r, c) = w[r * cols + c];
    }
    const auto b = parse_doubles(read_line(in, "layer biases"), rows, "layer biases");
    for (Eigen::Index r = 0; r < rows; ++r) layer.bias[r] = b[r];
    if (sizes.empty()) sizes.push_back(static_cast<int>(cols));
    if (cols != sizes.back()) throw FormatError("layer shapes do not chain");
    sizes.push_back(static_cast<int>(rows));
    layers.push_back(std::move(layer));
  }
  if (layers.empty()) throw FormatError("network policy has no layers");
  if (sizes.front() != kObsFields * servers || sizes.back() != servers + 1) {
    throw FormatError("network input/output sizes do not match M");
  }
  auto net = std::make_shared<QNetwork>(sizes);
  net->layers() = std::move(layers);
  if (!net->all_finite()) throw FormatError("network policy has non-finite parameters");
  return PurePolicy::q_network(parse_player(player), std::move(net), config.env.downtime,
                               label.empty() ? "qnet" : std::move(label));
}

void save_policy_file(const std::filesystem::path& path, const PurePolicy& policy) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  save_policy(out, policy);
}

PurePolicy load_policy_file(const std::filesystem::path& path, const Config& config) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read policy file " + path.string());
  try {
    return load_policy(in, config, path.stem().string());
  } catch (const std::exception& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

Mixture parse_mixture(std::istream& in, const std::filesystem::path& base, Player player,
                      const Config& config) {
  Mixture mix;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    std::istringstream ss(line);
    double weight = 0.0;
    std::string ref;
    if (!(ss >> weight)) {
      if ((ss.clear(), ss >> std::ws).eof()) continue;
      throw FormatError("mixture line " + std::to_string(line_no) + ": expected '<weight> <ref>'");
    }
    if (!(ss >> ref)) {
      throw FormatError("mixture line " + std::to_string(line_no) + ": missing policy reference");
    }
    PurePolicy policy = [&] {
      if (ref.rfind("heuristic:", 0) == 0) {
        return PurePolicy::heuristic(player, parse_heuristic(ref.substr(10)), config.heuristics,
                                     config.env.knowledge_gain);
      }
      std::filesystem::path p(ref);
      if (p.is_relative()) p = base / p;
      if (!std::filesystem::exists(p)) {
        throw FormatError("mixture line " + std::to_string(line_no) + ": unknown policy '" + ref +
                          "'");
      }
      return load_policy_file(p, config);
    }();
    if (policy.player() != player) {
      throw FormatError("mixture line " + std::to_string(line_no) + ": policy '" + ref +
                        "' plays the wrong side");
    }
    mix.policies.push_back(std::move(policy));
    mix.strategy.weights.push_back(weight);
  }
  if (mix.policies.empty()) throw FormatError("mixture lists no policies");
  try {
    mix.strategy.validate();
  } catch (const std::exception& e) {
    throw FormatError(std::string("mixture: ") + e.what());
  }
  return mix;
}

Mixture load_mixture(const std::filesystem::path& path, Player player, const Config& config) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read mixture file " + path.string());
  return parse_mixture(in, path.parent_path(), player, config);
}

}  // namespace mtd
