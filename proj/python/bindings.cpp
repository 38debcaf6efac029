#include <pybind11/eigen.h>
#include <pybind11/functional.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <optional>
#include <sstream>

#include "cli.hpp"
#include "mtd/config.hpp"
#include "mtd/double_oracle.hpp"
#include "mtd/dqn.hpp"
#include "mtd/equilibrium.hpp"
#include "mtd/evaluate.hpp"
#include "mtd/serialize.hpp"

namespace py = pybind11;
using namespace mtd;

namespace {

Action to_action(int index) { return action_from_index(index); }

}  // namespace

PYBIND11_MODULE(_mtd, m) {
  m.doc() = "Moving-target-defense server game, heuristic and learned policies, and Nash solving.";

  py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
  py::register_exception<NumericalError>(m, "NumericalError", PyExc_ArithmeticError);
  py::register_exception<FormatError>(m, "FormatError", PyExc_ValueError);

  py::enum_<Player>(m, "Player")
      .value("ADVERSARY", Player::kAdversary)
      .value("DEFENDER", Player::kDefender);

  py::class_<SigmoidParams>(m, "SigmoidParams")
      .def(py::init<>())
      .def_readwrite("slope", &SigmoidParams::slope)
      .def_readwrite("threshold", &SigmoidParams::threshold);

  py::class_<EnvConfig>(m, "EnvConfig")
      .def(py::init<>())
      .def_readwrite("num_servers", &EnvConfig::num_servers)
      .def_readwrite("downtime", &EnvConfig::downtime)
      .def_readwrite("miss_probability", &EnvConfig::miss_probability)
      .def_readwrite("knowledge_gain", &EnvConfig::knowledge_gain)
      .def_readwrite("probe_cost", &EnvConfig::probe_cost)
      .def_readwrite("theta_adversary", &EnvConfig::theta_adversary)
      .def_readwrite("theta_defender", &EnvConfig::theta_defender)
      .def_readwrite("w_adversary", &EnvConfig::w_adversary)
      .def_readwrite("w_defender", &EnvConfig::w_defender)
      .def_readwrite("horizon", &EnvConfig::horizon)
      .def_readwrite("gamma", &EnvConfig::gamma)
      .def_readwrite("count_current_probe", &EnvConfig::count_current_probe)
      .def("validate", &EnvConfig::validate);

  py::class_<Config>(m, "Config")
      .def(py::init<>())
      .def_readwrite("env", &Config::env)
      .def_readwrite("seed", &Config::seed)
      .def("validate", &Config::validate)
      .def("set", [](Config& c, const std::string& key, const std::string& value) {
        apply_config_key(c, key, value);
        c.validate();
      })
      .def("entries", [](const Config& c) { return config_entries(c); })
      .def("__str__", [](const Config& c) { return format_config(c); });
  m.def("parse_config", &parse_config, py::arg("text"));
  m.def("load_config", [](const std::filesystem::path& p) { return load_config(p); }, py::arg("path"));

  m.def("compromise_probability", &compromise_probability, py::arg("probes"),
        py::arg("knowledge_gain"));
  m.def("sigmoid", &sigmoid, py::arg("x"), py::arg("theta"));
  m.def("utility", &utility, py::arg("player"), py::arg("controlled"), py::arg("down"),
        py::arg("config"));

  py::class_<ControlCounts>(m, "ControlCounts")
      .def_readonly("adversary", &ControlCounts::adversary)
      .def_readonly("defender", &ControlCounts::defender)
      .def_readonly("down", &ControlCounts::down);

  py::class_<MtdEnv>(m, "Env")
      .def(py::init<EnvConfig>(), py::arg("config") = EnvConfig{})
      .def("reset", &MtdEnv::reset, py::arg("seed"))
      .def(
          "step",
          [](MtdEnv& env, int adversary, int defender) {
            const StepOutcome o = env.step(to_action(adversary), to_action(defender));
            return py::make_tuple(o.obs_adversary.values, o.obs_defender.values,
                                  o.reward_adversary, o.reward_defender, o.done);
          },
          py::arg("adversary_action"), py::arg("defender_action"),
          "Actions are indices: 0 is no-op, i + 1 targets server i. Returns (obs_a, obs_d, r_a, "
          "r_d, done).")
      .def("observe", [](const MtdEnv& env, Player p) { return env.observe(p).values; })
      .def("counts", &MtdEnv::counts)
      .def_property_readonly("tau", &MtdEnv::tau)
      .def_property_readonly("done", &MtdEnv::done);

  py::class_<PurePolicy>(m, "Policy")
      .def_property_readonly("label", &PurePolicy::label)
      .def_property_readonly("player", &PurePolicy::player)
      .def_property_readonly("is_heuristic", [](const PurePolicy& p) { return p.as_heuristic() != nullptr; })
      .def(
          "act",
          [](const PurePolicy& p, const std::vector<int>& obs, int tau, std::uint64_t seed) {
            Rng rng(seed);
            return action_index(p.act(Observation{p.player(), obs}, tau, rng));
          },
          py::arg("observation"), py::arg("tau"), py::arg("seed") = 0)
      .def("save", [](const PurePolicy& p, const std::filesystem::path& path) {
        save_policy_file(path, p);
      })
      .def("__repr__", [](const PurePolicy& p) {
        return "<Policy " + std::string(player_name(p.player())) + " " + p.label() + ">";
      });

  m.def(
      "heuristic",
      [](Player player, const std::string& name, const Config& c) {
        return PurePolicy::heuristic(player, parse_heuristic(name), c.heuristics,
                                     c.env.knowledge_gain);
      },
      py::arg("player"), py::arg("name"), py::arg("config") = Config{});
  m.def("adversary_heuristics", &adversary_heuristics, py::arg("config") = Config{});
  m.def("defender_heuristics", &defender_heuristics, py::arg("config") = Config{});
  m.def(
      "load_policy",
      [](const std::filesystem::path& path, const Config& c) { return load_policy_file(path, c); },
      py::arg("path"), py::arg("config") = Config{});

  py::class_<PairEvaluation>(m, "PairEvaluation")
      .def_readonly("adversary", &PairEvaluation::adversary)
      .def_readonly("defender", &PairEvaluation::defender)
      .def_readonly("se_adversary", &PairEvaluation::se_adversary)
      .def_readonly("se_defender", &PairEvaluation::se_defender)
      .def_readonly("episodes", &PairEvaluation::episodes);
  m.def("evaluate_pair", &evaluate_pair, py::arg("adversary"), py::arg("defender"),
        py::arg("config") = EnvConfig{}, py::arg("episodes") = 50, py::arg("seed") = 0,
        py::call_guard<py::gil_scoped_release>());

  py::class_<EquilibriumResult>(m, "Equilibrium")
      .def_property_readonly("sigma_a", [](const EquilibriumResult& e) { return e.sigma_a.weights; })
      .def_property_readonly("sigma_d", [](const EquilibriumResult& e) { return e.sigma_d.weights; })
      .def_readonly("value_a", &EquilibriumResult::value_a)
      .def_readonly("value_d", &EquilibriumResult::value_d)
      .def_readonly("regret_a", &EquilibriumResult::regret_a)
      .def_readonly("regret_d", &EquilibriumResult::regret_d)
      .def_readonly("method", &EquilibriumResult::method);
  m.def(
      "solve_nash",
      [](const Eigen::MatrixXd& a, const Eigen::MatrixXd& d, double tol) {
        return solve_msne(make_game(a, d), tol);
      },
      py::arg("adversary"), py::arg("defender"), py::arg("tolerance") = -1.0,
      "Mixed Nash equilibrium of the bimatrix game (row player = adversary).");
  m.def(
      "regret",
      [](const Eigen::MatrixXd& a, const Eigen::MatrixXd& d, const std::vector<double>& x,
         const std::vector<double>& y) { return regret(make_game(a, d), {x}, {y}); },
      py::arg("adversary"), py::arg("defender"), py::arg("sigma_a"), py::arg("sigma_d"));

  py::class_<LearningPoint>(m, "LearningPoint")
      .def_readonly("step", &LearningPoint::step)
      .def_readonly("episode", &LearningPoint::episode)
      .def_readonly("return_discounted", &LearningPoint::return_discounted)
      .def_readonly("return_raw", &LearningPoint::return_raw);
  m.def(
      "train_best_response",
      [](Player learner, const std::vector<PurePolicy>& opponents, const std::vector<double>& mix,
         const Config& c, std::uint64_t seed, const std::string& label) {
        std::optional<BestResponse> br;
        {
          py::gil_scoped_release release;
          br = train_best_response(learner, opponents, {mix}, c, seed, label);
        }
        return py::make_tuple(br->policy, br->curve);
      },
      py::arg("learner"), py::arg("opponents"), py::arg("mixture"), py::arg("config"),
      py::arg("seed") = 0, py::arg("label") = "br");

  m.def(
      "run_cli",
      [](const std::vector<std::string>& args) {
        std::ostringstream out, err;
        int code;
        {
          py::gil_scoped_release release;
          code = cli::run(args, out, err);
        }
        return py::make_tuple(code, out.str(), err.str());
      },
      py::arg("args"), "Runs a command-line subcommand; returns (exit_code, stdout, stderr).");
  m.attr("__version__") = cli::kVersion;
}
