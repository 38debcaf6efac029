#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "mtd/config.hpp"
#include "mtd/policy.hpp"

namespace mtd {

class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Heuristics: `heuristic <player> <name> k=v ...`.
/// Networks: `MTDPOLICY 1 qnet <player> <M>`, then per layer a `rows cols`
/// line, the row-major weights on one line and the biases on the next.
/// Numbers are written with max_digits10, so loading is exact.
void save_policy(std::ostream& out, const PurePolicy& policy);

/// Networks take their downtime scale from `config`; heuristics read their
/// parameters from the file, falling back to `config` for absent keys.
PurePolicy load_policy(std::istream& in, const Config& config, std::string label);

void save_policy_file(const std::filesystem::path& path, const PurePolicy& policy);
/// The label is the file name without extension.
PurePolicy load_policy_file(const std::filesystem::path& path, const Config& config);

struct Mixture {
  std::vector<PurePolicy> policies;
  MixedStrategy strategy;
};

/// Lines `<weight> <ref>`, where ref is `heuristic:<Name>` or a policy file
/// path (relative paths resolve against the mixture file's directory).
Mixture load_mixture(const std::filesystem::path& path, Player player, const Config& config);
Mixture parse_mixture(std::istream& in, const std::filesystem::path& base, Player player,
                      const Config& config);

}  // namespace mtd
