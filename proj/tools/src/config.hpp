#pragma once

#include <filesystem>
#include <istream>
#include <map>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

namespace pathbench::cli {

/// Bad command line or configuration; maps to exit code 1.
class UsageError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// `key=value` lines; `#` starts a comment line. Keys are long option names
/// without the leading dashes. Malformed lines and repeated keys are errors.
std::map<std::string, std::string> parse_config(std::istream& in);

std::map<std::string, std::string> load_config(const std::filesystem::path& path);

/**
 * Folds config entries into the arguments of one subcommand. Keys must be
 * known to some subcommand (`all_keys`); a key the chosen subcommand does
 * not take is ignored, and a key already present in `args` (or overridden
 * by an environment variable listed in `env_overridden`) is skipped so that
 * flags and environment take precedence.
 */
std::vector<std::string> apply_config(const std::vector<std::string>& args,
                                      const std::map<std::string, std::string>& config,
                                      const std::set<std::string>& subcommand_keys,
                                      const std::set<std::string>& all_keys,
                                      const std::set<std::string>& env_overridden);

} // namespace pathbench::cli
