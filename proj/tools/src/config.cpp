#include "config.hpp"

#include <algorithm>
#include <fstream>

namespace pathbench::cli {

namespace {

std::string trim(const std::string& s) {
    const auto first = s.find_first_not_of(" \t\r");
    if (first == std::string::npos) {
        return {};
    }
    const auto last = s.find_last_not_of(" \t\r");
    return s.substr(first, last - first + 1);
}

} // namespace

std::map<std::string, std::string> parse_config(std::istream& in) {
    std::map<std::string, std::string> out;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const std::string text = trim(line);
        if (text.empty() || text.front() == '#') {
            continue;
        }
        const auto eq = text.find('=');
        if (eq == std::string::npos) {
            throw UsageError("config line " + std::to_string(line_no) + ": expected key=value");
        }
        std::string key = trim(text.substr(0, eq));
        std::string value = trim(text.substr(eq + 1));
        if (key.empty()) {
            throw UsageError("config line " + std::to_string(line_no) + ": empty key");
        }
        if (!out.emplace(key, value).second) {
            throw UsageError("config line " + std::to_string(line_no) + ": key '" + key + "' repeated");
        }
    }
    return out;
}

std::map<std::string, std::string> load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw UsageError("cannot open config file " + path.string());
    }
    return parse_config(in);
}

std::vector<std::string> apply_config(const std::vector<std::string>& args,
                                      const std::map<std::string, std::string>& config,
                                      const std::set<std::string>& subcommand_keys,
                                      const std::set<std::string>& all_keys,
                                      const std::set<std::string>& env_overridden) {
    for (const auto& [key, value] : config) {
        if (!all_keys.contains(key)) {
            throw UsageError("unknown config key '" + key + "'");
        }
    }

    auto on_command_line = [&](const std::string& key) {
        const std::string flag = "--" + key;
        return std::any_of(args.begin(), args.end(), [&](const std::string& a) {
            return a == flag || a.rfind(flag + "=", 0) == 0;
        });
    };

    std::vector<std::string> merged = args;
    for (const auto& [key, value] : config) {
        if (!subcommand_keys.contains(key) || on_command_line(key) || env_overridden.contains(key)) {
            continue;
        }
        merged.push_back("--" + key + "=" + value);
    }
    return merged;
}

} // namespace pathbench::cli
