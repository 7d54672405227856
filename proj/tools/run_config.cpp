#include "run_config.hpp"

#include <algorithm>
#include <fstream>
#include <set>

#include "dnirb/errors.hpp"

namespace dnirb::cli {
namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

// Keys a manifest carries that are not options.
const std::set<std::string> kReservedKeys = {"subcommand", "tool_version"};

bool skipped_in_config(const CLI::Option* opt) {
  const auto& names = opt->get_lnames();
  return names.empty() || names.front() == "help" || names.front() == "config";
}

bool is_flag(const CLI::Option* opt) { return opt->get_expected_max() == 0; }

bool truthy(const std::string& v) {
  return v == "true" || v == "1" || v == "yes" || v == "on";
}

bool given_on_command_line(const std::vector<std::string>& args, const std::string& name) {
  const std::string flag = "--" + name;
  return std::any_of(args.begin(), args.end(), [&](const std::string& a) {
    return a == flag || a.rfind(flag + "=", 0) == 0;
  });
}

}  // namespace

KeyValues read_key_values(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file: " + path.string());
  KeyValues out;
  std::string line;
  std::size_t number = 0;
  while (std::getline(in, line)) {
    ++number;
    const std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos || trim(t.substr(0, eq)).empty()) {
      throw ConfigError(path.string() + ":" + std::to_string(number) +
                        ": expected key=value, got '" + t + "'");
    }
    out.emplace_back(trim(t.substr(0, eq)), trim(t.substr(eq + 1)));
  }
  return out;
}

std::vector<std::string> apply_config(const CLI::App& sub, std::vector<std::string> args,
                                      const KeyValues& config) {
  const std::vector<std::string> given = args;
  for (const auto& [key, value] : config) {
    if (kReservedKeys.count(key)) {
      if (key == "subcommand" && value != sub.get_name()) {
        throw ConfigError("config was written for '" + value + "', not '" + sub.get_name() +
                          "'");
      }
      continue;
    }
    const CLI::Option* opt = nullptr;
    try {
      opt = sub.get_option("--" + key);
    } catch (const CLI::OptionNotFound&) {
    }
    if (opt == nullptr || skipped_in_config(opt)) {
      throw ConfigError("unknown key '" + key + "' in config for '" + sub.get_name() + "'");
    }
    if (given_on_command_line(given, key)) continue;
    if (is_flag(opt)) {
      if (truthy(value)) args.push_back("--" + key);
      continue;
    }
    args.push_back("--" + key);
    args.push_back(value);
  }
  return args;
}

KeyValues effective_config(const CLI::App& sub, const KeyValues& resolved) {
  KeyValues out{{"subcommand", sub.get_name()}, {"tool_version", kToolVersion}};
  std::set<std::string> overridden;
  for (const auto& kv : resolved) overridden.insert(kv.first);
  for (const CLI::Option* opt : sub.get_options()) {
    if (skipped_in_config(opt)) continue;
    const std::string key = opt->get_lnames().front();
    if (overridden.count(key)) continue;
    if (is_flag(opt)) {
      out.emplace_back(key, opt->count() > 0 ? "true" : "false");
    } else if (opt->count() > 0) {
      for (const std::string& v : opt->results()) out.emplace_back(key, v);
    } else if (!opt->get_default_str().empty()) {
      out.emplace_back(key, opt->get_default_str());
    }
  }
  for (const auto& kv : resolved) out.push_back(kv);
  return out;
}

std::filesystem::path write_run_manifest(const CLI::App& sub,
                                         const std::filesystem::path& output,
                                         const KeyValues& resolved) {
  std::filesystem::path target = output;
  if (!target.has_filename()) target = target.parent_path();
  target += ".manifest";
  std::ofstream out(target);
  if (!out) throw DataError("cannot write run manifest: " + target.string());
  out << "# dnirb run manifest; replay with: dnirb rerun --manifest " << target.filename().string()
      << "\n";
  for (const auto& [key, value] : effective_config(sub, resolved)) {
    out << key << '=' << value << '\n';
  }
  if (!out) throw DataError("failed writing run manifest: " + target.string());
  return target;
}

}  // namespace dnirb::cli
