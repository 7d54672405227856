#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include <CLI11.hpp>

namespace dnirb::cli {

inline constexpr const char* kToolVersion = "0.1.0";

/// Ordered key=value pairs. Repeated keys carry multi-valued options.
using KeyValues = std::vector<std::pair<std::string, std::string>>;

/// Parses a key=value file. Blank lines and lines starting with '#' are
/// ignored; whitespace around keys and values is trimmed.
KeyValues read_key_values(const std::filesystem::path& path);

/// Appends `--key value` arguments for every config entry whose option was
/// not given on the command line, so flags win over the file and the file
/// wins over built-in defaults. Throws ConfigError on keys the subcommand
/// does not know.
std::vector<std::string> apply_config(const CLI::App& sub, std::vector<std::string> args,
                                      const KeyValues& config);

/// Effective configuration of a parsed subcommand, defaults included.
/// `resolved` overrides or adds entries (e.g. values derived at run time).
KeyValues effective_config(const CLI::App& sub, const KeyValues& resolved = {});

/// Writes the run manifest for `sub` next to `output` as "<output>.manifest".
std::filesystem::path write_run_manifest(const CLI::App& sub,
                                         const std::filesystem::path& output,
                                         const KeyValues& resolved = {});

}  // namespace dnirb::cli
