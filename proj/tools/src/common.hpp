#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace granulometer::cli {

namespace fs = std::filesystem;
using nlohmann::json;

enum ExitCode : int { kOk = 0, kInputError = 1, kDark = 2 };

struct CommandOptions {
  std::optional<fs::path> config;
  std::optional<std::uint64_t> seed;
  fs::path out = ".";
};

/// Command entry points; each returns an ExitCode and never throws.
int cmd_synth(const CommandOptions& options, std::ostream& log);
int cmd_analyze(const CommandOptions& options, std::ostream& log);
int cmd_compare(const CommandOptions& options, std::ostream& log);
int cmd_plan(const CommandOptions& options, std::ostream& log);
int cmd_plot(const CommandOptions& options, std::ostream& log);

/// Parses argv with CLI11 and dispatches.
int run(int argc, const char* const* argv, std::ostream& log);

json load_json(const fs::path& path);
/// `p` as given when absolute, else relative to `base`.
fs::path resolve(const fs::path& base, const std::string& p);
/// Path text relative to `base` with forward slashes, for portable configs.
std::string relative_text(const fs::path& target, const fs::path& base);

/// splitmix64 step: independent streams from one command-line seed.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream);

/// Lowercase [a-z0-9-] rendering of a condition label.
std::string slug(const std::string& label);

}  // namespace granulometer::cli
