#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "cpl/refsolve.hpp"
#include "cpl/trainer.hpp"

namespace cpl {

/// Everything one CLI invocation needs: training settings, reference-solver
/// settings, output location and sweep parameters.
struct RunConfig {
  TrainConfig train;
  ReferenceConfig reference;
  bool use_reference = true;            // build or load a reference for Error_u when supported
  std::filesystem::path cache_dir;      // empty means <out_dir>/cache
  std::filesystem::path out_dir = "out";
  std::string sweep_axis;               // dimension | batch | cloud_size | subset_size
  std::vector<std::string> sweep_values;
  std::size_t parallel = 1;

  [[nodiscard]] std::filesystem::path resolved_cache_dir() const;
};

/// One settable key. `section` groups it in files; the flag is `--<name>`.
struct ConfigKey {
  std::string section;
  std::string name;
  std::string help;
};

/// All keys in file order.
const std::vector<ConfigKey>& config_keys();

/// Sets one key from its textual value. ConfigError for unknown keys or
/// unparsable values.
void set_config_value(RunConfig& config, const std::string& name, const std::string& value);
/// Current value of one key in the same textual form the parser accepts.
std::string get_config_value(const RunConfig& config, const std::string& name);

/// Parses `[section]` headers and `key = value` lines; `#` starts a comment.
/// A key must appear under its own section (or before any header).
void apply_config_text(RunConfig& config, const std::string& text, const std::string& origin = "<text>");
void apply_config_file(RunConfig& config, const std::filesystem::path& path);

/// Builds the effective configuration: defaults, then the file (if any), then
/// CPL_OUT_DIR, then flag overrides in order.
RunConfig resolve_config(const std::filesystem::path& file,
                         const std::vector<std::pair<std::string, std::string>>& overrides);

/// Canonical sectioned dump of every key; parses back to the same config.
std::string render_config(const RunConfig& config);

/// Integer with optional `a^b` power or exponent notation (`2^21`, `1e4`).
std::size_t parse_count(const std::string& text);

}  // namespace cpl
