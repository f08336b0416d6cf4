#include "cpl/config.hpp"

#include <cerrno>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <sstream>

#include "cpl/errors.hpp"

namespace cpl {
namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

double parse_double(const std::string& text) {
  const std::string s = trim(text);
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || ptr != s.data() + s.size() || s.empty() || !std::isfinite(v)) {
    throw ConfigError("not a finite number: '" + text + "'");
  }
  return v;
}

bool parse_bool(const std::string& text) {
  const std::string s = trim(text);
  if (s == "true" || s == "1" || s == "yes" || s == "on") return true;
  if (s == "false" || s == "0" || s == "no" || s == "off") return false;
  throw ConfigError("not a boolean: '" + text + "'");
}

std::uint64_t parse_u64(const std::string& text) {
  const std::string s = trim(text);
  std::uint64_t v = 0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec == std::errc{} && ptr == s.data() + s.size() && !s.empty()) return v;
  return parse_count(s);
}

std::vector<std::string> split_list(const std::string& text) {
  std::vector<std::string> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

std::string join_list(const std::vector<std::string>& items) {
  std::string out;
  for (std::size_t i = 0; i < items.size(); ++i) out += (i == 0 ? "" : ",") + items[i];
  return out;
}

struct Entry {
  ConfigKey key;
  std::function<void(RunConfig&, const std::string&)> set;
  std::function<std::string(const RunConfig&)> get;
  bool alias = false;  // accepted as input, omitted from rendered configs
};

template <typename Member>
Entry count_entry(std::string section, std::string name, std::string help, Member member) {
  return {{std::move(section), std::move(name), std::move(help)},
          [member](RunConfig& c, const std::string& v) { member(c) = parse_count(v); },
          [member](const RunConfig& c) { return std::to_string(member(c)); }};
}

template <typename Member>
Entry double_entry(std::string section, std::string name, std::string help, Member member) {
  return {{std::move(section), std::move(name), std::move(help)},
          [member](RunConfig& c, const std::string& v) { member(c) = parse_double(v); },
          [member](const RunConfig& c) { return format_double(member(c)); }};
}

template <typename Member>
Entry bool_entry(std::string section, std::string name, std::string help, Member member) {
  return {{std::move(section), std::move(name), std::move(help)},
          [member](RunConfig& c, const std::string& v) { member(c) = parse_bool(v); },
          [member](const RunConfig& c) { return std::string(member(c) ? "true" : "false"); }};
}

const std::vector<Entry>& entries() {
  static const std::vector<Entry> table = [] {
    std::vector<Entry> t;
    t.push_back({{"problem", "problem", "problem name"},
                 [](RunConfig& c, const std::string& v) { c.train.problem = trim(v); },
                 [](const RunConfig& c) { return c.train.problem; }});
    t.push_back(count_entry("problem", "dim", "spatial dimension of the *_nd problems",
                            [](auto& c) -> auto& { return c.train.problem_options.dim; }));
    t.push_back(bool_entry("problem", "symmetric_pairs", "merge mirrored diffusion terms (fokker_planck_linear_nd)",
                           [](auto& c) -> auto& { return c.train.problem_options.symmetric_pairs; }));

    t.push_back({{"train", "method", "vanilla | soft | discrete_proj | sdifp"},
                 [](RunConfig& c, const std::string& v) { c.train.method = parse_method(trim(v)); },
                 [](const RunConfig& c) { return to_string(c.train.method); }});
    t.push_back({{"train", "estimator", "full | ds_uge | soo"},
                 [](RunConfig& c, const std::string& v) { c.train.estimator = parse_estimator(trim(v)); },
                 [](const RunConfig& c) { return to_string(c.train.estimator); }});
    t.push_back(count_entry("train", "epochs", "optimizer steps",
                            [](auto& c) -> auto& { return c.train.epochs; }));
    t.push_back(double_entry("train", "lr0", "initial learning rate",
                             [](auto& c) -> auto& { return c.train.lr0; }));
    t.push_back(count_entry("train", "batch", "residual collocation points per step",
                            [](auto& c) -> auto& { return c.train.batch; }));
    t.push_back(count_entry("train", "cloud", "detached moment cloud size",
                            [](auto& c) -> auto& { return c.train.cloud; }));
    t.push_back(count_entry("train", "subset_i", "backward term subset size (0 = all)",
                            [](auto& c) -> auto& { return c.train.subset_i; }));
    t.push_back(count_entry("train", "subset_j", "forward term subset size (0 = all)",
                            [](auto& c) -> auto& { return c.train.subset_j; }));
    t.push_back(count_entry("train", "time_slices", "distinct times per step",
                            [](auto& c) -> auto& { return c.train.time_slices; }));
    t.push_back(count_entry("train", "ic_points", "initial-condition points per step",
                            [](auto& c) -> auto& { return c.train.ic_points; }));
    t.push_back(count_entry("train", "bc_points", "boundary points per time slice",
                            [](auto& c) -> auto& { return c.train.bc_points; }));
    t.push_back(double_entry("train", "lambda", "soft-constraint weight",
                             [](auto& c) -> auto& { return c.train.lambda; }));
    t.push_back({{"train", "seed", "master seed"},
                 [](RunConfig& c, const std::string& v) { c.train.seed = parse_u64(v); },
                 [](const RunConfig& c) { return std::to_string(c.train.seed); }});
    t.push_back(count_entry("train", "width", "hidden units per layer",
                            [](auto& c) -> auto& { return c.train.width; }));
    t.push_back(count_entry("train", "layers", "hidden tanh layers",
                            [](auto& c) -> auto& { return c.train.layers; }));
    t.push_back(bool_entry("train", "input_scaling", "rescale inputs to [-1, 1]",
                           [](auto& c) -> auto& { return c.train.input_scaling; }));
    t.push_back(bool_entry("train", "frozen_cloud", "reuse one moment cloud for all steps",
                           [](auto& c) -> auto& { return c.train.frozen_cloud; }));
    t.push_back({{"train", "projection", "discrete_proj field source: cloud | grid"},
                 [](RunConfig& c, const std::string& v) { c.train.projection = parse_projection_mode(trim(v)); },
                 [](const RunConfig& c) { return to_string(c.train.projection); }});
    t.push_back(count_entry("train", "grid_per_dim", "grid points per axis for grid projection",
                            [](auto& c) -> auto& { return c.train.grid_per_dim; }));
    t.push_back({{"train", "grid", "grid points per axis; also selects grid projection"},
                 [](RunConfig& c, const std::string& v) {
                   c.train.grid_per_dim = parse_count(v);
                   c.train.projection = ProjectionMode::kGrid;
                 },
                 [](const RunConfig& c) { return std::to_string(c.train.grid_per_dim); },
                 true});
    t.push_back(bool_entry("train", "through_projection", "discrete_proj: differentiate through the projection",
                           [](auto& c) -> auto& { return c.train.through_projection; }));

    t.push_back(count_entry("eval", "eval_every", "epochs between evaluations",
                            [](auto& c) -> auto& { return c.train.eval_every; }));
    t.push_back(count_entry("eval", "eval_times", "times in the invariant-error grid",
                            [](auto& c) -> auto& { return c.train.eval_times; }));
    t.push_back(count_entry("eval", "holdout", "held-out cloud size",
                            [](auto& c) -> auto& { return c.train.holdout; }));
    t.push_back({{"eval", "holdout_skip", "Sobol skip of the held-out cloud"},
                 [](RunConfig& c, const std::string& v) { c.train.holdout_skip = parse_u64(v); },
                 [](const RunConfig& c) { return std::to_string(c.train.holdout_skip); }});
    t.push_back(bool_entry("eval", "timing", "record wall-clock seconds",
                           [](auto& c) -> auto& { return c.train.timing; }));

    t.push_back(bool_entry("reference", "reference", "solve or load a reference for Error_u",
                           [](auto& c) -> auto& { return c.use_reference; }));
    t.push_back(count_entry("reference", "nx", "reference vertices per axis",
                            [](auto& c) -> auto& { return c.reference.nx; }));
    t.push_back(double_entry("reference", "dt", "reference step (0 = largest stable)",
                             [](auto& c) -> auto& { return c.reference.dt; }));
    t.push_back(double_entry("reference", "t_end", "reference horizon (0 = problem horizon)",
                             [](auto& c) -> auto& { return c.reference.t_end; }));
    t.push_back(count_entry("reference", "stamps", "stored reference snapshots",
                            [](auto& c) -> auto& { return c.reference.stamps; }));
    t.push_back(double_entry("reference", "safety", "fraction of the stability limit",
                             [](auto& c) -> auto& { return c.reference.safety; }));
    t.push_back({{"reference", "cache_dir", "reference cache directory"},
                 [](RunConfig& c, const std::string& v) { c.cache_dir = trim(v); },
                 [](const RunConfig& c) { return c.cache_dir.string(); }});

    t.push_back({{"output", "out_dir", "output directory"},
                 [](RunConfig& c, const std::string& v) { c.out_dir = trim(v); },
                 [](const RunConfig& c) { return c.out_dir.string(); }});

    t.push_back({{"sweep", "axis", "dimension | batch | cloud_size | subset_size"},
                 [](RunConfig& c, const std::string& v) { c.sweep_axis = trim(v); },
                 [](const RunConfig& c) { return c.sweep_axis; }});
    t.push_back({{"sweep", "values", "comma-separated sweep values"},
                 [](RunConfig& c, const std::string& v) { c.sweep_values = split_list(v); },
                 [](const RunConfig& c) { return join_list(c.sweep_values); }});
    t.push_back(count_entry("sweep", "parallel", "concurrent sweep runs",
                            [](auto& c) -> auto& { return c.parallel; }));
    return t;
  }();
  return table;
}

const Entry& find_entry(const std::string& name) {
  for (const Entry& e : entries()) {
    if (e.key.name == name) return e;
  }
  throw ConfigError("unknown config key '" + name + "'");
}

}  // namespace

std::filesystem::path RunConfig::resolved_cache_dir() const {
  return cache_dir.empty() ? out_dir / "cache" : cache_dir;
}

const std::vector<ConfigKey>& config_keys() {
  static const std::vector<ConfigKey> keys = [] {
    std::vector<ConfigKey> k;
    for (const Entry& e : entries()) k.push_back(e.key);
    return k;
  }();
  return keys;
}

void set_config_value(RunConfig& config, const std::string& name, const std::string& value) {
  const Entry& e = find_entry(name);
  try {
    e.set(config, value);
  } catch (const ConfigError& err) {
    throw ConfigError(name + ": " + err.what());
  }
}

std::string get_config_value(const RunConfig& config, const std::string& name) {
  return find_entry(name).get(config);
}

void apply_config_text(RunConfig& config, const std::string& text, const std::string& origin) {
  std::istringstream in(text);
  std::string line;
  std::string section;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const std::string where = origin + ":" + std::to_string(lineno);
    if (line.front() == '[') {
      if (line.back() != ']') throw ConfigError(where + ": malformed section header");
      section = trim(line.substr(1, line.size() - 2));
      bool known = false;
      for (const Entry& e : entries()) known = known || e.key.section == section;
      if (!known) throw ConfigError(where + ": unknown section [" + section + "]");
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError(where + ": expected key = value");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    const Entry* entry = nullptr;
    try {
      entry = &find_entry(key);
    } catch (const ConfigError&) {
      throw ConfigError(where + ": unknown key '" + key + "'");
    }
    if (!section.empty() && entry->key.section != section) {
      throw ConfigError(where + ": key '" + key + "' belongs to [" + entry->key.section + "], not [" + section + "]");
    }
    try {
      entry->set(config, value);
    } catch (const ConfigError& err) {
      throw ConfigError(where + ": " + key + ": " + err.what());
    }
  }
}

void apply_config_file(RunConfig& config, const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  apply_config_text(config, ss.str(), path.string());
}

RunConfig resolve_config(const std::filesystem::path& file,
                         const std::vector<std::pair<std::string, std::string>>& overrides) {
  RunConfig config;
  if (!file.empty()) apply_config_file(config, file);
  if (const char* env = std::getenv("CPL_OUT_DIR"); env != nullptr && *env != '\0') config.out_dir = env;
  for (const auto& [key, value] : overrides) set_config_value(config, key, value);
  return config;
}

std::string render_config(const RunConfig& config) {
  std::string out;
  std::string section;
  for (const Entry& e : entries()) {
    if (e.alias) continue;
    if (e.key.section != section) {
      section = e.key.section;
      out += (out.empty() ? "[" : "\n[") + section + "]\n";
    }
    out += e.key.name + " = " + e.get(config) + "\n";
  }
  return out;
}

std::size_t parse_count(const std::string& text) {
  const std::string s = trim(text);
  auto whole = [&](double v) {
    if (!(v >= 0.0) || v != std::floor(v) || v > 1.8e19) throw ConfigError("not a non-negative integer: '" + text + "'");
    return static_cast<std::size_t>(v);
  };
  if (const auto caret = s.find('^'); caret != std::string::npos) {
    const double base = parse_double(s.substr(0, caret));
    const double exponent = parse_double(s.substr(caret + 1));
    return whole(std::pow(base, exponent));
  }
  std::size_t v = 0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec == std::errc{} && ptr == s.data() + s.size() && !s.empty()) return v;
  return whole(parse_double(s));
}

}  // namespace cpl
