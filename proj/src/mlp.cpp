#include "cpl/mlp.hpp"

#include <Eigen/Dense>
#include <array>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>

#include "cpl/errors.hpp"

namespace cpl {

namespace {

constexpr std::array<char, 8> kCheckpointMagic{'C', 'P', 'L', 'N', 'E', 'T', '0', '1'};

std::uint64_t fnv1a(std::uint64_t h, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) {
    h ^= (v >> (8 * i)) & 0xFFU;
    h *= 0x100000001B3ULL;
  }
  return h;
}

void check_finite(std::span<const double> x, double t) {
  for (double v : x) {
    if (!std::isfinite(v)) throw InputError("forward: non-finite spatial input");
  }
  if (!std::isfinite(t)) throw InputError("forward: non-finite time input");
}

double input_value(const NetworkConfig& c, std::span<const double> x, double t, std::size_t i) {
  const double raw = i < c.spatial_dim ? x[i] : t;
  if (c.input_scale.empty()) return raw;
  return (raw - c.input_shift[i]) * c.input_scale[i];
}

double input_slope(const NetworkConfig& c, std::size_t i) {
  return c.input_scale.empty() ? 1.0 : c.input_scale[i];
}

template <typename T>
void write_le(std::ostream& out, T v) {
  static_assert(std::endian::native == std::endian::little, "checkpoint IO assumes little-endian host");
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T read_le(std::istream& in) {
  T v{};
  in.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!in) throw InputError("checkpoint: truncated file");
  return v;
}

}  // namespace

std::uint64_t NetworkConfig::shape_hash() const {
  std::uint64_t h = 0xCBF29CE484222325ULL;
  h = fnv1a(h, spatial_dim);
  h = fnv1a(h, hidden_layers);
  h = fnv1a(h, width);
  h = fnv1a(h, input_scale.empty() ? 0 : 1);
  for (std::size_t i = 0; i < input_scale.size(); ++i) {
    h = fnv1a(h, std::bit_cast<std::uint64_t>(input_shift[i]));
    h = fnv1a(h, std::bit_cast<std::uint64_t>(input_scale[i]));
  }
  return h;
}

void set_unit_input_scaling(NetworkConfig& config, const Domain& domain) {
  config.input_shift.clear();
  config.input_scale.clear();
  for (std::size_t k = 0; k < domain.dim(); ++k) {
    config.input_shift.push_back(0.5 * (domain.lower[k] + domain.upper[k]));
    config.input_scale.push_back(2.0 / domain.extent(k));
  }
  config.input_shift.push_back(0.5 * domain.t_end);
  config.input_scale.push_back(2.0 / domain.t_end);
}

MLPParams zero_params(const NetworkConfig& config) {
  if (config.width < 1 || config.hidden_layers < 1) throw ConfigError("network: width and layers must be >= 1");
  if (!config.input_scale.empty() && (config.input_scale.size() != config.input_dim() ||
                                      config.input_shift.size() != config.input_dim())) {
    throw ConfigError("network: input scaling must have spatial_dim + 1 entries");
  }
  MLPParams p;
  p.config = config;
  std::size_t offset = 0;
  std::size_t cols = config.input_dim();
  for (std::size_t l = 0; l <= config.hidden_layers; ++l) {
    const std::size_t rows = l == config.hidden_layers ? 1 : config.width;
    LayerShape s{rows, cols, offset, offset + rows * cols};
    offset = s.bias_offset + rows;
    p.layers.push_back(s);
    cols = rows;
  }
  p.values.assign(offset, 0.0);
  return p;
}

MLPParams init_params(const NetworkConfig& config) {
  MLPParams p = zero_params(config);
  SeededRng rng(config.seed);
  for (const auto& layer : p.layers) {
    const double bound = std::sqrt(6.0 / static_cast<double>(layer.rows + layer.cols));
    for (std::size_t i = 0; i < layer.rows * layer.cols; ++i) {
      p.values[layer.weight_offset + i] = (2.0 * rng.uniform() - 1.0) * bound;
    }
  }
  return p;
}

ParamVars bind_params(Tape& tape, const MLPParams& params) { return tape.leaves(params.values); }

ParamVars constant_params(const MLPParams& params) {
  ParamVars v;
  v.reserve(params.size());
  for (double x : params.values) v.emplace_back(x);
  return v;
}

double forward(const MLPParams& params, std::span<const double> x, double t) {
  const auto& c = params.config;
  if (x.size() != c.spatial_dim) throw InputError("forward: expected " + std::to_string(c.spatial_dim) + " coordinates");
  check_finite(x, t);
  std::vector<double> h(c.input_dim());
  for (std::size_t i = 0; i < h.size(); ++i) h[i] = input_value(c, x, t, i);
  std::vector<double> z;
  const double* v = params.values.data();
  for (std::size_t l = 0; l < params.layers.size(); ++l) {
    const auto& s = params.layers[l];
    z.assign(s.rows, 0.0);
    for (std::size_t r = 0; r < s.rows; ++r) {
      double acc = v[s.bias_offset + r];
      const double* w = v + s.weight_offset + r * s.cols;
      for (std::size_t j = 0; j < s.cols; ++j) acc += w[j] * h[j];
      z[r] = l + 1 < params.layers.size() ? std::tanh(acc) : acc;
    }
    h.swap(z);
  }
  return h[0];
}

Jet forward_jet(Tape& tape, const MLPParams& params, const ParamVars& theta, std::span<const double> x,
                double t, std::size_t coord, int order) {
  const auto& c = params.config;
  if (order < 0 || order > kMaxJetOrder) throw UnimplementedError("forward_jet: order must be <= 3");
  if (x.size() != c.spatial_dim) throw InputError("forward_jet: coordinate count mismatch");
  if (coord > c.spatial_dim) throw InputError("forward_jet: coordinate index out of range");
  if (theta.size() != params.size()) throw InputError("forward_jet: parameter count mismatch");
  check_finite(x, t);

  const std::size_t n_coef = static_cast<std::size_t>(order) + 1;
  // h[k][j]: coefficient k of unit j
  std::vector<std::vector<Var>> h(n_coef, std::vector<Var>(c.input_dim(), Var{0.0}));
  for (std::size_t i = 0; i < c.input_dim(); ++i) {
    h[0][i] = Var{input_value(c, x, t, i)};
    if (i == coord && order >= 1) h[1][i] = Var{input_slope(c, i)};
  }

  std::vector<Jet> units;
  for (std::size_t l = 0; l < params.layers.size(); ++l) {
    const auto& s = params.layers[l];
    const bool hidden = l + 1 < params.layers.size();
    std::vector<std::vector<Var>> next(n_coef, std::vector<Var>(s.rows));
    for (std::size_t r = 0; r < s.rows; ++r) {
      std::span<const Var> w(theta.data() + s.weight_offset + r * s.cols, s.cols);
      Jet z;
      z.order = order;
      for (std::size_t k = 0; k < n_coef; ++k) {
        const Var offset = k == 0 ? theta[s.bias_offset + r] : Var{0.0};
        z[static_cast<int>(k)] = tape.dot(offset, w, h[k]);
      }
      if (hidden) z = jet::tanh(tape, z);
      for (std::size_t k = 0; k < n_coef; ++k) next[k][r] = z[static_cast<int>(k)];
    }
    h.swap(next);
  }
  Jet out;
  out.order = order;
  for (std::size_t k = 0; k < n_coef; ++k) out[static_cast<int>(k)] = h[k][0];
  return out;
}

Var forward(Tape& tape, const MLPParams& params, const ParamVars& theta, std::span<const double> x,
            double t) {
  return forward_jet(tape, params, theta, x, t, 0, 0)[0];
}

std::vector<double> forward_batch(const MLPParams& params, const PointCloud& cloud, double t) {
  using Mat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
  const auto& c = params.config;
  if (cloud.dim != c.spatial_dim) throw InputError("forward_batch: cloud dimension mismatch");
  if (!std::isfinite(t)) throw InputError("forward_batch: non-finite time");
  const std::size_t m = cloud.size();
  if (m == 0) return {};
  // Column-major activations: one column per point.
  Eigen::MatrixXd h(c.input_dim(), m);
  for (std::size_t p = 0; p < m; ++p) {
    auto x = cloud.point(p);
    for (std::size_t i = 0; i < c.input_dim(); ++i) h(i, p) = input_value(c, x, t, i);
  }
  Eigen::MatrixXd z;
  for (std::size_t l = 0; l < params.layers.size(); ++l) {
    const auto& s = params.layers[l];
    Eigen::Map<const Mat> w(params.values.data() + s.weight_offset, s.rows, s.cols);
    Eigen::Map<const Eigen::VectorXd> b(params.values.data() + s.bias_offset, s.rows);
    z.noalias() = w * h;
    z.colwise() += b;
    if (l + 1 < params.layers.size()) {
      // tanh z = 1 - 2 / (exp(2z) + 1); vectorizes where the scalar libm tanh does not
      h = (1.0 - 2.0 / ((2.0 * z.array()).exp() + 1.0)).matrix();
    } else {
      h.swap(z);
    }
  }
  std::vector<double> out(m);
  for (std::size_t p = 0; p < m; ++p) out[p] = h(0, p);
  return out;
}

void save_checkpoint(const MLPParams& params, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw InputError("checkpoint: cannot open " + path.string());
  out.write(kCheckpointMagic.data(), kCheckpointMagic.size());
  write_le<std::uint64_t>(out, params.config.shape_hash());
  write_le<std::uint64_t>(out, params.values.size());
  for (double v : params.values) write_le<double>(out, v);
}

MLPParams load_checkpoint(const NetworkConfig& config, const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("checkpoint: cannot open " + path.string());
  std::array<char, 8> magic{};
  in.read(magic.data(), magic.size());
  if (!in || magic != kCheckpointMagic) throw InputError("checkpoint: bad magic");
  MLPParams p = zero_params(config);
  if (read_le<std::uint64_t>(in) != config.shape_hash()) throw InputError("checkpoint: network shape mismatch");
  if (read_le<std::uint64_t>(in) != p.values.size()) throw InputError("checkpoint: length mismatch");
  for (double& v : p.values) v = read_le<double>(in);
  return p;
}

}  // namespace cpl
