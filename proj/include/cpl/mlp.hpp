#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "cpl/jet.hpp"
#include "cpl/sampler.hpp"
#include "cpl/tape.hpp"

namespace cpl {

/// Fully connected tanh network u_raw(x, t; theta) with a linear output head.
/// `hidden_layers` counts tanh layers of `width` units each.
struct NetworkConfig {
  std::size_t spatial_dim = 1;
  std::size_t hidden_layers = 4;
  std::size_t width = 128;
  std::uint64_t seed = 0;
  /// Optional affine input map x' = (x - shift) * scale; empty means raw inputs.
  /// Length spatial_dim + 1 when set (time last).
  std::vector<double> input_shift;
  std::vector<double> input_scale;

  [[nodiscard]] std::size_t input_dim() const { return spatial_dim + 1; }
  /// Stable hash of the shape fields (not the seed), stored in checkpoints.
  [[nodiscard]] std::uint64_t shape_hash() const;
};

/// Rescales inputs from the domain box (and [0, T]) to [-1, 1].
void set_unit_input_scaling(NetworkConfig& config, const Domain& domain);

struct LayerShape {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::size_t weight_offset = 0;  // row-major rows x cols
  std::size_t bias_offset = 0;
};

struct MLPParams {
  NetworkConfig config;
  std::vector<LayerShape> layers;
  std::vector<double> values;

  [[nodiscard]] std::size_t size() const { return values.size(); }
};

/// Parameter vector bound to a tape (leaves) or held as constants.
using ParamVars = std::vector<Var>;

/// Builds the layer table; all values zero.
MLPParams zero_params(const NetworkConfig& config);
/// Glorot-uniform weights, zero biases, deterministic per config.seed.
MLPParams init_params(const NetworkConfig& config);

ParamVars bind_params(Tape& tape, const MLPParams& params);
ParamVars constant_params(const MLPParams& params);

/// Plain scalar evaluation. Throws InputError on non-finite input.
double forward(const MLPParams& params, std::span<const double> x, double t);

/// Tape-recorded evaluation.
Var forward(Tape& tape, const MLPParams& params, const ParamVars& theta, std::span<const double> x,
            double t);

/// Jet of u_raw along input `coord` (0..d-1 spatial, d = time) to `order` <= 3.
/// Coefficient 0 equals forward() bitwise.
Jet forward_jet(Tape& tape, const MLPParams& params, const ParamVars& theta, std::span<const double> x,
                double t, std::size_t coord, int order);

/// Detached batched evaluation over every point of a cloud at a fixed time.
std::vector<double> forward_batch(const MLPParams& params, const PointCloud& cloud, double t);

/// Flat little-endian checkpoint: magic, shape hash, length, doubles.
void save_checkpoint(const MLPParams& params, const std::filesystem::path& path);
/// Loads values into a parameter set built from `config`; throws InputError on
/// magic, hash or length mismatch.
MLPParams load_checkpoint(const NetworkConfig& config, const std::filesystem::path& path);

}  // namespace cpl
