#include <doctest.h>

#include <array>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>

#include "cpl/errors.hpp"
#include "cpl/mlp.hpp"
#include "oracles.hpp"

using namespace cpl;

namespace {

// Recorded once from this implementation and frozen.
constexpr double kGoldenForward = -0x1.4987fb11f7eb4p-6;

MLPParams single_unit(double w, double b) {
  NetworkConfig nc;
  nc.spatial_dim = 1;
  nc.hidden_layers = 1;
  nc.width = 1;
  MLPParams p = zero_params(nc);
  const LayerShape& hidden = p.layers[0];
  p.values[hidden.weight_offset] = w;  // x column
  p.values[hidden.bias_offset] = b;
  p.values[p.layers[1].weight_offset] = 1.0;
  return p;
}

}  // namespace

TEST_CASE("parameter layout and Glorot init") {
  const MLPParams p = oracle::net(2, 4, 128, 3);
  std::size_t total = 0;
  for (const LayerShape& l : p.layers) total += l.rows * l.cols + l.rows;
  CHECK(p.size() == total);
  REQUIRE(p.layers.size() == 5);
  CHECK(p.layers[0].cols == 3);
  CHECK(p.layers[4].rows == 1);

  const LayerShape& inner = p.layers[1];
  REQUIRE(inner.rows == 128);
  REQUIRE(inner.cols == 128);
  const double bound = std::sqrt(6.0 / 256.0);
  double widest = 0.0;
  for (std::size_t k = 0; k < inner.rows * inner.cols; ++k) {
    widest = std::max(widest, std::abs(p.values[inner.weight_offset + k]));
  }
  CHECK(widest <= bound);
  CHECK(widest > 0.9 * bound);
  for (const LayerShape& l : p.layers) {
    for (std::size_t k = 0; k < l.rows; ++k) REQUIRE(p.values[l.bias_offset + k] == 0.0);
  }
  CHECK(oracle::net(2, 4, 128, 3).values == p.values);
  CHECK(oracle::net(2, 4, 128, 4).values != p.values);
}

TEST_CASE("zero parameters give a zero field and zero derivative") {
  NetworkConfig nc;
  nc.spatial_dim = 2;
  nc.hidden_layers = 2;
  nc.width = 8;
  const MLPParams z = zero_params(nc);
  const std::array<double, 2> x{0.4, -1.2};
  CHECK(forward(z, x, 0.3) == 0.0);
  Tape tape;
  const Jet j = forward_jet(tape, z, constant_params(z), x, 0.3, 0, 1);
  CHECK(j[1].value == 0.0);
}

TEST_CASE("forward golden value is pinned") {
  const MLPParams p = oracle::net(2, 4, 128, 42);
  const std::array<double, 2> x{0.3, -0.7};
  const double v = forward(p, x, 0.25);
  CHECK(v == kGoldenForward);
}

TEST_CASE("non-finite inputs are rejected") {
  const MLPParams p = oracle::net(1, 2, 4, 0);
  const std::array<double, 1> bad{std::numeric_limits<double>::quiet_NaN()};
  CHECK_THROWS_AS(forward(p, bad, 0.0), InputError);
  const std::array<double, 1> ok{0.0};
  CHECK_THROWS_AS(forward(p, ok, std::numeric_limits<double>::infinity()), InputError);
}

TEST_CASE("jet coefficient 0 equals forward bitwise; tape forward agrees") {
  const MLPParams p = oracle::net(3, 3, 16, 8);
  SeededRng rng(1);
  for (int trial = 0; trial < 20; ++trial) {
    const std::array<double, 3> x{rng.uniform(), rng.uniform(), rng.uniform()};
    const double t = rng.uniform();
    const double plain = forward(p, x, t);
    for (std::size_t coord = 0; coord <= 3; ++coord) {
      Tape tape;
      const Jet j = forward_jet(tape, p, bind_params(tape, p), x, t, coord, 3);
      REQUIRE(j[0].value == plain);
      for (int k = 1; k <= 3; ++k) REQUIRE(std::isfinite(j[k].value));
    }
    Tape tape;
    CHECK(forward(tape, p, bind_params(tape, p), x, t).value == plain);
  }
}

TEST_CASE("jet order above 3 is unsupported") {
  const MLPParams p = oracle::net(1, 1, 4, 0);
  const std::array<double, 1> x{0.1};
  Tape tape;
  CHECK_THROWS_AS(forward_jet(tape, p, constant_params(p), x, 0.0, 0, 4), UnimplementedError);
}

TEST_CASE("first jet coefficient matches finite differences of forward") {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const MLPParams p = oracle::net(2, 3, 12, seed);
    SeededRng rng(seed + 100);
    const std::array<double, 2> x{rng.uniform(), rng.uniform()};
    const double t = rng.uniform();
    for (std::size_t coord = 0; coord <= 2; ++coord) {
      Tape tape;
      const Jet j = forward_jet(tape, p, constant_params(p), x, t, coord, 1);
      const auto f = [&](double s) {
        std::array<double, 2> xs = x;
        double ts = t;
        (coord == 2 ? ts : xs[coord]) = s;
        return forward(p, xs, ts);
      };
      const double at = coord == 2 ? t : x[coord];
      CHECK(oracle::rel_err(j.derivative(1), oracle::derivative(f, at, 1, 1e-3)) <= 1e-6);
    }
  }
}

TEST_CASE("third x-derivative of a single tanh unit is analytic") {
  const double w = 1.7;
  const double b = -0.4;
  const MLPParams p = single_unit(w, b);
  for (double xv : {-1.0, -0.3, 0.0, 0.45, 1.2}) {
    const std::array<double, 1> x{xv};
    Tape tape;
    const Jet j = forward_jet(tape, p, constant_params(p), x, 0.6, 0, 3);
    const double y = std::tanh(w * xv + b);
    const double tanh3 = (1.0 - y * y) * (6.0 * y * y - 2.0);
    CHECK(oracle::rel_err(j.derivative(3), w * w * w * tanh3) <= 1e-12);
  }
}

TEST_CASE("batched forward agrees with scalar forward") {
  const MLPParams p = oracle::net(2, 3, 32, 5);
  const PointCloud c = sobol_points(257, 2);
  const auto batch = forward_batch(p, c, 0.4);
  for (std::size_t i = 0; i < c.size(); ++i) {
    REQUIRE(std::abs(batch[i] - forward(p, c.point(i), 0.4)) <= 1e-13);
  }
}

TEST_CASE("checkpoint round trip and header validation") {
  const auto dir = std::filesystem::temp_directory_path() / "cpl_test_net";
  std::filesystem::create_directories(dir);
  const MLPParams p = oracle::net(2, 2, 8, 6);
  save_checkpoint(p, dir / "a.bin");
  CHECK(load_checkpoint(p.config, dir / "a.bin").values == p.values);

  NetworkConfig other = p.config;
  other.width = 9;
  CHECK_THROWS_AS(load_checkpoint(other, dir / "a.bin"), InputError);

  {
    std::ofstream junk(dir / "junk.bin", std::ios::binary);
    junk << "not a checkpoint";
  }
  CHECK_THROWS_AS(load_checkpoint(p.config, dir / "junk.bin"), InputError);
  CHECK_THROWS_AS(load_checkpoint(p.config, dir / "missing.bin"), InputError);
  std::filesystem::remove_all(dir);
}

TEST_CASE("unit input scaling maps the domain box to [-1, 1]") {
  NetworkConfig nc;
  nc.spatial_dim = 1;
  const Domain d({0.0}, {2.0}, 0.5);
  set_unit_input_scaling(nc, d);
  REQUIRE(nc.input_scale.size() == 2);
  CHECK((0.0 - nc.input_shift[0]) * nc.input_scale[0] == doctest::Approx(-1.0));
  CHECK((2.0 - nc.input_shift[0]) * nc.input_scale[0] == doctest::Approx(1.0));
  CHECK((0.5 - nc.input_shift[1]) * nc.input_scale[1] == doctest::Approx(1.0));
  CHECK(nc.shape_hash() != NetworkConfig{}.shape_hash());
}
