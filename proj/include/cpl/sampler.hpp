#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace cpl {

/// Axis-aligned spatial box times the interval [0, t_end].
struct Domain {
  std::vector<double> lower;
  std::vector<double> upper;
  double t_end = 1.0;

  Domain() = default;
  Domain(std::vector<double> lo, std::vector<double> hi, double t_end);

  [[nodiscard]] std::size_t dim() const { return lower.size(); }
  [[nodiscard]] double volume() const;
  [[nodiscard]] double extent(std::size_t k) const { return upper[k] - lower[k]; }
  [[nodiscard]] bool contains(std::span<const double> x) const;
};

/// Counter-based generator: value n of the stream is a pure function of
/// (seed, n), so equal seeds give bit-identical streams on every platform.
class SeededRng {
 public:
  explicit SeededRng(std::uint64_t seed = 0) : seed_(seed) {}

  std::uint64_t next_u64();
  /// Uniform in [0, 1) with 53 random bits.
  double uniform();
  /// Uniform integer in [0, n).
  std::uint64_t below(std::uint64_t n);
  /// Independent child stream keyed by `tag`; does not advance this stream.
  [[nodiscard]] SeededRng split(std::uint64_t tag) const;

  [[nodiscard]] std::uint64_t seed() const { return seed_; }
  [[nodiscard]] std::uint64_t counter() const { return counter_; }

 private:
  std::uint64_t seed_;
  std::uint64_t counter_ = 0;
};

enum class Provenance { kSobol, kUniform, kGrid, kExplicit };

/// Row-major list of points, each of length `dim`.
struct PointCloud {
  std::size_t dim = 0;
  std::vector<double> coords;
  Provenance provenance = Provenance::kExplicit;
  std::uint64_t seed_or_skip = 0;

  [[nodiscard]] std::size_t size() const { return dim == 0 ? 0 : coords.size() / dim; }
  [[nodiscard]] bool empty() const { return size() == 0; }
  [[nodiscard]] std::span<const double> point(std::size_t i) const {
    return {coords.data() + i * dim, dim};
  }
  std::span<double> point(std::size_t i) { return {coords.data() + i * dim, dim}; }
};

/// One line per dimension `d s a m_1 ... m_s`; dimension 1 is implicit.
struct DirectionNumbers {
  struct Entry {
    int degree = 0;
    std::uint32_t poly = 0;
    std::vector<std::uint32_t> m;
  };
  std::vector<Entry> entries;  // entries[k] describes dimension k + 2

  /// Parses the Joe–Kuo text format. A leading header line is skipped.
  static DirectionNumbers parse(const std::string& text);
  /// Built-in table covering dimensions 1..64.
  static const DirectionNumbers& builtin();

  [[nodiscard]] std::size_t max_dim() const { return entries.size() + 1; }
};

inline constexpr std::size_t kSobolMaxDim = 64;

/// m consecutive Sobol points with indices skip+1 .. skip+m in [0,1)^d.
/// Throws ConfigError if d exceeds the direction-number table.
PointCloud sobol_points(std::size_t m, std::size_t d, std::uint64_t skip = 0,
                        const DirectionNumbers& table = DirectionNumbers::builtin());

/// i.i.d. uniform points in [0,1)^d.
PointCloud uniform_points(std::size_t m, std::size_t d, SeededRng& rng);

/// Sobol points when d fits the table, uniform points (with a warning on
/// stderr) above it.
PointCloud quasi_random_points(std::size_t m, std::size_t d, std::uint64_t skip, std::uint64_t seed);

/// Per-coordinate affine map of a unit-cube cloud into the domain box.
PointCloud map_to_domain(const PointCloud& cloud, const Domain& domain);

/// Cell-centred tensor grid with `per_dim[k]` points along axis k.
PointCloud grid_points(const Domain& domain, std::span<const std::size_t> per_dim);

struct IndexSets {
  std::vector<std::size_t> I;
  std::vector<std::size_t> J;
};

/// Independent uniform without-replacement draws from {0 .. n_total-1}
/// (zero-based), each sorted ascending.
IndexSets sample_subsets(std::size_t n_total, std::size_t size_i, std::size_t size_j, SeededRng& rng);

/// One uniform without-replacement draw of `size` indices, sorted.
std::vector<std::size_t> sample_subset(std::size_t n_total, std::size_t size, SeededRng& rng);

}  // namespace cpl
