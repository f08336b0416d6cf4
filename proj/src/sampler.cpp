#include "cpl/sampler.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <iostream>
#include <numeric>
#include <sstream>

#include "cpl/errors.hpp"

namespace cpl {

namespace {

// Generated at configure time from data/joe_kuo_d64.txt.
#include "joe_kuo_table.inc"

constexpr int kSobolBits = 32;

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

// Direction vectors v[dim][bit] scaled to 2^32.
std::vector<std::array<std::uint32_t, kSobolBits>> direction_vectors(std::size_t d,
                                                                     const DirectionNumbers& table) {
  std::vector<std::array<std::uint32_t, kSobolBits>> v(d);
  for (int k = 0; k < kSobolBits; ++k) v[0][k] = 1U << (kSobolBits - 1 - k);
  for (std::size_t j = 1; j < d; ++j) {
    const auto& e = table.entries[j - 1];
    const int s = e.degree;
    std::array<std::uint32_t, kSobolBits> m{};
    for (int k = 0; k < s && k < kSobolBits; ++k) m[k] = e.m[k];
    for (int k = s; k < kSobolBits; ++k) {
      std::uint32_t mk = m[k - s] ^ (m[k - s] << s);
      for (int i = 1; i < s; ++i) {
        if ((e.poly >> (s - 1 - i)) & 1U) mk ^= m[k - i] << i;
      }
      m[k] = mk;
    }
    for (int k = 0; k < kSobolBits; ++k) v[j][k] = m[k] << (kSobolBits - 1 - k);
  }
  return v;
}

}  // namespace

Domain::Domain(std::vector<double> lo, std::vector<double> hi, double t_end_)
    : lower(std::move(lo)), upper(std::move(hi)), t_end(t_end_) {
  if (lower.size() != upper.size() || lower.empty()) throw ConfigError("domain: bound length mismatch");
  for (std::size_t k = 0; k < lower.size(); ++k) {
    if (!(upper[k] > lower[k])) throw ConfigError("domain: upper must exceed lower");
  }
  if (!(t_end > 0.0)) throw ConfigError("domain: t_end must be positive");
}

double Domain::volume() const {
  double v = 1.0;
  for (std::size_t k = 0; k < dim(); ++k) v *= extent(k);
  return v;
}

bool Domain::contains(std::span<const double> x) const {
  for (std::size_t k = 0; k < dim(); ++k) {
    if (x[k] < lower[k] || x[k] > upper[k]) return false;
  }
  return true;
}

std::uint64_t SeededRng::next_u64() { return splitmix64(seed_ ^ splitmix64(++counter_)); }

double SeededRng::uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

std::uint64_t SeededRng::below(std::uint64_t n) {
  if (n == 0) return 0;
  const std::uint64_t limit = (~std::uint64_t{0}) - (~std::uint64_t{0}) % n;
  std::uint64_t x = next_u64();
  while (x >= limit) x = next_u64();
  return x % n;
}

SeededRng SeededRng::split(std::uint64_t tag) const {
  return SeededRng(splitmix64(seed_ + 0xA0761D6478BD642FULL * (tag + 1)));
}

DirectionNumbers DirectionNumbers::parse(const std::string& text) {
  DirectionNumbers out;
  std::istringstream in(text);
  std::string line;
  int expected = 2;
  while (std::getline(in, line)) {
    if (line.empty() || line.front() == 'd' || line.front() == '#') continue;
    std::istringstream ls(line);
    int dim = 0;
    Entry e;
    if (!(ls >> dim >> e.degree >> e.poly)) throw ConfigError("direction numbers: malformed line: " + line);
    if (dim != expected) throw ConfigError("direction numbers: dimensions must be consecutive from 2");
    e.m.resize(static_cast<std::size_t>(e.degree));
    for (auto& mk : e.m) {
      if (!(ls >> mk)) throw ConfigError("direction numbers: missing m_i on line: " + line);
    }
    out.entries.push_back(std::move(e));
    ++expected;
  }
  return out;
}

const DirectionNumbers& DirectionNumbers::builtin() {
  static const DirectionNumbers table = parse(kJoeKuoTable);
  return table;
}

PointCloud sobol_points(std::size_t m, std::size_t d, std::uint64_t skip, const DirectionNumbers& table) {
  if (d == 0) throw ConfigError("sobol: dimension must be >= 1");
  if (d > table.max_dim()) {
    throw ConfigError("sobol: dimension " + std::to_string(d) + " exceeds direction table (" +
                      std::to_string(table.max_dim()) + ")");
  }
  if (skip + m >= (std::uint64_t{1} << kSobolBits)) throw ConfigError("sobol: index range exhausted");
  const auto v = direction_vectors(d, table);
  PointCloud cloud;
  cloud.dim = d;
  cloud.provenance = Provenance::kSobol;
  cloud.seed_or_skip = skip;
  cloud.coords.resize(m * d);
  if (m == 0) return cloud;

  // Gray-code state for index n = skip + 1 computed directly, then advanced
  // one bit flip per point.
  std::vector<std::uint32_t> x(d, 0);
  std::uint64_t n = skip + 1;
  const std::uint64_t gray = n ^ (n >> 1);
  for (int k = 0; k < kSobolBits; ++k) {
    if ((gray >> k) & 1U) {
      for (std::size_t j = 0; j < d; ++j) x[j] ^= v[j][k];
    }
  }
  constexpr double kScale = 0x1.0p-32;
  for (std::size_t i = 0; i < m; ++i) {
    if (i > 0) {
      const int c = std::countr_one(n);  // bit flipped going n -> n+1 in Gray order
      for (std::size_t j = 0; j < d; ++j) x[j] ^= v[j][c];
      ++n;
    }
    for (std::size_t j = 0; j < d; ++j) cloud.coords[i * d + j] = static_cast<double>(x[j]) * kScale;
  }
  return cloud;
}

PointCloud uniform_points(std::size_t m, std::size_t d, SeededRng& rng) {
  PointCloud cloud;
  cloud.dim = d;
  cloud.provenance = Provenance::kUniform;
  cloud.seed_or_skip = rng.seed();
  cloud.coords.resize(m * d);
  for (double& c : cloud.coords) c = rng.uniform();
  return cloud;
}

PointCloud quasi_random_points(std::size_t m, std::size_t d, std::uint64_t skip, std::uint64_t seed) {
  if (d <= kSobolMaxDim) return sobol_points(m, d, skip);
  std::cerr << "warning: dimension " << d << " exceeds Sobol table, using uniform points\n";
  SeededRng rng(seed ^ skip);
  return uniform_points(m, d, rng);
}

PointCloud map_to_domain(const PointCloud& cloud, const Domain& domain) {
  if (cloud.dim != domain.dim()) throw InputError("map_to_domain: dimension mismatch");
  PointCloud out = cloud;
  const std::size_t d = cloud.dim;
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    for (std::size_t k = 0; k < d; ++k) {
      out.coords[i * d + k] = domain.lower[k] + cloud.coords[i * d + k] * domain.extent(k);
    }
  }
  return out;
}

PointCloud grid_points(const Domain& domain, std::span<const std::size_t> per_dim) {
  const std::size_t d = domain.dim();
  if (per_dim.size() != d) throw InputError("grid_points: need one count per dimension");
  std::size_t n = 1;
  for (std::size_t c : per_dim) n *= c;
  PointCloud out;
  out.dim = d;
  out.provenance = Provenance::kGrid;
  out.coords.resize(n * d);
  for (std::size_t i = 0; i < n; ++i) {
    std::size_t rem = i;
    for (std::size_t k = d; k-- > 0;) {
      const std::size_t ik = rem % per_dim[k];
      rem /= per_dim[k];
      const double h = domain.extent(k) / static_cast<double>(per_dim[k]);
      out.coords[i * d + k] = domain.lower[k] + (static_cast<double>(ik) + 0.5) * h;
    }
  }
  return out;
}

std::vector<std::size_t> sample_subset(std::size_t n_total, std::size_t size, SeededRng& rng) {
  if (size > n_total) {
    throw ConfigError("sample_subsets: subset size " + std::to_string(size) + " exceeds " +
                      std::to_string(n_total));
  }
  std::vector<std::size_t> perm(n_total);
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  for (std::size_t i = 0; i < size; ++i) {
    const std::size_t j = i + static_cast<std::size_t>(rng.below(n_total - i));
    std::swap(perm[i], perm[j]);
  }
  perm.resize(size);
  std::sort(perm.begin(), perm.end());
  return perm;
}

IndexSets sample_subsets(std::size_t n_total, std::size_t size_i, std::size_t size_j, SeededRng& rng) {
  const std::uint64_t key = rng.next_u64();
  SeededRng base(key);
  SeededRng ri = base.split(1);
  SeededRng rj = base.split(2);
  IndexSets out;
  out.I = sample_subset(n_total, size_i, ri);
  out.J = sample_subset(n_total, size_j, rj);
  return out;
}

}  // namespace cpl
