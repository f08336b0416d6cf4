#include "cpl/refsolve.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <fstream>
#include <functional>

#include "cpl/errors.hpp"

namespace cpl {

namespace {

constexpr std::array<char, 8> kCacheMagic{'C', 'P', 'L', 'R', 'E', 'F', '0', '1'};
constexpr double kBlowUp = 1e6;
// RK4 stability limits on the imaginary and negative real axes.
constexpr double kRk4Imag = 2.828;
constexpr double kRk4Real = 2.785;

enum class Kind { kAdvection1d, kAdvection2d, kReactionDiffusion, kWave, kKdV };

Kind kind_of(const PDEProblem& p) {
  if (p.name == "advection1d") return Kind::kAdvection1d;
  if (p.name == "advection2d") return Kind::kAdvection2d;
  if (p.name == "reaction_diffusion1d") return Kind::kReactionDiffusion;
  if (p.name == "wave1d") return Kind::kWave;
  if (p.name == "kdv1d") return Kind::kKdV;
  throw ConfigError("reference: no finite-difference solver for '" + p.name + "'");
}

double constant(const PDEProblem& p, const std::string& key) {
  auto it = p.constants.find(key);
  if (it == p.constants.end()) throw ConfigError("reference: problem lacks constant '" + key + "'");
  return it->second;
}

// Ghost reflection about the end vertices: u[-k] = u[k], u[n-1+k] = u[n-1-k].
inline std::size_t reflect(std::ptrdiff_t i, std::ptrdiff_t n) {
  if (i < 0) i = -i;
  if (i > n - 1) i = 2 * (n - 1) - i;
  return static_cast<std::size_t>(i);
}

using Rhs = std::function<void(const std::vector<double>&, std::vector<double>&)>;

void rk4_step(const Rhs& f, std::vector<double>& y, double dt, std::array<std::vector<double>, 5>& work) {
  auto& [k1, k2, k3, k4, tmp] = work;
  const std::size_t n = y.size();
  f(y, k1);
  for (std::size_t i = 0; i < n; ++i) tmp[i] = y[i] + 0.5 * dt * k1[i];
  f(tmp, k2);
  for (std::size_t i = 0; i < n; ++i) tmp[i] = y[i] + 0.5 * dt * k2[i];
  f(tmp, k3);
  for (std::size_t i = 0; i < n; ++i) tmp[i] = y[i] + dt * k3[i];
  f(tmp, k4);
  for (std::size_t i = 0; i < n; ++i) y[i] += dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
}

Rhs make_rhs(const PDEProblem& p, std::size_t nx, double dx) {
  const auto n = static_cast<std::ptrdiff_t>(nx);
  switch (kind_of(p)) {
    case Kind::kAdvection1d: {
      const double c = constant(p, "c");
      return [=](const std::vector<double>& u, std::vector<double>& du) {
        for (std::ptrdiff_t i = 0; i < n; ++i) {
          du[i] = -c * (u[reflect(i + 1, n)] - u[reflect(i - 1, n)]) / (2.0 * dx);
        }
      };
    }
    case Kind::kAdvection2d: {
      const double c = constant(p, "c");
      return [=](const std::vector<double>& u, std::vector<double>& du) {
        for (std::ptrdiff_t i = 0; i < n; ++i) {
          const std::size_t ip = reflect(i + 1, n) * nx;
          const std::size_t im = reflect(i - 1, n) * nx;
          const std::size_t row = static_cast<std::size_t>(i) * nx;
          for (std::ptrdiff_t j = 0; j < n; ++j) {
            const std::size_t jp = reflect(j + 1, n);
            const std::size_t jm = reflect(j - 1, n);
            const auto uj = static_cast<std::size_t>(j);
            du[row + uj] = -c * ((u[ip + uj] - u[im + uj]) + (u[row + jp] - u[row + jm])) / (2.0 * dx);
          }
        }
      };
    }
    case Kind::kReactionDiffusion: {
      const double diff = constant(p, "D");
      const double k = constant(p, "k");
      return [=](const std::vector<double>& u, std::vector<double>& du) {
        for (std::ptrdiff_t i = 0; i < n; ++i) {
          const double lap = (u[reflect(i + 1, n)] - 2.0 * u[i] + u[reflect(i - 1, n)]) / (dx * dx);
          du[i] = diff * lap + k * u[i];
        }
      };
    }
    case Kind::kWave: {
      // State (u, v) with v = u_t.
      const double c = constant(p, "c");
      return [=](const std::vector<double>& y, std::vector<double>& dy) {
        for (std::ptrdiff_t i = 0; i < n; ++i) {
          const double lap = (y[reflect(i + 1, n)] - 2.0 * y[i] + y[reflect(i - 1, n)]) / (dx * dx);
          dy[i] = y[nx + i];
          dy[nx + i] = c * c * lap;
        }
      };
    }
    case Kind::kKdV: {
      const double a = constant(p, "a");
      const double b = constant(p, "b");
      return [=](const std::vector<double>& u, std::vector<double>& du) {
        for (std::ptrdiff_t i = 0; i < n; ++i) {
          const double up1 = u[reflect(i + 1, n)];
          const double um1 = u[reflect(i - 1, n)];
          const double up2 = u[reflect(i + 2, n)];
          const double um2 = u[reflect(i - 2, n)];
          const double conv = a * (up1 * up1 - um1 * um1) / (4.0 * dx);
          const double disp = b * (up2 - 2.0 * up1 + 2.0 * um1 - um2) / (2.0 * dx * dx * dx);
          du[i] = -conv - disp;
        }
      };
    }
  }
  throw ConfigError("reference: unsupported problem");
}

std::uint64_t mix(std::uint64_t h, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) {
    h ^= (v >> (8 * i)) & 0xFFU;
    h *= 0x100000001B3ULL;
  }
  return h;
}

std::uint64_t mix(std::uint64_t h, double v) { return mix(h, std::bit_cast<std::uint64_t>(v)); }

std::uint64_t mix(std::uint64_t h, const std::string& s) {
  for (unsigned char ch : s) {
    h ^= ch;
    h *= 0x100000001B3ULL;
  }
  return mix(h, static_cast<std::uint64_t>(s.size()));
}

template <typename T>
void put(std::ostream& out, T v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
bool get(std::istream& in, T& v) {
  in.read(reinterpret_cast<char*>(&v), sizeof(T));
  return static_cast<bool>(in);
}

void put_vec(std::ostream& out, const std::vector<double>& v) {
  put<std::uint64_t>(out, v.size());
  out.write(reinterpret_cast<const char*>(v.data()), static_cast<std::streamsize>(v.size() * sizeof(double)));
}

bool get_vec(std::istream& in, std::vector<double>& v) {
  std::uint64_t n = 0;
  if (!get(in, n) || n > (std::uint64_t{1} << 32)) return false;
  v.resize(n);
  in.read(reinterpret_cast<char*>(v.data()), static_cast<std::streamsize>(n * sizeof(double)));
  return static_cast<bool>(in);
}

}  // namespace

std::size_t ReferenceSolution::points() const {
  std::size_t n = 1;
  for (std::size_t k = 0; k < dim; ++k) n *= nx;
  return n;
}

PointCloud ReferenceSolution::grid_cloud() const {
  PointCloud cloud;
  cloud.dim = dim;
  cloud.provenance = Provenance::kGrid;
  const std::size_t n = points();
  cloud.coords.resize(n * dim);
  for (std::size_t p = 0; p < n; ++p) {
    std::size_t rem = p;
    for (std::size_t k = dim; k-- > 0;) {
      cloud.coords[p * dim + k] = lower[k] + static_cast<double>(rem % nx) * dx[k];
      rem /= nx;
    }
  }
  return cloud;
}

bool has_reference_solver(const std::string& problem) {
  return problem == "advection1d" || problem == "advection2d" || problem == "reaction_diffusion1d" ||
         problem == "wave1d" || problem == "kdv1d";
}

double stable_dt(const PDEProblem& p, double dx, double safety) {
  double rate = 0.0;  // spectral radius of the semi-discrete operator
  bool dissipative = false;
  switch (kind_of(p)) {
    case Kind::kAdvection1d:
      rate = std::abs(constant(p, "c")) / dx;
      break;
    case Kind::kAdvection2d:
      rate = 2.0 * std::abs(constant(p, "c")) / dx;
      break;
    case Kind::kReactionDiffusion:
      rate = 4.0 * constant(p, "D") / (dx * dx) + std::abs(constant(p, "k"));
      dissipative = true;
      break;
    case Kind::kWave:
      rate = 2.0 * std::abs(constant(p, "c")) / dx;
      break;
    case Kind::kKdV:
      // 2.598 = max over wavenumbers of the five-point third-derivative symbol
      rate = 2.598 * std::abs(constant(p, "b")) / (dx * dx * dx) + std::abs(constant(p, "a")) / dx;
      break;
  }
  return safety * (dissipative ? kRk4Real : kRk4Imag) / rate;
}

ReferenceSolution solve_reference(const PDEProblem& problem, const ReferenceConfig& config) {
  const Kind kind = kind_of(problem);
  if (config.nx < 5) throw ConfigError("reference: nx must be >= 5");
  if (config.stamps < 2) throw ConfigError("reference: need at least two stamps");
  const double t_end = config.t_end > 0.0 ? config.t_end : problem.domain.t_end;
  const std::size_t dim = problem.dim;
  for (std::size_t k = 1; k < dim; ++k) {
    if (problem.domain.extent(k) != problem.domain.extent(0)) throw ConfigError("reference: square domains only");
  }
  const double dx = problem.domain.extent(0) / static_cast<double>(config.nx - 1);
  const double dt_max = stable_dt(problem, dx, config.safety);
  if (config.dt > dt_max) {
    throw ConfigError("reference: dt=" + std::to_string(config.dt) + " violates the stability limit " +
                      std::to_string(dt_max) + " for " + problem.name + " at nx=" + std::to_string(config.nx));
  }
  const double dt_req = config.dt > 0.0 ? config.dt : dt_max;
  const std::size_t intervals = config.stamps - 1;
  auto per_stamp = static_cast<std::size_t>(std::ceil(t_end / (dt_req * static_cast<double>(intervals))));
  per_stamp = std::max<std::size_t>(per_stamp, 1);
  const double dt = t_end / static_cast<double>(per_stamp * intervals);

  ReferenceSolution ref;
  ref.problem = problem.name;
  ref.dim = dim;
  ref.nx = config.nx;
  ref.lower = problem.domain.lower;
  ref.dx.assign(dim, dx);
  ref.dt = dt;

  const PointCloud grid = ref.grid_cloud();
  const std::size_t n = ref.points();
  const bool second_order = kind == Kind::kWave;
  std::vector<double> y(second_order ? 2 * n : n, 0.0);
  for (std::size_t p = 0; p < n; ++p) y[p] = problem.initial_condition(grid.point(p));

  const Rhs rhs = make_rhs(problem, config.nx, dx);
  std::array<std::vector<double>, 5> work;
  for (auto& w : work) w.assign(y.size(), 0.0);

  auto record = [&](double t) {
    ref.times.push_back(t);
    ref.snapshots.emplace_back(y.begin(), y.begin() + static_cast<std::ptrdiff_t>(n));
    const auto [i1, i2] = trapezoid_invariants(ref.snapshots.back(), dim, config.nx, ref.dx);
    ref.c1.push_back(i1);
    ref.c2.push_back(i2);
  };
  record(0.0);
  for (std::size_t s = 1; s <= intervals; ++s) {
    for (std::size_t k = 0; k < per_stamp; ++k) rk4_step(rhs, y, dt, work);
    for (std::size_t p = 0; p < n; ++p) {
      if (!(std::abs(y[p]) <= kBlowUp)) {
        throw NumericalError("reference: solution diverged before t=" + std::to_string(t_end * static_cast<double>(s) / static_cast<double>(intervals)));
      }
    }
    record(s == intervals ? t_end : t_end * static_cast<double>(s) / static_cast<double>(intervals));
  }
  return ref;
}

std::pair<double, double> trapezoid_invariants(std::span<const double> u, std::size_t dim, std::size_t nx,
                                               std::span<const double> dx) {
  double s1 = 0.0;
  double s2 = 0.0;
  const std::size_t n = u.size();
  for (std::size_t p = 0; p < n; ++p) {
    double w = 1.0;
    std::size_t rem = p;
    for (std::size_t k = dim; k-- > 0;) {
      const std::size_t i = rem % nx;
      rem /= nx;
      w *= (i == 0 || i == nx - 1) ? 0.5 * dx[k] : dx[k];
    }
    s1 += w * u[p];
    s2 += w * u[p] * u[p];
  }
  return {s1, s2};
}

InvariantTable invariant_table(const ReferenceSolution& reference) {
  return InvariantTable{reference.times, reference.c1, reference.c2};
}

std::uint64_t reference_hash(const PDEProblem& problem, const ReferenceConfig& config) {
  std::uint64_t h = 0xCBF29CE484222325ULL;
  h = mix(h, problem.name);
  h = mix(h, static_cast<std::uint64_t>(problem.dim));
  for (const auto& [key, value] : problem.constants) {
    h = mix(h, key);
    h = mix(h, value);
  }
  h = mix(h, problem.domain.t_end);
  h = mix(h, static_cast<std::uint64_t>(config.nx));
  h = mix(h, config.dt);
  h = mix(h, config.t_end);
  h = mix(h, static_cast<std::uint64_t>(config.stamps));
  h = mix(h, config.safety);
  return h;
}

void save_reference(const ReferenceSolution& ref, std::uint64_t hash, const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw InputError("reference cache: cannot write " + path.string());
  out.write(kCacheMagic.data(), kCacheMagic.size());
  put<std::uint64_t>(out, hash);
  put<std::uint64_t>(out, ref.dim);
  put<std::uint64_t>(out, ref.nx);
  put<double>(out, ref.dt);
  put_vec(out, ref.lower);
  put_vec(out, ref.dx);
  put_vec(out, ref.times);
  put_vec(out, ref.c1);
  put_vec(out, ref.c2);
  for (const auto& s : ref.snapshots) put_vec(out, s);
}

bool load_reference(const std::filesystem::path& path, std::uint64_t hash, ReferenceSolution& out) {
  std::ifstream in(path, std::ios::binary);
  if (!in) return false;
  std::array<char, 8> magic{};
  in.read(magic.data(), magic.size());
  std::uint64_t stored = 0;
  if (!in || magic != kCacheMagic || !get(in, stored) || stored != hash) return false;
  ReferenceSolution ref;
  std::uint64_t dim = 0;
  std::uint64_t nx = 0;
  if (!get(in, dim) || !get(in, nx) || !get(in, ref.dt)) return false;
  ref.dim = dim;
  ref.nx = nx;
  if (!get_vec(in, ref.lower) || !get_vec(in, ref.dx) || !get_vec(in, ref.times) || !get_vec(in, ref.c1) ||
      !get_vec(in, ref.c2)) {
    return false;
  }
  ref.snapshots.resize(ref.times.size());
  for (auto& s : ref.snapshots) {
    if (!get_vec(in, s) || s.size() != ref.points()) return false;
  }
  out = std::move(ref);
  return true;
}

ReferenceSolution load_or_solve(const PDEProblem& problem, const ReferenceConfig& config,
                                const std::filesystem::path& dir, bool* cache_hit) {
  const std::uint64_t hash = reference_hash(problem, config);
  const auto path = dir / (problem.name + "_nx" + std::to_string(config.nx) + ".ref");
  ReferenceSolution ref;
  if (load_reference(path, hash, ref)) {
    ref.problem = problem.name;
    if (cache_hit) *cache_hit = true;
    return ref;
  }
  ref = solve_reference(problem, config);
  save_reference(ref, hash, path);
  if (cache_hit) *cache_hit = false;
  return ref;
}

}  // namespace cpl
