#pragma once

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <functional>
#include <iomanip>
#include <limits>
#include <map>
#include <optional>
#include <ostream>
#include <set>
#include <stdexcept>
#include <string>
#include <string_view>
#include <thread>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "spme/reference.hpp"
#include "spme/stepper.hpp"
#include "spme/transfer.hpp"

namespace spme {

enum class ExperimentKind { project, converge_det, converge_stoch, spacetime, support };

inline const char* to_string(ExperimentKind k) {
  switch (k) {
    case ExperimentKind::project: return "project";
    case ExperimentKind::converge_det: return "converge-det";
    case ExperimentKind::converge_stoch: return "converge-stoch";
    case ExperimentKind::spacetime: return "spacetime";
    case ExperimentKind::support: return "support";
  }
  return "?";
}

inline std::optional<ExperimentKind> parse_experiment(std::string_view s) {
  for (auto k : {ExperimentKind::project, ExperimentKind::converge_det, ExperimentKind::converge_stoch,
                 ExperimentKind::spacetime, ExperimentKind::support}) {
    if (s == to_string(k)) return k;
  }
  return std::nullopt;
}

inline std::optional<NoiseKind> parse_noise(std::string_view s) {
  for (auto k : {NoiseKind::none, NoiseKind::linear, NoiseKind::spacetime}) {
    if (s == to_string(k)) return k;
  }
  return std::nullopt;
}

struct ExperimentConfig {
  ExperimentKind kind = ExperimentKind::converge_det;
  std::vector<int> J_list{64};
  std::vector<int> N_list{128};
  /// Pair J_list[i] with N_list[i] instead of running the full matrix.
  bool pairs = false;
  double p = 3.0;
  int d = 1;
  double L = 1.5;
  double T = 0.1;
  double t_lo = 0.01;
  NoiseKind sigma = NoiseKind::none;
  double sigma0 = 1.0 / 64.0;
  int samples = 1;
  std::uint64_t seed = 0;
  int quad_order = 3;
  /// Worker threads for Monte-Carlo paths; 0 picks the hardware count.
  int threads = 0;
  /// Exponent of the norm in the projection study.
  double projection_norm = 1.5;
  double support_eps = 1e-8;

  void validate() const {
    if (J_list.empty() || N_list.empty()) throw std::invalid_argument("ExperimentConfig: empty J or N list");
    if (pairs && J_list.size() != N_list.size()) {
      throw std::invalid_argument("ExperimentConfig: paired lists must have equal length");
    }
    if (!(T > t_lo && t_lo > 0.0)) throw std::invalid_argument("ExperimentConfig: need T > t_lo > 0");
    if (d != 1 && d != 2) throw std::invalid_argument("ExperimentConfig: d must be 1 or 2");
    if (samples < 1) throw std::invalid_argument("ExperimentConfig: samples must be positive");
  }

  /// (J, N) pairs in run order.
  std::vector<std::pair<int, int>> cases() const {
    std::vector<std::pair<int, int>> out;
    if (pairs) {
      for (std::size_t i = 0; i < J_list.size(); ++i) out.emplace_back(J_list[i], N_list[i]);
      return out;
    }
    for (int N : N_list) {
      for (int J : J_list) out.emplace_back(J, N);
    }
    return out;
  }

  SchemeConfig scheme(int N) const {
    SchemeConfig s;
    s.T = T;
    s.N = N;
    s.p = p;
    s.quad_order = quad_order;
    switch (sigma) {
      case NoiseKind::none: s.noise = NoiseModel::none(); break;
      case NoiseKind::linear: s.noise = NoiseModel::linear(); break;
      case NoiseKind::spacetime: s.noise = NoiseModel::spacetime(sigma0); break;
    }
    return s;
  }

  int thread_count() const {
    if (threads > 0) return threads;
    return std::max(1u, std::thread::hardware_concurrency());
  }
};

/// Space-time error quadrature reproducing the convergence tables: cell
/// midpoints in 1D, a Gauss rule in 2D; whole steps in [t_lo, T].
inline ErrorQuadrature table_error_rule(int d, bool stochastic) {
  ErrorQuadrature r = stochastic ? ErrorQuadrature::stochastic_table() : ErrorQuadrature::deterministic_table();
  if (d == 2) r.space = QuadratureRule(4);
  return r;
}

/// Kahan-compensated sum in index order.
inline double kahan_sum(const std::vector<double>& v) {
  double sum = 0.0;
  double c = 0.0;
  for (double x : v) {
    const double y = x - c;
    const double t = sum + y;
    c = (t - sum) - y;
    sum = t;
  }
  return sum;
}

/// err ~ C x^slope fitted by least squares on log-log data.
struct SlopeFit {
  double slope = 0.0;
  double intercept = 0.0;
  /// Root-mean-square residual of the log-log fit.
  double residual = 0.0;
  int levels = 0;
};

inline SlopeFit fit_loglog(const std::vector<double>& x, const std::vector<double>& err) {
  if (x.size() != err.size()) throw std::invalid_argument("fit_loglog: size mismatch");
  if (x.size() < 3) throw std::invalid_argument("fit_loglog: need at least 3 levels");
  const auto n = static_cast<double>(x.size());
  double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (!(x[i] > 0.0 && err[i] > 0.0)) throw std::invalid_argument("fit_loglog: data must be positive");
    const double lx = std::log(x[i]);
    const double ly = std::log(err[i]);
    sx += lx;
    sy += ly;
    sxx += lx * lx;
    sxy += lx * ly;
  }
  SlopeFit f;
  f.levels = static_cast<int>(x.size());
  f.slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
  f.intercept = (sy - f.slope * sx) / n;
  double rss = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double r = std::log(err[i]) - (f.intercept + f.slope * std::log(x[i]));
    rss += r * r;
  }
  f.residual = std::sqrt(rss / n);
  return f;
}

struct ErrorEntry {
  int J = 0;
  int N = 0;
  double error = std::numeric_limits<double>::quiet_NaN();
  /// Monte-Carlo standard error of `error`; 0 for deterministic runs.
  double std_error = 0.0;
  int samples = 1;
  int failures = 0;
  double seconds = 0.0;
  std::string note;

  bool ok() const { return std::isfinite(error); }
};

/// Error values over (N, J) pairs, written in long form and as a wide N x J matrix.
class ErrorTable {
 public:
  void add(ErrorEntry e) { entries_.push_back(std::move(e)); }
  const std::vector<ErrorEntry>& entries() const { return entries_; }

  const ErrorEntry* find(int J, int N) const {
    for (const auto& e : entries_) {
      if (e.J == J && e.N == N) return &e;
    }
    return nullptr;
  }

  double error(int J, int N) const {
    const ErrorEntry* e = find(J, N);
    if (!e) throw std::out_of_range("ErrorTable: no entry for J=" + std::to_string(J) + ", N=" + std::to_string(N));
    return e->error;
  }

  int failures() const {
    int n = 0;
    for (const auto& e : entries_) n += e.ok() ? 0 : 1;
    return n;
  }

  /// Spatial slope at fixed N over the given J values (x = h = 2L/J).
  SlopeFit spatial_slope(int N, const std::vector<int>& Js, double L) const {
    std::vector<double> x, y;
    for (int J : Js) {
      x.push_back(2.0 * L / J);
      y.push_back(error(J, N));
    }
    return fit_loglog(x, y);
  }

  /// Temporal slope at fixed J over the given N values (x = tau = T/N).
  SlopeFit temporal_slope(int J, const std::vector<int>& Ns, double T) const {
    std::vector<double> x, y;
    for (int N : Ns) {
      x.push_back(T / N);
      y.push_back(error(J, N));
    }
    return fit_loglog(x, y);
  }

  void write_long_csv(std::ostream& os) const {
    os << "N,J,error,std_error,samples,failures,seconds,note\n";
    os << std::setprecision(6);
    for (const auto& e : entries_) {
      os << e.N << ',' << e.J << ',' << e.error << ',' << e.std_error << ',' << e.samples << ',' << e.failures << ','
         << e.seconds << ',' << e.note << '\n';
    }
  }

  void write_wide_csv(std::ostream& os) const {
    std::set<int> Js, Ns;
    for (const auto& e : entries_) {
      Js.insert(e.J);
      Ns.insert(e.N);
    }
    os << "N\\J";
    for (int J : Js) os << ',' << J;
    os << '\n' << std::setprecision(6);
    for (int N : Ns) {
      os << N;
      for (int J : Js) {
        os << ',';
        if (const ErrorEntry* e = find(J, N); e && e->ok()) os << e->error;
      }
      os << '\n';
    }
  }

 private:
  std::vector<ErrorEntry> entries_;
};

inline double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

/// Called after each finished table entry.
using ProgressFn = std::function<void(const ErrorEntry&)>;

/// Deterministic Barenblatt run: L^p((t_lo,T) x D) error for every (J, N).
/// Solver failures are recorded in the entry's note.
inline ErrorTable run_convergence_det(const ExperimentConfig& cfg, const ProgressFn& progress = {}) {
  cfg.validate();
  const BarenblattParams bp = barenblatt_constants(cfg.p, cfg.d);
  const SpaceTimeFunction exact = [bp](double t, const Point& x) { return barenblatt(bp, t, x); };
  ErrorTable table;
  for (const auto& [J, N] : cfg.cases()) {
    const auto t0 = std::chrono::steady_clock::now();
    ErrorEntry e;
    e.J = J;
    e.N = N;
    try {
      ExperimentConfig c = cfg;
      c.sigma = NoiseKind::none;
      const Grid g(cfg.L, J, cfg.d);
      auto ctx = std::make_shared<const SchemeContext>(g, c.scheme(N));
      SpacetimeErrorAccumulator acc(g, exact, cfg.p, cfg.t_lo, cfg.T, cfg.T / N, table_error_rule(cfg.d, false));
      PathOptions opts;
      opts.store_states = false;
      opts.observer = acc.observer();
      run_path(ctx, cfg.seed, opts);
      e.error = acc.value();
    } catch (const SolverError& err) {
      e.note = err.what();
    }
    e.seconds = seconds_since(t0);
    if (progress) progress(e);
    table.add(e);
  }
  return table;
}

/// Runs `count` independent jobs on `threads` workers; job i writes only slot i.
template <class Job>
void parallel_for_index(int count, int threads, Job&& job) {
  std::atomic<int> next{0};
  auto worker = [&]() {
    for (int i = next++; i < count; i = next++) job(i);
  };
  const int n = std::min(threads, count);
  if (n <= 1) {
    worker();
    return;
  }
  std::vector<std::thread> pool;
  for (int t = 0; t < n; ++t) pool.emplace_back(worker);
  for (auto& t : pool) t.join();
}

/// Per-path results of one Monte-Carlo table entry.
struct PathErrors {
  /// ||u - ubar_tau||^p per path; NaN for failed paths.
  std::vector<double> error_pow;
  int failures = 0;
};

/// Pathwise errors of the linear-noise scheme against the stochastic
/// Barenblatt solution; path i uses seed base + i for both.
inline PathErrors stochastic_path_errors(const ExperimentConfig& cfg, int J, int N) {
  const BarenblattParams bp = barenblatt_constants(cfg.p, cfg.d);
  ExperimentConfig c = cfg;
  c.sigma = NoiseKind::linear;
  const Grid g(cfg.L, J, cfg.d);
  auto ctx = std::make_shared<const SchemeContext>(g, c.scheme(N));
  const double tau = cfg.T / N;
  PathErrors out;
  out.error_pow.assign(static_cast<std::size_t>(cfg.samples), std::numeric_limits<double>::quiet_NaN());
  parallel_for_index(cfg.samples, cfg.thread_count(), [&](int i) {
    const std::uint64_t seed = cfg.seed + static_cast<std::uint64_t>(i);
    try {
      const IncrementTable path(N, tau, 1, seed);
      const StochasticBarenblatt exact(bp, path);
      SpacetimeErrorAccumulator acc(g, [&exact](double t, const Point& x) { return exact(t, x); }, cfg.p, cfg.t_lo,
                                    cfg.T, tau, table_error_rule(cfg.d, true));
      PathOptions opts;
      opts.store_states = false;
      opts.observer = acc.observer();
      run_path(ctx, seed, opts, &path);
      out.error_pow[static_cast<std::size_t>(i)] = std::pow(acc.value(), cfg.p);
    } catch (const SolverError&) {
      // Left as NaN and counted below.
    }
  });
  for (double v : out.error_pow) out.failures += std::isfinite(v) ? 0 : 1;
  return out;
}

/// Monte-Carlo estimate (E ||u - ubar_tau||^p)^{1/p} with its standard error
/// (delta method). Throws if more than 1% of the paths fail.
inline ErrorEntry aggregate_paths(int J, int N, const PathErrors& paths, double p) {
  ErrorEntry e;
  e.J = J;
  e.N = N;
  e.failures = paths.failures;
  const int total = static_cast<int>(paths.error_pow.size());
  if (paths.failures * 100 > total) {
    throw std::runtime_error("converge-stoch: " + std::to_string(paths.failures) + " of " + std::to_string(total) +
                             " paths failed at J=" + std::to_string(J) + ", N=" + std::to_string(N));
  }
  std::vector<double> ok;
  for (double v : paths.error_pow) {
    if (std::isfinite(v)) ok.push_back(v);
  }
  e.samples = static_cast<int>(ok.size());
  const double n = static_cast<double>(ok.size());
  const double mean = kahan_sum(ok) / n;
  std::vector<double> dev;
  dev.reserve(ok.size());
  for (double v : ok) dev.push_back((v - mean) * (v - mean));
  const double var = ok.size() > 1 ? kahan_sum(dev) / (n - 1.0) : 0.0;
  e.error = std::pow(mean, 1.0 / p);
  e.std_error = mean > 0.0 ? e.error / (p * mean) * std::sqrt(var / n) : 0.0;
  if (paths.failures > 0) e.note = std::to_string(paths.failures) + " failed paths";
  return e;
}

inline ErrorTable run_convergence_stoch(const ExperimentConfig& cfg, const ProgressFn& progress = {}) {
  cfg.validate();
  if (cfg.d != 1 || cfg.p != 3.0) throw std::invalid_argument("converge-stoch: needs p = 3, d = 1");
  ErrorTable table;
  for (const auto& [J, N] : cfg.cases()) {
    const auto t0 = std::chrono::steady_clock::now();
    ErrorEntry e = aggregate_paths(J, N, stochastic_path_errors(cfg, J, N), cfg.p);
    e.seconds = seconds_since(t0);
    if (progress) progress(e);
    table.add(e);
  }
  return table;
}

struct ProjectionRow {
  int J = 0;
  std::string target;
  double error_projection = 0.0;
  double error_restriction = 0.0;
};

struct ProjectionStudy {
  double norm = 1.5;
  std::vector<ProjectionRow> rows;

  std::vector<const ProjectionRow*> rows_for(const std::string& target) const {
    std::vector<const ProjectionRow*> out;
    for (const auto& r : rows) {
      if (r.target == target) out.push_back(&r);
    }
    return out;
  }

  /// Slope of P_h (restriction = false) or tilde R_h errors against h.
  SlopeFit slope(const std::string& target, bool restriction, double L) const {
    std::vector<double> x, y;
    for (const ProjectionRow* r : rows_for(target)) {
      x.push_back(2.0 * L / r->J);
      y.push_back(restriction ? r->error_restriction : r->error_projection);
    }
    return fit_loglog(x, y);
  }

  void write_csv(std::ostream& os) const {
    os << "J,target,error_P,error_R\n" << std::setprecision(6);
    for (const auto& r : rows) os << r.J << ',' << r.target << ',' << r.error_projection << ',' << r.error_restriction << '\n';
  }
};

/// L^q errors of P_h and tilde R_h for the Barenblatt profile at t = 0.1 and
/// the indicator of (-0.5, 0.5)^d, q = cfg.projection_norm.
inline ProjectionStudy run_projection_study(const ExperimentConfig& cfg) {
  cfg.validate();
  const BarenblattParams bp = barenblatt_constants(cfg.p, cfg.d);
  const SpaceFunction smooth = [bp](const Point& x) { return barenblatt(bp, 0.1, x); };
  const int d = cfg.d;
  const SpaceFunction indicator = [d](const Point& x) {
    for (int k = 0; k < d; ++k) {
      if (std::abs(x[static_cast<std::size_t>(k)]) >= 0.5) return 0.0;
    }
    return 1.0;
  };
  const Breaklines jumps = Breaklines::same_in_all_directions({-0.5, 0.5});
  const QuadratureRule load_rule(6);
  const QuadratureRule error_rule(6);
  ProjectionStudy study;
  study.norm = cfg.projection_norm;
  for (int J : cfg.J_list) {
    const Grid g(cfg.L, J, cfg.d);
    const H1NegProjector P(g);
    const TildeRestriction R(g);
    for (const auto& [name, f, br] : {std::tuple{std::string("barenblatt"), smooth, Breaklines::none()},
                                      std::tuple{std::string("indicator"), indicator, jumps}}) {
      ProjectionRow row;
      row.J = J;
      row.target = name;
      row.error_projection = lp_distance(P(f, load_rule, br), f, study.norm, error_rule, br);
      row.error_restriction = lp_distance(R(cell_average(g, f, load_rule, br)), f, study.norm, error_rule, br);
      study.rows.push_back(row);
    }
  }
  return study;
}

/// One step of a 1D support track.
struct SupportRow {
  std::uint64_t seed = 0;
  int n = 0;
  double t = 0.0;
  /// Discrete support [left, right]; NaN when empty.
  double left = std::numeric_limits<double>::quiet_NaN();
  double right = std::numeric_limits<double>::quiet_NaN();
  double radius = 0.0;
  bool contained = true;
  bool touches_boundary = false;
};

struct SupportStudy {
  double margin = 0.0;
  std::vector<SupportRow> rows;

  bool all_contained() const {
    return std::all_of(rows.begin(), rows.end(), [](const SupportRow& r) { return r.contained; });
  }
  bool touches_boundary() const {
    return std::any_of(rows.begin(), rows.end(), [](const SupportRow& r) { return r.touches_boundary; });
  }
  /// Largest (|support| - radius) over all rows.
  double worst_excess() const {
    double w = -std::numeric_limits<double>::infinity();
    for (const auto& r : rows) {
      if (std::isnan(r.left)) continue;
      w = std::max(w, std::max(std::abs(r.left), std::abs(r.right)) - r.radius);
    }
    return w;
  }

  void write_csv(std::ostream& os) const {
    os << "seed,n,t,left,right,radius,contained,touches_boundary\n" << std::setprecision(6);
    for (const auto& r : rows) {
      os << r.seed << ',' << r.n << ',' << r.t << ',' << r.left << ',' << r.right << ',' << r.radius << ','
         << r.contained << ',' << r.touches_boundary << '\n';
    }
  }
};

/// Interval hull of the discrete support of a 1D field.
inline std::pair<double, double> support_interval(const Grid& g, const std::vector<std::size_t>& cells) {
  if (cells.empty()) return {std::numeric_limits<double>::quiet_NaN(), std::numeric_limits<double>::quiet_NaN()};
  const auto [lo, hi] = std::minmax_element(cells.begin(), cells.end());
  return {g.node(static_cast<int>(*lo)), g.node(static_cast<int>(*hi) + 1)};
}

namespace detail {

/// Tracks the discrete support of one path against `radius(n)` + margin.
inline void track_support(const Grid& g, std::uint64_t seed, double T, int N, double eps, double margin,
                          const std::function<double(int)>& radius, const Eigen::VectorXd& u, int n,
                          std::vector<SupportRow>& rows) {
  SupportRow r;
  r.seed = seed;
  r.n = n;
  r.t = n == N ? T : n * (T / N);
  const auto cells = discrete_support(BasisCoefficients(g, u), eps);
  std::tie(r.left, r.right) = support_interval(g, cells);
  r.radius = radius(n);
  if (!cells.empty()) {
    r.contained = std::max(std::abs(r.left), std::abs(r.right)) <= r.radius + margin + 1e-12;
    r.touches_boundary = cells.front() == 0 || cells.back() + 1 == g.cell_count();
  }
  rows.push_back(r);
}

}  // namespace detail

/// Discrete support per step for the first (J, N) case: deterministic
/// (sigma = none) or one track per path (sigma = linear) against the analytic
/// radius plus a 2h margin.
inline SupportStudy run_support_study(const ExperimentConfig& cfg) {
  cfg.validate();
  if (cfg.d != 1) throw std::invalid_argument("support: needs d = 1");
  if (cfg.sigma == NoiseKind::spacetime) throw std::invalid_argument("support: use the spacetime experiment");
  const auto [J, N] = cfg.cases().front();
  const Grid g(cfg.L, J, 1);
  const BarenblattParams bp = barenblatt_constants(cfg.p, 1);
  auto ctx = std::make_shared<const SchemeContext>(g, cfg.scheme(N));
  const double tau = cfg.T / N;
  SupportStudy study;
  study.margin = 2.0 * g.h();
  const int paths = cfg.sigma == NoiseKind::none ? 1 : cfg.samples;
  std::vector<std::vector<SupportRow>> per_path(static_cast<std::size_t>(paths));
  parallel_for_index(paths, cfg.thread_count(), [&](int i) {
    const std::uint64_t seed = cfg.seed + static_cast<std::uint64_t>(i);
    auto& rows = per_path[static_cast<std::size_t>(i)];
    PathOptions opts;
    opts.store_states = false;
    if (cfg.sigma == NoiseKind::none) {
      const auto radius = [&](int n) { return n == 0 ? 0.0 : barenblatt_support_radius(bp, n * tau); };
      opts.observer = [&](int n, double, const Eigen::VectorXd& u) {
        detail::track_support(g, seed, cfg.T, N, cfg.support_eps, study.margin, radius, u, n, rows);
      };
      run_path(ctx, seed, opts);
      return;
    }
    const IncrementTable path(N, tau, 1, seed);
    const StochasticBarenblatt exact(bp, path);
    const auto radius = [&](int n) { return n == 0 ? 0.0 : exact.support_radius(n * tau); };
    opts.observer = [&](int n, double, const Eigen::VectorXd& u) {
      detail::track_support(g, seed, cfg.T, N, cfg.support_eps, study.margin, radius, u, n, rows);
    };
    run_path(ctx, seed, opts, &path);
  });
  for (auto& rows : per_path) study.rows.insert(study.rows.end(), rows.begin(), rows.end());
  return study;
}

/// Cell means of one 1D snapshot.
struct Snapshot {
  std::uint64_t seed = 0;
  int n = 0;
  double t = 0.0;
  PiecewiseConstField means;
};

struct SpacetimeRun {
  std::vector<Snapshot> snapshots;
  SupportStudy support;
  /// Per seed: max_n of the integral of u_h over D.
  std::vector<double> max_mass;

  void write_snapshots_csv(std::ostream& os) const {
    os << "seed,n,t,x,u\n" << std::setprecision(6);
    for (const auto& s : snapshots) {
      const Grid& g = s.means.grid;
      for (int k = 1; k <= g.cells_per_dim(); ++k) {
        os << s.seed << ',' << s.n << ',' << s.t << ',' << 0.5 * (g.node(k - 1) + g.node(k)) << ','
           << s.means.values[k - 1] << '\n';
      }
    }
  }
};

/// Space-time white noise runs (one per seed) with snapshots at five evenly
/// spaced times and a support track against the deterministic radius.
inline SpacetimeRun run_spacetime(const ExperimentConfig& cfg) {
  cfg.validate();
  if (cfg.d != 1) throw std::invalid_argument("spacetime: needs d = 1");
  ExperimentConfig c = cfg;
  c.sigma = NoiseKind::spacetime;
  const auto [J, N] = cfg.cases().front();
  const Grid g(cfg.L, J, 1);
  const BarenblattParams bp = barenblatt_constants(cfg.p, 1);
  auto ctx = std::make_shared<const SchemeContext>(g, c.scheme(N));
  const double tau = cfg.T / N;
  const auto radius = [&](int n) { return n == 0 ? 0.0 : barenblatt_support_radius(bp, n * tau); };
  std::set<int> snap_steps;
  for (int k = 0; k <= 4; ++k) snap_steps.insert(static_cast<int>(std::lround(k * N / 4.0)));

  SpacetimeRun run;
  run.support.margin = 2.0 * g.h();
  const int paths = cfg.samples;
  std::vector<std::vector<SupportRow>> rows(static_cast<std::size_t>(paths));
  std::vector<std::vector<Snapshot>> snaps(static_cast<std::size_t>(paths));
  run.max_mass.assign(static_cast<std::size_t>(paths), 0.0);
  parallel_for_index(paths, cfg.thread_count(), [&](int i) {
    const std::uint64_t seed = cfg.seed + static_cast<std::uint64_t>(i);
    const auto ii = static_cast<std::size_t>(i);
    PathOptions opts;
    opts.store_states = false;
    opts.observer = [&](int n, double t, const Eigen::VectorXd& u) {
      detail::track_support(g, seed, cfg.T, N, cfg.support_eps, run.support.margin, radius, u, n, rows[ii]);
      const PiecewiseConstField means = cell_average(BasisCoefficients(g, u));
      run.max_mass[ii] = std::max(run.max_mass[ii], means.values.sum() * g.cell_volume());
      if (snap_steps.count(n)) snaps[ii].push_back({seed, n, t, means});
    };
    run_path(ctx, seed, opts);
  });
  for (std::size_t i = 0; i < rows.size(); ++i) {
    run.support.rows.insert(run.support.rows.end(), rows[i].begin(), rows[i].end());
    run.snapshots.insert(run.snapshots.end(), snaps[i].begin(), snaps[i].end());
  }
  return run;
}

/// Discrete a priori quantities of one deterministic run.
struct EnergyStats {
  /// max_n (u^n)^T M u^n.
  double max_energy = 0.0;
  /// tau sum_n int |u^n|^p.
  double dissipation = 0.0;
  /// Whether (u^n)^T M u^n never increased (b = s = 0).
  bool monotone = true;
};

inline EnergyStats energy_statistics(const Grid& g, const SchemeConfig& cfg) {
  auto ctx = std::make_shared<const SchemeContext>(g, cfg);
  EnergyStats s;
  double prev = std::numeric_limits<double>::infinity();
  PathOptions opts;
  opts.store_states = false;
  opts.observer = [&](int n, double, const Eigen::VectorXd& u) {
    const double e = h1neg_energy(ctx->mass(), u);
    s.max_energy = std::max(s.max_energy, e);
    if (e > prev * (1.0 + 1e-12)) s.monotone = false;
    prev = e;
    if (n > 0) s.dissipation += cfg.tau() * ctx->nonlinear().energy_pairing(u);
  };
  run_path(ctx, 0, opts);
  return s;
}

}  // namespace spme
