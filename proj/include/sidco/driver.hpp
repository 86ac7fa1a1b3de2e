#pragma once

// The incoherent frame design loop: randomized per-vector sweeps of
// trust-region subproblems, with a unit-polar escape step once progress stalls.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <optional>
#include <utility>
#include <vector>

#include "sidco/error.hpp"
#include "sidco/frame.hpp"
#include "sidco/numerics.hpp"
#include "sidco/random.hpp"
#include "sidco/subproblem.hpp"

namespace sidco {

struct SidcoConfig {
  std::size_t m = 0;
  std::size_t N = 0;
  int K = 200;
  std::uint64_t seed = 0;
  double eps_stop = 1e-5;
  double radius_slack = 1e-4;
  double solver_tol = 1e-8;
  bool nonneg = false;
  bool escape_enabled = true;

  void validate() const {
    if (m < 2) throw InvalidInput("SidcoConfig: m must be >= 2");
    if (N < m) throw InvalidInput("SidcoConfig: need N >= m");
    if (K < 1) throw InvalidInput("SidcoConfig: K must be >= 1");
    if (!(eps_stop > 0.0)) throw InvalidInput("SidcoConfig: eps_stop must be positive");
    if (!(radius_slack > 0.0 && radius_slack < 1.0)) throw InvalidInput("SidcoConfig: radius_slack must lie in (0, 1)");
    if (!(solver_tol > 0.0 && solver_tol <= 1e-4)) throw InvalidInput("SidcoConfig: solver_tol must lie in (0, 1e-4]");
  }

  /// The escape step rotates vectors out of the orthant, so it is off in
  /// nonnegative mode whatever the flag says.
  bool escape_active() const noexcept { return escape_enabled && !nonneg; }
};

inline constexpr int kInitAttempts = 5;
/// Relative tolerance for ties when collecting the most correlated neighbors.
inline constexpr double kTieTol = 1e-9;
/// Slack on the per-row coherence guard.
inline constexpr double kGuardSlack = 1e-12;
/// Below this the frame is orthonormal for all practical purposes.
inline constexpr double kZeroCoherence = 1e-12;
/// The escape check needs this many sweeps since the start or the last escape.
inline constexpr int kEscapeWarmup = 4;
inline constexpr int kEscapeWindow = 3;

inline Frame initialize(const SidcoConfig& cfg) {
  cfg.validate();
  for (int attempt = 0; attempt < kInitAttempts; ++attempt) {
    Rng rng = make_rng(cfg.seed + static_cast<std::uint64_t>(attempt));
    DenseMatrix H = gaussian_matrix(cfg.m, cfg.N, rng);
    if (cfg.nonneg)
      for (double& v : H.data()) v = std::abs(v);
    normalize_columns(H);
    if (cfg.nonneg) return Frame(std::move(H));
    try {
      return Frame::normalized(unit_polar(H));
    } catch (const RankDeficient&) {
    }
  }
  throw RankDeficient("initialize: every Gaussian draw was rank deficient");
}

inline double choose_radius(const Frame& F, std::size_t i, double delta) {
  if (i >= F.size()) throw InvalidInput("choose_radius: index out of range");
  if (!(delta > 0.0 && delta < 1.0)) throw InvalidInput("choose_radius: delta must lie in (0, 1)");
  double g = 0.0;
  for (std::size_t j = 0; j < F.size(); ++j)
    if (j != i) g = std::max(g, std::abs(dot(F.vec(i), F.vec(j))));
  if (g >= 1.0) throw DegenerateVector("choose_radius: vector " + std::to_string(i) + " is collinear with another");
  return (1.0 - delta) * (1.0 - g * g);
}

namespace detail {

// Keeps neighbors with angle at most 3× the smallest. `corr` holds the
// sign-canonicalized correlations, with the entry for i itself ignored.
inline std::vector<std::size_t> reduce_by_angle(std::span<const double> corr, std::size_t i) {
  double phi_min = std::numeric_limits<double>::infinity();
  std::vector<double> phi(corr.size());
  for (std::size_t j = 0; j < corr.size(); ++j) {
    phi[j] = std::acos(std::clamp(corr[j], -1.0, 1.0));
    if (j != i) phi_min = std::min(phi_min, phi[j]);
  }
  std::vector<std::size_t> keep;
  for (std::size_t j = 0; j < corr.size(); ++j)
    if (j != i && phi[j] <= 3.0 * phi_min) keep.push_back(j);
  return keep;
}

} // namespace detail

/// Neighbors of column i that can still become the most correlated after a
/// move inside the trust cap. Expects F canonicalized around i.
inline std::vector<std::size_t> reduce_neighbors(const Frame& F, std::size_t i) {
  if (i >= F.size()) throw InvalidInput("reduce_neighbors: index out of range");
  Vector corr(F.size());
  for (std::size_t j = 0; j < F.size(); ++j) corr[j] = dot(F.vec(i), F.vec(j));
  return detail::reduce_by_angle(corr, i);
}

struct SweepStats {
  int updated = 0;
  int skipped = 0;         // |J| ≥ m, no progress possible
  int rank_deficient = 0;  // skipped with H_J of rank < m
  int solver_stalls = 0;
  int rejected = 0;        // update would raise the vector's largest |correlation|
  int degenerate = 0;

  int stalled() const noexcept { return skipped + solver_stalls; }
};

namespace detail {

inline bool full_row_rank(const DenseMatrix& A) {
  const SvdResult r = svd(A);
  return r.S.size() >= A.rows() && r.S[A.rows() - 1] > 1e-9 * r.S.front();
}

// One vector update in place. Returns false when H is left untouched.
inline bool update_vector(DenseMatrix& H, std::size_t i, const SidcoConfig& cfg, SweepStats& st) {
  const std::size_t m = H.rows();
  const std::size_t N = H.cols();
  const auto hi = H.col(i);

  Vector corr(N);
  double row_max = 0.0;
  for (std::size_t j = 0; j < N; ++j) {
    corr[j] = dot(hi, H.col(j));
    if (j != i) row_max = std::max(row_max, std::abs(corr[j]));
  }
  if (row_max >= 1.0) {
    ++st.degenerate;
    return false;
  }
  const double T = (1.0 - cfg.radius_slack) * (1.0 - row_max * row_max);

  // Sign canonicalization stays local to this update.
  std::vector<int> sign(N, 1);
  if (!cfg.nonneg)
    for (std::size_t j = 0; j < N; ++j)
      if (corr[j] < 0.0) {
        sign[j] = -1;
        corr[j] = -corr[j];
      }

  std::vector<std::size_t> J;
  for (std::size_t j = 0; j < N; ++j)
    if (j != i && corr[j] >= row_max - kTieTol * row_max) J.push_back(j);
  if (J.size() >= m) {
    ++st.skipped;
    DenseMatrix HJ(m, J.size());
    for (std::size_t k = 0; k < J.size(); ++k) {
      const auto src = H.col(J[k]);
      auto dst = HJ.col(k);
      for (std::size_t r = 0; r < m; ++r) dst[r] = sign[J[k]] * src[r];
    }
    if (!full_row_rank(HJ)) ++st.rank_deficient;
    return false;
  }

  const std::vector<std::size_t> keep = reduce_by_angle(corr, i);
  DenseMatrix A(m, keep.size());
  for (std::size_t k = 0; k < keep.size(); ++k) {
    const auto src = H.col(keep[k]);
    auto dst = A.col(k);
    for (std::size_t r = 0; r < m; ++r) dst[r] = sign[keep[k]] * src[r];
  }

  SubproblemSolution sol;
  try {
    sol = solve(TrustSubproblem(Vector(hi.begin(), hi.end()), std::move(A), T, cfg.nonneg), cfg.solver_tol);
  } catch (const SolverStall&) {
    ++st.solver_stalls;
    return false;
  }

  // Round-off below zero would push the vector out of the orthant.
  if (cfg.nonneg)
    for (double& v : sol.f) v = std::max(v, 0.0);
  const double nf = norm2(sol.f);
  Vector g(m);
  for (std::size_t r = 0; r < m; ++r) g[r] = sol.f[r] / nf;
  double new_max = 0.0;
  for (std::size_t j = 0; j < N; ++j)
    if (j != i) new_max = std::max(new_max, std::abs(dot(g, H.col(j))));
  if (new_max > row_max + kGuardSlack) {
    ++st.rejected;
    return false;
  }
  std::copy(g.begin(), g.end(), hi.begin());
  ++st.updated;
  return true;
}

} // namespace detail

/// One pass over the frame in a fresh random order. Column 0 stays fixed
/// (it only sets the rotation) except in nonnegative mode.
inline std::pair<Frame, SweepStats> sweep(const Frame& F, const SidcoConfig& cfg, Rng& rng) {
  cfg.validate();
  if (F.dim() != cfg.m || F.size() != cfg.N) throw InvalidInput("sweep: frame shape does not match the config");
  const std::size_t first = cfg.nonneg ? 0 : 1;
  std::vector<std::size_t> order(cfg.N - first);
  std::iota(order.begin(), order.end(), first);
  shuffle(std::span<std::size_t>(order), rng);

  DenseMatrix H = F.vectors();
  SweepStats st;
  for (std::size_t i : order) detail::update_vector(H, i, cfg, st);
  return {Frame(std::move(H)), st};
}

struct SweepReport {
  /// Coherence of the initial frame followed by one entry per sweep.
  std::vector<double> trace;
  /// Sweep numbers (1-based) after which an escape step was applied.
  std::vector<int> escapes;
  /// Coherence right after each escape step.
  std::vector<double> escape_coherence;
  std::vector<double> sweep_seconds;
  std::vector<SweepStats> sweep_stats;
  int sweeps_run = 0;
  /// Index into `trace` of the returned frame.
  std::size_t best_index = 0;
  FrameMetrics final_metrics;

  int total(int SweepStats::*field) const {
    int n = 0;
    for (const SweepStats& s : sweep_stats) n += s.*field;
    return n;
  }
};

/// Runs the design loop from `initial` and returns the most incoherent frame
/// seen along the way.
inline std::pair<Frame, SweepReport> run(const SidcoConfig& cfg, const Frame& initial) {
  cfg.validate();
  if (initial.dim() != cfg.m || initial.size() != cfg.N) throw InvalidInput("run: frame shape does not match the config");
  Rng rng = make_rng(cfg.seed, 1);
  SweepReport rep;
  Frame F = initial;
  Frame best = F;
  double mu = mutual_coherence(F);
  rep.trace.push_back(mu);

  int since_anchor = 0;  // sweeps since the start or the last escape
  for (int k = 1; k <= cfg.K && mu >= kZeroCoherence; ++k) {
    const auto t0 = std::chrono::steady_clock::now();
    auto [next, st] = sweep(F, cfg, rng);
    rep.sweep_seconds.push_back(std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
    F = std::move(next);
    mu = mutual_coherence(F);
    rep.trace.push_back(mu);
    rep.sweep_stats.push_back(st);
    rep.sweeps_run = k;
    ++since_anchor;
    if (mu < rep.trace[rep.best_index]) {
      rep.best_index = rep.trace.size() - 1;
      best = F;
    }

    if (!cfg.escape_active()) {
      if (st.updated == 0) break;  // fixed point: later sweeps would repeat this one
      continue;
    }
    if (since_anchor < kEscapeWarmup) continue;
    const std::size_t n = rep.trace.size();
    const double progress = (rep.trace[n - 1 - kEscapeWindow] - rep.trace[n - 1]) / kEscapeWindow;
    if (progress >= cfg.eps_stop) continue;
    since_anchor = 0;
    try {
      F = Frame::normalized(unit_polar(F.vectors()));
    } catch (const RankDeficient&) {
      continue;  // no polar factor; keep sweeping the current frame
    }
    mu = mutual_coherence(F);
    rep.escapes.push_back(k);
    rep.escape_coherence.push_back(mu);
  }
  rep.final_metrics = frame_metrics(best);
  return {std::move(best), std::move(rep)};
}

inline std::pair<Frame, SweepReport> run(const SidcoConfig& cfg) { return run(cfg, initialize(cfg)); }

} // namespace sidco
