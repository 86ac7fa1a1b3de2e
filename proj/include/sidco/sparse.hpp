#pragma once

// Sparse recovery with incoherent frames: Orthogonal Matching Pursuit, the
// compressed-sensing benchmark, and dictionary adaptation by rotations.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <random>
#include <vector>

#include "sidco/error.hpp"
#include "sidco/frame.hpp"
#include "sidco/numerics.hpp"
#include "sidco/random.hpp"

namespace sidco {

inline constexpr double kOmpResidualTol = 1e-12;
inline constexpr double kOmpUnitTol = 1e-8;

struct OmpResult {
  std::vector<std::size_t> support;  // in selection order
  Vector coef;                       // coef[k] belongs to support[k]
  double residual_norm = 0.0;
  /// A selected atom was dependent on the earlier ones and was dropped.
  bool rank_deficient = false;
};

namespace detail {

// OMP without the input checks; the refit is an incremental modified
// Gram–Schmidt QR of the selected atoms.
inline OmpResult omp_core(const DenseMatrix& D, std::span<const double> y, std::size_t s) {
  const std::size_t m = D.rows();
  OmpResult out;
  Vector r(y.begin(), y.end());
  std::vector<Vector> Q;
  std::vector<Vector> Rcols;  // column k of the triangular factor, length k+1
  Vector z;                   // Qᵀy
  std::vector<char> used(D.cols(), 0);
  out.residual_norm = norm2(r);

  while (out.support.size() < s && out.residual_norm >= kOmpResidualTol) {
    std::size_t best = D.cols();
    double best_c = -1.0;
    for (std::size_t j = 0; j < D.cols(); ++j) {
      if (used[j]) continue;
      const double c = std::abs(dot(D.col(j), r));
      if (c > best_c) {
        best_c = c;
        best = j;
      }
    }
    if (best == D.cols()) break;

    Vector q(D.col(best).begin(), D.col(best).end());
    const double nd = norm2(q);
    Vector rc(Q.size() + 1, 0.0);
    for (int pass = 0; pass < 2; ++pass)
      for (std::size_t k = 0; k < Q.size(); ++k) {
        const double p = dot(Q[k], q);
        rc[k] += p;
        for (std::size_t i = 0; i < m; ++i) q[i] -= p * Q[k][i];
      }
    const double nq = norm2(q);
    if (!(nq > 1e-10 * nd)) {
      out.rank_deficient = true;
      break;
    }
    for (double& v : q) v /= nq;
    rc.back() = nq;

    const double zk = dot(q, r);
    for (std::size_t i = 0; i < m; ++i) r[i] -= zk * q[i];
    z.push_back(zk);
    Q.push_back(std::move(q));
    Rcols.push_back(std::move(rc));
    used[best] = 1;
    out.support.push_back(best);
    out.residual_norm = norm2(r);
  }

  const std::size_t k = out.support.size();
  out.coef.assign(k, 0.0);
  for (std::size_t i = k; i-- > 0;) {
    double v = z[i];
    for (std::size_t c = i + 1; c < k; ++c) v -= Rcols[c][i] * out.coef[c];
    out.coef[i] = v / Rcols[i][i];
  }
  return out;
}

inline void check_unit_columns(const DenseMatrix& D, const char* who) {
  for (std::size_t j = 0; j < D.cols(); ++j)
    if (std::abs(norm2(D.col(j)) - 1.0) > kOmpUnitTol)
      throw InvalidInput(std::string(who) + ": column " + std::to_string(j) + " is not unit norm");
}

inline double frobenius(const DenseMatrix& A) { return norm2(A.data()); }

} // namespace detail

/// Greedy s-sparse approximation of y over the unit-norm columns of D. Ties
/// go to the lowest column index.
inline OmpResult omp(const DenseMatrix& D, std::span<const double> y, std::size_t s) {
  if (y.size() != D.rows()) throw InvalidInput("omp: length of y does not match D");
  if (s > D.rows()) throw InvalidInput("omp: sparsity exceeds the signal dimension");
  detail::check_unit_columns(D, "omp");
  return detail::omp_core(D, y, s);
}

/// Sparse codes of every column of Y, as an N×M coefficient matrix.
inline DenseMatrix sparse_code(const DenseMatrix& D, const DenseMatrix& Y, std::size_t s) {
  if (Y.rows() != D.rows()) throw InvalidInput("sparse_code: row count mismatch");
  if (s > D.rows()) throw InvalidInput("sparse_code: sparsity exceeds the signal dimension");
  detail::check_unit_columns(D, "sparse_code");
  DenseMatrix X(D.cols(), Y.cols());
  for (std::size_t j = 0; j < Y.cols(); ++j) {
    const OmpResult r = detail::omp_core(D, Y.col(j), s);
    auto xj = X.col(j);
    for (std::size_t k = 0; k < r.support.size(); ++k) xj[r.support[k]] = r.coef[k];
  }
  return X;
}

struct CsExperiment {
  std::size_t m = 25;  // measurements
  std::size_t N = 80;  // signal dimension
  std::size_t M = 120; // dictionary atoms
  std::size_t s = 4;
  int trials = 1000;
  std::uint64_t seed = 0;

  void validate() const {
    if (!(s <= m && m <= N && N <= M)) throw InvalidInput("CsExperiment: need s <= m <= N <= M");
    if (m == 0) throw InvalidInput("CsExperiment: m must be positive");
    if (trials < 1) throw InvalidInput("CsExperiment: trials must be >= 1");
  }
};

inline constexpr std::array<double, 3> kCsQuantiles{0.1, 0.5, 0.9};

struct CsResult {
  double mean_error = 0.0;
  std::array<double, 3> quantiles{};  // at kCsQuantiles, nearest rank
  double exact_support_rate = 0.0;
  /// s = 0: nothing to recover, every error is zero by convention.
  bool degenerate = false;
  std::vector<double> errors;  // per trial, only when requested
};

/// Gaussian m×N sensing matrix with unit columns.
inline DenseMatrix random_sensing(std::size_t m, std::size_t N, std::uint64_t seed) {
  Rng rng = make_rng(seed);
  DenseMatrix F = gaussian_matrix(m, N, rng);
  normalize_columns(F);
  return F;
}

/// Each trial draws a unit-column Gaussian dictionary D, an s-sparse a with
/// Gaussian nonzeros, senses y = F·D·a and recovers a by OMP on the
/// column-normalized F·D. Trial t uses the same draws for every F.
inline CsResult run_cs_experiment(const CsExperiment& e, const DenseMatrix& sensing, bool keep_errors = false) {
  e.validate();
  if (sensing.rows() != e.m || sensing.cols() != e.N) throw InvalidInput("run_cs_experiment: sensing must be m×N");
  CsResult res;
  std::vector<double> errors(static_cast<std::size_t>(e.trials), 0.0);
  if (e.s == 0) {
    res.degenerate = true;
    res.exact_support_rate = 1.0;
    if (keep_errors) res.errors = std::move(errors);
    return res;
  }

  int exact = 0;
  std::vector<std::size_t> perm(e.M);
  for (int t = 0; t < e.trials; ++t) {
    Rng rng = make_rng(e.seed, static_cast<std::uint64_t>(t) + 1);
    DenseMatrix D = gaussian_matrix(e.N, e.M, rng);
    normalize_columns(D);
    std::iota(perm.begin(), perm.end(), std::size_t{0});
    for (std::size_t k = 0; k < e.s; ++k) std::swap(perm[k], perm[k + uniform_index(rng, e.M - k)]);
    std::normal_distribution<double> normal(0.0, 1.0);
    Vector a(e.M, 0.0);
    for (std::size_t k = 0; k < e.s; ++k) a[perm[k]] = normal(rng);

    DenseMatrix B = sensing * D;
    Vector scale(e.M);
    for (std::size_t j = 0; j < e.M; ++j) {
      scale[j] = norm2(B.col(j));
      if (!(scale[j] > 0.0)) throw InvalidInput("run_cs_experiment: sensing annihilates a dictionary atom");
      for (double& v : B.col(j)) v /= scale[j];
    }
    const Vector y = sensing * std::span<const double>(D * std::span<const double>(a));
    const OmpResult r = detail::omp_core(B, y, e.s);

    Vector rec(e.M, 0.0);
    for (std::size_t k = 0; k < r.support.size(); ++k) rec[r.support[k]] = r.coef[k] / scale[r.support[k]];
    double num = 0.0, den = 0.0;
    for (std::size_t j = 0; j < e.M; ++j) {
      num += (a[j] - rec[j]) * (a[j] - rec[j]);
      den += a[j] * a[j];
    }
    errors[static_cast<std::size_t>(t)] = den > 0.0 ? num / den : 0.0;

    std::vector<std::size_t> want(perm.begin(), perm.begin() + static_cast<std::ptrdiff_t>(e.s));
    std::vector<std::size_t> got = r.support;
    std::sort(want.begin(), want.end());
    std::sort(got.begin(), got.end());
    if (want == got) ++exact;
  }

  double sum = 0.0;
  for (double v : errors) sum += v;
  res.mean_error = sum / e.trials;
  res.exact_support_rate = static_cast<double>(exact) / e.trials;
  std::vector<double> sorted = errors;
  std::sort(sorted.begin(), sorted.end());
  for (std::size_t q = 0; q < kCsQuantiles.size(); ++q) {
    const auto rank = static_cast<std::size_t>(std::ceil(kCsQuantiles[q] * static_cast<double>(sorted.size())));
    res.quantiles[q] = sorted[std::clamp<std::size_t>(rank, 1, sorted.size()) - 1];
  }
  if (keep_errors) res.errors = std::move(errors);
  return res;
}

struct AdaptationRun {
  DenseMatrix frame;  // Q·F0
  DenseMatrix Q;      // accumulated rotation
  /// ‖Y − F_k X_k‖_F / ‖Y‖_F for k = 0 … K, X_k the OMP codes under F_k.
  std::vector<double> errors;
  std::vector<double> coherence;
  /// ‖Y − F X‖_F before and after each rotation, with X held fixed.
  std::vector<double> align_before;
  std::vector<double> align_after;
  int rank_deficient_events = 0;
};

/// Alternates OMP coding with the orthogonal Procrustes rotation
/// Q = UVᵀ of Y·Xᵀ·Fᵀ. Rotations keep every inner product, hence μ.
inline AdaptationRun adapt_dictionary(const DenseMatrix& Y, const Frame& F0, std::size_t s, int K) {
  if (Y.rows() != F0.dim()) throw InvalidInput("adapt_dictionary: data and frame dimensions differ");
  if (s > F0.dim()) throw InvalidInput("adapt_dictionary: sparsity exceeds the signal dimension");
  if (K < 0) throw InvalidInput("adapt_dictionary: K must be >= 0");
  const double ny = detail::frobenius(Y);
  if (!(ny > 0.0)) throw InvalidInput("adapt_dictionary: data is zero");

  AdaptationRun run{F0.vectors(), DenseMatrix::identity(F0.dim()), {}, {}, {}, {}, 0};
  DenseMatrix X = sparse_code(run.frame, Y, s);
  DenseMatrix FX = run.frame * X;
  run.errors.push_back(detail::frobenius(Y - FX) / ny);
  run.coherence.push_back(mutual_coherence(run.frame));
  for (int k = 1; k <= K; ++k) {
    const PolarFactor P = orthogonal_polar(Y * FX.transpose());
    if (P.rank_deficient) ++run.rank_deficient_events;
    run.align_before.push_back(detail::frobenius(Y - FX));
    run.align_after.push_back(detail::frobenius(Y - P.Q * FX));
    run.frame = P.Q * run.frame;
    normalize_columns(run.frame);  // only removes round-off
    run.Q = P.Q * run.Q;
    X = sparse_code(run.frame, Y, s);
    FX = run.frame * X;
    run.errors.push_back(detail::frobenius(Y - FX) / ny);
    run.coherence.push_back(mutual_coherence(run.frame));
  }
  return run;
}

struct PlantedData {
  DenseMatrix Y;
  DenseMatrix Q;  // hidden rotation
  DenseMatrix X;  // hidden codes
};

/// Y = Q*·F0·X + noise with a random rotation Q* and s-sparse Gaussian codes.
inline PlantedData planted_rotation_data(const Frame& F0, std::size_t M, std::size_t s, double noise, std::uint64_t seed) {
  if (M == 0 || s == 0 || s > F0.dim()) throw InvalidInput("planted_rotation_data: need M >= 1 and 1 <= s <= m");
  Rng rng = make_rng(seed);
  const std::size_t m = F0.dim();
  const std::size_t N = F0.size();
  DenseMatrix Q = unit_polar(gaussian_matrix(m, m, rng));
  DenseMatrix X(N, M);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<std::size_t> perm(N);
  for (std::size_t j = 0; j < M; ++j) {
    std::iota(perm.begin(), perm.end(), std::size_t{0});
    for (std::size_t k = 0; k < s; ++k) {
      std::swap(perm[k], perm[k + uniform_index(rng, N - k)]);
      X(perm[k], j) = normal(rng);
    }
  }
  DenseMatrix Y = Q * (F0.vectors() * X);
  if (noise > 0.0) Y += noise * gaussian_matrix(m, M, rng);
  return {std::move(Y), std::move(Q), std::move(X)};
}

} // namespace sidco
