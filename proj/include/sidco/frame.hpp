#pragma once

// Unit-norm frames, their coherence metrics and the equiangular tight frame
// constructor/certifier.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "sidco/error.hpp"
#include "sidco/numerics.hpp"

namespace sidco {

inline constexpr double kUnitNormTol = 1e-10;

/// N unit-norm vectors in R^m stored as the columns of an m×N matrix.
/// Immutable once built.
class Frame {
public:
  /// Takes ownership of `vectors`; every column must already be unit norm.
  explicit Frame(DenseMatrix vectors) : vectors_(std::move(vectors)) {
    if (vectors_.empty()) throw InvalidInput("Frame: empty");
    if (vectors_.rows() < 2) throw InvalidInput("Frame: dimension m must be >= 2");
    if (vectors_.cols() < vectors_.rows()) throw InvalidInput("Frame: need N >= m");
    if (!vectors_.all_finite()) throw InvalidInput("Frame: non-finite entries");
    for (std::size_t j = 0; j < vectors_.cols(); ++j)
      if (std::abs(norm2(vectors_.col(j)) - 1.0) > kUnitNormTol)
        throw InvalidInput("Frame: column " + std::to_string(j) + " is not unit norm");
  }

  /// Normalizes the columns of `vectors` before wrapping them.
  static Frame normalized(DenseMatrix vectors) {
    normalize_columns(vectors);
    return Frame(std::move(vectors));
  }

  std::size_t dim() const noexcept { return vectors_.rows(); }
  std::size_t size() const noexcept { return vectors_.cols(); }
  const DenseMatrix& vectors() const noexcept { return vectors_; }
  std::span<const double> vec(std::size_t i) const { return vectors_.col(i); }

  DenseMatrix gram() const { return sidco::gram(vectors_); }

private:
  DenseMatrix vectors_;
};

/// √((N−m)/(m(N−1))), the lower bound on the coherence of N unit vectors in R^m.
inline double welch_bound(std::size_t m, std::size_t N) {
  if (m < 1 || N < m) throw InvalidInput("welch_bound: need N >= m >= 1");
  if (N == 1) return 0.0;
  const double md = static_cast<double>(m);
  const double Nd = static_cast<double>(N);
  return std::sqrt((Nd - md) / (md * (Nd - 1.0)));
}

/// Largest |⟨f_i, f_j⟩| over distinct columns of a unit-column matrix.
inline double mutual_coherence(const DenseMatrix& F) {
  double mu = 0.0;
  for (std::size_t j = 1; j < F.cols(); ++j)
    for (std::size_t i = 0; i < j; ++i) mu = std::max(mu, std::abs(dot(F.col(i), F.col(j))));
  return mu;
}

inline double mutual_coherence(const Frame& F) { return mutual_coherence(F.vectors()); }

struct FrameMetrics {
  double mu = 0.0;
  double mu_bar = 0.0;
  double fp = 0.0;
  double welch = 0.0;
  /// ⌊½(1/μ + 1)⌋; empty when μ = 0 (no bound).
  std::optional<std::int64_t> sparsity_cap;
};

inline FrameMetrics frame_metrics(const Frame& F) {
  const std::size_t N = F.size();
  const DenseMatrix G = F.gram();
  FrameMetrics r;
  double sum_abs = 0.0;
  double fp = 0.0;
  for (std::size_t j = 0; j < N; ++j)
    for (std::size_t i = 0; i < N; ++i) {
      const double g = G(i, j);
      fp += g * g;
      if (i < j) {
        sum_abs += std::abs(g);
        r.mu = std::max(r.mu, std::abs(g));
      }
    }
  r.fp = fp;
  r.mu_bar = N > 1 ? 2.0 * sum_abs / (static_cast<double>(N) * static_cast<double>(N - 1)) : 0.0;
  r.welch = welch_bound(F.dim(), N);
  if (r.mu > 0.0) r.sparsity_cap = static_cast<std::int64_t>(std::floor(0.5 * (1.0 / r.mu + 1.0) + 1e-9));
  return r;
}

struct CorrelationProfile {
  std::vector<double> sorted;  // |⟨f_i, f_j⟩| for i < j, ascending
  double mu = 0.0;
  double above_099 = 0.0;      // fraction of pairs with |g| > 0.99μ
  double above_095 = 0.0;
};

inline CorrelationProfile correlation_profile(const Frame& F) {
  const DenseMatrix G = F.gram();
  CorrelationProfile p;
  for (std::size_t j = 1; j < F.size(); ++j)
    for (std::size_t i = 0; i < j; ++i) p.sorted.push_back(std::abs(G(i, j)));
  std::sort(p.sorted.begin(), p.sorted.end());
  if (p.sorted.empty()) return p;
  p.mu = p.sorted.back();
  const auto frac = [&](double level) {
    const auto it = std::upper_bound(p.sorted.begin(), p.sorted.end(), level);
    return static_cast<double>(p.sorted.end() - it) / static_cast<double>(p.sorted.size());
  };
  p.above_099 = frac(0.99 * p.mu);
  p.above_095 = frac(0.95 * p.mu);
  return p;
}

/// The sign pattern s with s_j·⟨h_j, h_i⟩ ≥ 0 for every j, and s_i = +1.
inline std::vector<int> correlation_signs(const DenseMatrix& H, std::size_t i) {
  std::vector<int> s(H.cols(), 1);
  for (std::size_t j = 0; j < H.cols(); ++j)
    if (j != i && dot(H.col(i), H.col(j)) < 0.0) s[j] = -1;
  return s;
}

/// Flips columns so every vector correlates non-negatively with column i.
/// Applying the returned signs again restores the input.
inline std::pair<Frame, std::vector<int>> canonicalize_signs(const Frame& F, std::size_t i) {
  if (i >= F.size()) throw InvalidInput("canonicalize_signs: index out of range");
  std::vector<int> s = correlation_signs(F.vectors(), i);
  DenseMatrix H = F.vectors();
  for (std::size_t j = 0; j < H.cols(); ++j)
    if (s[j] < 0)
      for (double& v : H.col(j)) v = -v;
  return {Frame(std::move(H)), std::move(s)};
}

/// The (m, m+1) simplex frame: all pairwise inner products equal −1/m.
inline Frame make_simplex_etf(std::size_t m) {
  if (m < 2) throw InvalidInput("make_simplex_etf: need m >= 2");
  const std::size_t n = m + 1;
  // Rows of an orthonormal basis of 1^⊥ in R^{m+1} give a rank-m square root
  // of I − 11ᵀ/(m+1). Basis from Gram–Schmidt on e_k − e_{k+1}.
  std::vector<Vector> basis;
  for (std::size_t k = 0; k < m; ++k) {
    Vector v(n, 0.0);
    v[k] = 1.0;
    v[k + 1] = -1.0;
    for (int pass = 0; pass < 2; ++pass)
      for (const Vector& b : basis) {
        const double p = dot(b, v);
        for (std::size_t r = 0; r < n; ++r) v[r] -= p * b[r];
      }
    const double nv = norm2(v);
    for (double& x : v) x /= nv;
    basis.push_back(std::move(v));
  }
  DenseMatrix F(m, n);
  for (std::size_t j = 0; j < n; ++j)
    for (std::size_t k = 0; k < m; ++k) F(k, j) = basis[k][j];
  return Frame::normalized(std::move(F));
}

struct EtfCertificate {
  bool is_equiangular = false;
  bool is_tight = false;
  double mu_attained = 0.0;
  /// (H_iᵀH_i)·1 = ((N−m)/m)·1 around every column i; only checked for ETFs.
  bool eigen_check = false;
  /// N⁺_j − N⁻_j after canonicalizing around column 0; only for ETFs.
  std::optional<std::vector<long>> sign_balance;
  /// (N−2m)/(mμ) + 1 and whether it is an integer within tolerance.
  double balance_value = 0.0;
  bool balance_integral = false;
  bool balance_matches = false;

  bool is_etf() const noexcept { return is_equiangular && is_tight; }
};

/// Checks equiangularity (relative spread of |g_ij| ≤ tol·μ) and tightness
/// (‖FFᵀ − (N/m)I‖_max ≤ tol·N/m); for ETFs also the eigenvector and sign
/// balance identities.
inline EtfCertificate certify_etf(const Frame& F, double tol = 1e-6) {
  const std::size_t m = F.dim();
  const std::size_t N = F.size();
  const DenseMatrix& H = F.vectors();
  const DenseMatrix G = F.gram();

  EtfCertificate c;
  double lo = std::numeric_limits<double>::infinity();
  double hi = 0.0;
  for (std::size_t j = 1; j < N; ++j)
    for (std::size_t i = 0; i < j; ++i) {
      const double a = std::abs(G(i, j));
      lo = std::min(lo, a);
      hi = std::max(hi, a);
    }
  c.mu_attained = hi;
  c.is_equiangular = N < 2 || (hi - lo) <= tol * std::max(hi, std::numeric_limits<double>::min());

  const double alpha = static_cast<double>(N) / static_cast<double>(m);
  const DenseMatrix S = H * H.transpose();
  double dev = 0.0;
  for (std::size_t j = 0; j < m; ++j)
    for (std::size_t i = 0; i < m; ++i) dev = std::max(dev, std::abs(S(i, j) - (i == j ? alpha : 0.0)));
  c.is_tight = dev <= tol * alpha;

  if (!c.is_etf() || N <= m) return c;

  const double expected = (static_cast<double>(N) - static_cast<double>(m)) / static_cast<double>(m);
  c.eigen_check = true;
  for (std::size_t i = 0; i < N && c.eigen_check; ++i) {
    const std::vector<int> s = correlation_signs(H, i);
    Vector sum(m, 0.0);  // H_i·1 after sign flips
    for (std::size_t j = 0; j < N; ++j) {
      if (j == i) continue;
      auto hj = H.col(j);
      for (std::size_t r = 0; r < m; ++r) sum[r] += s[j] * hj[r];
    }
    for (std::size_t j = 0; j < N; ++j) {
      if (j == i) continue;
      const double v = s[j] * dot(H.col(j), sum);
      if (std::abs(v - expected) > tol * std::max(1.0, expected)) {
        c.eigen_check = false;
        break;
      }
    }
  }

  const std::vector<int> s = correlation_signs(H, 0);
  std::vector<long> balance(N, 0);
  for (std::size_t j = 0; j < N; ++j)
    for (std::size_t k = 0; k < N; ++k) {
      if (k == j) continue;
      const double g = s[j] * s[k] * G(j, k);
      balance[j] += g > 0 ? 1 : -1;
    }
  c.balance_value = (static_cast<double>(N) - 2.0 * static_cast<double>(m)) / (static_cast<double>(m) * hi) + 1.0;
  c.balance_integral = std::abs(c.balance_value - std::round(c.balance_value)) <= tol * std::max(1.0, std::abs(c.balance_value));
  c.balance_matches = c.balance_integral;
  for (std::size_t j = 1; j < N; ++j)
    if (static_cast<double>(balance[j]) != std::round(c.balance_value)) c.balance_matches = false;
  c.sign_balance = std::move(balance);
  return c;
}

} // namespace sidco
