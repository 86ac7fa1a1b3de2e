#pragma once

// Dense linear algebra used throughout the library: a column-major matrix,
// a one-sided Jacobi SVD, the unit polar factor and Householder least squares.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <initializer_list>
#include <numeric>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "sidco/error.hpp"

namespace sidco {

using Vector = std::vector<double>;

// Four independent accumulators let the compiler pipeline the loop without
// reassociating; the summation order is fixed, so results are reproducible.
inline double dot(std::span<const double> a, std::span<const double> b) {
  const std::size_t n = a.size();
  double s0 = 0.0, s1 = 0.0, s2 = 0.0, s3 = 0.0;
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    s0 += a[i] * b[i];
    s1 += a[i + 1] * b[i + 1];
    s2 += a[i + 2] * b[i + 2];
    s3 += a[i + 3] * b[i + 3];
  }
  for (; i < n; ++i) s0 += a[i] * b[i];
  return (s0 + s1) + (s2 + s3);
}

inline double norm2(std::span<const double> a) { return std::sqrt(dot(a, a)); }

inline double max_abs(std::span<const double> a) {
  double m = 0.0;
  for (double v : a) m = std::max(m, std::abs(v));
  return m;
}

/// Column-major dense matrix of doubles. Columns are contiguous, so frame
/// vectors can be handed out as spans without copying.
class DenseMatrix {
public:
  DenseMatrix() = default;

  DenseMatrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {
    if (rows == 0 || cols == 0) throw InvalidInput("DenseMatrix: zero dimension");
  }

  static DenseMatrix identity(std::size_t n) {
    DenseMatrix I(n, n);
    for (std::size_t i = 0; i < n; ++i) I(i, i) = 1.0;
    return I;
  }

  /// Builds a matrix from row-wise nested braces, e.g. {{1, 2}, {3, 4}}.
  static DenseMatrix from_rows(std::initializer_list<std::initializer_list<double>> rows) {
    const std::size_t r = rows.size();
    const std::size_t c = r ? rows.begin()->size() : 0;
    DenseMatrix M(r, c);
    std::size_t i = 0;
    for (const auto& row : rows) {
      if (row.size() != c) throw InvalidInput("DenseMatrix::from_rows: ragged rows");
      std::size_t j = 0;
      for (double v : row) M(i, j++) = v;
      ++i;
    }
    return M;
  }

  static DenseMatrix from_columns(const std::vector<Vector>& cols) {
    if (cols.empty()) throw InvalidInput("DenseMatrix::from_columns: no columns");
    DenseMatrix M(cols.front().size(), cols.size());
    for (std::size_t j = 0; j < cols.size(); ++j) {
      if (cols[j].size() != M.rows_) throw InvalidInput("DenseMatrix::from_columns: ragged");
      std::copy(cols[j].begin(), cols[j].end(), M.col(j).begin());
    }
    return M;
  }

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  bool empty() const noexcept { return data_.empty(); }

  double& operator()(std::size_t i, std::size_t j) { return data_[j * rows_ + i]; }
  double operator()(std::size_t i, std::size_t j) const { return data_[j * rows_ + i]; }

  std::span<double> col(std::size_t j) { return {data_.data() + j * rows_, rows_}; }
  std::span<const double> col(std::size_t j) const { return {data_.data() + j * rows_, rows_}; }

  std::span<double> data() noexcept { return data_; }
  std::span<const double> data() const noexcept { return data_; }

  Vector column(std::size_t j) const { return {col(j).begin(), col(j).end()}; }

  DenseMatrix transpose() const {
    DenseMatrix T(cols_, rows_);
    for (std::size_t j = 0; j < cols_; ++j)
      for (std::size_t i = 0; i < rows_; ++i) T(j, i) = (*this)(i, j);
    return T;
  }

  /// Copy of the columns listed in `idx`, in that order.
  DenseMatrix select_columns(std::span<const std::size_t> idx) const {
    DenseMatrix S(rows_, idx.size());
    for (std::size_t k = 0; k < idx.size(); ++k) std::copy_n(col(idx[k]).begin(), rows_, S.col(k).begin());
    return S;
  }

  double max_abs() const { return sidco::max_abs(data_); }

  double frobenius_norm() const { return norm2(data_); }

  bool all_finite() const {
    return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
  }

  DenseMatrix& operator+=(const DenseMatrix& o) {
    check_same_shape(o);
    for (std::size_t k = 0; k < data_.size(); ++k) data_[k] += o.data_[k];
    return *this;
  }
  DenseMatrix& operator-=(const DenseMatrix& o) {
    check_same_shape(o);
    for (std::size_t k = 0; k < data_.size(); ++k) data_[k] -= o.data_[k];
    return *this;
  }
  DenseMatrix& operator*=(double s) {
    for (double& v : data_) v *= s;
    return *this;
  }

  friend DenseMatrix operator+(DenseMatrix a, const DenseMatrix& b) { return a += b; }
  friend DenseMatrix operator-(DenseMatrix a, const DenseMatrix& b) { return a -= b; }
  friend DenseMatrix operator*(DenseMatrix a, double s) { return a *= s; }
  friend DenseMatrix operator*(double s, DenseMatrix a) { return a *= s; }

  friend DenseMatrix operator*(const DenseMatrix& a, const DenseMatrix& b) {
    if (a.cols_ != b.rows_) throw InvalidInput("DenseMatrix product: inner dimension mismatch");
    DenseMatrix C(a.rows_, b.cols_);
    for (std::size_t j = 0; j < b.cols_; ++j) {
      auto cj = C.col(j);
      for (std::size_t k = 0; k < a.cols_; ++k) {
        const double bkj = b(k, j);
        if (bkj == 0.0) continue;
        auto ak = a.col(k);
        for (std::size_t i = 0; i < a.rows_; ++i) cj[i] += ak[i] * bkj;
      }
    }
    return C;
  }

  friend Vector operator*(const DenseMatrix& a, std::span<const double> x) {
    if (a.cols_ != x.size()) throw InvalidInput("DenseMatrix-vector product: dimension mismatch");
    Vector y(a.rows_, 0.0);
    for (std::size_t k = 0; k < a.cols_; ++k) {
      if (x[k] == 0.0) continue;
      auto ak = a.col(k);
      for (std::size_t i = 0; i < a.rows_; ++i) y[i] += ak[i] * x[k];
    }
    return y;
  }

  friend bool operator==(const DenseMatrix&, const DenseMatrix&) = default;

private:
  void check_same_shape(const DenseMatrix& o) const {
    if (rows_ != o.rows_ || cols_ != o.cols_) throw InvalidInput("DenseMatrix: shape mismatch");
  }

  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

/// Aᵀx without forming the transpose.
inline Vector transpose_times(const DenseMatrix& A, std::span<const double> x) {
  if (A.rows() != x.size()) throw InvalidInput("transpose_times: dimension mismatch");
  Vector y(A.cols());
  for (std::size_t j = 0; j < A.cols(); ++j) y[j] = dot(A.col(j), x);
  return y;
}

/// AᵀA.
inline DenseMatrix gram(const DenseMatrix& A) {
  const std::size_t n = A.cols();
  DenseMatrix G(n, n);
  for (std::size_t j = 0; j < n; ++j)
    for (std::size_t i = 0; i <= j; ++i) {
      const double v = dot(A.col(i), A.col(j));
      G(i, j) = v;
      G(j, i) = v;
    }
  return G;
}

/// Scales every column to unit ℓ2 norm. Zero columns are rejected.
inline void normalize_columns(DenseMatrix& A) {
  for (std::size_t j = 0; j < A.cols(); ++j) {
    auto c = A.col(j);
    const double n = norm2(c);
    if (!(n > 0.0) || !std::isfinite(n)) throw InvalidInput("normalize_columns: zero or non-finite column");
    for (double& v : c) v /= n;
  }
}

struct SvdResult {
  DenseMatrix U;  // rows × k, orthonormal columns
  Vector S;       // k values, descending, non-negative
  DenseMatrix V;  // cols × k, orthonormal columns
  /// Number of U columns filled in by orthonormal completion because their
  /// singular value fell below the rank threshold.
  std::size_t completed = 0;
};

namespace detail {

inline constexpr double kJacobiTol = 1e-12;
inline constexpr int kJacobiMaxSweeps = 60;
inline constexpr double kRankTol = 1e-12;

// Fills column j of U so that it is orthonormal to columns [0, j), using the
// standard basis vector with the largest component outside their span (at
// least √((m−j)/m)). Deterministic: ties go to the lowest index.
inline void complete_column(DenseMatrix& U, std::size_t j) {
  const std::size_t m = U.rows();
  Vector cand(m), best;
  double best_norm = 0.0;
  for (std::size_t r = 0; r < m; ++r) {
    std::fill(cand.begin(), cand.end(), 0.0);
    cand[r] = 1.0;
    for (int pass = 0; pass < 2; ++pass)
      for (std::size_t q = 0; q < j; ++q) {
        const double proj = dot(U.col(q), cand);
        auto uq = U.col(q);
        for (std::size_t i = 0; i < m; ++i) cand[i] -= proj * uq[i];
      }
    const double n = norm2(cand);
    if (n > best_norm + 1e-12) {
      best_norm = n;
      best = cand;
    }
  }
  if (!(best_norm > 0.5 / std::sqrt(static_cast<double>(m)))) throw NumericsFailure("svd: orthonormal completion failed");
  auto uj = U.col(j);
  for (std::size_t i = 0; i < m; ++i) uj[i] = best[i] / best_norm;
}

// One-sided Jacobi for rows ≥ cols.
inline SvdResult svd_tall(const DenseMatrix& A) {
  const std::size_t m = A.rows();
  const std::size_t n = A.cols();
  DenseMatrix W = A;
  DenseMatrix V = DenseMatrix::identity(n);

  bool converged = false;
  for (int sweep = 0; sweep < kJacobiMaxSweeps && !converged; ++sweep) {
    converged = true;
    for (std::size_t p = 0; p + 1 < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) {
        auto wp = W.col(p);
        auto wq = W.col(q);
        const double alpha = dot(wp, wp);
        const double beta = dot(wq, wq);
        const double gamma = dot(wp, wq);
        if (alpha == 0.0 || beta == 0.0) continue;
        if (std::abs(gamma) <= kJacobiTol * std::sqrt(alpha * beta)) continue;
        converged = false;
        const double zeta = (beta - alpha) / (2.0 * gamma);
        const double t = std::copysign(1.0, zeta) / (std::abs(zeta) + std::sqrt(1.0 + zeta * zeta));
        const double c = 1.0 / std::sqrt(1.0 + t * t);
        const double s = c * t;
        for (std::size_t i = 0; i < m; ++i) {
          const double a = wp[i];
          const double b = wq[i];
          wp[i] = c * a - s * b;
          wq[i] = s * a + c * b;
        }
        auto vp = V.col(p);
        auto vq = V.col(q);
        for (std::size_t i = 0; i < n; ++i) {
          const double a = vp[i];
          const double b = vq[i];
          vp[i] = c * a - s * b;
          vq[i] = s * a + c * b;
        }
      }
    }
  }
  if (!converged) throw NumericsFailure("svd: Jacobi sweeps did not converge");

  Vector sigma(n);
  for (std::size_t j = 0; j < n; ++j) sigma[j] = norm2(W.col(j));
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return sigma[a] > sigma[b]; });

  SvdResult r{DenseMatrix(m, n), Vector(n), DenseMatrix(n, n), 0};
  const double smax = sigma[order[0]];
  for (std::size_t k = 0; k < n; ++k) {
    const std::size_t j = order[k];
    r.S[k] = sigma[j];
    std::copy_n(V.col(j).begin(), n, r.V.col(k).begin());
  }
  for (std::size_t k = 0; k < n; ++k) {
    const std::size_t j = order[k];
    if (r.S[k] > kRankTol * smax && r.S[k] > 0.0) {
      auto src = W.col(j);
      auto dst = r.U.col(k);
      for (std::size_t i = 0; i < m; ++i) dst[i] = src[i] / r.S[k];
    } else {
      complete_column(r.U, k);
      ++r.completed;
    }
  }
  return r;
}

} // namespace detail

/// Thin singular value decomposition A = U·diag(S)·Vᵀ by one-sided Jacobi.
inline SvdResult svd(const DenseMatrix& A) {
  if (A.empty()) throw InvalidInput("svd: empty matrix");
  if (!A.all_finite()) throw InvalidInput("svd: non-finite entries");
  if (A.rows() >= A.cols()) return detail::svd_tall(A);
  SvdResult t = detail::svd_tall(A.transpose());
  return SvdResult{std::move(t.V), std::move(t.S), std::move(t.U), t.completed};
}

/// Unit polar factor U·Vᵀ of a full-row-rank m×N matrix with m ≤ N: the
/// Frobenius-closest matrix with orthonormal rows.
inline DenseMatrix unit_polar(const DenseMatrix& A) {
  if (A.empty() || A.rows() > A.cols()) throw InvalidInput("unit_polar: need rows <= cols");
  const SvdResult r = svd(A);
  if (r.S.back() <= detail::kRankTol * r.S.front()) throw RankDeficient("unit_polar: matrix is rank deficient");
  return r.U * r.V.transpose();
}

/// U·Vᵀ for a possibly rank-deficient matrix; null directions of U are
/// completed deterministically. Used for orthogonal Procrustes.
struct PolarFactor {
  DenseMatrix Q;
  bool rank_deficient = false;
};

inline PolarFactor orthogonal_polar(const DenseMatrix& A) {
  const SvdResult r = svd(A);
  return {r.U * r.V.transpose(), r.completed > 0};
}

/// Minimizer of ‖Ax − b‖₂ for a full-column-rank A (Householder QR).
inline Vector least_squares(const DenseMatrix& A, std::span<const double> b) {
  const std::size_t m = A.rows();
  const std::size_t k = A.cols();
  if (A.empty() || k > m) throw InvalidInput("least_squares: need cols <= rows");
  if (b.size() != m) throw InvalidInput("least_squares: rhs length mismatch");

  DenseMatrix R = A;
  Vector y(b.begin(), b.end());
  Vector diag(k);
  Vector v(m);
  for (std::size_t j = 0; j < k; ++j) {
    auto rj = R.col(j);
    double nrm = 0.0;
    for (std::size_t i = j; i < m; ++i) nrm += rj[i] * rj[i];
    nrm = std::sqrt(nrm);
    const double alpha = rj[j] > 0 ? -nrm : nrm;
    diag[j] = alpha;
    if (nrm == 0.0) continue;
    for (std::size_t i = 0; i < j; ++i) v[i] = 0.0;
    for (std::size_t i = j; i < m; ++i) v[i] = rj[i];
    v[j] -= alpha;
    double vv = 0.0;
    for (std::size_t i = j; i < m; ++i) vv += v[i] * v[i];
    if (vv == 0.0) continue;
    auto reflect = [&](std::span<double> x) {
      double s = 0.0;
      for (std::size_t i = j; i < m; ++i) s += v[i] * x[i];
      s = 2.0 * s / vv;
      for (std::size_t i = j; i < m; ++i) x[i] -= s * v[i];
    };
    for (std::size_t c = j; c < k; ++c) reflect(R.col(c));
    reflect(y);
  }
  double dmax = 0.0;
  for (double d : diag) dmax = std::max(dmax, std::abs(d));
  for (double d : diag)
    if (!(std::abs(d) > detail::kRankTol * dmax)) throw RankDeficient("least_squares: rank deficient system");

  Vector x(k);
  for (std::size_t jj = k; jj-- > 0;) {
    double s = y[jj];
    for (std::size_t c = jj + 1; c < k; ++c) s -= R(jj, c) * x[c];
    x[jj] = s / R(jj, jj);
  }
  return x;
}

/// Cholesky factor of a symmetric positive definite matrix. The factor is
/// stored transposed (upper triangle, column-major) so both the factorization
/// and the solves walk contiguous memory.
class Cholesky {
public:
  /// Factors the lower triangle of M. Returns false if M is not numerically
  /// positive definite.
  bool factor(const DenseMatrix& M) {
    n_ = M.rows();
    R_ = DenseMatrix(n_, n_);
    for (std::size_t j = 0; j < n_; ++j) {
      auto rj = R_.col(j);
      for (std::size_t i = 0; i <= j; ++i) {
        auto ri = R_.col(i);
        const double s = M(j, i) - dot(ri.first(i), rj.first(i));
        if (i < j) {
          rj[i] = s / ri[i];
        } else {
          if (!(s > 0.0)) return false;
          rj[j] = std::sqrt(s);
        }
      }
    }
    return true;
  }

  void solve(Vector& b) const {
    for (std::size_t i = 0; i < n_; ++i) {
      auto ri = R_.col(i);
      double s = b[i];
      for (std::size_t k = 0; k < i; ++k) s -= ri[k] * b[k];
      b[i] = s / ri[i];
    }
    for (std::size_t i = n_; i-- > 0;) {
      b[i] /= R_(i, i);
      auto ri = R_.col(i);
      for (std::size_t k = 0; k < i; ++k) b[k] -= ri[k] * b[i];
    }
  }

private:
  std::size_t n_ = 0;
  DenseMatrix R_;
};

} // namespace sidco
