#pragma once

// One trust-region subproblem of the frame design loop:
//
//   minimize   max_j ⟨h_j, f⟩
//   subject to ‖f − h_i‖² ≤ T        (and optionally f ≥ 0)
//
// Writing f = h_i + √T·u turns the ball into the second-order cone constraint
// (1, u) ⪰ 0, and the epigraph form becomes a linear cone program. It is
// solved by a feasible primal-dual interior-point method; every iterate
// yields a certified duality gap through the closed-form Lagrange dual
//
//   d(λ, ν) = ⟨w, h_i⟩ − √T·‖w‖,   w = Σ λ_j h_j − ν,   Σ λ_j = 1.
//
// Once the gap is small the active set is read off the multipliers and the
// KKT system restricted to it is solved exactly, which puts the solution on
// the ball boundary with exact complementarity.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "sidco/error.hpp"
#include "sidco/numerics.hpp"

namespace sidco {

/// One instance of the per-vector problem. Neighbors are the (sign-canonical)
/// other frame vectors retained for the reference vector h.
class TrustSubproblem {
public:
  TrustSubproblem(Vector reference, DenseMatrix neighbors, double radius_sq, bool nonneg = false)
      : h_(std::move(reference)), A_(std::move(neighbors)), T_(radius_sq), nonneg_(nonneg) {
    constexpr double tol = 1e-10;
    if (!(T_ > 0.0 && T_ < 1.0)) throw InvalidInput("TrustSubproblem: radius must lie in (0, 1)");
    if (A_.empty() || A_.rows() != h_.size()) throw InvalidInput("TrustSubproblem: neighbor shape mismatch");
    if (std::abs(norm2(h_) - 1.0) > tol) throw InvalidInput("TrustSubproblem: reference not unit norm");
    double gmax = 0.0;
    for (std::size_t j = 0; j < A_.cols(); ++j) {
      if (std::abs(norm2(A_.col(j)) - 1.0) > tol) throw InvalidInput("TrustSubproblem: neighbor not unit norm");
      const double g = dot(A_.col(j), h_);
      if (g < -tol) throw InvalidInput("TrustSubproblem: neighbor correlation is negative");
      gmax = std::max(gmax, g);
    }
    if (nonneg_)
      for (double v : h_)
        if (v < -tol) throw InvalidInput("TrustSubproblem: nonnegative mode needs h >= 0");
    if (T_ >= 1.0 - gmax * gmax) throw InvalidInput("TrustSubproblem: radius admits a collinear neighbor");
  }

  const Vector& reference() const noexcept { return h_; }
  const DenseMatrix& neighbors() const noexcept { return A_; }
  double radius_sq() const noexcept { return T_; }
  bool nonneg() const noexcept { return nonneg_; }
  std::size_t dim() const noexcept { return h_.size(); }
  std::size_t num_neighbors() const noexcept { return A_.cols(); }

private:
  Vector h_;
  DenseMatrix A_;
  double T_;
  bool nonneg_;
};

struct KktResiduals {
  double stationarity = 0.0;
  double complementarity = 0.0;
  double primal_feasibility = 0.0;
  double dual_feasibility = 0.0;

  double max() const { return std::max({stationarity, complementarity, primal_feasibility, dual_feasibility}); }
};

struct SubproblemSolution {
  Vector f;                  // optimizer before normalization
  double t = 0.0;            // max_j ⟨h_j, f⟩
  Vector lambda;             // one multiplier per neighbor
  double lambda_ball = 0.0;  // multiplier of the ball constraint
  Vector lambda_bounds;      // multipliers of f ≥ 0 (nonnegative mode only)
  KktResiduals kkt;
  double gap = 0.0;          // certified duality gap
  int iterations = 0;
  bool polished = false;
};

/// Thrown when the interior-point iteration cap is hit with gap > tol.
class SolverStall : public Error {
public:
  SolverStall(SubproblemSolution best, double gap)
      : Error("subproblem solver stalled with gap " + std::to_string(gap)), best_(std::move(best)), gap_(gap) {}
  const SubproblemSolution& best() const noexcept { return best_; }
  double gap() const noexcept { return gap_; }

private:
  SubproblemSolution best_;
  double gap_;
};

/// Max-norm residuals of the KKT system, evaluated from scratch:
/// stationarity Σλ_j h_j − ν + 2λ_ball(f − h) = 0 and Σλ_j = 1, complementary
/// slackness, primal feasibility and multiplier signs.
inline KktResiduals kkt_residuals(const TrustSubproblem& p, const SubproblemSolution& s) {
  const DenseMatrix& A = p.neighbors();
  const Vector& h = p.reference();
  const std::size_t m = p.dim();
  KktResiduals r;

  Vector stat = A * std::span<const double>(s.lambda);
  double lsum = 0.0;
  for (double l : s.lambda) lsum += l;
  for (std::size_t i = 0; i < m; ++i) {
    stat[i] += 2.0 * s.lambda_ball * (s.f[i] - h[i]);
    if (p.nonneg() && !s.lambda_bounds.empty()) stat[i] -= s.lambda_bounds[i];
  }
  r.stationarity = std::max(max_abs(stat), std::abs(1.0 - lsum));

  double dist2 = 0.0;
  for (std::size_t i = 0; i < m; ++i) dist2 += (s.f[i] - h[i]) * (s.f[i] - h[i]);
  const double ball = dist2 - p.radius_sq();

  r.complementarity = std::abs(s.lambda_ball * ball);
  r.primal_feasibility = std::max(0.0, ball);
  r.dual_feasibility = std::max(0.0, -s.lambda_ball);
  for (std::size_t j = 0; j < A.cols(); ++j) {
    const double g = dot(A.col(j), s.f) - s.t;
    r.complementarity = std::max(r.complementarity, std::abs(s.lambda[j] * g));
    r.primal_feasibility = std::max(r.primal_feasibility, g);
    r.dual_feasibility = std::max(r.dual_feasibility, -s.lambda[j]);
  }
  if (p.nonneg()) {
    for (std::size_t i = 0; i < m; ++i) {
      r.primal_feasibility = std::max(r.primal_feasibility, -s.f[i]);
      if (!s.lambda_bounds.empty()) {
        r.complementarity = std::max(r.complementarity, std::abs(s.lambda_bounds[i] * s.f[i]));
        r.dual_feasibility = std::max(r.dual_feasibility, -s.lambda_bounds[i]);
      }
    }
  }
  return r;
}

namespace detail {

inline constexpr int kIpmMaxIterations = 100;

// Lagrange dual value for multipliers normalized so that Σλ = 1.
inline double dual_value(const TrustSubproblem& p, std::span<const double> lambda, std::span<const double> nu) {
  double lsum = 0.0;
  for (double l : lambda) lsum += l;
  if (!(lsum > 0.0)) return -std::numeric_limits<double>::infinity();
  Vector w = p.neighbors() * lambda;
  for (std::size_t i = 0; i < w.size(); ++i) {
    if (!nu.empty()) w[i] -= nu[i];
    w[i] /= lsum;
  }
  return dot(w, p.reference()) - std::sqrt(p.radius_sq()) * norm2(w);
}

inline double max_correlation(const DenseMatrix& A, std::span<const double> f) {
  double t = -std::numeric_limits<double>::infinity();
  for (std::size_t j = 0; j < A.cols(); ++j) t = std::max(t, dot(A.col(j), f));
  return t;
}

// Scaling data for the second-order cone block: W = β(2vvᵀ − J) with
// J = diag(1, −I) and vᵀJv = 1, so that W·z = W⁻¹·s = λ.
struct SocScaling {
  double beta = 1.0;
  Vector w;       // v
  Vector lambda;  // scaled point
};

inline double soc_det(std::span<const double> u) {
  double r = 0.0;
  for (std::size_t i = 1; i < u.size(); ++i) r += u[i] * u[i];
  return u[0] * u[0] - r;
}

// W·v (inverse = false) or W⁻¹·v (inverse = true).
inline Vector soc_apply(const SocScaling& W, std::span<const double> v, bool inverse) {
  const std::size_t n = v.size();
  Vector out(n);
  if (!inverse) {
    // β(2w̄(w̄ᵀv) − Jv)
    const double wv = dot(W.w, v);
    out[0] = W.beta * (2.0 * W.w[0] * wv - v[0]);
    for (std::size_t i = 1; i < n; ++i) out[i] = W.beta * (2.0 * W.w[i] * wv + v[i]);
  } else {
    // (1/β)(2Jw̄(w̄ᵀJv) − Jv)
    double wjv = W.w[0] * v[0];
    for (std::size_t i = 1; i < n; ++i) wjv -= W.w[i] * v[i];
    out[0] = (2.0 * W.w[0] * wjv - v[0]) / W.beta;
    for (std::size_t i = 1; i < n; ++i) out[i] = (-2.0 * W.w[i] * wjv + v[i]) / W.beta;
  }
  return out;
}

inline SocScaling soc_scaling(std::span<const double> s, std::span<const double> z) {
  const std::size_t n = s.size();
  const double ns = std::sqrt(soc_det(s));
  const double nz = std::sqrt(soc_det(z));
  double sz = 0.0;
  for (std::size_t i = 0; i < n; ++i) sz += s[i] * z[i];
  const double gamma = std::sqrt(0.5 * (1.0 + sz / (ns * nz)));
  SocScaling W;
  W.beta = std::sqrt(ns / nz);
  // Scaling point w̃ = (s̄ + Jz̄)/(2γ), then the Householder-like vector
  // v = (w̃ + e)/√(2(w̃₀ + 1)).
  Vector wt(n);
  wt[0] = (s[0] / ns + z[0] / nz) / (2.0 * gamma);
  for (std::size_t i = 1; i < n; ++i) wt[i] = (s[i] / ns - z[i] / nz) / (2.0 * gamma);
  const double c = std::sqrt(2.0 * (wt[0] + 1.0));
  W.w.resize(n);
  W.w[0] = (wt[0] + 1.0) / c;
  for (std::size_t i = 1; i < n; ++i) W.w[i] = wt[i] / c;
  W.lambda = soc_apply(W, z, false);
  return W;
}

// Solves λ∘u = v for u in the Jordan algebra of the cone.
inline Vector soc_jordan_solve(std::span<const double> lam, std::span<const double> v) {
  const std::size_t n = v.size();
  double l1v1 = 0.0;
  for (std::size_t i = 1; i < n; ++i) l1v1 += lam[i] * v[i];
  Vector u(n);
  u[0] = (lam[0] * v[0] - l1v1) / soc_det(lam);
  for (std::size_t i = 1; i < n; ++i) u[i] = (v[i] - u[0] * lam[i]) / lam[0];
  return u;
}

// Largest α with u + α·du inside the cone (∞ if it never leaves).
inline double soc_max_step(std::span<const double> u, std::span<const double> du) {
  double a = du[0] * du[0], b = u[0] * du[0], c = u[0] * u[0];
  for (std::size_t i = 1; i < u.size(); ++i) {
    a -= du[i] * du[i];
    b -= u[i] * du[i];
    c -= u[i] * u[i];
  }
  // a α² + 2bα + c with c > 0; the feasible set is an interval [0, α*].
  const double inf = std::numeric_limits<double>::infinity();
  if (a == 0.0) return b < 0.0 ? -c / (2.0 * b) : inf;
  const double disc = b * b - a * c;
  if (disc < 0.0) return inf;  // a > 0 and no real root
  const double q = -(b + std::copysign(std::sqrt(disc), b));
  const double r1 = q / a, r2 = c / q;
  double best = inf;
  for (double r : {r1, r2})
    if (r > 0.0) best = std::min(best, r);
  return best;
}

// Feasible primal-dual interior-point method on the conic form
//
//   minimize t  over x = (u, t), f = h + √T·u
//   s.t.  t − ⟨a_j, f⟩ ≥ 0,  f ≥ 0 (optional),  (1, u) ∈ second-order cone
//
// with Nesterov–Todd scaling and a Mehrotra corrector. Both starts are
// strictly feasible and every constraint is linear in x, so feasibility is
// preserved along the path.
class SubproblemIpm {
public:
  SubproblemIpm(const TrustSubproblem& p, double tol)
      : p_(p), A_(p.neighbors()), h_(p.reference()), m_(p.dim()), k_(p.num_neighbors()),
        nb_(p.nonneg() ? p.dim() : 0), T_(p.radius_sq()), rt_(std::sqrt(T_)), tol_(tol) {}

  SubproblemSolution run() {
    initialize();
    SubproblemSolution best;
    best.gap = std::numeric_limits<double>::infinity();
    int polish_attempts = 0;

    for (int it = 0; it <= kIpmMaxIterations; ++it) {
      const double gap = certified_gap();
      if (gap < best.gap) best = assemble(it);
      if (gap <= polish_threshold() && polish_attempts < kMaxPolishAttempts) {
        ++polish_attempts;
        if (auto polished = polish(it)) return *std::move(polished);
      }
      if (best.gap <= tol_ && polish_attempts >= kMaxPolishAttempts) break;
      if (it == kIpmMaxIterations || !step()) break;
    }
    if (best.gap <= tol_) return best;
    throw SolverStall(best, best.gap);
  }

private:
  static constexpr int kMaxPolishAttempts = 8;

  double polish_threshold() const { return std::max(tol_, 1e-5); }
  std::size_t nlin() const { return k_ + nb_; }
  std::size_t nsoc() const { return m_ + 1; }

  void initialize() {
    u_.assign(m_, 0.0);
    if (p_.nonneg()) {
      const double shift = 1.0 / (4.0 * std::sqrt(static_cast<double>(m_)));
      for (std::size_t i = 0; i < m_; ++i) u_[i] = -0.5 * h_[i] + shift;
    } else {
      Vector w(m_, 0.0);
      for (std::size_t j = 0; j < k_; ++j) {
        auto a = A_.col(j);
        for (std::size_t i = 0; i < m_; ++i) w[i] += a[i];
      }
      const double nw = norm2(w);
      if (nw > 0.0)
        for (std::size_t i = 0; i < m_; ++i) u_[i] = -0.5 * w[i] / nw;
    }
    sync_f();
    t_ = max_correlation(A_, f_) + std::max(0.1, rt_);

    z_.assign(nlin(), 0.0);
    for (std::size_t j = 0; j < k_; ++j) z_[j] = 1.0 / static_cast<double>(k_);
    for (std::size_t l = 0; l < nb_; ++l) z_[k_ + l] = 1e-2;
    // Dual feasibility fixes the cone part of z up to its first entry.
    zc_.assign(nsoc(), 0.0);
    for (std::size_t j = 0; j < k_; ++j) {
      auto a = A_.col(j);
      for (std::size_t i = 0; i < m_; ++i) zc_[i + 1] += rt_ * z_[j] * a[i];
    }
    for (std::size_t l = 0; l < nb_; ++l) zc_[l + 1] -= rt_ * z_[k_ + l];
    zc_[0] = norm2(std::span<const double>(zc_.data() + 1, m_)) + 1.0;
    update_slacks();
  }

  void sync_f() {
    f_.resize(m_);
    for (std::size_t i = 0; i < m_; ++i) f_[i] = h_[i] + rt_ * u_[i];
  }

  void update_slacks() {
    s_.assign(nlin(), 0.0);
    for (std::size_t j = 0; j < k_; ++j) s_[j] = t_ - dot(A_.col(j), f_);
    for (std::size_t l = 0; l < nb_; ++l) s_[k_ + l] = f_[l];
    sc_.assign(nsoc(), 0.0);
    sc_[0] = 1.0;
    for (std::size_t i = 0; i < m_; ++i) sc_[i + 1] = u_[i];
    // Ball multiplier in the ‖f − h‖² ≤ T normalization, for polish().
    zq_ = zc_[0] / (2.0 * T_);
  }

  double complementarity() const {
    double c = dot(sc_, zc_);
    for (std::size_t r = 0; r < s_.size(); ++r) c += s_[r] * z_[r];
    return c / static_cast<double>(nlin() + 1);
  }

  double certified_gap() const {
    const double primal = max_correlation(A_, feasible_point());
    std::span<const double> lam(z_.data(), k_);
    std::span<const double> nu = nb_ ? std::span<const double>(z_.data() + k_, nb_) : std::span<const double>();
    return primal - dual_value(p_, lam, nu);
  }

  // G·dx split into (linear rows, cone rows).
  void apply_g(const Vector& dx, Vector& lin, Vector& cone) const {
    std::span<const double> du(dx.data(), m_);
    lin.assign(nlin(), 0.0);
    for (std::size_t j = 0; j < k_; ++j) lin[j] = rt_ * dot(A_.col(j), du) - dx[m_];
    for (std::size_t l = 0; l < nb_; ++l) lin[k_ + l] = -rt_ * dx[l];
    cone.assign(nsoc(), 0.0);
    for (std::size_t i = 0; i < m_; ++i) cone[i + 1] = -dx[i];
  }

  Vector apply_gt(const Vector& lin, const Vector& cone) const {
    Vector out(m_ + 1, 0.0);
    for (std::size_t j = 0; j < k_; ++j) {
      auto a = A_.col(j);
      for (std::size_t i = 0; i < m_; ++i) out[i] += rt_ * lin[j] * a[i];
      out[m_] -= lin[j];
    }
    for (std::size_t l = 0; l < nb_; ++l) out[l] -= rt_ * lin[k_ + l];
    for (std::size_t i = 0; i < m_; ++i) out[i] -= cone[i + 1];
    return out;
  }

  // One predictor-corrector step. Returns false if the Newton matrix broke
  // down or the step length collapsed.
  bool step() {
    const std::size_t n = m_ + 1;
    const std::size_t nl = nlin(), nc = nsoc();

    // Scaled point: λ = √(s·z) on the orthant, W·z on the cone.
    Vector lam(nl), wl(nl);  // wl = W on the orthant = √(s/z)
    for (std::size_t r = 0; r < nl; ++r) {
      lam[r] = std::sqrt(s_[r] * z_[r]);
      wl[r] = std::sqrt(s_[r] / z_[r]);
    }
    if (!(soc_det(sc_) > 0.0 && soc_det(zc_) > 0.0)) return false;
    const SocScaling W = soc_scaling(sc_, zc_);

    // Gᵀ W⁻² G.
    DenseMatrix M(n, n);
    {
      // Rows of √T·A·diag(1/w) laid out contiguously, so each entry of the
      // u–u block is one dot product of length k.
      DenseMatrix S(k_, m_);
      Vector inv(k_);
      for (std::size_t j = 0; j < k_; ++j) {
        inv[j] = 1.0 / wl[j];
        auto a = A_.col(j);
        for (std::size_t c = 0; c < m_; ++c) S(j, c) = rt_ * inv[j] * a[c];
      }
      for (std::size_t c = 0; c < m_; ++c) {
        auto Sc = S.col(c);
        for (std::size_t r = c; r < m_; ++r) M(r, c) = dot(S.col(r), Sc);
        M(m_, c) = -dot(Sc, inv);
      }
      M(m_, m_) = dot(inv, inv);
    }
    for (std::size_t l = 0; l < nb_; ++l) M(l, l) += T_ / (wl[k_ + l] * wl[k_ + l]);
    {
      double ww = 0.0;
      for (double v : W.w) ww += v * v;
      const double scale = 1.0 / (W.beta * W.beta);
      const double rank1 = scale * 4.0 * (ww + 1.0);
      for (std::size_t c = 0; c < m_; ++c) {
        auto Mc = M.col(c);
        for (std::size_t r = c; r < m_; ++r) Mc[r] += rank1 * W.w[r + 1] * W.w[c + 1];
        Mc[c] += scale;
      }
    }
    Cholesky chol;
    if (!chol.factor(M)) {
      for (std::size_t i = 0; i < n; ++i) M(i, i) += 1e-13 * (1.0 + M(i, i));
      if (!chol.factor(M)) return false;
    }

    // Residuals; zero up to rounding since both iterates stay feasible.
    Vector rx = apply_gt(z_, zc_);
    rx[m_] += 1.0;
    Vector rzl(nl), rzc(nc);
    {
      Vector x(u_);
      x.push_back(t_);
      Vector gl, gc;
      apply_g(x, gl, gc);
      for (std::size_t j = 0; j < k_; ++j) rzl[j] = gl[j] + s_[j] + dot(A_.col(j), h_);
      for (std::size_t l = 0; l < nb_; ++l) rzl[k_ + l] = gl[k_ + l] + s_[k_ + l] - h_[l];
      for (std::size_t i = 0; i < nc; ++i) rzc[i] = gc[i] + sc_[i] - (i == 0 ? 1.0 : 0.0);
    }

    // Given the complementarity right-hand side (rl, rc) in λ-space, returns
    // (dx, ds, dz) split into orthant and cone parts.
    struct Dir {
      Vector dx, dsl, dsc, dzl, dzc;
    };
    auto solve_direction = [&](const Vector& rl, const Vector& rcone) {
      Dir d;
      // q = λ⧵r, then W⁻¹q and W⁻²r_z.
      Vector ql(nl), wql(nl), tl(nl);
      for (std::size_t r = 0; r < nl; ++r) {
        ql[r] = rl[r] / lam[r];
        wql[r] = ql[r] / wl[r];
        tl[r] = wql[r] + rzl[r] / (wl[r] * wl[r]);
      }
      const Vector qc = soc_jordan_solve(W.lambda, rcone);
      const Vector wqc = soc_apply(W, qc, true);
      const Vector w2rz = soc_apply(W, soc_apply(W, rzc, true), true);
      Vector tc(nc);
      for (std::size_t i = 0; i < nc; ++i) tc[i] = wqc[i] + w2rz[i];
      d.dx = apply_gt(tl, tc);
      for (std::size_t i = 0; i < n; ++i) d.dx[i] = -rx[i] - d.dx[i];
      chol.solve(d.dx);

      Vector gl, gc;
      apply_g(d.dx, gl, gc);
      d.dzl.resize(nl);
      d.dsl.resize(nl);
      for (std::size_t r = 0; r < nl; ++r) {
        d.dzl[r] = wql[r] + (gl[r] + rzl[r]) / (wl[r] * wl[r]);
        d.dsl[r] = wl[r] * (ql[r] - wl[r] * d.dzl[r]);
      }
      Vector gr(nc);
      for (std::size_t i = 0; i < nc; ++i) gr[i] = gc[i] + rzc[i];
      const Vector w2g = soc_apply(W, soc_apply(W, gr, true), true);
      d.dzc.resize(nc);
      for (std::size_t i = 0; i < nc; ++i) d.dzc[i] = wqc[i] + w2g[i];
      const Vector wdz = soc_apply(W, d.dzc, false);
      Vector diff(nc);
      for (std::size_t i = 0; i < nc; ++i) diff[i] = qc[i] - wdz[i];
      d.dsc = soc_apply(W, diff, false);
      return d;
    };

    auto max_step = [&](const Dir& d) {
      double a = std::numeric_limits<double>::infinity();
      for (std::size_t r = 0; r < nl; ++r) {
        if (d.dsl[r] < 0.0) a = std::min(a, -s_[r] / d.dsl[r]);
        if (d.dzl[r] < 0.0) a = std::min(a, -z_[r] / d.dzl[r]);
      }
      a = std::min(a, soc_max_step(sc_, d.dsc));
      a = std::min(a, soc_max_step(zc_, d.dzc));
      return a;
    };

    const double mu = complementarity();

    // Affine direction: λ∘(W⁻¹ds + W dz) = −λ∘λ.
    Vector rl(nl), rcone(nc);
    for (std::size_t r = 0; r < nl; ++r) rl[r] = -lam[r] * lam[r];
    {
      double ll = 0.0;
      for (double v : W.lambda) ll += v * v;
      rcone[0] = -ll;
      for (std::size_t i = 1; i < nc; ++i) rcone[i] = -2.0 * W.lambda[0] * W.lambda[i];
    }
    const Dir aff = solve_direction(rl, rcone);
    const double a_aff = std::min(1.0, max_step(aff));
    const double sigma = std::pow(1.0 - a_aff, 3.0);

    // Corrector: subtract (W⁻¹Δs_a)∘(WΔz_a) and add σμe.
    Vector ul(nl), vl(nl);
    for (std::size_t r = 0; r < nl; ++r) {
      ul[r] = aff.dsl[r] / wl[r];
      vl[r] = aff.dzl[r] * wl[r];
      rl[r] += -ul[r] * vl[r] + sigma * mu;
    }
    {
      const Vector uc = soc_apply(W, aff.dsc, true);
      const Vector vc = soc_apply(W, aff.dzc, false);
      rcone[0] += -dot(uc, vc) + sigma * mu;
      for (std::size_t i = 1; i < nc; ++i) rcone[i] += -(uc[0] * vc[i] + vc[0] * uc[i]);
    }
    const Dir d = solve_direction(rl, rcone);
    const double alpha = std::min(1.0, 0.99 * max_step(d));
    if (!(alpha > 1e-14)) return false;

    for (std::size_t i = 0; i < m_; ++i) u_[i] += alpha * d.dx[i];
    t_ += alpha * d.dx[m_];
    for (std::size_t r = 0; r < nl; ++r) z_[r] += alpha * d.dzl[r];
    for (std::size_t i = 0; i < nc; ++i) zc_[i] += alpha * d.dzc[i];
    sync_f();
    update_slacks();
    // Recomputed slacks must stay interior; they match s + α·ds up to rounding.
    for (double v : s_)
      if (!(v > 0.0)) return false;
    return soc_det(sc_) > 0.0;
  }

  // A feasible point built from the iterate: clamped to the orthant when
  // required, then pulled toward h if it left the ball. Without the orthant
  // it is instead pushed radially onto the sphere when that does not raise
  // the objective.
  Vector feasible_point() const {
    Vector f = f_;
    if (p_.nonneg())
      for (double& v : f) v = std::max(v, 0.0);
    double d2 = 0.0;
    for (std::size_t i = 0; i < m_; ++i) d2 += (f[i] - h_[i]) * (f[i] - h_[i]);
    const double rt = std::sqrt(T_);
    const double nd = std::sqrt(d2);
    if (nd > rt) {
      for (std::size_t i = 0; i < m_; ++i) f[i] = h_[i] + (f[i] - h_[i]) * (rt / nd);
    } else if (!p_.nonneg() && nd > 0.0) {
      Vector g(m_);
      for (std::size_t i = 0; i < m_; ++i) g[i] = h_[i] + (f[i] - h_[i]) * (rt / nd);
      if (max_correlation(A_, g) <= max_correlation(A_, f)) f = std::move(g);
    }
    return f;
  }

  // Turns the current iterate into a feasible solution with normalized
  // multipliers.
  SubproblemSolution assemble(int iterations) const {
    SubproblemSolution s;
    s.iterations = iterations;
    const double rt = std::sqrt(T_);
    s.f = feasible_point();
    s.t = max_correlation(A_, s.f);

    double lsum = 0.0;
    for (std::size_t j = 0; j < k_; ++j) lsum += z_[j];
    s.lambda.assign(z_.begin(), z_.begin() + static_cast<std::ptrdiff_t>(k_));
    for (double& l : s.lambda) l /= lsum;
    if (nb_) {
      s.lambda_bounds.assign(z_.begin() + static_cast<std::ptrdiff_t>(k_), z_.end());
      for (double& l : s.lambda_bounds) l /= lsum;
    }
    Vector w = A_ * std::span<const double>(s.lambda);
    for (std::size_t i = 0; i < nb_; ++i) w[i] -= s.lambda_bounds[i];
    s.lambda_ball = norm2(w) / (2.0 * rt);
    s.gap = s.t - dual_value(p_, s.lambda, s.lambda_bounds);
    s.kkt = kkt_residuals(p_, s);
    return s;
  }

  // Reads the active set off the iterate (z_r > s_r, strongest z_r/s_r first,
  // at most m of them since f and t leave m + 1 unknowns for the ball and the
  // active rows) and polishes; on failure retries with the weakest member
  // dropped, which resolves near-degenerate ties.
  std::optional<SubproblemSolution> polish(int iterations) const {
    std::vector<std::size_t> cand;  // indices into (correlations, bounds)
    for (std::size_t r = 0; r < k_ + nb_; ++r)
      if (z_[r] > s_[r]) cand.push_back(r);
    std::stable_sort(cand.begin(), cand.end(),
                     [&](std::size_t a, std::size_t b) { return z_[a] * s_[b] > z_[b] * s_[a]; });
    if (cand.size() > m_) cand.resize(m_);
    for (int drop = 0; drop < 3 && !cand.empty(); ++drop) {
      std::vector<std::size_t> active(cand);
      std::sort(active.begin(), active.end());
      if (auto s = polish_active(active, iterations)) return s;
      cand.pop_back();
    }
    return std::nullopt;
  }

  // Solves the KKT equations restricted to `active` in closed form. With the
  // active rows g_r as columns of B (h_j for correlations, −e_l for bounds),
  // stationarity gives f = h − c·Bμ with c = 1/(2λ_ball). The active rows
  // g_rᵀf = t·δ_r then give cμ = G⁻¹(b − tδ), G = BᵀB, b = Bᵀh, and the ball
  // equation ‖f − h‖² = T becomes the scalar quadratic
  //   (b − tδ)ᵀG⁻¹(b − tδ) = T,
  // whose root with c = δᵀG⁻¹(b − tδ) > 0 is unique. Returns nothing if G is
  // singular or the result is not a KKT point of the full problem.
  std::optional<SubproblemSolution> polish_active(const std::vector<std::size_t>& active, int iterations) const {
    const std::size_t na = active.size();
    std::size_t n_corr = 0;
    for (std::size_t r : active)
      if (r < k_) ++n_corr;
    if (n_corr == 0 || na > m_) return std::nullopt;

    DenseMatrix B(m_, na);
    Vector b(na), delta(na, 0.0);
    for (std::size_t a = 0; a < na; ++a) {
      const std::size_t r = active[a];
      if (r < k_) {
        std::copy_n(A_.col(r).begin(), m_, B.col(a).begin());
        delta[a] = 1.0;
      } else {
        B(r - k_, a) = -1.0;
      }
      b[a] = dot(B.col(a), h_);
    }
    const DenseMatrix G = gram(B);
    Cholesky chol;
    if (!chol.factor(G)) return std::nullopt;
    auto solve_g = [&](const Vector& rhs) {  // one step of iterative refinement
      Vector x = rhs;
      chol.solve(x);
      Vector r = G * std::span<const double>(x);
      for (std::size_t i = 0; i < na; ++i) r[i] = rhs[i] - r[i];
      chol.solve(r);
      for (std::size_t i = 0; i < na; ++i) x[i] += r[i];
      return x;
    };
    const Vector gb = solve_g(b), gd = solve_g(delta);
    const double qd = dot(delta, gd), pd = dot(delta, gb), bb = dot(b, gb);
    const double disc = pd * pd - qd * (bb - T_);
    if (!(qd > 0.0) || !(disc > 0.0)) return std::nullopt;
    const double c = std::sqrt(disc);
    const double t = (pd - c) / qd;

    Vector y(na);  // cμ
    for (std::size_t a = 0; a < na; ++a) y[a] = gb[a] - t * gd[a];
    const Vector By = B * std::span<const double>(y);
    Vector f(m_);
    for (std::size_t i = 0; i < m_; ++i) f[i] = h_[i] - By[i];
    Vector lam(na);
    for (std::size_t a = 0; a < na; ++a) lam[a] = y[a] / c;
    const double lq = 1.0 / (2.0 * c);

    constexpr double slack = 1e-12;
    if (!(lq > 0.0)) return std::nullopt;
    for (double l : lam)
      if (l < -slack) return std::nullopt;
    if (max_correlation(A_, f) > t + slack) return std::nullopt;
    if (p_.nonneg())
      for (double v : f)
        if (v < -slack) return std::nullopt;

    SubproblemSolution s;
    s.iterations = iterations;
    s.polished = true;
    s.f = std::move(f);
    if (p_.nonneg())
      for (double& v : s.f) v = std::max(v, 0.0);
    s.t = max_correlation(A_, s.f);
    s.lambda.assign(k_, 0.0);
    if (nb_) s.lambda_bounds.assign(nb_, 0.0);
    for (std::size_t a = 0; a < na; ++a) {
      const double l = std::max(lam[a], 0.0);
      if (active[a] < k_)
        s.lambda[active[a]] = l;
      else
        s.lambda_bounds[active[a] - k_] = l;
    }
    s.lambda_ball = lq;
    s.gap = s.t - dual_value(p_, s.lambda, s.lambda_bounds);
    if (!(s.gap <= tol_)) return std::nullopt;
    s.kkt = kkt_residuals(p_, s);
    return s;
  }

  const TrustSubproblem& p_;
  const DenseMatrix& A_;
  const Vector& h_;
  std::size_t m_, k_, nb_;
  double T_, rt_, tol_;

  Vector u_, f_;
  double t_ = 0.0;
  Vector z_, s_;    // orthant part: correlations, then bounds
  Vector zc_, sc_;  // cone part
  double zq_ = 1.0;
};

} // namespace detail

/// Solves the subproblem to a certified duality gap ≤ tol.
inline SubproblemSolution solve(const TrustSubproblem& p, double tol = 1e-8) {
  if (!(tol > 0.0 && tol <= 1e-4)) throw InvalidInput("solve: tolerance must lie in (0, 1e-4]");
  return detail::SubproblemIpm(p, tol).run();
}

struct StallInfo {
  bool stalled = false;
  std::vector<std::size_t> active;  // neighbor indices attaining t
};

/// Active set J = {j : ⟨h_j, f⟩ ≥ t − tie_tol} and whether the solution is the
/// pure shrink f ∝ h (the step h − f points along h).
inline StallInfo stall_detect(const TrustSubproblem& p, const SubproblemSolution& s, double tie_tol = 1e-9) {
  StallInfo info;
  const DenseMatrix& A = p.neighbors();
  for (std::size_t j = 0; j < A.cols(); ++j)
    if (dot(A.col(j), s.f) >= s.t - tie_tol) info.active.push_back(j);
  const Vector& h = p.reference();
  Vector r(h.size());
  for (std::size_t i = 0; i < h.size(); ++i) r[i] = h[i] - s.f[i];
  const double nr = norm2(r);
  if (nr > 0.0) {
    double dev = 0.0;
    for (std::size_t i = 0; i < h.size(); ++i) dev += (r[i] / nr - h[i]) * (r[i] / nr - h[i]);
    info.stalled = std::sqrt(dev) <= tie_tol;
  }
  return info;
}

} // namespace sidco
