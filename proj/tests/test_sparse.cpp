#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "oracles.hpp"
#include "sidco/frame.hpp"
#include "sidco/random.hpp"
#include "sidco/sparse.hpp"

using namespace sidco;

namespace {

DenseMatrix unit_gaussian(std::size_t m, std::size_t n, std::uint64_t seed) {
  Rng rng = make_rng(seed);
  DenseMatrix D = gaussian_matrix(m, n, rng);
  normalize_columns(D);
  return D;
}

Vector combine(const DenseMatrix& D, const std::vector<std::pair<std::size_t, double>>& terms) {
  Vector y(D.rows(), 0.0);
  for (auto [j, c] : terms)
    for (std::size_t i = 0; i < D.rows(); ++i) y[i] += c * D(i, j);
  return y;
}

std::vector<std::size_t> sorted(std::vector<std::size_t> v) {
  std::sort(v.begin(), v.end());
  return v;
}

}  // namespace

TEST(Omp, ExactAtom) {
  const DenseMatrix D = unit_gaussian(10, 20, 1);
  const OmpResult r = omp(D, D.column(7), 1);
  EXPECT_EQ(r.support, (std::vector<std::size_t>{7}));
  EXPECT_NEAR(r.coef[0], 1.0, 1e-12);
  EXPECT_LT(r.residual_norm, 1e-12);
}

TEST(Omp, OrthonormalDictionary) {
  Rng rng = make_rng(3);
  const DenseMatrix D = unit_polar(gaussian_matrix(8, 8, rng));
  const OmpResult r = omp(D, combine(D, {{1, 2.0}, {5, 3.0}}), 2);
  EXPECT_EQ(r.support, (std::vector<std::size_t>{5, 1}));
  EXPECT_NEAR(r.coef[0], 3.0, 1e-12);
  EXPECT_NEAR(r.coef[1], 2.0, 1e-12);
}

TEST(Omp, TiesGoToLowestIndex) {
  const DenseMatrix D = DenseMatrix::identity(2);
  const Vector y{1.0, 1.0};
  EXPECT_EQ(omp(D, y, 1).support, (std::vector<std::size_t>{0}));
}

TEST(Omp, DependentAtomStopsThePursuit) {
  // Columns 0 and 1 coincide; the component along e3 is out of reach.
  const DenseMatrix D = DenseMatrix::from_rows({{1, 1, 0}, {0, 0, 1}, {0, 0, 0}});
  const Vector y{1.0, 0.0, 1.0};
  const OmpResult r = omp(D, y, 3);
  EXPECT_TRUE(r.rank_deficient);
  EXPECT_EQ(r.support, (std::vector<std::size_t>{0}));
  EXPECT_NEAR(r.coef[0], 1.0, 1e-15);
}

TEST(Omp, Validation) {
  const DenseMatrix D = DenseMatrix::from_rows({{1, 2}, {0, 0}});
  EXPECT_THROW(omp(D, Vector{1.0, 0.0}, 1), InvalidInput);
  EXPECT_THROW(omp(DenseMatrix::identity(2), Vector{1.0, 0.0}, 3), InvalidInput);
  EXPECT_THROW(omp(DenseMatrix::identity(2), Vector{1.0}, 1), InvalidInput);
}

TEST(Omp, AgreesWithExhaustiveSearch) {
  int correct_paths = 0;
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    const DenseMatrix D = unit_gaussian(20, 40, 500 + seed);
    Rng rng = make_rng(seed, 9);
    std::vector<std::size_t> perm(40);
    std::iota(perm.begin(), perm.end(), std::size_t{0});
    shuffle(std::span<std::size_t>(perm), rng);
    std::vector<std::pair<std::size_t, double>> terms;
    for (std::size_t k = 0; k < 3; ++k) {
      const double mag = 1.0 + static_cast<double>(uniform_index(rng, 3));
      terms.push_back({perm[k], uniform_index(rng, 2) ? mag : -mag});
    }
    const Vector y = combine(D, terms);
    const std::vector<std::size_t> truth = sorted({perm[0], perm[1], perm[2]});

    double best = std::numeric_limits<double>::infinity();
    std::vector<std::size_t> best_support;
    for (std::size_t a = 0; a < 40; ++a)
      for (std::size_t b = a + 1; b < 40; ++b)
        for (std::size_t c = b + 1; c < 40; ++c) {
          const double r = oracle::support_residual(D, {a, b, c}, y);
          if (r < best) {
            best = r;
            best_support = {a, b, c};
          }
        }
    ASSERT_EQ(best_support, truth) << seed;

    const OmpResult r = omp(D, y, 3);
    if (sorted(r.support) != truth) continue;
    ++correct_paths;
    for (std::size_t k = 0; k < 3; ++k) {
      const auto it = std::find_if(terms.begin(), terms.end(), [&](auto& t) { return t.first == r.support[k]; });
      EXPECT_NEAR(r.coef[k], it->second, 1e-6);
    }
  }
  EXPECT_GT(correct_paths, 25);
}

TEST(Omp, ResidualOrthogonalToSelection) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const DenseMatrix D = unit_gaussian(30, 60, seed);
    Rng rng = make_rng(seed, 1);
    const DenseMatrix Y = gaussian_matrix(30, 1, rng);
    for (std::size_t s = 1; s <= 12; ++s) {
      const OmpResult r = omp(D, Y.col(0), s);
      Vector res = Y.column(0);
      for (std::size_t k = 0; k < r.support.size(); ++k)
        for (std::size_t i = 0; i < 30; ++i) res[i] -= r.coef[k] * D(i, r.support[k]);
      EXPECT_NEAR(norm2(res), r.residual_norm, 1e-10);
      for (std::size_t j : r.support) EXPECT_LE(std::abs(dot(D.col(j), res)), 1e-8);
    }
  }
}

TEST(Omp, RecoversBelowTheCoherenceBound) {
  // μ = 1/8 allows s ≤ ⌊½(8 + 1)⌋ = 4.
  const Frame F = make_simplex_etf(8);
  const std::size_t cap = static_cast<std::size_t>(*frame_metrics(F).sparsity_cap);
  ASSERT_EQ(cap, 4u);
  for (std::uint64_t seed = 0; seed < 200; ++seed) {
    Rng rng = make_rng(seed);
    std::vector<std::size_t> perm(9);
    std::iota(perm.begin(), perm.end(), std::size_t{0});
    shuffle(std::span<std::size_t>(perm), rng);
    const std::size_t s = 1 + seed % cap;
    std::vector<std::pair<std::size_t, double>> terms;
    std::normal_distribution<double> normal(0.0, 1.0);
    for (std::size_t k = 0; k < s; ++k) {
      const double g = normal(rng);
      terms.push_back({perm[k], std::copysign(1.0 + std::abs(g), g)});
    }
    const OmpResult r = omp(F.vectors(), combine(F.vectors(), terms), s);
    EXPECT_EQ(sorted(r.support), sorted(std::vector<std::size_t>(perm.begin(), perm.begin() + s))) << seed;
  }
}

TEST(CsExperiment, Validation) {
  CsExperiment e;
  e.s = 30;
  EXPECT_THROW(e.validate(), InvalidInput);
  e = CsExperiment{};
  e.trials = 0;
  EXPECT_THROW(e.validate(), InvalidInput);
  e = CsExperiment{};
  EXPECT_THROW(run_cs_experiment(e, random_sensing(20, 80, 0)), InvalidInput);
}

TEST(CsExperiment, ZeroSparsityIsDegenerate) {
  CsExperiment e;
  e.s = 0;
  e.trials = 5;
  const CsResult r = run_cs_experiment(e, random_sensing(25, 80, 0), true);
  EXPECT_TRUE(r.degenerate);
  EXPECT_EQ(r.mean_error, 0.0);
  EXPECT_EQ(r.errors.size(), 5u);
}

TEST(CsExperiment, IdentitySensingIsPlainOmp) {
  CsExperiment e;
  e.m = e.N = 30;
  e.M = 50;
  e.s = 5;
  e.trials = 40;
  e.seed = 12;
  const CsResult r = run_cs_experiment(e, DenseMatrix::identity(30), true);
  // Same per-trial draws, recovered by OMP directly on D.
  for (int t = 0; t < e.trials; ++t) {
    Rng rng = make_rng(e.seed, static_cast<std::uint64_t>(t) + 1);
    DenseMatrix D = gaussian_matrix(30, 50, rng);
    normalize_columns(D);
    std::vector<std::size_t> perm(50);
    std::iota(perm.begin(), perm.end(), std::size_t{0});
    for (std::size_t k = 0; k < 5; ++k) std::swap(perm[k], perm[k + uniform_index(rng, 50 - k)]);
    std::normal_distribution<double> normal(0.0, 1.0);
    Vector a(50, 0.0);
    for (std::size_t k = 0; k < 5; ++k) a[perm[k]] = normal(rng);
    const OmpResult o = omp(D, D * std::span<const double>(a), 5);
    Vector rec(50, 0.0);
    for (std::size_t k = 0; k < o.support.size(); ++k) rec[o.support[k]] = o.coef[k];
    double num = 0.0, den = 0.0;
    for (std::size_t j = 0; j < 50; ++j) {
      num += (a[j] - rec[j]) * (a[j] - rec[j]);
      den += a[j] * a[j];
    }
    EXPECT_NEAR(r.errors[static_cast<std::size_t>(t)], num / den, 1e-12) << t;
  }
}

TEST(CsExperiment, SummaryConsistentAndDeterministic) {
  CsExperiment e;
  e.trials = 60;
  e.seed = 4;
  const DenseMatrix F = random_sensing(25, 80, 99);
  const CsResult a = run_cs_experiment(e, F, true), b = run_cs_experiment(e, F, true);
  EXPECT_EQ(a.errors, b.errors);
  EXPECT_EQ(a.mean_error, b.mean_error);
  double sum = 0.0;
  for (double v : a.errors) {
    EXPECT_GE(v, 0.0);
    sum += v;
  }
  EXPECT_NEAR(a.mean_error, sum / 60, 1e-15);
  EXPECT_LE(a.quantiles[0], a.quantiles[1]);
  EXPECT_LE(a.quantiles[1], a.quantiles[2]);
  EXPECT_GE(a.exact_support_rate, 0.0);
  EXPECT_LE(a.exact_support_rate, 1.0);
}

TEST(Adaptation, AlignedDataNeedsNoRotation) {
  const Frame F0 = make_simplex_etf(8);
  Rng rng = make_rng(5);
  DenseMatrix X(9, 200);
  std::normal_distribution<double> normal(0.0, 1.0);
  for (std::size_t j = 0; j < 200; ++j)
    for (std::size_t k = 0; k < 2; ++k) X((j * 2 + k * 5) % 9, j) = 1.0 + std::abs(normal(rng));
  const DenseMatrix Y = F0.vectors() * X;
  const AdaptationRun run = adapt_dictionary(Y, F0, 2, 1);
  const DenseMatrix I = DenseMatrix::identity(8);
  for (std::size_t k = 0; k < 64; ++k) EXPECT_NEAR(run.Q.data()[k], I.data()[k], 1e-8);
  EXPECT_LT(run.errors[0], 1e-12);
}

TEST(Adaptation, PreservesCoherenceAndRecoversPlantedRotation) {
  Rng rng = make_rng(8);
  DenseMatrix H = gaussian_matrix(12, 24, rng);
  normalize_columns(H);
  const Frame F0 = Frame::normalized(unit_polar(H));
  const PlantedData d = planted_rotation_data(F0, 400, 3, 0.01, 21);
  const AdaptationRun run = adapt_dictionary(d.Y, F0, 3, 50);
  ASSERT_EQ(run.errors.size(), 51u);
  const double mu0 = mutual_coherence(F0);
  for (double mu : run.coherence) EXPECT_NEAR(mu, mu0, 1e-10);
  const DenseMatrix QtQ = run.Q.transpose() * run.Q;
  const DenseMatrix I = DenseMatrix::identity(12);
  for (std::size_t k = 0; k < QtQ.data().size(); ++k) EXPECT_NEAR(QtQ.data()[k], I.data()[k], 1e-9);
  for (std::size_t k = 0; k < run.align_before.size(); ++k)
    EXPECT_LE(run.align_after[k], run.align_before[k] + 1e-9);
  EXPECT_LT(run.errors.back(), run.errors.front());
  // Q·F0 with the accumulated rotation is the reported frame.
  const DenseMatrix QF = run.Q * F0.vectors();
  for (std::size_t k = 0; k < QF.data().size(); ++k) EXPECT_NEAR(QF.data()[k], run.frame.data()[k], 1e-10);
}

TEST(Adaptation, ZeroIterationsKeepsTheFrame) {
  const Frame F0 = make_simplex_etf(4);
  const PlantedData d = planted_rotation_data(F0, 30, 2, 0.0, 1);
  const AdaptationRun run = adapt_dictionary(d.Y, F0, 2, 0);
  EXPECT_EQ(run.frame, F0.vectors());
  EXPECT_EQ(run.errors.size(), 1u);
  EXPECT_THROW(adapt_dictionary(DenseMatrix(4, 3, 0.0), F0, 2, 1), InvalidInput);
}
