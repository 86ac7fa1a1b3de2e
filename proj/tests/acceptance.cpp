// Acceptance run: one PASS/FAIL line per criterion. With an argument it runs
// only that criterion (ctest registers each separately); exit status is the
// number of failures.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "oracles.hpp"
#include "sidco/sidco.hpp"

using namespace sidco;
namespace fs = std::filesystem;

namespace {

struct Verdict {
  bool pass;
  std::string detail;
};

std::string num(double v, int digits = 4) { return detail::fixed(v, digits); }

int jobs() { return static_cast<int>(std::max(1u, std::thread::hardware_concurrency())); }

std::vector<detail::DesignOutcome> designs(std::size_t m, std::size_t N, int K, int seeds, bool nonneg = false) {
  SidcoConfig c;
  c.m = m;
  c.N = N;
  c.K = K;
  c.nonneg = nonneg;
  std::vector<std::uint64_t> s;
  for (int k = 1; k <= seeds; ++k) s.push_back(static_cast<std::uint64_t>(k));
  return detail::design_many(c, s, jobs());
}

std::pair<double, double> min_mean(const std::vector<detail::DesignOutcome>& runs) {
  double mn = INFINITY, sum = 0.0;
  for (const auto& r : runs) {
    mn = std::min(mn, r.report.final_metrics.mu);
    sum += r.report.final_metrics.mu;
  }
  return {mn, sum / static_cast<double>(runs.size())};
}

Verdict quality_15_30() {
  const auto [mn, mean] = min_mean(designs(15, 30, 200, 10));
  return {mn <= 0.215 && mean <= 0.22, "(15,30) K=200, 10 seeds: min " + num(mn) + " (<= 0.215), mean " + num(mean) + " (<= 0.22)"};
}

Verdict quality_25_50() {
  const auto [mn, mean] = min_mean(designs(25, 50, 200, 5));
  return {mn <= 0.170, "(25,50) K=200, 5 seeds: min " + num(mn) + " (<= 0.170), mean " + num(mean)};
}

Verdict quality_64_128() {
  const auto runs = designs(64, 128, 150, 3);
  const auto best = std::min_element(runs.begin(), runs.end(), [](const auto& a, const auto& b) {
    return a.report.final_metrics.mu < b.report.final_metrics.mu;
  });
  const CorrelationProfile p = correlation_profile(best->frame);
  const double mn = best->report.final_metrics.mu;
  return {mn <= 0.108 && p.above_099 >= 0.5,
          "(64,128) K=150, 3 seeds: min " + num(mn) + " (<= 0.108), above 0.99mu " + num(100 * p.above_099, 2) + "% (>= 50%)"};
}

Verdict nonnegative() {
  const auto runs = designs(64, 128, 150, 1, true);
  const Frame& F = runs[0].frame;
  const double mu = runs[0].report.final_metrics.mu;
  const double lowest = *std::min_element(F.vectors().data().begin(), F.vectors().data().end());
  return {mu <= 0.26 && lowest >= 0.0, "(64,128) nonneg K=150, 1 seed: mu " + num(mu) + " (<= 0.26), min entry " + num(lowest, 3)};
}

Verdict etf_fixed_point() {
  bool ok = true;
  std::ostringstream d;
  for (std::size_t m : {3u, 5u, 8u}) {
    SidcoConfig c;
    c.m = m;
    c.N = m + 1;
    c.K = 10;
    const auto [F, rep] = run(c, make_simplex_etf(m));
    const double target = 1.0 / static_cast<double>(m);
    double dev = 0.0, esc_dev = 0.0;
    for (double v : rep.trace) dev = std::max(dev, std::abs(v - target));
    for (double v : rep.escape_coherence) esc_dev = std::max(esc_dev, std::abs(v - target));
    const bool good = dev <= 1e-6 && esc_dev <= 1e-9 && !rep.escapes.empty() && rep.sweeps_run == 10;
    ok = ok && good;
    d << "m=" << m << ": dev " << std::scientific << std::setprecision(1) << dev << ", escapes " << rep.escapes.size() << ", escape dev "
      << esc_dev << "; ";
  }
  return {ok, d.str()};
}

Verdict monotonicity() {
  const auto runs = designs(15, 60, 200, 20);
  int violations = 0, spans = 0;
  for (const auto& r : runs) {
    const auto& t = r.report.trace;
    spans += static_cast<int>(r.report.escapes.size()) + 1;
    for (std::size_t k = 1; k < t.size(); ++k) {
      const bool after_escape =
          std::find(r.report.escapes.begin(), r.report.escapes.end(), static_cast<int>(k) - 1) != r.report.escapes.end();
      if (!after_escape && t[k] > t[k - 1] + 1e-9) ++violations;
    }
  }
  return {violations == 0, "20 runs of (15,60), " + std::to_string(spans) + " escape-free spans: " + std::to_string(violations) + " violations"};
}

Verdict subproblem_certification() {
  const double tol = 1e-8, slack = 1e-4;
  int cases = 0, failures = 0, planar = 0;
  double worst_kkt = 0.0, worst_brute = 0.0;
  for (std::size_t m : {2u, 8u, 15u, 64u})
    for (std::uint64_t seed = 0; seed < 50; ++seed) {
      const std::size_t N = m == 2 ? 3 + seed % 4 : m + 1 + (seed * 7) % (2 * m);
      Rng rng = make_rng(77000 + 1000 * m + seed);
      DenseMatrix H = gaussian_matrix(m, N, rng);
      normalize_columns(H);
      const Frame F = Frame::normalized(unit_polar(H));
      const std::size_t i = seed % N;
      const auto [G, s] = canonicalize_signs(F, i);
      std::vector<std::size_t> idx;
      double gmax = 0.0;
      for (std::size_t j = 0; j < N; ++j)
        if (j != i) {
          idx.push_back(j);
          gmax = std::max(gmax, dot(G.vec(i), G.vec(j)));
        }
      const TrustSubproblem p(G.vectors().column(i), G.vectors().select_columns(idx), (1 - slack) * (1 - gmax * gmax));
      ++cases;
      SubproblemSolution sol;
      try {
        sol = solve(p, tol);
      } catch (const Error&) {
        ++failures;
        continue;
      }
      const KktResiduals r = kkt_residuals(p, sol);
      worst_kkt = std::max(worst_kkt, r.max());
      bool good = r.max() <= 10 * tol;
      const Vector& h = p.reference();
      double d2 = 0.0;
      for (std::size_t k = 0; k < m; ++k) d2 += (sol.f[k] - h[k]) * (sol.f[k] - h[k]);
      const double T = p.radius_sq(), nf = norm2(sol.f), c = dot(sol.f, h) / nf;
      good = good && std::abs(d2 - T) <= 1e-8;
      good = good && nf >= 1 - std::sqrt(T) - 1e-8 && nf <= std::sqrt(1 - T) + 1e-8;
      good = good && std::abs(nf - (c - std::sqrt(std::max(0.0, c * c - 1 + T)))) <= 1e-6;
      if (m == 2 && p.num_neighbors() <= 4) {
        std::vector<Vector> nb;
        for (std::size_t j = 0; j < p.num_neighbors(); ++j) nb.push_back(p.neighbors().column(j));
        const double diff = std::abs(sol.t - oracle::cap_search_2d(h, nb, T).objective);
        worst_brute = std::max(worst_brute, diff);
        good = good && diff <= 2e-3;
        ++planar;
      }
      if (!good) ++failures;
    }
  std::ostringstream d;
  d << cases << " subproblems: " << failures << " failures, worst KKT " << std::scientific << std::setprecision(1) << worst_kkt
    << " (<= 1e-7), " << planar << " planar vs brute force, worst diff " << worst_brute << " (<= 2e-3)";
  return {failures == 0 && cases == 200, d.str()};
}

Verdict pure_shrink_oracle() {
  const Frame F = make_simplex_etf(3);
  const auto [G, s] = canonicalize_signs(F, 0);
  const double T = choose_radius(G, 0, 1e-4);
  const TrustSubproblem p(G.vectors().column(0), G.vectors().select_columns(std::vector<std::size_t>{1, 2, 3}), T);
  const SubproblemSolution sol = solve(p, 1e-10);
  const double rt = std::sqrt(T);
  double dev = std::abs(sol.t - (1 - rt) / 3);
  for (std::size_t k = 0; k < 3; ++k) dev = std::max(dev, std::abs(sol.f[k] - (1 - rt) * p.reference()[k]));
  for (double l : sol.lambda) dev = std::max(dev, std::abs(l - 1.0 / 3.0));
  std::ostringstream d;
  d << "simplex (3,4): max deviation of f, t, lambda " << std::scientific << std::setprecision(1) << dev << " (<= 1e-6)";
  return {dev <= 1e-6 && sol.lambda.size() == 3, d.str()};
}

Verdict frame_potential() {
  std::ostringstream d;
  bool ok = true;
  for (auto [m, N] : {std::pair<std::size_t, std::size_t>{15, 30}, {25, 50}}) {
    const auto runs = designs(m, N, 200, 5);
    const double minimum = static_cast<double>(N * N) / static_cast<double>(m);
    double sum = 0.0;
    for (const auto& r : runs) sum += r.report.final_metrics.fp;
    const double rel = (sum / 5.0 - minimum) / minimum;
    ok = ok && rel <= 0.01;
    d << "(" << m << "," << N << ") mean FP " << num(sum / 5.0) << " vs " << num(minimum) << " (+" << num(100 * rel, 2) << "%, <= 1%); ";
  }
  return {ok, d.str()};
}

Verdict compressed_sensing() {
  std::ostringstream d;
  bool ok = true;
  for (std::size_t m : {25u, 30u, 35u}) {
    CsExperiment e;
    e.m = m;
    e.trials = 1000;
    e.seed = 2024;
    SidcoConfig c;
    c.m = m;
    c.N = e.N;
    c.K = 200;
    c.seed = 1;
    const Frame F = run(c).first;
    const CsResult a = run_cs_experiment(e, F.vectors());
    const CsResult b = run_cs_experiment(e, random_sensing(m, e.N, 1));
    ok = ok && a.mean_error < b.mean_error;
    d << "m=" << m << " sidco " << std::scientific << std::setprecision(2) << a.mean_error << " (mu " << num(mutual_coherence(F))
      << ") vs random " << b.mean_error << "; ";
  }
  return {ok, d.str()};
}

Verdict adaptation() {
  SidcoConfig c;
  c.m = 16;
  c.N = 32;
  c.K = 50;
  c.seed = 1;
  const Frame F0 = run(c).first;
  const PlantedData data = planted_rotation_data(F0, 1000, 3, 0.01, 5);
  const AdaptationRun r = adapt_dictionary(data.Y, F0, 3, 50);
  const double mu0 = mutual_coherence(F0);
  double drift = 0.0;
  for (double mu : r.coherence) drift = std::max(drift, std::abs(mu - mu0));
  std::ostringstream d;
  d << "(16,32) frame, 50 rotations: coherence drift " << std::scientific << std::setprecision(1) << drift << " (<= 1e-10), error "
    << std::fixed << std::setprecision(4) << r.errors.front() << " -> " << r.errors.back();
  return {drift <= 1e-10 && r.errors.size() == 51 && r.errors.back() < r.errors.front(), d.str()};
}

Verdict determinism() {
  const fs::path root = fs::temp_directory_path() / "sidco_acceptance_determinism";
  fs::remove_all(root);
  const auto slurp = [](const fs::path& p) {
    std::ifstream is(p, std::ios::binary);
    std::ostringstream s;
    s << is.rdbuf();
    return s.str();
  };
  std::vector<std::string> outputs[2];
  for (int k = 0; k < 2; ++k) {
    const fs::path dir = root / std::to_string(k);
    std::ostringstream out, err;
    const int a = run_cli({"sidco", "design", "--m", "10", "--N", "25", "--K", "40", "--seeds", "1..3", "--out", dir.string()}, out, err);
    const int b = run_cli({"sidco", "cs-bench", "--m-list", "20,25", "--trials", "200", "--design-K", "20", "--out", dir.string()}, out, err);
    if (a != 0 || b != 0) return {false, "CLI failed: " + err.str()};
    for (const char* f : {"m10_N25.runs.csv", "m10_N25.traces.csv", "cs_bench.csv"}) outputs[k].push_back(slurp(dir / f));
  }
  std::size_t same = 0, bytes = 0;
  for (std::size_t i = 0; i < outputs[0].size(); ++i) {
    same += outputs[0][i] == outputs[1][i] && !outputs[0][i].empty();
    bytes += outputs[0][i].size();
  }
  fs::remove_all(root);
  return {same == outputs[0].size(), std::to_string(same) + "/" + std::to_string(outputs[0].size()) + " CSV files byte-identical (" +
                                         std::to_string(bytes) + " bytes)"};
}

struct Criterion {
  const char* title;
  std::function<Verdict()> check;
};

const std::vector<Criterion>& criteria() {
  static const std::vector<Criterion> list{
      {"coherence at (15,30)", quality_15_30},
      {"coherence at (25,50)", quality_25_50},
      {"coherence and correlation profile at (64,128)", quality_64_128},
      {"nonnegative frames", nonnegative},
      {"ETF fixed point", etf_fixed_point},
      {"monotonicity between escapes", monotonicity},
      {"subproblem certification", subproblem_certification},
      {"pure shrink on the simplex", pure_shrink_oracle},
      {"frame potential near the tight minimum", frame_potential},
      {"compressed sensing benchmark", compressed_sensing},
      {"coherence-preserving adaptation", adaptation},
      {"byte-identical CSV outputs", determinism},
  };
  return list;
}

}  // namespace

int main(int argc, char** argv) {
  std::vector<std::size_t> which;
  for (int k = 1; k < argc; ++k) which.push_back(static_cast<std::size_t>(std::stoul(argv[k])));
  if (which.empty())
    for (std::size_t k = 1; k <= criteria().size(); ++k) which.push_back(k);

  int failed = 0;
  for (std::size_t k : which) {
    if (k < 1 || k > criteria().size()) {
      std::cerr << "no criterion " << k << '\n';
      return 2;
    }
    const Criterion& c = criteria()[k - 1];
    const auto t0 = std::chrono::steady_clock::now();
    Verdict v;
    try {
      v = c.check();
    } catch (const std::exception& e) {
      v = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::printf("AC%-2zu %s  %s: %s [%.1fs]\n", k, v.pass ? "PASS" : "FAIL", c.title, v.detail.c_str(), secs);
    std::fflush(stdout);
    failed += !v.pass;
  }
  return failed;
}
