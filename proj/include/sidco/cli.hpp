#pragma once

// The sidco command line: design, analyze, cs-bench and adapt.
// Exit codes: 0 success, 2 usage, 3 I/O or format, 4 numeric failure.

#include <algorithm>
#include <atomic>
#include <cstdint>
#include <exception>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <map>
#include <ostream>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>

#include "sidco/driver.hpp"
#include "sidco/error.hpp"
#include "sidco/frame.hpp"
#include "sidco/io.hpp"
#include "sidco/sparse.hpp"

namespace sidco {

enum ExitCode : int { kExitOk = 0, kExitUsage = 2, kExitIo = 3, kExitNumeric = 4 };

/// Inclusive range "a..b", a single value, or a comma list.
inline std::vector<std::uint64_t> parse_seeds(const std::string& text) {
  std::vector<std::uint64_t> out;
  const auto number = [&](std::string_view s) {
    std::uint64_t v = 0;
    const auto r = std::from_chars(s.data(), s.data() + s.size(), v);
    if (r.ec != std::errc() || r.ptr != s.data() + s.size() || s.empty()) throw InvalidInput("bad seed list '" + text + "'");
    return v;
  };
  if (const std::size_t dots = text.find(".."); dots != std::string::npos) {
    const std::uint64_t a = number(std::string_view(text).substr(0, dots));
    const std::uint64_t b = number(std::string_view(text).substr(dots + 2));
    if (b < a || b - a >= 100000) throw InvalidInput("bad seed range '" + text + "'");
    for (std::uint64_t s = a; s <= b; ++s) out.push_back(s);
    return out;
  }
  std::string_view rest(text);
  while (true) {
    const std::size_t comma = rest.find(',');
    out.push_back(number(rest.substr(0, comma)));
    if (comma == std::string_view::npos) break;
    rest.remove_prefix(comma + 1);
  }
  return out;
}

inline std::vector<std::size_t> parse_size_list(const std::string& text) {
  std::vector<std::size_t> out;
  for (std::uint64_t v : parse_seeds(text)) out.push_back(static_cast<std::size_t>(v));
  return out;
}

namespace detail {

inline std::string fixed(double v, int digits = 4) {
  std::ostringstream o;
  o << std::fixed << std::setprecision(digits) << v;
  return o.str();
}

inline std::string trim(std::string s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

// Turns "key = value" lines into "--key=value" arguments. '#' starts a comment.
inline std::vector<std::string> config_arguments(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw FormatError("cannot open config file " + path.string());
  std::vector<std::string> out;
  std::string line;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (const auto h = line.find('#'); h != std::string::npos) line.erase(h);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw InvalidInput(path.string() + ":" + std::to_string(lineno) + ": expected key = value");
    const std::string key = trim(line.substr(0, eq));
    std::string value = trim(line.substr(eq + 1));
    if (value.size() >= 2 && value.front() == '"' && value.back() == '"') value = value.substr(1, value.size() - 2);
    if (key.empty() || key == "config") throw InvalidInput(path.string() + ":" + std::to_string(lineno) + ": bad key");
    out.push_back("--" + key + "=" + value);
  }
  return out;
}

// Moves every "--config FILE" after the subcommand into its expanded
// arguments, placed first so the command line overrides the file.
inline std::vector<std::string> expand_config(std::vector<std::string> args) {
  if (args.size() < 2) return args;
  std::vector<std::string> from_file, rest;
  for (std::size_t i = 2; i < args.size(); ++i) {
    std::string path;
    if (args[i] == "--config" && i + 1 < args.size()) {
      path = args[++i];
    } else if (args[i].rfind("--config=", 0) == 0) {
      path = args[i].substr(9);
    } else {
      rest.push_back(args[i]);
      continue;
    }
    const auto more = config_arguments(path);
    from_file.insert(from_file.end(), more.begin(), more.end());
  }
  std::vector<std::string> out{args[0], args[1]};
  out.insert(out.end(), from_file.begin(), from_file.end());
  out.insert(out.end(), rest.begin(), rest.end());
  return out;
}

inline void ensure_dir(const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw FormatError("cannot create " + dir.string() + ": " + ec.message());
}

struct DesignOutcome {
  Frame frame;
  SweepReport report;
  double mu0 = 0.0;
};

// Runs one design per seed on up to `jobs` threads; results keep seed order.
inline std::vector<DesignOutcome> design_many(const SidcoConfig& base, const std::vector<std::uint64_t>& seeds, int jobs) {
  std::vector<std::optional<DesignOutcome>> slots(seeds.size());
  std::vector<std::exception_ptr> errors(seeds.size());
  std::atomic<std::size_t> next{0};
  const auto worker = [&] {
    for (std::size_t k; (k = next++) < seeds.size();) {
      try {
        SidcoConfig c = base;
        c.seed = seeds[k];
        const Frame F0 = initialize(c);
        auto [F, rep] = run(c, F0);
        slots[k].emplace(DesignOutcome{std::move(F), std::move(rep), mutual_coherence(F0)});
      } catch (...) {
        errors[k] = std::current_exception();
      }
    }
  };
  const std::size_t n = std::clamp<std::size_t>(static_cast<std::size_t>(std::max(jobs, 1)), 1, seeds.size());
  std::vector<std::thread> pool;
  for (std::size_t t = 1; t < n; ++t) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
  std::vector<DesignOutcome> out;
  for (auto& s : slots) out.push_back(std::move(*s));
  return out;
}

inline std::string stem(std::size_t m, std::size_t N, bool nonneg) {
  return "m" + std::to_string(m) + "_N" + std::to_string(N) + (nonneg ? "_nonneg" : "");
}

inline void echo_config(CsvTable& t, const SidcoConfig& c) {
  t.echo = {{"tool", "sidco design"},
            {"m", std::to_string(c.m)},
            {"N", std::to_string(c.N)},
            {"K", std::to_string(c.K)},
            {"eps_stop", format_double(c.eps_stop)},
            {"radius_slack", format_double(c.radius_slack)},
            {"solver_tol", format_double(c.solver_tol)},
            {"nonneg", c.nonneg ? "true" : "false"},
            {"escape", c.escape_active() ? "true" : "false"}};
}

} // namespace detail

struct DesignArgs {
  SidcoConfig cfg;
  std::string seeds = "1";
  std::string out = "sidco_out";
  bool no_escape = false;
  int jobs = 1;
};

inline int cmd_design(const DesignArgs& a, std::ostream& out) {
  SidcoConfig cfg = a.cfg;
  cfg.escape_enabled = !a.no_escape;
  cfg.validate();
  const std::vector<std::uint64_t> seeds = parse_seeds(a.seeds);
  const std::filesystem::path dir(a.out);
  detail::ensure_dir(dir);

  const std::vector<detail::DesignOutcome> res = detail::design_many(cfg, seeds, a.jobs);
  const std::string base = detail::stem(cfg.m, cfg.N, cfg.nonneg);

  CsvTable runs;
  detail::echo_config(runs, cfg);
  runs.echo.push_back({"seeds", a.seeds});
  runs.header = {"seed", "mu_initial", "mu", "mu_bar", "frame_potential", "welch_bound", "sweeps", "escapes", "best_sweep"};
  CsvTable traces;
  detail::echo_config(traces, cfg);
  traces.header = {"seed", "sweep", "coherence", "escape_after"};
  std::vector<PlotSeries> series;

  double mu0_sum = 0.0, mu_sum = 0.0, mubar_sum = 0.0, mu_min = INFINITY;
  for (std::size_t k = 0; k < res.size(); ++k) {
    const auto& r = res[k];
    const FrameMetrics& fm = r.report.final_metrics;
    const std::uint64_t seed = seeds[k];
    mu0_sum += r.mu0;
    mu_sum += fm.mu;
    mubar_sum += fm.mu_bar;
    mu_min = std::min(mu_min, fm.mu);
    const std::string name = base + "_seed" + std::to_string(seed);
    save_frame(dir / (name + ".frame"), r.frame, make_header(r.frame, "sidco design", seed, cfg.nonneg));
    SidcoConfig c = cfg;
    c.seed = seed;
    save_json(dir / (name + ".manifest.json"), manifest_json(c, r.report));
    runs.add_row({std::to_string(seed), format_double(r.mu0), format_double(fm.mu), format_double(fm.mu_bar), format_double(fm.fp),
                  format_double(fm.welch), std::to_string(r.report.sweeps_run), std::to_string(r.report.escapes.size()),
                  std::to_string(r.report.best_index)});
    PlotSeries s{"seed " + std::to_string(seed), {}, {}};
    for (std::size_t t = 0; t < r.report.trace.size(); ++t) {
      const bool esc = std::find(r.report.escapes.begin(), r.report.escapes.end(), static_cast<int>(t)) != r.report.escapes.end();
      traces.add_row({std::to_string(seed), std::to_string(t), format_double(r.report.trace[t]), esc ? "1" : "0"});
      s.x.push_back(static_cast<double>(t));
      s.y.push_back(r.report.trace[t]);
    }
    series.push_back(std::move(s));
  }
  save_csv(dir / (base + ".runs.csv"), runs);
  save_csv(dir / (base + ".traces.csv"), traces);
  const double wb = welch_bound(cfg.m, cfg.N);
  PlotSpec spec{"Coherence by sweep, (" + std::to_string(cfg.m) + ", " + std::to_string(cfg.N) + ")", "sweep", "mutual coherence",
                false, wb, "Welch bound"};
  save_text(dir / (base + ".traces.svg"), svg_line_plot(spec, series));

  const double n = static_cast<double>(res.size());
  out << "m\tN\tavg(mu(H0))\tmin(mu(H))\tavg(mu(H))\tWB\tavg(mu_bar(H))\n";
  out << cfg.m << '\t' << cfg.N << '\t' << detail::fixed(mu0_sum / n) << '\t' << detail::fixed(mu_min) << '\t' << detail::fixed(mu_sum / n)
      << '\t' << detail::fixed(wb) << '\t' << detail::fixed(mubar_sum / n) << '\n';
  return kExitOk;
}

struct AnalyzeArgs {
  std::string frame;
  std::string csv;  // default: next to the frame
  double etf_tol = 1e-6;
};

inline int cmd_analyze(const AnalyzeArgs& a, std::ostream& out) {
  const FrameFile ff = load_frame(a.frame);
  const Frame& F = ff.frame;
  const FrameMetrics fm = frame_metrics(F);
  const EtfCertificate cert = certify_etf(F, a.etf_tol);
  const CorrelationProfile prof = correlation_profile(F);

  out << "frame\t" << a.frame << "\n";
  out << "m\t" << F.dim() << "\nN\t" << F.size() << "\n";
  out << "mu\t" << format_double(fm.mu) << "\nmu_bar\t" << format_double(fm.mu_bar) << "\n";
  out << "frame_potential\t" << format_double(fm.fp) << "\ttight_minimum\t"
      << format_double(static_cast<double>(F.size()) * static_cast<double>(F.size()) / static_cast<double>(F.dim())) << "\n";
  out << "welch_bound\t" << format_double(fm.welch) << "\n";
  out << "sparsity_cap\t" << (fm.sparsity_cap ? std::to_string(*fm.sparsity_cap) : std::string("none")) << "\n";
  out << "equiangular\t" << (cert.is_equiangular ? "yes" : "no") << "\ntight\t" << (cert.is_tight ? "yes" : "no") << "\n";
  if (cert.is_etf())
    out << "eigenvector_identity\t" << (cert.eigen_check ? "yes" : "no") << "\nsign_balance\t" << (cert.balance_matches ? "yes" : "no") << "\n";
  out << "above_0.99mu\t" << detail::fixed(100.0 * prof.above_099, 2) << "%\n";
  out << "above_0.95mu\t" << detail::fixed(100.0 * prof.above_095, 2) << "%\n";

  CsvTable t;
  t.echo = {{"tool", "sidco analyze"}, {"frame", a.frame}, {"mu", format_double(prof.mu)},
            {"above_0.99mu", format_double(prof.above_099)}, {"above_0.95mu", format_double(prof.above_095)}};
  t.header = {"rank", "abs_correlation"};
  for (std::size_t k = 0; k < prof.sorted.size(); ++k) t.add_row({std::to_string(k), format_double(prof.sorted[k])});
  const std::string path = a.csv.empty() ? a.frame + ".correlations.csv" : a.csv;
  save_csv(path, t);
  out << "correlations_csv\t" << path << "\n";
  return kExitOk;
}

struct CsBenchArgs {
  CsExperiment exp;
  std::string m_list = "15,20,25,30,35";
  std::string sources = "sidco,random";
  std::vector<std::string> frames;  // used as the sidco source when their m matches
  int design_K = 200;
  std::uint64_t design_seed = 1;
  std::string out = "sidco_out";
  int jobs = 1;
};

inline int cmd_cs_bench(const CsBenchArgs& a, std::ostream& out) {
  const std::vector<std::size_t> ms = parse_size_list(a.m_list);
  std::vector<std::string> sources;
  {
    std::string_view rest(a.sources);
    while (true) {
      const std::size_t c = rest.find(',');
      sources.emplace_back(rest.substr(0, c));
      if (c == std::string_view::npos) break;
      rest.remove_prefix(c + 1);
    }
  }
  for (const auto& s : sources)
    if (s != "sidco" && s != "random") throw InvalidInput("unknown sensing source '" + s + "' (sidco or random)");
  for (std::size_t m : ms) {
    CsExperiment e = a.exp;
    e.m = m;
    e.validate();
  }
  const std::filesystem::path dir(a.out);
  detail::ensure_dir(dir);

  std::map<std::size_t, Frame> provided;
  for (const auto& p : a.frames) {
    FrameFile ff = load_frame(p);
    if (ff.frame.size() != a.exp.N) throw InvalidInput(p + ": frame has N = " + std::to_string(ff.frame.size()) + ", need " + std::to_string(a.exp.N));
    provided.insert_or_assign(ff.frame.dim(), std::move(ff.frame));
  }

  CsvTable t;
  t.echo = {{"tool", "sidco cs-bench"},         {"N", std::to_string(a.exp.N)},   {"M", std::to_string(a.exp.M)},
            {"s", std::to_string(a.exp.s)},     {"trials", std::to_string(a.exp.trials)}, {"seed", std::to_string(a.exp.seed)},
            {"m_list", a.m_list},               {"design_K", std::to_string(a.design_K)}, {"design_seed", std::to_string(a.design_seed)}};
  t.header = {"m", "source", "coherence", "mean_error", "q10", "q50", "q90", "exact_support_rate"};
  std::map<std::string, PlotSeries> series;
  for (const auto& s : sources) series[s].name = s;

  for (std::size_t m : ms) {
    CsExperiment e = a.exp;
    e.m = m;
    for (const auto& src : sources) {
      DenseMatrix F;
      std::string label = src;
      if (src == "random") {
        F = random_sensing(m, e.N, e.seed + 7919 * m);
      } else if (auto it = provided.find(m); it != provided.end()) {
        F = it->second.vectors();
        label = "sidco";
      } else {
        SidcoConfig c;
        c.m = m;
        c.N = e.N;
        c.K = a.design_K;
        c.seed = a.design_seed;
        F = run(c).first.vectors();
      }
      const CsResult r = run_cs_experiment(e, F);
      t.add_row({std::to_string(m), label, format_double(mutual_coherence(F)), format_double(r.mean_error), format_double(r.quantiles[0]),
                 format_double(r.quantiles[1]), format_double(r.quantiles[2]), format_double(r.exact_support_rate)});
      series[src].x.push_back(static_cast<double>(m));
      series[src].y.push_back(r.mean_error);
      out << m << '\t' << label << "\tmu " << detail::fixed(mutual_coherence(F)) << "\tmean_error " << format_double(r.mean_error) << '\n';
    }
  }
  save_csv(dir / "cs_bench.csv", t);
  std::vector<PlotSeries> plot;
  for (auto& [k, s] : series) plot.push_back(std::move(s));
  save_text(dir / "cs_bench.svg", svg_line_plot({"Relative reconstruction error", "m", "mean relative error", true, std::nullopt, ""}, plot));
  return kExitOk;
}

struct AdaptArgs {
  std::string frame;
  std::string images;
  bool synthetic = false;
  std::size_t patches = 2000;  // synthetic sample count
  double noise = 0.01;
  std::size_t s = 4;
  int K = 50;
  std::uint64_t seed = 1;
  std::string out = "sidco_out";
};

inline int cmd_adapt(const AdaptArgs& a, std::ostream& out) {
  if (a.synthetic == !a.images.empty()) throw InvalidInput("adapt: give exactly one of --images DIR or --synthetic");
  if (a.K < 0) throw InvalidInput("adapt: K must be >= 0");
  const FrameFile ff = load_frame(a.frame);
  const Frame& F0 = ff.frame;

  DenseMatrix Y;
  std::string source;
  if (a.synthetic) {
    if (a.patches == 0) throw InvalidInput("adapt: no data (--patches 0)");
    Y = planted_rotation_data(F0, a.patches, a.s, a.noise, a.seed).Y;
    source = "synthetic";
  } else {
    std::vector<GrayImage> imgs;
    for (const auto& p : list_pgm(a.images)) imgs.push_back(load_pgm(p));
    const PatchSet ps = extract_patches(imgs);
    if (ps.count == 0) throw InvalidInput("adapt: no usable 8x8 patches in " + a.images);
    if (F0.dim() != 64) throw InvalidInput("adapt: image patches are 64-dimensional, the frame has m = " + std::to_string(F0.dim()));
    Y = ps.Y;
    source = a.images;
    out << "patches\t" << ps.count << "\tdiscarded\t" << ps.discarded << '\n';
  }
  if (Y.rows() != F0.dim()) throw InvalidInput("adapt: data dimension does not match the frame");

  const AdaptationRun run = adapt_dictionary(Y, F0, a.s, a.K);
  const double mu0 = mutual_coherence(F0);
  for (double mu : run.coherence)
    if (std::abs(mu - mu0) > 1e-10) throw NumericsFailure("adapt: coherence drifted to " + format_double(mu));

  const std::filesystem::path dir(a.out);
  detail::ensure_dir(dir);
  const Frame adapted = a.K == 0 ? F0 : Frame(run.frame);
  save_frame(dir / "adapted.frame", adapted, make_header(adapted, "sidco adapt", ff.header.seed, ff.header.nonneg));
  CsvTable t;
  t.echo = {{"tool", "sidco adapt"}, {"frame", a.frame}, {"data", source}, {"s", std::to_string(a.s)},
            {"K", std::to_string(a.K)}, {"seed", std::to_string(a.seed)}, {"noise", format_double(a.noise)},
            {"rank_deficient_rotations", std::to_string(run.rank_deficient_events)}};
  t.header = {"iteration", "relative_error", "coherence"};
  PlotSeries s{"adapted", {}, {}};
  for (std::size_t k = 0; k < run.errors.size(); ++k) {
    t.add_row({std::to_string(k), format_double(run.errors[k]), format_double(run.coherence[k])});
    s.x.push_back(static_cast<double>(k));
    s.y.push_back(run.errors[k]);
  }
  save_csv(dir / "adapt.csv", t);
  save_text(dir / "adapt.svg", svg_line_plot({"Relative reconstruction error", "iteration", "relative error", false, std::nullopt, ""}, {s}));
  out << "initial_error\t" << format_double(run.errors.front()) << "\nfinal_error\t" << format_double(run.errors.back())
      << "\ncoherence\t" << format_double(mu0) << '\n';
  return kExitOk;
}

/// Entry point shared by the executable and the tests.
inline int run_cli(const std::vector<std::string>& argv_in, std::ostream& out, std::ostream& err) {
  CLI::App app{"Incoherent frame design by sequential trust-region subproblems"};
  app.require_subcommand(1);
  app.option_defaults()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
  const std::string config_help = "key = value file with the same keys as the flags";

  DesignArgs d;
  auto* design = app.add_subcommand("design", "design frames for one (m, N) over a set of seeds");
  design->add_option("--m", d.cfg.m, "dimension")->required();
  design->add_option("--N", d.cfg.N, "number of vectors")->required();
  design->add_option("--K", d.cfg.K, "maximum sweeps")->capture_default_str();
  design->add_option("--seeds", d.seeds, "seed, a..b range or comma list")->capture_default_str();
  design->add_option("--out", d.out, "output directory")->capture_default_str();
  design->add_option("--eps-stop", d.cfg.eps_stop, "escape threshold on mean progress")->capture_default_str();
  design->add_option("--radius-slack", d.cfg.radius_slack, "trust radius slack")->capture_default_str();
  design->add_option("--solver-tol", d.cfg.solver_tol, "subproblem duality gap")->capture_default_str();
  design->add_flag("--nonneg", d.cfg.nonneg, "nonnegative frames (no escape step)");
  design->add_flag("--no-escape", d.no_escape, "disable the polar escape step");
  design->add_option("--jobs", d.jobs, "seeds run in parallel")->capture_default_str();
  design->add_option("--config", config_help);

  AnalyzeArgs an;
  auto* analyze = app.add_subcommand("analyze", "metrics, ETF certificate and correlation profile of a frame file");
  analyze->add_option("frame", an.frame, "frame file")->required();
  analyze->add_option("--csv", an.csv, "sorted correlations CSV path");
  analyze->add_option("--etf-tol", an.etf_tol, "tolerance of the ETF certificate")->capture_default_str();
  analyze->add_option("--config", config_help);

  CsBenchArgs cb;
  auto* cs = app.add_subcommand("cs-bench", "compressed sensing benchmark: SIDCO vs Gaussian sensing");
  cs->add_option("--N", cb.exp.N, "signal dimension")->capture_default_str();
  cs->add_option("--M", cb.exp.M, "dictionary atoms")->capture_default_str();
  cs->add_option("--s", cb.exp.s, "sparsity")->capture_default_str();
  cs->add_option("--m-list", cb.m_list, "measurement counts")->capture_default_str();
  cs->add_option("--trials", cb.exp.trials, "trials per point (100000 for full-scale runs)")->capture_default_str();
  cs->add_option("--seed", cb.exp.seed, "trial seed")->capture_default_str();
  cs->add_option("--sources", cb.sources, "comma list of sidco, random")->capture_default_str();
  cs->add_option("--frame", cb.frames, "SIDCO frame files to use instead of fresh designs");
  cs->add_option("--design-K", cb.design_K, "sweeps for fresh designs")->capture_default_str();
  cs->add_option("--design-seed", cb.design_seed, "seed for fresh designs")->capture_default_str();
  cs->add_option("--out", cb.out, "output directory")->capture_default_str();
  cs->add_option("--config", config_help);

  AdaptArgs ad;
  auto* adapt = app.add_subcommand("adapt", "rotate a frame toward data while keeping its coherence");
  adapt->add_option("--frame", ad.frame, "frame file")->required();
  adapt->add_option("--images", ad.images, "directory of PGM images (8x8 patches)");
  adapt->add_flag("--synthetic", ad.synthetic, "planted-rotation synthetic data");
  adapt->add_option("--patches", ad.patches, "synthetic sample count")->capture_default_str();
  adapt->add_option("--noise", ad.noise, "synthetic noise level")->capture_default_str();
  adapt->add_option("--s", ad.s, "sparsity")->capture_default_str();
  adapt->add_option("--K", ad.K, "iterations (500 for full-scale runs)")->capture_default_str();
  adapt->add_option("--seed", ad.seed, "synthetic data seed")->capture_default_str();
  adapt->add_option("--out", ad.out, "output directory")->capture_default_str();
  adapt->add_option("--config", config_help);

  try {
    std::vector<std::string> args = detail::expand_config(argv_in);
    std::vector<const char*> cargs;
    for (const auto& s : args) cargs.push_back(s.c_str());
    try {
      app.parse(static_cast<int>(cargs.size()), cargs.data());
    } catch (const CLI::ParseError& e) {
      const int code = app.exit(e, out, err);
      return code == 0 ? kExitOk : kExitUsage;
    }
    if (design->parsed()) return cmd_design(d, out);
    if (analyze->parsed()) return cmd_analyze(an, out);
    if (cs->parsed()) return cmd_cs_bench(cb, out);
    if (adapt->parsed()) return cmd_adapt(ad, out);
    return kExitUsage;
  } catch (const InvalidInput& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const FormatError& e) {
    err << "error: " << e.what() << '\n';
    return kExitIo;
  } catch (const Error& e) {
    err << "numeric failure: " << e.what() << '\n';
    return kExitNumeric;
  }
}

inline int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  return run_cli(std::vector<std::string>(argv, argv + argc), out, err);
}

} // namespace sidco
