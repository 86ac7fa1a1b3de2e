#pragma once

// File formats: frame files (JSON header line + CSV payload), run manifests,
// CSV tables with a config echo, static SVG line plots and PGM image patches.

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <istream>
#include <iterator>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <utility>
#include <vector>

#include <json.hpp>

#include "sidco/driver.hpp"
#include "sidco/error.hpp"
#include "sidco/frame.hpp"
#include "sidco/numerics.hpp"

namespace sidco {

using Json = nlohmann::json;

inline constexpr int kFrameFormatVersion = 1;
inline constexpr std::string_view kFrameFormatName = "sidco-frame";
inline constexpr double kLoadTol = 1e-8;

/// Shortest decimal string that parses back to exactly `x`.
inline std::string format_double(double x) {
  char buf[32];
  const auto r = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, r.ptr);
}

inline double parse_double(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  double x = 0.0;
  const auto r = std::from_chars(s.data(), s.data() + s.size(), x);
  if (r.ec != std::errc() || r.ptr != s.data() + s.size()) throw FormatError("not a number: '" + std::string(s) + "'");
  return x;
}

// ---------------------------------------------------------------------------
// Frame files

struct FrameHeader {
  int format_version = kFrameFormatVersion;
  std::size_t m = 0;
  std::size_t N = 0;
  std::string creator = "sidco";
  std::optional<std::uint64_t> seed;
  double coherence = 0.0;
  double welch_bound = 0.0;
  bool nonneg = false;
};

struct FrameFile {
  FrameHeader header;
  Frame frame;
};

inline FrameHeader make_header(const Frame& F, std::string creator, std::optional<std::uint64_t> seed = std::nullopt,
                               bool nonneg = false) {
  FrameHeader h;
  h.m = F.dim();
  h.N = F.size();
  h.creator = std::move(creator);
  h.seed = seed;
  h.coherence = mutual_coherence(F);
  h.welch_bound = welch_bound(F.dim(), F.size());
  h.nonneg = nonneg;
  return h;
}

inline void write_frame(std::ostream& os, const Frame& F, const FrameHeader& h) {
  Json j = {{"format", kFrameFormatName},   {"version", h.format_version}, {"m", h.m},
            {"N", h.N},                     {"creator", h.creator},        {"coherence", h.coherence},
            {"welch_bound", h.welch_bound}, {"nonneg", h.nonneg}};
  j["seed"] = h.seed ? Json(*h.seed) : Json(nullptr);
  os << j.dump() << '\n';
  const DenseMatrix& H = F.vectors();
  for (std::size_t r = 0; r < H.rows(); ++r) {
    for (std::size_t c = 0; c < H.cols(); ++c) {
      if (c) os << ',';
      os << format_double(H(r, c));
    }
    os << '\n';
  }
}

inline FrameFile read_frame(std::istream& is) {
  std::string line;
  if (!std::getline(is, line)) throw FormatError("frame file: missing header line");
  Json j;
  try {
    j = Json::parse(line);
  } catch (const Json::exception& e) {
    throw FormatError(std::string("frame file: header is not JSON: ") + e.what());
  }
  FrameHeader h;
  try {
    if (j.at("format").get<std::string>() != kFrameFormatName) throw FormatError("frame file: unknown format tag");
    h.format_version = j.at("version").get<int>();
    h.m = j.at("m").get<std::size_t>();
    h.N = j.at("N").get<std::size_t>();
    h.creator = j.value("creator", std::string());
    if (j.contains("seed") && !j["seed"].is_null()) h.seed = j["seed"].get<std::uint64_t>();
    h.coherence = j.at("coherence").get<double>();
    h.welch_bound = j.value("welch_bound", 0.0);
    h.nonneg = j.value("nonneg", false);
  } catch (const Json::exception& e) {
    throw FormatError(std::string("frame file: bad header field: ") + e.what());
  }
  if (h.format_version != kFrameFormatVersion)
    throw FormatError("frame file: unsupported version " + std::to_string(h.format_version));
  if (h.m < 2 || h.N < h.m) throw FormatError("frame file: header has invalid dimensions");

  DenseMatrix H(h.m, h.N);
  for (std::size_t r = 0; r < h.m; ++r) {
    if (!std::getline(is, line)) throw FormatError("frame file: expected " + std::to_string(h.m) + " rows, got " + std::to_string(r));
    std::string_view rest(line);
    for (std::size_t c = 0; c < h.N; ++c) {
      const std::size_t comma = rest.find(',');
      if ((comma == std::string_view::npos) != (c + 1 == h.N))
        throw FormatError("frame file: row " + std::to_string(r) + " does not have " + std::to_string(h.N) + " entries");
      H(r, c) = parse_double(rest.substr(0, comma));
      if (comma != std::string_view::npos) rest.remove_prefix(comma + 1);
    }
  }
  while (std::getline(is, line))
    if (line.find_first_not_of(" \t\r") != std::string::npos) throw FormatError("frame file: trailing data after payload");
  if (!H.all_finite()) throw FormatError("frame file: non-finite entries");
  for (std::size_t c = 0; c < h.N; ++c)
    if (std::abs(norm2(H.col(c)) - 1.0) > kLoadTol) throw FormatError("frame file: column " + std::to_string(c) + " is not unit norm");

  // Rescale only columns outside the in-memory tolerance so that a written
  // frame reads back bit for bit.
  for (std::size_t c = 0; c < h.N; ++c) {
    const double n = norm2(H.col(c));
    if (std::abs(n - 1.0) > kUnitNormTol)
      for (double& v : H.col(c)) v /= n;
  }
  Frame F(std::move(H));
  const double mu = mutual_coherence(F);
  if (std::abs(mu - h.coherence) > kLoadTol)
    throw FormatError("frame file: recorded coherence " + format_double(h.coherence) + " but payload has " + format_double(mu));
  return {std::move(h), std::move(F)};
}

inline void save_frame(const std::filesystem::path& path, const Frame& F, const FrameHeader& h) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw FormatError("cannot open " + path.string() + " for writing");
  write_frame(os, F, h);
  if (!os) throw FormatError("write failed: " + path.string());
}

inline FrameFile load_frame(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw FormatError("cannot open " + path.string());
  return read_frame(is);
}

// ---------------------------------------------------------------------------
// Manifests

inline Json config_json(const SidcoConfig& c) {
  return {{"m", c.m},
          {"N", c.N},
          {"K", c.K},
          {"seed", c.seed},
          {"eps_stop", c.eps_stop},
          {"radius_slack", c.radius_slack},
          {"solver_tol", c.solver_tol},
          {"nonneg", c.nonneg},
          {"escape_enabled", c.escape_active()}};
}

inline Json metrics_json(const FrameMetrics& r) {
  Json j = {{"mu", r.mu}, {"mu_bar", r.mu_bar}, {"frame_potential", r.fp}, {"welch_bound", r.welch}};
  j["sparsity_cap"] = r.sparsity_cap ? Json(*r.sparsity_cap) : Json(nullptr);
  return j;
}

inline Json environment_json() {
  Json j;
#if defined(__clang__)
  j["compiler"] = std::string("clang ") + __clang_version__;
#elif defined(__GNUC__)
  j["compiler"] = std::string("gcc ") + __VERSION__;
#elif defined(_MSC_VER)
  j["compiler"] = "msvc " + std::to_string(_MSC_VER);
#else
  j["compiler"] = "unknown";
#endif
  j["cplusplus"] = static_cast<long>(__cplusplus);
#if defined(__linux__)
  j["platform"] = "linux";
#elif defined(__APPLE__)
  j["platform"] = "darwin";
#elif defined(_WIN32)
  j["platform"] = "windows";
#else
  j["platform"] = "unknown";
#endif
  j["pointer_bits"] = static_cast<int>(8 * sizeof(void*));
  return j;
}

inline Json manifest_json(const SidcoConfig& cfg, const SweepReport& r) {
  double wall = 0.0;
  for (double s : r.sweep_seconds) wall += s;
  Json counts = {{"updated", r.total(&SweepStats::updated)},
                 {"skipped", r.total(&SweepStats::skipped)},
                 {"rank_deficient", r.total(&SweepStats::rank_deficient)},
                 {"solver_stalls", r.total(&SweepStats::solver_stalls)},
                 {"rejected", r.total(&SweepStats::rejected)},
                 {"degenerate", r.total(&SweepStats::degenerate)}};
  return {{"config", config_json(cfg)},
          {"trace", r.trace},
          {"escapes", r.escapes},
          {"escape_coherence", r.escape_coherence},
          {"sweeps_run", r.sweeps_run},
          {"best_index", r.best_index},
          {"sweep_seconds", r.sweep_seconds},
          {"wall_seconds", wall},
          {"counts", counts},
          {"final_metrics", metrics_json(r.final_metrics)},
          {"environment", environment_json()}};
}

inline void save_json(const std::filesystem::path& path, const Json& j) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw FormatError("cannot open " + path.string() + " for writing");
  os << j.dump(2) << '\n';
  if (!os) throw FormatError("write failed: " + path.string());
}

// ---------------------------------------------------------------------------
// CSV

/// A table whose leading "# key: value" lines record how to regenerate it.
struct CsvTable {
  std::vector<std::pair<std::string, std::string>> echo;
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  void add_row(std::vector<std::string> row) {
    if (row.size() != header.size()) throw InvalidInput("CsvTable: row width does not match the header");
    rows.push_back(std::move(row));
  }
};

inline std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + '"';
}

inline void write_csv(std::ostream& os, const CsvTable& t) {
  for (const auto& [k, v] : t.echo) os << "# " << k << ": " << v << '\n';
  const auto line = [&](const std::vector<std::string>& cells) {
    for (std::size_t i = 0; i < cells.size(); ++i) os << (i ? "," : "") << csv_field(cells[i]);
    os << '\n';
  };
  line(t.header);
  for (const auto& r : t.rows) line(r);
}

inline void save_csv(const std::filesystem::path& path, const CsvTable& t) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw FormatError("cannot open " + path.string() + " for writing");
  write_csv(os, t);
  if (!os) throw FormatError("write failed: " + path.string());
}

// ---------------------------------------------------------------------------
// SVG

struct PlotSeries {
  std::string name;
  std::vector<double> x;
  std::vector<double> y;
};

struct PlotSpec {
  std::string title;
  std::string xlabel;
  std::string ylabel;
  bool log_y = false;
  std::optional<double> hline;  // dashed reference level, e.g. the Welch bound
  std::string hline_label;
};

inline std::string xml_escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

inline std::string svg_line_plot(const PlotSpec& spec, const std::vector<PlotSeries>& series) {
  constexpr double W = 640, H = 420, L = 70, R = 160, T = 40, B = 50;
  static constexpr const char* kColors[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"};
  const auto ty = [&](double v) { return spec.log_y ? std::log10(std::max(v, 1e-300)) : v; };

  double x0 = INFINITY, x1 = -INFINITY, y0 = INFINITY, y1 = -INFINITY;
  for (const PlotSeries& s : series) {
    if (s.x.size() != s.y.size()) throw InvalidInput("svg_line_plot: x and y lengths differ");
    for (std::size_t i = 0; i < s.x.size(); ++i) {
      if (spec.log_y && !(s.y[i] > 0.0)) continue;
      x0 = std::min(x0, s.x[i]);
      x1 = std::max(x1, s.x[i]);
      y0 = std::min(y0, ty(s.y[i]));
      y1 = std::max(y1, ty(s.y[i]));
    }
  }
  if (spec.hline) {
    y0 = std::min(y0, ty(*spec.hline));
    y1 = std::max(y1, ty(*spec.hline));
  }
  if (!(x0 <= x1)) x0 = 0, x1 = 1;
  if (!(y0 <= y1)) y0 = 0, y1 = 1;
  if (x1 == x0) x1 = x0 + 1;
  if (y1 == y0) y1 = y0 + 1;
  const double pad = 0.05 * (y1 - y0);
  y0 -= pad;
  y1 += pad;
  const auto px = [&](double x) { return L + (x - x0) / (x1 - x0) * (W - L - R); };
  const auto py = [&](double y) { return H - B - (ty(y) - y0) / (y1 - y0) * (H - T - B); };
  const auto num = [](double v) {
    std::ostringstream o;
    o.precision(4);
    o << v;
    return o.str();
  };

  std::ostringstream o;
  o << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  o << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  o << "<text x=\"" << W / 2 << "\" y=\"22\" text-anchor=\"middle\" font-size=\"14\">" << xml_escape(spec.title) << "</text>\n";
  o << "<line x1=\"" << L << "\" y1=\"" << H - B << "\" x2=\"" << W - R << "\" y2=\"" << H - B << "\" stroke=\"black\"/>\n";
  o << "<line x1=\"" << L << "\" y1=\"" << T << "\" x2=\"" << L << "\" y2=\"" << H - B << "\" stroke=\"black\"/>\n";
  for (int k = 0; k <= 4; ++k) {
    const double xv = x0 + (x1 - x0) * k / 4.0;
    o << "<text x=\"" << px(xv) << "\" y=\"" << H - B + 16 << "\" text-anchor=\"middle\">" << num(xv) << "</text>\n";
    const double yt = y0 + (y1 - y0) * k / 4.0;
    const double yv = spec.log_y ? std::pow(10.0, yt) : yt;
    const double yp = H - B - (yt - y0) / (y1 - y0) * (H - T - B);
    o << "<text x=\"" << L - 6 << "\" y=\"" << yp + 4 << "\" text-anchor=\"end\">" << num(yv) << "</text>\n";
  }
  o << "<text x=\"" << (L + W - R) / 2 << "\" y=\"" << H - 12 << "\" text-anchor=\"middle\">" << xml_escape(spec.xlabel) << "</text>\n";
  o << "<text transform=\"translate(16," << (T + H - B) / 2 << ") rotate(-90)\" text-anchor=\"middle\">" << xml_escape(spec.ylabel) << "</text>\n";
  if (spec.hline) {
    const double yp = py(*spec.hline);
    o << "<line x1=\"" << L << "\" y1=\"" << yp << "\" x2=\"" << W - R << "\" y2=\"" << yp << "\" stroke=\"gray\" stroke-dasharray=\"6,4\"/>\n";
    o << "<text x=\"" << W - R + 6 << "\" y=\"" << yp + 4 << "\" fill=\"gray\">" << xml_escape(spec.hline_label) << "</text>\n";
  }
  for (std::size_t k = 0; k < series.size(); ++k) {
    const PlotSeries& s = series[k];
    const char* color = kColors[k % std::size(kColors)];
    o << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.5\" points=\"";
    bool first = true;
    for (std::size_t i = 0; i < s.x.size(); ++i) {
      if (spec.log_y && !(s.y[i] > 0.0)) continue;
      o << (first ? "" : " ") << px(s.x[i]) << ',' << py(s.y[i]);
      first = false;
    }
    o << "\"/>\n";
    const double ly = T + 16.0 * static_cast<double>(k);
    o << "<line x1=\"" << W - R + 8 << "\" y1=\"" << ly << "\" x2=\"" << W - R + 28 << "\" y2=\"" << ly << "\" stroke=\"" << color << "\" stroke-width=\"2\"/>\n";
    o << "<text x=\"" << W - R + 32 << "\" y=\"" << ly + 4 << "\">" << xml_escape(s.name) << "</text>\n";
  }
  o << "</svg>\n";
  return o.str();
}

inline void save_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw FormatError("cannot open " + path.string() + " for writing");
  os << text;
  if (!os) throw FormatError("write failed: " + path.string());
}

// ---------------------------------------------------------------------------
// PGM images and patches

struct GrayImage {
  std::size_t width = 0;
  std::size_t height = 0;
  std::vector<double> pixels;  // row-major, scaled to [0, 1]

  double at(std::size_t row, std::size_t col) const { return pixels[row * width + col]; }
};

namespace detail {

// Next header token, skipping whitespace and '#' comments.
inline std::string pgm_token(std::istream& is) {
  std::string tok;
  int c;
  while ((c = is.get()) != EOF) {
    if (c == '#') {
      while ((c = is.get()) != EOF && c != '\n') {
      }
      continue;
    }
    if (std::isspace(c)) {
      if (!tok.empty()) break;
      continue;
    }
    tok += static_cast<char>(c);
  }
  if (tok.empty()) throw FormatError("pgm: truncated header");
  return tok;
}

inline std::size_t pgm_number(std::istream& is) {
  const std::string t = pgm_token(is);
  std::size_t v = 0;
  const auto r = std::from_chars(t.data(), t.data() + t.size(), v);
  if (r.ec != std::errc() || r.ptr != t.data() + t.size()) throw FormatError("pgm: bad header number '" + t + "'");
  return v;
}

} // namespace detail

/// Reads binary (P5) or ASCII (P2) greymaps with maxval up to 65535.
inline GrayImage read_pgm(std::istream& is) {
  const std::string magic = detail::pgm_token(is);
  if (magic != "P5" && magic != "P2") throw FormatError("pgm: expected P5 or P2, got '" + magic + "'");
  GrayImage img;
  img.width = detail::pgm_number(is);
  img.height = detail::pgm_number(is);
  const std::size_t maxval = detail::pgm_number(is);
  if (img.width == 0 || img.height == 0 || maxval == 0 || maxval > 65535) throw FormatError("pgm: invalid dimensions or maxval");
  const std::size_t n = img.width * img.height;
  img.pixels.resize(n);
  const double scale = 1.0 / static_cast<double>(maxval);
  if (magic == "P2") {
    for (std::size_t k = 0; k < n; ++k) {
      const std::size_t v = detail::pgm_number(is);
      if (v > maxval) throw FormatError("pgm: sample above maxval");
      img.pixels[k] = static_cast<double>(v) * scale;
    }
    return img;
  }
  const std::size_t bytes = maxval < 256 ? 1 : 2;
  std::vector<unsigned char> raw(n * bytes);
  is.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
  if (static_cast<std::size_t>(is.gcount()) != raw.size()) throw FormatError("pgm: truncated pixel data");
  for (std::size_t k = 0; k < n; ++k) {
    const std::size_t v = bytes == 1 ? raw[k] : (static_cast<std::size_t>(raw[2 * k]) << 8 | raw[2 * k + 1]);
    img.pixels[k] = static_cast<double>(std::min(v, maxval)) * scale;
  }
  return img;
}

inline GrayImage load_pgm(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw FormatError("cannot open " + path.string());
  try {
    return read_pgm(is);
  } catch (const FormatError& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

/// Writes an 8-bit binary greymap; pixel values are clamped to [0, 1].
inline void write_pgm(std::ostream& os, const GrayImage& img) {
  os << "P5\n" << img.width << ' ' << img.height << "\n255\n";
  for (double v : img.pixels) os.put(static_cast<char>(static_cast<unsigned char>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0))));
}

inline constexpr double kFlatPatchNorm = 1e-6;

struct PatchSet {
  DenseMatrix Y;  // (b·b) × count, unit columns; empty when count = 0
  std::size_t count = 0;
  std::size_t discarded = 0;  // flat blocks
};

/// Non-overlapping b×b blocks, each vectorized column by column, mean
/// removed and scaled to unit norm. Blocks that are flat after mean removal
/// are discarded.
inline PatchSet extract_patches(const std::vector<GrayImage>& images, std::size_t b = 8) {
  if (b == 0) throw InvalidInput("extract_patches: block size must be positive");
  std::vector<Vector> cols;
  PatchSet out;
  Vector v(b * b);
  for (const GrayImage& img : images)
    for (std::size_t r0 = 0; r0 + b <= img.height; r0 += b)
      for (std::size_t c0 = 0; c0 + b <= img.width; c0 += b) {
        double mean = 0.0;
        for (std::size_t c = 0; c < b; ++c)
          for (std::size_t r = 0; r < b; ++r) mean += (v[c * b + r] = img.at(r0 + r, c0 + c));
        mean /= static_cast<double>(b * b);
        for (double& x : v) x -= mean;
        const double n = norm2(v);
        if (n < kFlatPatchNorm) {
          ++out.discarded;
          continue;
        }
        for (double& x : v) x /= n;
        cols.push_back(v);
      }
  out.count = cols.size();
  if (cols.empty()) return out;
  out.Y = DenseMatrix(b * b, cols.size());
  for (std::size_t j = 0; j < cols.size(); ++j) std::copy(cols[j].begin(), cols[j].end(), out.Y.col(j).begin());
  return out;
}

/// Every *.pgm file directly inside `dir`, in name order.
inline std::vector<std::filesystem::path> list_pgm(const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::directory_iterator it(dir, ec);
  if (ec) throw FormatError("cannot list " + dir.string() + ": " + ec.message());
  std::vector<std::filesystem::path> out;
  for (const auto& e : it)
    if (e.is_regular_file() && e.path().extension() == ".pgm") out.push_back(e.path());
  std::sort(out.begin(), out.end());
  return out;
}

} // namespace sidco
