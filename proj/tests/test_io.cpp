#include <gtest/gtest.h>

#include <filesystem>
#include <sstream>

#include "sidco/io.hpp"
#include "sidco/random.hpp"

using namespace sidco;

namespace {

Frame polar_frame(std::size_t m, std::size_t N, std::uint64_t seed) {
  Rng rng = make_rng(seed);
  DenseMatrix H = gaussian_matrix(m, N, rng);
  normalize_columns(H);
  return Frame::normalized(unit_polar(H));
}

std::string frame_text(const Frame& F) {
  std::ostringstream os;
  write_frame(os, F, make_header(F, "test", 7));
  return os.str();
}

}  // namespace

TEST(FormatDouble, RoundTripsExactly) {
  Rng rng = make_rng(1);
  for (double v : gaussian_matrix(50, 1, rng).data()) EXPECT_EQ(parse_double(format_double(v)), v);
  EXPECT_EQ(format_double(0.5), "0.5");
  EXPECT_EQ(parse_double(" 1e-3\r"), 1e-3);
  EXPECT_THROW(parse_double("1.0x"), FormatError);
  EXPECT_THROW(parse_double(""), FormatError);
}

TEST(FrameFile, RoundTripIsBitIdentical) {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const Frame F = polar_frame(6 + seed, 13 + 2 * seed, seed);
    std::istringstream is(frame_text(F));
    const FrameFile back = read_frame(is);
    EXPECT_EQ(back.frame.vectors(), F.vectors());
    EXPECT_EQ(back.header.m, F.dim());
    EXPECT_EQ(back.header.N, F.size());
    EXPECT_EQ(back.header.seed, std::optional<std::uint64_t>(7));
    EXPECT_EQ(back.header.creator, "test");
    EXPECT_EQ(back.header.coherence, mutual_coherence(F));
  }
}

TEST(FrameFile, OnDisk) {
  const auto path = std::filesystem::temp_directory_path() / "sidco_test_frame.txt";
  const Frame F = make_simplex_etf(3);
  save_frame(path, F, make_header(F, "test"));
  const FrameFile back = load_frame(path);
  EXPECT_EQ(back.frame.vectors(), F.vectors());
  EXPECT_FALSE(back.header.seed.has_value());
  std::filesystem::remove(path);
  EXPECT_THROW(load_frame(path), FormatError);
}

TEST(FrameFile, RejectsCorruption) {
  const Frame F = make_simplex_etf(3);
  const std::string good = frame_text(F);
  const auto reject = [](const std::string& text) {
    std::istringstream is(text);
    EXPECT_THROW(read_frame(is), FormatError) << text.substr(0, 80);
  };
  reject("");
  reject("not json\n");
  reject(good.substr(0, good.rfind('\n', good.size() - 2) + 1));  // missing last row
  reject(good + "1,2,3,4\n");
  std::string wrong_mu = good;
  wrong_mu.replace(wrong_mu.find("\"coherence\":"), 12, "\"coherence\":0.5,\"x\":");
  reject(wrong_mu);
  std::string wrong_version = good;
  wrong_version.replace(wrong_version.find("\"version\":1"), 11, "\"version\":9");
  reject(wrong_version);
  // Scale one payload entry so its column is off unit norm.
  std::string not_unit = good;
  const std::size_t row = not_unit.find('\n') + 1;
  not_unit.insert(row, "2");
  reject(not_unit);
}

TEST(Manifest, CarriesConfigAndTrace) {
  SidcoConfig c;
  c.m = 4;
  c.N = 8;
  c.K = 5;
  c.seed = 3;
  const auto [F, rep] = run(c);
  const Json j = manifest_json(c, rep);
  EXPECT_EQ(j["config"]["m"], 4);
  EXPECT_EQ(j["config"]["seed"], 3);
  EXPECT_EQ(j["trace"].size(), rep.trace.size());
  EXPECT_LE(j["trace"].size(), static_cast<std::size_t>(c.K) + 1);
  EXPECT_EQ(j["final_metrics"]["mu"].get<double>(), rep.final_metrics.mu);
  EXPECT_TRUE(j["environment"].contains("compiler"));
}

TEST(Csv, EchoHeaderAndQuoting) {
  CsvTable t;
  t.echo = {{"seed", "4"}};
  t.header = {"a", "b"};
  t.add_row({"1", "x,y"});
  EXPECT_THROW(t.add_row({"1"}), InvalidInput);
  std::ostringstream os;
  write_csv(os, t);
  EXPECT_EQ(os.str(), "# seed: 4\na,b\n1,\"x,y\"\n");
}

TEST(Svg, WellFormedAndDeterministic) {
  PlotSpec spec{"Trace <test>", "sweep", "coherence", false, 0.2, "WB"};
  const std::vector<PlotSeries> s{{"run", {0, 1, 2}, {0.5, 0.3, 0.25}}};
  const std::string a = svg_line_plot(spec, s);
  EXPECT_EQ(a, svg_line_plot(spec, s));
  EXPECT_EQ(a.rfind("<svg", 0), 0u);
  EXPECT_NE(a.find("</svg>"), std::string::npos);
  EXPECT_NE(a.find("&lt;test&gt;"), std::string::npos);
  EXPECT_NE(a.find("<polyline"), std::string::npos);
  spec.log_y = true;
  EXPECT_NE(svg_line_plot(spec, s).find("<polyline"), std::string::npos);
}

TEST(Pgm, BinaryAndAsciiAgree) {
  GrayImage img{4, 3, {}};
  for (std::size_t k = 0; k < 12; ++k) img.pixels.push_back(static_cast<double>(k * 20) / 255.0);
  std::stringstream bin;
  write_pgm(bin, img);
  const GrayImage a = read_pgm(bin);
  std::istringstream ascii("P2\n# comment\n4 3\n255\n0 20 40 60 80 100 120 140 160 180 200 220\n");
  const GrayImage b = read_pgm(ascii);
  ASSERT_EQ(a.pixels.size(), 12u);
  for (std::size_t k = 0; k < 12; ++k) {
    EXPECT_NEAR(a.pixels[k], img.pixels[k], 1e-12);
    EXPECT_EQ(a.pixels[k], b.pixels[k]);
  }
  std::istringstream bad("P6\n1 1\n255\n");
  EXPECT_THROW(read_pgm(bad), FormatError);
  std::istringstream truncated("P5\n4 4\n255\nab");
  EXPECT_THROW(read_pgm(truncated), FormatError);
}

TEST(Patches, MeanRemovedUnitNormAndFlatDiscarded) {
  GrayImage img{16, 9, std::vector<double>(144, 0.5)};
  // Left block varies, right block is flat; the last row is not a full block.
  for (std::size_t r = 0; r < 8; ++r)
    for (std::size_t c = 0; c < 8; ++c) img.pixels[r * 16 + c] = 0.1 * static_cast<double>(r) + 0.01 * static_cast<double>(c);
  const PatchSet p = extract_patches({img});
  EXPECT_EQ(p.count, 1u);
  EXPECT_EQ(p.discarded, 1u);
  ASSERT_EQ(p.Y.rows(), 64u);
  double sum = 0.0;
  for (double v : p.Y.col(0)) sum += v;
  EXPECT_NEAR(sum, 0.0, 1e-12);
  EXPECT_NEAR(norm2(p.Y.col(0)), 1.0, 1e-12);
  // Column-major vectorization: entry (r, c) lands at c·8 + r.
  EXPECT_GT(p.Y(1, 0), p.Y(0, 0));
  EXPECT_NEAR(p.Y(8, 0) - p.Y(0, 0), (p.Y(1, 0) - p.Y(0, 0)) / 10.0, 1e-12);
  EXPECT_EQ(extract_patches({GrayImage{4, 4, std::vector<double>(16, 0.0)}}).count, 0u);
}

TEST(CorrelationProfile, SimplexAndRandom) {
  const CorrelationProfile p = correlation_profile(make_simplex_etf(3));
  ASSERT_EQ(p.sorted.size(), 6u);
  for (double v : p.sorted) EXPECT_NEAR(v, 1.0 / 3.0, 1e-12);
  EXPECT_EQ(p.above_095, 1.0);
  const Frame F = polar_frame(5, 11, 2);
  const CorrelationProfile q = correlation_profile(F);
  EXPECT_EQ(q.sorted.size(), 55u);
  EXPECT_TRUE(std::is_sorted(q.sorted.begin(), q.sorted.end()));
  EXPECT_EQ(q.mu, mutual_coherence(F));
  EXPECT_LE(q.above_099, q.above_095);
  EXPECT_GE(q.above_099, 1.0 / 55.0);
}
