#include <cmath>
#include <filesystem>
#include <numbers>
#include <sstream>

#include "doctest.h"
#include "hmor/bode.hpp"
#include "hmor/error.hpp"
#include "hmor/io.hpp"
#include "hmor/metrics.hpp"
#include "hmor/plot.hpp"
#include "test_util.hpp"

using namespace hmor;
namespace fs = std::filesystem;

namespace {

TimeSeries wave(double scale, double offset, std::size_t n = 101, double t0 = 0.0, double dt = 0.01) {
  std::vector<double> t(n), a(n), b(n);
  for (std::size_t k = 0; k < n; ++k) {
    t[k] = t0 + dt * static_cast<double>(k);
    a[k] = scale * std::sin(2.0 * t[k]);
    b[k] = scale * std::cos(3.0 * t[k]) + offset;
  }
  return TimeSeries(t, {"i1", "i3"}, {a, b});
}

}  // namespace

TEST_CASE("metrics examples") {
  auto ref = wave(1.0, 0.0);
  SUBCASE("identical") {
    auto m = metrics(ref, ref, {"i1", "i3"});
    for (const auto& c : m.channels) {
      CHECK(c.rmse == 0.0);
      CHECK(c.rel_l2 == 0.0);
      CHECK(c.peak == 0.0);
    }
    CHECK_FALSE(m.resampled);
    CHECK(m.samples == ref.size());
  }
  SUBCASE("constant offset") {
    auto m = metrics(ref, wave(1.0, 0.25), {"i1", "i3"});
    CHECK(m.channel("i3").rmse == approx(0.25).epsilon(1e-14));
    CHECK(m.channel("i3").peak == approx(0.25).epsilon(1e-14));
    CHECK(m.channel("i1").rmse == 0.0);
  }
  SUBCASE("doubled") {
    auto m = metrics(ref, wave(2.0, 0.0), {"i1", "i3"});
    CHECK(m.channel("i1").rel_l2 == approx(1.0).epsilon(1e-14));
    CHECK(m.channel("i3").rel_l2 == approx(1.0).epsilon(1e-14));
    // Against a direct norm computation.
    double num = 0.0, den = 0.0;
    auto r = ref.channel("i3");
    for (double x : r) {
      num += x * x;
      den += x * x;
    }
    CHECK(std::sqrt(num / den) == approx(1.0).epsilon(1e-15));
  }
  SUBCASE("unknown channel") { CHECK_THROWS_AS(metrics(ref, ref, {"i9"}), ValidationError); }
}

TEST_CASE("resampling onto reference timestamps") {
  auto ref = wave(1.0, 0.0, 101, 0.0, 0.01);
  // Denser test grid with a linear signal: interpolation reproduces it exactly.
  std::vector<double> t, y;
  for (int k = 0; k <= 400; ++k) {
    t.push_back(-0.2 + 0.004 * k);
    y.push_back(3.0 * t.back());
  }
  TimeSeries test(t, {"i1", "i3"}, {y, y});
  std::vector<double> ry;
  for (double s : ref.time()) ry.push_back(3.0 * s);
  TimeSeries lin(ref.time(), {"i1", "i3"}, {ry, ry});
  auto m = metrics(lin, test, {"i1"});
  CHECK(m.resampled);
  CHECK(m.samples == 101);
  CHECK(m.channel("i1").peak <= 1e-14);
  CHECK_THROWS_AS(metrics(lin, test, {"i1"}, false), ValidationError);

  // Partial overlap keeps only shared samples.
  auto later = wave(1.0, 0.0, 101, 0.505, 0.01);
  auto p = metrics(ref, later, {"i1"});
  CHECK(p.samples == 50);

  auto disjoint = wave(1.0, 0.0, 11, 5.0, 0.01);
  CHECK_THROWS_AS(metrics(ref, disjoint, {"i1"}), ValidationError);
}

TEST_CASE("vanishing reference") {
  std::vector<double> t{0, 1, 2}, z{0, 0, 0}, one{1, 1, 1};
  TimeSeries a(t, {"x"}, {z});
  TimeSeries b(t, {"x"}, {one});
  CHECK(metrics(a, a, {"x"}).channel("x").rel_l2 == 0.0);
  auto m = metrics(a, b, {"x"});
  CHECK(std::isinf(m.channel("x").rel_l2));
  CHECK(metrics_to_json(m).at("channels").at("x").at("rel_l2").is_null());
}

TEST_CASE("order losses are listed ascending") {
  MetricsReport r;
  set_order_losses(r, {{3, 0.1, 1e-3}, {1, 0.3, 3e-3}, {2, 0.2, 2e-3}});
  REQUIRE(r.orders.size() == 3);
  CHECK(r.orders[0].n == 1);
  CHECK(r.orders[2].n == 3);
  auto j = metrics_to_json(r);
  CHECK(j.at("orders").at(1).at("n") == 2);
}

TEST_CASE("overlay SVG") {
  auto ref = wave(1.0, 0.0);
  auto t = std::span<const double>(ref.time());
  OverlayStyle style{"i3 overlay", "A", "FOM", "ROM"};
  auto a = overlay_svg(t, ref.channel("i3"), ref.channel("i3"), style);
  auto b = overlay_svg(t, ref.channel("i3"), ref.channel("i3"), style);
  CHECK(a == b);
  CHECK(a.rfind("<svg", 0) == 0);
  CHECK(a.find("FOM") != std::string::npos);
  auto meta = svg_metadata(a);
  CHECK(meta.at("kind") == "overlay");
  CHECK(meta.at("max_abs_error").get<double>() == 0.0);
  CHECK(meta.at("samples") == ref.size());

  auto off = wave(1.0, 0.5);
  auto c = overlay_svg(t, ref.channel("i3"), off.channel("i3"), style);
  CHECK(svg_metadata(c).at("max_abs_error").get<double>() == approx(0.5).epsilon(1e-12));

  std::vector<double> empty;
  CHECK_THROWS_AS(overlay_svg(empty, empty, empty, style), ValidationError);
  std::vector<double> shorter(5);
  CHECK_THROWS_AS(overlay_svg(t, ref.channel("i3"), shorter, style), ValidationError);

  OverlayStyle esc{"a < b & \"c\"", "V"};
  auto d = overlay_svg(t, ref.channel("i1"), ref.channel("i1"), esc);
  CHECK(d.find("a &lt; b &amp;") != std::string::npos);
}

TEST_CASE("Bode SVG of a single pole") {
  auto f = log_frequencies(1e3, 1e9, 61);
  CHECK(f.front() == 1e3);
  CHECK(f.back() == approx(1e9).epsilon(1e-14));
  std::vector<std::complex<double>> h;
  for (double x : f) h.push_back(1.0 / std::complex<double>(1.0, x / 1e5));
  auto bode = to_bode(f, h);
  auto svg = bode_svg({{"pole", bode}}, "single pole");
  CHECK(svg == bode_svg({{"pole", bode}}, "single pole"));
  auto meta = svg_metadata(svg);
  const auto& cur = meta.at("curves").at(0);
  CHECK(cur.at("label") == "pole");
  auto fh = cur.at("f_hz").get<std::vector<double>>();
  auto mag = cur.at("mag_db").get<std::vector<double>>();
  auto ph = cur.at("phase_deg").get<std::vector<double>>();
  REQUIRE(fh.size() == 61);
  // Least-squares slope over the last two decades.
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  int m = 0;
  for (std::size_t k = 0; k < fh.size(); ++k) {
    if (fh[k] < 1e7) continue;
    const double x = std::log10(fh[k]);
    sx += x;
    sy += mag[k];
    sxx += x * x;
    sxy += x * mag[k];
    ++m;
  }
  const double slope = (m * sxy - sx * sy) / (m * sxx - sx * sx);
  CHECK(slope == approx(-20.0).epsilon(0.01));
  CHECK(ph.back() == approx(-90.0).epsilon(0.01));
  CHECK_THROWS_AS(bode_svg({}, "none"), ValidationError);
  CHECK_THROWS_AS(bode_svg({{"empty", {}}}, "none"), ValidationError);
}

TEST_CASE("Bode CSV round trip and phase unwrapping") {
  std::vector<double> f{1.0, 2.0, 3.0};
  std::vector<std::complex<double>> h{std::polar(1.0, -3.0), std::polar(1.0, -3.3), std::polar(0.1, -6.0)};
  auto b = to_bode(f, h);
  CHECK(b[1].phase_deg == approx(-3.3 * 180.0 / std::numbers::pi).epsilon(1e-12));
  CHECK(b[2].phase_deg == approx(-6.0 * 180.0 / std::numbers::pi).epsilon(1e-12));
  CHECK(b[2].mag_db == approx(-20.0).epsilon(1e-12));
  std::stringstream io;
  write_bode_csv(io, b);
  CHECK(io.str().rfind("f_hz,mag_db,phase_deg\n", 0) == 0);
  auto back = read_bode_csv(io);
  REQUIRE(back.size() == 3);
  CHECK(back[2].phase_deg == b[2].phase_deg);
}

TEST_CASE("file plumbing") {
  const fs::path dir = fs::temp_directory_path() / "hmor_test_report";
  fs::remove_all(dir);
  fs::create_directories(dir);

  CHECK(sha256_hex("abc") == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
  CHECK(sha256_hex("") == "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");

  write_file_atomic(dir / "a.txt", "first");
  write_file_atomic(dir / "a.txt", "second");
  CHECK(read_file(dir / "a.txt") == "second");
  CHECK(sha256_file(dir / "a.txt") == sha256_hex("second"));
  std::size_t files = 0;
  for ([[maybe_unused]] const auto& e : fs::directory_iterator(dir)) ++files;
  CHECK(files == 1);

  write_json_atomic(dir / "j.json", {{"x", 1.0 / 3.0}});
  CHECK(read_json(dir / "j.json").at("x").get<double>() == 1.0 / 3.0);
  CHECK(read_file(dir / "j.json").back() == '\n');

  emit_plot(dir / "p.svg", "<svg/>");
  CHECK(read_file(dir / "p.svg") == "<svg/>");
  CHECK_THROWS(emit_plot(dir / "no_such_dir" / "p.svg", "<svg/>"));
  CHECK_THROWS_AS(read_file(dir / "missing"), ValidationError);

  Manifest man({"hmor", "fit", "--seed", "7"});
  man.add_input(dir / "a.txt");
  man.add_output(dir / "j.json");
  man.set("seed", 7);
  auto j = man.to_json();
  CHECK(j.at("argv").size() == 4);
  CHECK(j.at("version") == std::string(kToolVersion));
  CHECK(j.at("inputs").at(0).at("sha256") == sha256_hex("second"));
  CHECK(j.at("seed") == 7);
  CHECK(j.contains("threads"));
  man.write(dir / "run.manifest.json");
  CHECK(read_json(dir / "run.manifest.json") == j);
  fs::remove_all(dir);
}
