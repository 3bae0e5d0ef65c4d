// hmor: command-line front end for the Hammerstein model-order-reduction
// toolkit. Exit status 0 on success, 1 on invalid input, 2 on numerical
// failure.

#include <algorithm>
#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "hmor/bode.hpp"
#include "hmor/dc_map.hpp"
#include "hmor/error.hpp"
#include "hmor/fom_bench.hpp"
#include "hmor/ident.hpp"
#include "hmor/io.hpp"
#include "hmor/metrics.hpp"
#include "hmor/plot.hpp"
#include "hmor/rom_runtime.hpp"
#include "hmor/stimulus.hpp"

namespace fs = std::filesystem;
using namespace hmor;

namespace {

std::vector<std::string> g_argv;

fs::path manifest_path(const fs::path& out) {
  fs::path p = out;
  p += ".manifest.json";
  return p;
}

TimeSeries read_series(const fs::path& path) {
  std::istringstream in(read_file(path));
  try {
    return TimeSeries::read_csv(in);
  } catch (const ValidationError& e) {
    throw ValidationError(path.string() + ": " + e.what());
  }
}

void write_series(const fs::path& path, const TimeSeries& ts) {
  std::ostringstream os;
  ts.write_csv(os);
  write_file_atomic(path, os.str());
}

FomSpec load_fom(const std::string& path) {
  return path.empty() ? FomSpec{} : fom_from_json(read_json(path));
}

DcTable load_table(const fs::path& path) { return table_from_json(read_json(path)); }

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

// CSV with header v1,v2,v3,i1,i2,i3 (any column order).
std::vector<DcSample> read_dc_samples(const fs::path& path) {
  std::istringstream in(read_file(path));
  std::string line;
  if (!std::getline(in, line)) throw ValidationError(path.string() + ": empty file");
  std::vector<std::string> head;
  {
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
      while (!cell.empty() && (cell.back() == '\r' || cell.back() == ' ')) cell.pop_back();
      head.push_back(cell);
    }
  }
  const std::vector<std::string> want = {"v1", "v2", "v3", "i1", "i2", "i3"};
  std::array<std::size_t, 6> col{};
  for (std::size_t c = 0; c < 6; ++c) {
    auto it = std::find(head.begin(), head.end(), want[c]);
    if (it == head.end()) throw ValidationError(path.string() + ": missing column " + want[c]);
    col[c] = static_cast<std::size_t>(it - head.begin());
  }
  std::vector<DcSample> out;
  std::size_t row = 1;
  while (std::getline(in, line)) {
    ++row;
    if (line.empty() || line == "\r") continue;
    std::vector<double> vals;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
      double v = 0.0;
      const char* b = cell.data();
      while (b < cell.data() + cell.size() && *b == ' ') ++b;
      auto [p, ec] = std::from_chars(b, cell.data() + cell.size(), v);
      if (ec != std::errc()) {
        throw ValidationError(path.string() + ": bad number on line " + std::to_string(row));
      }
      vals.push_back(v);
    }
    if (vals.size() != head.size()) {
      throw ValidationError(path.string() + ": wrong column count on line " + std::to_string(row));
    }
    out.push_back({{vals[col[0]], vals[col[1]], vals[col[2]]},
                   {vals[col[3]], vals[col[4]], vals[col[5]]}});
  }
  return out;
}

std::string dc_samples_csv(const std::vector<DcSample>& s) {
  std::string out = "v1,v2,v3,i1,i2,i3\n";
  for (const auto& d : s) {
    out += num(d.v.v1) + ',' + num(d.v.v2) + ',' + num(d.v.v3) + ',' + num(d.i.i1) + ',' +
           num(d.i.i2) + ',' + num(d.i.i3) + '\n';
  }
  return out;
}

GridAxes axes_from_samples(const std::vector<DcSample>& s) {
  GridAxes ax;
  for (std::size_t p = 0; p < 3; ++p) {
    std::set<double> u;
    for (const auto& d : s) u.insert(d.v[p]);
    ax.axis[p].assign(u.begin(), u.end());
  }
  return ax;
}

std::string bode_csv(const std::vector<BodePoint>& b) {
  std::ostringstream os;
  write_bode_csv(os, b);
  return os.str();
}

std::vector<long> parse_orders(const std::string& s) {
  std::vector<long> out;
  std::stringstream ss(s);
  std::string cell;
  while (std::getline(ss, cell, ',')) {
    long v = 0;
    auto [p, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), v);
    if (ec != std::errc() || p != cell.data() + cell.size() || v < 1) {
      throw ValidationError("bad order list: " + s);
    }
    out.push_back(v);
  }
  if (out.empty()) throw ValidationError("empty order list");
  return out;
}

std::vector<std::string> split(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string cell;
  while (std::getline(ss, cell, ',')) {
    if (!cell.empty()) out.push_back(cell);
  }
  return out;
}

// Options shared by fit and order-sweep.
struct FitArgs {
  std::string table, train, config;
  int restarts = 8;
  int max_iter = -1;
  std::uint64_t seed = 1;
  double f_lo = 0.0, f_hi = 0.0;
  std::string stability;
  bool clamp = false;

  void add(CLI::App* c) {
    c->add_option("--table", table, "DC table JSON")->required();
    c->add_option("--train", train, "training record CSV (t,v1,v2,v3,i1,i2,i3)")->required();
    c->add_option("--config", config, "FitConfig JSON; flags override its fields");
    c->add_option("--restarts", restarts, "optimizer restarts")->check(CLI::PositiveNumber);
    c->add_option("--max-iter", max_iter, "L-BFGS iterations per phase");
    c->add_option("--seed", seed, "random seed");
    c->add_option("--f-lo", f_lo, "lowest initial pole [Hz]; 0 derives it from the record");
    c->add_option("--f-hi", f_hi, "highest initial pole [Hz]; 0 derives it from the record");
    c->add_option("--stability", stability, "unstable restarts: reject or keep")
        ->check(CLI::IsMember({"reject", "keep"}));
    c->add_flag("--clamp", clamp, "project out-of-box training voltages onto the table box");
  }

  FitConfig config_for(CLI::App* c) const {
    FitConfig cfg = config.empty() ? FitConfig{} : fit_config_from_json(read_json(config));
    if (config.empty() || c->count("--restarts")) cfg.restarts = restarts;
    if (max_iter >= 0) cfg.max_iterations = max_iter;
    if (config.empty() || c->count("--seed")) cfg.seed = seed;
    if (c->count("--f-lo")) cfg.f_lo = f_lo;
    if (c->count("--f-hi")) cfg.f_hi = f_hi;
    if (!stability.empty()) cfg.stability = stability == "keep" ? StabilityMode::keep : StabilityMode::reject;
    cfg.validate();
    return cfg;
  }

  TrainingSet training(const DcTable& tab, const TimeSeries& rec) const {
    return assemble_training(tab, rec, clamp ? BoxMode::clamp : BoxMode::strict,
                             {{"train", train}, {"train_sha256", sha256_file(train)}});
  }
};

double i3_rel_l2(const StateSpace& ss, const TrainingSet& tr) {
  const TimeSeries y = simulate(ss, tr.phi_inputs);
  const TimeSeries yt(y.time(), {"i1", "i2", "i3"},
                      {std::vector<double>(y.channel(0).begin(), y.channel(0).end()),
                       std::vector<double>(y.channel(1).begin(), y.channel(1).end()),
                       std::vector<double>(y.channel(2).begin(), y.channel(2).end())});
  return metrics(tr.targets, yt, {"i3"}, false).channel("i3").rel_l2;
}

}  // namespace

int run(int argc, char** argv) {
  CLI::App app{"Hammerstein model-order-reduction toolkit"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(kToolVersion));

  // fom ----------------------------------------------------------------------
  auto* fom = app.add_subcommand("fom", "synthetic full-order bench");
  fom->require_subcommand(1);

  struct {
    std::string fom, out, samples;
    double vmin = 0.0, vmax = 5.0, core_halfwidth = 0.0;
    std::size_t points = 21, core_points = 0;
  } sw;
  auto* dcs = fom->add_subcommand("dc-sweep", "DC sweep of the bench into a table");
  dcs->add_option("--fom", sw.fom, "FomSpec JSON (default bench if omitted)");
  dcs->add_option("--vmin", sw.vmin, "lowest port voltage [V]");
  dcs->add_option("--vmax", sw.vmax, "highest port voltage [V]");
  dcs->add_option("--points", sw.points, "nodes per axis")->check(CLI::Range(2, 1000));
  dcs->add_option("--core-halfwidth", sw.core_halfwidth,
                  "graded grid: half-width [V] of the fine core around v_mid on ports 1, 2");
  dcs->add_option("--core-points", sw.core_points, "graded grid: nodes in the fine core (odd)");
  dcs->add_option("--out", sw.out, "table JSON")->required();
  dcs->add_option("--samples", sw.samples, "also write the raw samples as CSV");
  dcs->callback([&] {
    const FomSpec spec = load_fom(sw.fom);
    const GridAxes axes = sw.core_points > 0
                              ? bench_axes(spec, sw.vmin, sw.vmax, sw.points, sw.core_halfwidth,
                                           sw.core_points)
                              : GridAxes::uniform(sw.vmin, sw.vmax, sw.points);
    const auto samples = fom_dc_sweep(spec, axes);
    write_json_atomic(sw.out, table_to_json(build_table(samples, axes)));
    Manifest m(g_argv);
    if (!sw.fom.empty()) m.add_input(sw.fom);
    m.set("fom", fom_to_json(spec));
    m.add_output(sw.out);
    if (!sw.samples.empty()) {
      write_file_atomic(sw.samples, dc_samples_csv(samples));
      m.add_output(sw.samples);
    }
    m.write(manifest_path(sw.out));
  });

  struct {
    std::string fom, sources, out;
    double load = 5e-12, rtol = 1e-8, v3_0 = NAN;
  } ft;
  auto* ftr = fom->add_subcommand("transient", "closed-loop bench transient");
  ftr->add_option("--fom", ft.fom, "FomSpec JSON (default bench if omitted)");
  ftr->add_option("--sources", ft.sources, "source CSV with v1, v2")->required();
  ftr->add_option("--load", ft.load, "load capacitance [F]");
  ftr->add_option("--rtol", ft.rtol, "integrator relative tolerance");
  ftr->add_option("--v3-0", ft.v3_0, "initial v3 [V] (default: operating point)");
  ftr->add_option("--out", ft.out, "record CSV")->required();
  ftr->callback([&] {
    const FomSpec spec = load_fom(ft.fom);
    const TimeSeries src = read_series(ft.sources);
    const double v3_0 = std::isnan(ft.v3_0)
                            ? spec.internal_target(src.channel("v1")[0], src.channel("v2")[0])
                            : ft.v3_0;
    write_series(ft.out, fom_transient(spec, src, LoadSpec{ft.load}, v3_0, ft.rtol));
    Manifest m(g_argv);
    if (!ft.fom.empty()) m.add_input(ft.fom);
    m.add_input(ft.sources);
    m.set("fom", fom_to_json(spec));
    m.add_output(ft.out);
    m.write(manifest_path(ft.out));
  });

  // stim ---------------------------------------------------------------------
  auto* stim = app.add_subcommand("stim", "excitation waveforms");
  stim->require_subcommand(1);
  std::string stim_out;
  ChirpSpec chirp;
  auto* sc = stim->add_subcommand("chirp", "exponential chirp pair");
  sc->add_option("--f0", chirp.f0, "start frequency [Hz]");
  sc->add_option("--f1", chirp.f1, "end frequency [Hz]");
  sc->add_option("--v-bias", chirp.v_bias, "bias [V]");
  sc->add_option("--amplitude", chirp.amplitude, "amplitude [V]");
  sc->add_option("--n-per", chirp.n_per, "periods");
  sc->add_option("--spp", chirp.samples_per_period, "samples per period");
  sc->add_option("--out", stim_out, "CSV")->required();
  SineSpec sine;
  auto* ss = stim->add_subcommand("sine", "fixed-frequency sinusoid pair");
  ss->add_option("--freq", sine.frequency, "frequency [Hz]");
  ss->add_option("--amplitude", sine.amplitude, "amplitude [V]");
  ss->add_option("--v-bias", sine.v_bias, "bias [V]");
  ss->add_option("--n-per", sine.n_per, "periods");
  ss->add_option("--spp", sine.samples_per_period, "samples per period");
  ss->add_option("--out", stim_out, "CSV")->required();
  PulseSpec pulse;
  auto* sp = stim->add_subcommand("pulse", "trapezoidal pulse on v1");
  sp->add_option("--low", pulse.low, "low level [V]");
  sp->add_option("--high", pulse.high, "high level [V]");
  sp->add_option("--ramp", pulse.ramp, "edge time [s]");
  sp->add_option("--dwell-high", pulse.dwell_high, "time at high level [s]");
  sp->add_option("--dwell-low", pulse.dwell_low, "time at low level [s]");
  sp->add_option("--v2", pulse.v2, "constant v2 [V]");
  sp->add_option("--periods", pulse.periods, "pulse count");
  sp->add_option("--points", pulse.points_per_segment, "samples per segment");
  sp->add_option("--out", stim_out, "CSV")->required();
  auto stim_done = [&](const TimeSeries& ts, nlohmann::json spec) {
    write_series(stim_out, ts);
    Manifest m(g_argv);
    m.set("spec", std::move(spec));
    m.add_output(stim_out);
    m.write(manifest_path(stim_out));
  };
  sc->callback([&] {
    stim_done(gen_chirp_pair(chirp),
              {{"f0", chirp.f0}, {"f1", chirp.f1}, {"v_bias", chirp.v_bias},
               {"amplitude", chirp.amplitude}, {"n_per", chirp.n_per},
               {"samples_per_period", chirp.samples_per_period},
               {"T", chirp_horizon(chirp.f0, chirp.f1, static_cast<double>(chirp.n_per))}});
  });
  ss->callback([&] {
    stim_done(gen_sine(sine), {{"frequency", sine.frequency}, {"amplitude", sine.amplitude},
                               {"v_bias", sine.v_bias}, {"n_per", sine.n_per},
                               {"samples_per_period", sine.samples_per_period}});
  });
  sp->callback([&] {
    stim_done(gen_pulse(pulse), {{"low", pulse.low}, {"high", pulse.high}, {"ramp", pulse.ramp},
                                 {"dwell_high", pulse.dwell_high}, {"dwell_low", pulse.dwell_low},
                                 {"v2", pulse.v2}, {"periods", pulse.periods},
                                 {"points_per_segment", pulse.points_per_segment}});
  });

  // table --------------------------------------------------------------------
  auto* table = app.add_subcommand("table", "DC tables");
  table->require_subcommand(1);
  std::string tb_samples, tb_out;
  auto* tbb = table->add_subcommand("build", "table from DC samples");
  tbb->add_option("--samples", tb_samples, "CSV with v1,v2,v3,i1,i2,i3")->required();
  tbb->add_option("--out", tb_out, "table JSON")->required();
  tbb->callback([&] {
    const auto samples = read_dc_samples(tb_samples);
    write_json_atomic(tb_out, table_to_json(build_table(samples, axes_from_samples(samples))));
    Manifest m(g_argv);
    m.add_input(tb_samples);
    m.add_output(tb_out);
    m.write(manifest_path(tb_out));
  });

  // fit ----------------------------------------------------------------------
  FitArgs fa;
  int fit_order = 3;
  std::string fit_out, fit_report, fit_table_ref;
  auto* fitc = app.add_subcommand("fit", "identify the linear block");
  fa.add(fitc);
  fitc->add_option("--order", fit_order, "state dimension n")->check(CLI::PositiveNumber);
  fitc->add_option("--out", fit_out, "model JSON")->required();
  fitc->add_option("--report", fit_report, "fit summary JSON");
  fitc->add_option("--table-ref", fit_table_ref,
                   "store the table at this path and reference it by hash instead of embedding");
  fitc->callback([&] {
    FitConfig cfg = fa.config_for(fitc);
    if (fa.config.empty() || fitc->count("--order")) cfg.n = fit_order;
    const DcTable tab = load_table(fa.table);
    const TrainingSet tr = fa.training(tab, read_series(fa.train));
    const FitResult res = fit(tr, cfg);
    HammersteinModel model{tab, res.ss, {}};
    model.meta = {{"order", res.n},
                  {"seed", cfg.seed},
                  {"train_sha256", tr.provenance["train_sha256"]},
                  {"table_sha256", sha256_file(fa.table)},
                  {"loss", res.loss},
                  {"normalized_loss", res.normalized_loss},
                  {"spectral_abscissa", res.spectral_abscissa}};
    if (fit_table_ref.empty()) {
      save_model(model, fit_out);
    } else {
      save_model(model, fit_out, fit_table_ref);
    }
    Manifest m(g_argv);
    m.add_input(fa.table);
    m.add_input(fa.train);
    if (!fa.config.empty()) m.add_input(fa.config);
    m.set("config", fit_config_to_json(cfg));
    m.set("seed", cfg.seed);
    m.add_output(fit_out);
    if (!fit_table_ref.empty()) m.add_output(fit_table_ref);
    if (!fit_report.empty()) {
      nlohmann::json rep = fit_result_to_json(res);
      rep["config"] = fit_config_to_json(cfg);
      rep["train_rel_l2_i3"] = i3_rel_l2(res.ss, tr);
      write_json_atomic(fit_report, rep);
      m.add_output(fit_report);
    }
    m.write(manifest_path(fit_out));
    std::cout << "order " << res.n << ": normalized loss " << res.normalized_loss
              << ", best restart " << res.best_restart << ", spectral abscissa "
              << res.spectral_abscissa << "\n";
  });

  // order-sweep --------------------------------------------------------------
  FitArgs oa;
  std::string sweep_orders = "1,2,3", sweep_dir, sweep_report;
  auto* osw = app.add_subcommand("order-sweep", "fit several state dimensions");
  oa.add(osw);
  osw->add_option("--orders", sweep_orders, "comma-separated orders");
  osw->add_option("--out-dir", sweep_dir, "directory for model_n<N>.json files")->required();
  osw->add_option("--report", sweep_report, "sweep summary JSON")->required();
  osw->callback([&] {
    const FitConfig cfg = oa.config_for(osw);
    const DcTable tab = load_table(oa.table);
    const TrainingSet tr = oa.training(tab, read_series(oa.train));
    std::vector<Eigen::Index> orders;
    for (long n : parse_orders(sweep_orders)) orders.push_back(n);
    const auto results = order_sweep(tr, orders, cfg);
    fs::create_directories(sweep_dir);
    Manifest m(g_argv);
    m.add_input(oa.table);
    m.add_input(oa.train);
    if (!oa.config.empty()) m.add_input(oa.config);
    m.set("config", fit_config_to_json(cfg));
    m.set("seed", cfg.seed);
    nlohmann::json rep = {{"orders", nlohmann::json::array()}};
    MetricsReport mr;
    std::vector<OrderLoss> ol;
    for (const auto& r : results) {
      const fs::path mp = fs::path(sweep_dir) / ("model_n" + std::to_string(r.n) + ".json");
      HammersteinModel model{tab, r.ss,
                             {{"order", r.n}, {"seed", cfg.seed}, {"loss", r.loss},
                              {"normalized_loss", r.normalized_loss},
                              {"spectral_abscissa", r.spectral_abscissa}}};
      save_model(model, mp);
      m.add_output(mp);
      nlohmann::json jr = fit_result_to_json(r);
      jr["train_rel_l2_i3"] = i3_rel_l2(r.ss, tr);
      jr["model"] = mp.generic_string();
      rep["orders"].push_back(jr);
      ol.push_back({static_cast<long>(r.n), r.loss, r.normalized_loss});
      std::cout << "order " << r.n << ": normalized loss " << r.normalized_loss
                << ", relative L2 (i3) " << jr["train_rel_l2_i3"].get<double>() << "\n";
    }
    set_order_losses(mr, ol);
    rep["loss_table"] = metrics_to_json(mr)["orders"];
    write_json_atomic(sweep_report, rep);
    m.add_output(sweep_report);
    m.write(manifest_path(sweep_report));
  });

  // sim ----------------------------------------------------------------------
  struct {
    std::string model, sources, out, reference, metrics, svg, channel = "i3";
    double load = 5e-12, rtol = 1e-8, v3_0 = NAN;
    bool strict = false;
  } sm;
  auto* sim = app.add_subcommand("sim", "closed-loop ROM transient");
  sim->add_option("--model", sm.model, "model JSON")->required();
  sim->add_option("--sources", sm.sources, "source CSV with v1, v2")->required();
  sim->add_option("--load", sm.load, "load capacitance [F]");
  sim->add_option("--rtol", sm.rtol, "integrator relative tolerance");
  sim->add_option("--v3-0", sm.v3_0, "initial v3 [V] (default: DC operating point)");
  sim->add_flag("--strict", sm.strict, "fail instead of clamping outside the table box");
  sim->add_option("--out", sm.out, "output CSV")->required();
  sim->add_option("--reference", sm.reference, "reference record CSV to compare against");
  sim->add_option("--metrics", sm.metrics, "metrics JSON (needs --reference)");
  sim->add_option("--svg", sm.svg, "overlay plot (needs --reference)");
  sim->add_option("--channel", sm.channel, "channel for the overlay plot");
  sim->callback([&] {
    const HammersteinModel model = load_model(sm.model);
    const TimeSeries src = read_series(sm.sources);
    double v3_0 = sm.v3_0;
    if (std::isnan(v3_0)) {
      v3_0 = rom_dc_operating_point(model, src.channel("v1")[0], src.channel("v2")[0]).v3;
    }
    TransientOptions opt;
    opt.rtol = sm.rtol;
    opt.mode = sm.strict ? BoxMode::strict : BoxMode::clamp;
    const TimeSeries out = rom_transient(model, src, LoadSpec{sm.load}, v3_0, opt);
    write_series(sm.out, out);
    Manifest m(g_argv);
    m.add_input(sm.model);
    m.add_input(sm.sources);
    m.add_output(sm.out);
    if ((!sm.metrics.empty() || !sm.svg.empty()) && sm.reference.empty()) {
      throw ValidationError("--metrics and --svg need --reference");
    }
    if (!sm.reference.empty()) {
      const TimeSeries ref = read_series(sm.reference);
      m.add_input(sm.reference);
      if (!sm.metrics.empty()) {
        write_json_atomic(sm.metrics, metrics_to_json(metrics(ref, out, {"v3", "i1", "i2", "i3"})));
        m.add_output(sm.metrics);
      }
      if (!sm.svg.empty()) {
        if (ref.time() != out.time()) throw ValidationError("overlay needs matching timestamps");
        emit_plot(sm.svg, overlay_svg(ref.time(), ref.channel(sm.channel), out.channel(sm.channel),
                                      {sm.channel + ": reference vs ROM", sm.channel, "reference",
                                       "ROM"}));
        m.add_output(sm.svg);
      }
    }
    m.write(manifest_path(sm.out));
  });

  // ac -----------------------------------------------------------------------
  struct {
    std::string model, out, svg, fom;
    double load = 5e-12, fmin = 1e3, fmax = 1e10, v1 = 2.5, v2 = 2.5, tol = 1e-9;
    std::size_t points = 200;
  } ac;
  auto* acc = app.add_subcommand("ac", "small-signal v1 -> v3 response of the ROM");
  acc->add_option("--model", ac.model, "model JSON")->required();
  acc->add_option("--load", ac.load, "load capacitance [F]");
  acc->add_option("--fmin", ac.fmin, "lowest frequency [Hz]");
  acc->add_option("--fmax", ac.fmax, "highest frequency [Hz]");
  acc->add_option("--points", ac.points, "frequency count")->check(CLI::Range(2, 100000));
  acc->add_option("--v1", ac.v1, "operating-point V1 [V]");
  acc->add_option("--v2", ac.v2, "operating-point V2 [V]");
  acc->add_option("--tol", ac.tol, "operating-point current tolerance [A]");
  acc->add_option("--fom", ac.fom, "also draw the bench response from this FomSpec JSON");
  acc->add_option("--out", ac.out, "Bode CSV")->required();
  acc->add_option("--svg", ac.svg, "Bode plot");
  acc->callback([&] {
    const HammersteinModel model = load_model(ac.model);
    const OperatingPoint op = rom_dc_operating_point(model, ac.v1, ac.v2, ac.tol);
    const auto freqs = log_frequencies(ac.fmin, ac.fmax, ac.points);
    const LoadSpec load{ac.load};
    const auto bode = rom_ac(model, op, load, freqs);
    write_file_atomic(ac.out, bode_csv(bode));
    Manifest m(g_argv);
    m.add_input(ac.model);
    m.set("operating_point", {{"v1", op.v1}, {"v2", op.v2}, {"v3", op.v3},
                              {"residual", op.residual}, {"multiple_roots", op.multiple_roots}});
    m.add_output(ac.out);
    if (!ac.svg.empty()) {
      std::vector<BodeCurve> curves{{"ROM", bode}};
      if (!ac.fom.empty()) {
        const FomSpec spec = load_fom(ac.fom);
        m.add_input(ac.fom);
        curves.push_back({"bench", fom_ac(spec, fom_operating_point(spec, ac.v1, ac.v2), load, freqs)});
      }
      emit_plot(ac.svg, bode_svg(curves, "v1 -> v3"));
      m.add_output(ac.svg);
    }
    m.write(manifest_path(ac.out));
  });

  // dc-tf --------------------------------------------------------------------
  struct {
    std::string model, out;
    double v2 = 2.5, v1_min = 0.0, v1_max = 5.0, tol = 1e-9;
    std::size_t points = 101;
  } tf;
  auto* dctf = app.add_subcommand("dc-tf", "DC transfer curve V3(V1) at fixed V2");
  dctf->add_option("--model", tf.model, "model JSON")->required();
  dctf->add_option("--v2", tf.v2, "V2 [V]");
  dctf->add_option("--v1-min", tf.v1_min, "first V1 [V]");
  dctf->add_option("--v1-max", tf.v1_max, "last V1 [V]");
  dctf->add_option("--points", tf.points, "V1 count")->check(CLI::Range(2, 1000000));
  dctf->add_option("--tol", tf.tol, "current tolerance [A]");
  dctf->add_option("--out", tf.out, "CSV with v1,v3,residual,multiple_roots")->required();
  dctf->callback([&] {
    const HammersteinModel model = load_model(tf.model);
    std::vector<double> grid(tf.points);
    for (std::size_t k = 0; k < tf.points; ++k) {
      grid[k] = tf.v1_min + (tf.v1_max - tf.v1_min) * static_cast<double>(k) /
                                static_cast<double>(tf.points - 1);
    }
    const auto curve = dc_transfer_curve(model, grid, tf.v2, tf.tol);
    std::string csv = "v1,v3,residual,multiple_roots\n";
    for (const auto& op : curve) {
      csv += num(op.v1) + ',' + num(op.v3) + ',' + num(op.residual) + ',' +
             (op.multiple_roots ? "1" : "0") + '\n';
    }
    write_file_atomic(tf.out, csv);
    Manifest m(g_argv);
    m.add_input(tf.model);
    m.add_output(tf.out);
    m.write(manifest_path(tf.out));
  });

  // report -------------------------------------------------------------------
  struct {
    std::string reference, test, channels = "v3,i3", out, svg, sweep;
    bool no_resample = false;
  } rp;
  auto* rep = app.add_subcommand("report", "error metrics between two records");
  rep->add_option("--reference", rp.reference, "reference CSV")->required();
  rep->add_option("--test", rp.test, "test CSV")->required();
  rep->add_option("--channels", rp.channels, "comma-separated channels");
  rep->add_option("--sweep", rp.sweep, "order-sweep report whose loss table is merged in");
  rep->add_flag("--no-resample", rp.no_resample, "fail when timestamps differ");
  rep->add_option("--out", rp.out, "metrics JSON")->required();
  rep->add_option("--svg", rp.svg, "overlay plot of the first channel");
  rep->callback([&] {
    const TimeSeries ref = read_series(rp.reference);
    const TimeSeries test = read_series(rp.test);
    const auto chans = split(rp.channels);
    MetricsReport mr = metrics(ref, test, chans, !rp.no_resample);
    Manifest m(g_argv);
    m.add_input(rp.reference);
    m.add_input(rp.test);
    if (!rp.sweep.empty()) {
      const nlohmann::json sj = read_json(rp.sweep);
      std::vector<OrderLoss> ol;
      for (const auto& o : sj.at("orders")) {
        ol.push_back({o.at("n").get<long>(), o.at("loss").get<double>(),
                      o.at("normalized_loss").get<double>()});
      }
      set_order_losses(mr, ol);
      m.add_input(rp.sweep);
    }
    write_json_atomic(rp.out, metrics_to_json(mr));
    m.add_output(rp.out);
    if (!rp.svg.empty()) {
      const std::string& c = chans.front();
      std::vector<double> tv;
      for (double t : ref.time()) tv.push_back(interp_linear(test.time(), test.channel(c), t));
      emit_plot(rp.svg, overlay_svg(ref.time(), ref.channel(c), tv,
                                    {c + ": reference vs test", c, "reference", "test"}));
      m.add_output(rp.svg);
    }
    m.write(manifest_path(rp.out));
  });

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "error: " << e.what() << "\n\n" << app.help();
    return 1;
  }
  return 0;
}

int main(int argc, char** argv) {
  g_argv.assign(argv, argv + argc);
  try {
    return run(argc, argv);
  } catch (const NumericalError& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return 2;
  } catch (const ValidationError& e) {
    std::cerr << "invalid input: " << e.what() << "\n";
    return 1;
  } catch (const nlohmann::json::exception& e) {
    std::cerr << "invalid input: " << e.what() << "\n";
    return 1;
  } catch (const std::filesystem::filesystem_error& e) {
    std::cerr << "invalid input: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
}
