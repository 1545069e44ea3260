#include <cstdio>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "sbacc/sbacc.hpp"

namespace {

using namespace sbacc;

constexpr int kConfigError = 2;
constexpr int kIoError = 3;

ExperimentConfig load_with_overrides(const std::string& path, const std::vector<std::string>& sets) {
  ExperimentConfig cfg = ExperimentConfig::load(path);
  for (const auto& kv : sets) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw std::invalid_argument("--set expects key=value, got '" + kv + "'");
    cfg.set(kv.substr(0, eq), kv.substr(eq + 1));
  }
  return cfg;
}

struct RunArgs {
  std::string config;
  std::vector<std::string> sets;
  std::string axis;
  std::vector<std::size_t> values;
  std::vector<std::string> schemes{"sbacc", "bacc", "discard"};
  std::vector<std::string> functions;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> trials;
  std::size_t threads = 0;
  std::string out;
  bool no_runtime = false;
};

int cmd_run(const RunArgs& a) {
  SweepSpec spec;
  spec.base = load_with_overrides(a.config, a.sets);
  if (a.seed) spec.base.seed = *a.seed;
  if (a.trials) spec.base.trials = *a.trials;
  if (a.axis.empty()) {
    if (!a.values.empty()) throw std::invalid_argument("--values needs --axis");
    spec.axis = Axis::A;
    spec.values = {spec.base.A};
  } else {
    spec.axis = parse_axis(a.axis);
    if (a.values.empty()) throw std::invalid_argument("--axis needs --values");
    spec.values = a.values;
  }
  spec.schemes.clear();
  for (const auto& s : a.schemes) spec.schemes.push_back(parse_scheme(s));
  for (const auto& f : a.functions) spec.functions.push_back(TargetFunction::parse(f));
  spec.threads = a.threads;
  spec.record_runtime = !a.no_runtime;
  spec.output_path = a.out;
  const auto rows = run_sweep(spec);
  if (a.out.empty() || a.out == "-") {
    write_csv(std::cout, rows);
  } else {
    write_csv(a.out, rows);
    std::fprintf(stderr, "wrote %zu rows to %s\n", rows.size(), a.out.c_str());
  }
  return 0;
}

int cmd_figure(const std::string& input, const std::string& figure, const std::string& out) {
  const Figure fig = parse_figure(figure);
  const auto rows = read_csv(input);
  emit_figure_data(rows, fig, out);
  return 0;
}

int cmd_bounds(const std::string& path, const std::vector<std::string>& sets, std::optional<double> d1,
               std::optional<double> d2) {
  const ExperimentConfig cfg = load_with_overrides(path, sets);
  cfg.validate();
  DerivativeNorms d;
  if (!d1 || !d2) d = estimate_derivative_norms(sample_dataset(cfg, 0), cfg.f);
  if (d1) d.d1 = *d1;
  if (d2) d.d2 = *d2;
  const BoundTerms b = theorem2_bound(cfg, d.d1, d.d2);
  auto line = [](const char* k, double v) { std::printf("%-16s %.16e\n", k, v); };
  line("d1", d.d1);
  line("d2", d.d2);
  line("lebesgue_S", lebesgue_bound(cfg.N, cfg.S));
  line("theorem1_S", theorem1_bound(cfg.N, cfg.S, d.d1, d.d2));
  line("delta", b.delta);
  line("R", b.R);
  line("lebesgue_bound", b.lebesgue_bound);
  line("weight_ratio", b.weight_ratio);
  line("t1", b.t1);
  line("t2", b.t2);
  line("t3", b.t3);
  line("t4", b.t4);
  line("total", b.total);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Secure Berrut approximated coded computing: simulation sweeps, figure data, bounds"};
  app.require_subcommand(1);

  RunArgs run;
  auto* r = app.add_subcommand("run", "run a sweep and write CSV");
  r->add_option("--config", run.config, "key = value config file")->required();
  r->add_option("--set", run.sets, "override a config key (key=value), repeatable");
  r->add_option("--axis", run.axis, "swept parameter: S, A, K1 or N1");
  r->add_option("--values", run.values, "axis values, comma separated")->delimiter(',');
  r->add_option("--schemes", run.schemes, "subset of sbacc,bacc,discard")->delimiter(',');
  r->add_option("--functions", run.functions, "functions to sweep (default: the config's)")->delimiter(';');
  r->add_option("--seed", run.seed, "master seed");
  r->add_option("--trials", run.trials, "trials per point");
  r->add_option("--threads", run.threads, "worker threads (0: all cores)");
  r->add_option("--out", run.out, "output CSV (default stdout)");
  r->add_flag("--no-runtime", run.no_runtime, "write runtime_ms = 0 for byte-reproducible output");

  std::string fig_in, fig_name, fig_out;
  auto* f = app.add_subcommand("figure", "reshape a sweep CSV into plot data");
  f->add_option("--input", fig_in, "CSV from `run`")->required();
  f->add_option("--figure", fig_name, "fig1 (S sweep) or fig2 (A sweep)")->required();
  f->add_option("--out", fig_out, "plot data file")->required();

  std::string b_cfg;
  std::vector<std::string> b_sets;
  std::optional<double> b_d1, b_d2;
  auto* b = app.add_subcommand("bounds", "print the reconstruction error bounds for a config");
  b->add_option("--config", b_cfg, "key = value config file")->required();
  b->add_option("--set", b_sets, "override a config key (key=value), repeatable");
  b->add_option("--d1", b_d1, "use this ||g'|| instead of estimating it");
  b->add_option("--d2", b_d2, "use this ||g''|| instead of estimating it");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kConfigError;
  }

  try {
    if (r->parsed()) return cmd_run(run);
    if (f->parsed()) return cmd_figure(fig_in, fig_name, fig_out);
    if (b->parsed()) return cmd_bounds(b_cfg, b_sets, b_d1, b_d2);
  } catch (const io_error& e) {
    std::fprintf(stderr, "io error: %s\n", e.what());
    return kIoError;
  } catch (const std::invalid_argument& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return kConfigError;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
