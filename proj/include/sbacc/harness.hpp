#pragma once

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstddef>
#include <cstdio>
#include <exception>
#include <filesystem>
#include <fstream>
#include <map>
#include <mutex>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

#include "bounds.hpp"
#include "config.hpp"
#include "errors.hpp"
#include "functions.hpp"
#include "protocol.hpp"

namespace sbacc {

enum class Axis { S, A, K1, N1 };

inline std::string_view to_string(Axis a) {
  switch (a) {
    case Axis::S: return "S";
    case Axis::A: return "A";
    case Axis::K1: return "K1";
    case Axis::N1: return "N1";
  }
  return "?";
}

inline Axis parse_axis(std::string_view s) {
  if (s == "S") return Axis::S;
  if (s == "A") return Axis::A;
  if (s == "K1") return Axis::K1;
  if (s == "N1") return Axis::N1;
  throw std::invalid_argument("unknown axis '" + std::string(s) + "' (expected S|A|K1|N1)");
}

inline void set_axis(ExperimentConfig& cfg, Axis axis, std::size_t v) {
  switch (axis) {
    case Axis::S: cfg.S = v; break;
    case Axis::A: cfg.A = v; break;
    case Axis::K1: cfg.K1 = v; break;
    case Axis::N1: cfg.N1 = v; break;
  }
}

struct SweepSpec {
  ExperimentConfig base;
  Axis axis = Axis::A;
  std::vector<std::size_t> values;
  std::vector<Scheme> schemes{Scheme::SBACC, Scheme::BACC, Scheme::DISCARD};
  std::vector<TargetFunction> functions;  ///< empty: base.f only
  std::string output_path;                ///< empty: not written by run_sweep
  std::size_t threads = 0;                ///< 0: hardware concurrency
  bool record_runtime = true;             ///< false writes runtime_ms = 0
};

struct SweepRow {
  std::size_t axis_value = 0;
  Scheme scheme = Scheme::SBACC;
  std::string function;
  std::size_t trials = 0;
  double avg_rel_error = 0.0;
  double avg_rel_error_db = 0.0;
  double p_loc_hat = 1.0;
  double bound_total = 0.0;
  double runtime_ms = 0.0;
  double mean_sq_error = 0.0;
  double rel_error_stderr = 0.0;
  Axis axis = Axis::A;
};

inline constexpr std::string_view kCsvHeader =
    "axis_value,scheme,function,trials,avg_rel_error,avg_rel_error_db,p_loc_hat,bound_total,"
    "runtime_ms,mean_sq_error,rel_error_stderr,axis";

namespace detail {

inline std::string fmt_real(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.16e", v);
  return buf;
}

inline std::string csv_quote(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (const char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

inline std::vector<std::string> csv_split(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        cur += '"';
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        cur += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      out.push_back(std::move(cur));
      cur.clear();
    } else if (c != '\r') {
      cur += c;
    }
  }
  out.push_back(std::move(cur));
  return out;
}

/// Runs fn(i) for i in [0, count) on `threads` workers. The first exception
/// thrown is rethrown after all workers stop.
template <typename Fn>
void parallel_for(std::size_t count, std::size_t threads, Fn&& fn) {
  if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
  threads = std::min(threads, std::max<std::size_t>(count, 1));
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  auto body = [&] {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= count) return;
      try {
        fn(i);
      } catch (...) {
        const std::lock_guard lock(error_mutex);
        if (!error) error = std::current_exception();
        next.store(count);
      }
    }
  };
  if (threads <= 1) {
    body();
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(body);
  }
  if (error) std::rethrow_exception(error);
}

}  // namespace detail

/// Per-trial outcome of one scheme, kept for ordered aggregation.
struct TrialOutcome {
  double rel_error = 0.0;
  double mean_sq_error = 0.0;
  double bound_total = 0.0;
  DecodeStats stats;
  double runtime_ms = 0.0;
};

/// Bound for one finished trial: derivative norms from that trial's data,
/// weight ratio over the points it actually reconstructed from, p_loc and
/// sigma_q from its decoder statistics unless fixed in the config.
inline double trial_bound(const ExperimentConfig& cfg, Scheme scheme, const Dataset& ds,
                          const TargetFunction& f, const RunResult& res) {
  ExperimentConfig b = cfg;
  b.f = f;
  b.N1 = res.reconstruction_workers.size();
  if (b.N1 < 2 || b.N1 > b.M()) return std::nan("");
  if (!b.p_loc) b.p_loc = 1.0 - res.decode_stats.p_loc_hat();
  if (!b.sigma_q2) b.sigma_q2 = res.decode_stats.residual_variance();
  const auto d = estimate_derivative_norms(ds, f, 2001);
  const NodeSet z = evaluation_points(scheme, cfg.N);
  std::vector<double> nodes;
  for (const auto i : res.reconstruction_workers) nodes.push_back(z[i]);
  const auto grid = uniform_grid(2001);
  try {
    return theorem2_bound(b, d.d1, d.d2, grid, nodes).total;
  } catch (const std::invalid_argument&) {
    return std::nan("");
  }
}

/// Executes the sweep and returns rows ordered by (axis value, scheme,
/// function). Trials of one (value, function) pair share datasets and
/// straggler/adversary draws across schemes.
inline std::vector<SweepRow> run_sweep(const SweepSpec& spec) {
  if (spec.values.empty()) throw std::invalid_argument("sweep: values must be non-empty");
  if (spec.schemes.empty()) throw std::invalid_argument("sweep: schemes must be non-empty");
  const std::vector<TargetFunction> functions =
      spec.functions.empty() ? std::vector<TargetFunction>{spec.base.f} : spec.functions;
  std::vector<ExperimentConfig> cfgs;
  for (const auto v : spec.values) {
    ExperimentConfig c = spec.base;
    set_axis(c, spec.axis, v);
    try {
      c.validate();
    } catch (const std::invalid_argument& e) {
      throw std::invalid_argument(std::string(e.what()) + " at " + std::string(to_string(spec.axis)) +
                                  "=" + std::to_string(v));
    }
    cfgs.push_back(std::move(c));
  }
  const std::size_t trials = spec.base.trials;
  const std::size_t nv = cfgs.size(), nf = functions.size(), ns = spec.schemes.size();
  std::vector<TrialOutcome> out(nv * nf * ns * trials);
  auto slot = [&](std::size_t v, std::size_t f, std::size_t s, std::size_t t) -> TrialOutcome& {
    return out[((v * nf + f) * ns + s) * trials + t];
  };

  detail::parallel_for(nv * nf * trials, spec.threads, [&](std::size_t task) {
    const std::size_t t = task % trials;
    const std::size_t f = (task / trials) % nf;
    const std::size_t v = task / (trials * nf);
    ExperimentConfig cfg = cfgs[v];
    cfg.f = functions[f];
    const Dataset ds = sample_dataset(cfg, t);
    const Scenario sc = draw_scenario(cfg, t);
    for (std::size_t s = 0; s < ns; ++s) {
      const auto t0 = std::chrono::steady_clock::now();
      const RunResult res = run_scheme(spec.schemes[s], ds, cfg.f, cfg, sc, t);
      const auto t1 = std::chrono::steady_clock::now();
      TrialOutcome& o = slot(v, f, s, t);
      o.rel_error = res.avg_rel_error;
      o.mean_sq_error = res.mean_sq_error;
      o.stats = res.decode_stats;
      o.runtime_ms = std::chrono::duration<double, std::milli>(t1 - t0).count();
      o.bound_total = trial_bound(cfg, spec.schemes[s], ds, cfg.f, res);
    }
  });

  std::vector<SweepRow> rows;
  for (std::size_t v = 0; v < nv; ++v)
    for (std::size_t s = 0; s < ns; ++s)
      for (std::size_t f = 0; f < nf; ++f) {
        SweepRow row;
        row.axis = spec.axis;
        row.axis_value = spec.values[v];
        row.scheme = spec.schemes[s];
        row.function = functions[f].name();
        row.trials = trials;
        DecodeStats stats;
        double sum = 0.0, sum2 = 0.0, mse = 0.0, bound = 0.0, ms = 0.0;
        for (std::size_t t = 0; t < trials; ++t) {
          const TrialOutcome& o = slot(v, f, s, t);
          sum += o.rel_error;
          sum2 += o.rel_error * o.rel_error;
          mse += o.mean_sq_error;
          bound += o.bound_total;
          ms += o.runtime_ms;
          stats.merge(o.stats);
        }
        const double n = static_cast<double>(trials);
        row.avg_rel_error = sum / n;
        row.avg_rel_error_db = to_db(row.avg_rel_error);
        row.mean_sq_error = mse / n;
        row.bound_total = bound / n;
        row.p_loc_hat = stats.p_loc_hat();
        row.runtime_ms = spec.record_runtime ? ms : 0.0;
        const double var = trials > 1 ? std::max(0.0, (sum2 - sum * sum / n) / (n - 1.0)) : 0.0;
        row.rel_error_stderr = std::sqrt(var / n);
        rows.push_back(std::move(row));
      }
  return rows;
}

inline void write_csv(std::ostream& out, const std::vector<SweepRow>& rows) {
  out << kCsvHeader << '\n';
  for (const auto& r : rows) {
    out << r.axis_value << ',' << to_string(r.scheme) << ',' << detail::csv_quote(r.function) << ','
        << r.trials << ',' << detail::fmt_real(r.avg_rel_error) << ','
        << detail::fmt_real(r.avg_rel_error_db) << ',' << detail::fmt_real(r.p_loc_hat) << ','
        << detail::fmt_real(r.bound_total) << ',' << detail::fmt_real(r.runtime_ms) << ','
        << detail::fmt_real(r.mean_sq_error) << ',' << detail::fmt_real(r.rel_error_stderr) << ','
        << to_string(r.axis) << '\n';
  }
}

inline void write_csv(const std::string& path, const std::vector<SweepRow>& rows) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw io_error("cannot write '" + path + "'");
  write_csv(out, rows);
  out.flush();
  if (!out) throw io_error("write failed for '" + path + "'");
}

inline std::vector<SweepRow> read_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) return {};
  if (!line.empty() && line.back() == '\r') line.pop_back();
  const auto header = detail::csv_split(line);
  std::map<std::string, std::size_t> col;
  for (std::size_t i = 0; i < header.size(); ++i) col[header[i]] = i;
  for (const char* need : {"axis_value", "scheme", "function", "trials", "avg_rel_error",
                           "avg_rel_error_db", "p_loc_hat", "bound_total", "runtime_ms"})
    if (!col.count(need)) throw std::invalid_argument(std::string("csv: missing column ") + need);
  std::vector<SweepRow> rows;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line == "\r") continue;
    const auto cells = detail::csv_split(line);
    if (cells.size() != header.size())
      throw std::invalid_argument("csv line " + std::to_string(lineno) + ": expected " +
                                  std::to_string(header.size()) + " fields");
    auto get = [&](const char* name) -> const std::string& { return cells[col.at(name)]; };
    auto real = [&](const char* name) {
      try {
        return std::stod(get(name));
      } catch (const std::exception&) {
        throw std::invalid_argument("csv line " + std::to_string(lineno) + ": bad number in " + name);
      }
    };
    SweepRow r;
    r.axis_value = static_cast<std::size_t>(std::stoull(get("axis_value")));
    r.scheme = parse_scheme(get("scheme"));
    r.function = get("function");
    r.trials = static_cast<std::size_t>(std::stoull(get("trials")));
    r.avg_rel_error = real("avg_rel_error");
    r.avg_rel_error_db = real("avg_rel_error_db");
    r.p_loc_hat = real("p_loc_hat");
    r.bound_total = real("bound_total");
    r.runtime_ms = real("runtime_ms");
    if (col.count("mean_sq_error")) r.mean_sq_error = real("mean_sq_error");
    if (col.count("rel_error_stderr")) r.rel_error_stderr = real("rel_error_stderr");
    if (col.count("axis")) r.axis = parse_axis(get("axis"));
    rows.push_back(std::move(r));
  }
  return rows;
}

inline std::vector<SweepRow> read_csv(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw io_error("cannot read '" + path + "'");
  return read_csv(in);
}

enum class Figure { Fig1, Fig2 };

inline Figure parse_figure(std::string_view s) {
  if (s == "fig1" || s == "Fig1") return Figure::Fig1;
  if (s == "fig2" || s == "Fig2") return Figure::Fig2;
  throw std::invalid_argument("unknown figure '" + std::string(s) + "' (expected fig1|fig2)");
}

struct Series {
  std::string label;  ///< "scheme function"
  std::vector<std::pair<std::size_t, double>> points;  ///< (axis value, dB)
};

/// Groups rows into one series per (scheme, function), points in axis order.
/// Fig1 expects an S sweep, Fig2 an A sweep.
inline std::vector<Series> figure_series(const std::vector<SweepRow>& rows, Figure fig) {
  if (rows.empty()) throw std::invalid_argument("figure: no rows");
  const Axis want = fig == Figure::Fig1 ? Axis::S : Axis::A;
  for (const auto& r : rows)
    if (r.axis != want)
      throw std::invalid_argument("figure: " + std::string(fig == Figure::Fig1 ? "fig1" : "fig2") +
                                  " needs an " + std::string(to_string(want)) + " sweep, csv has axis " +
                                  std::string(to_string(r.axis)));
  std::vector<Series> out;
  for (const auto& r : rows) {
    const std::string label = std::string(to_string(r.scheme)) + " " + r.function;
    auto it = std::find_if(out.begin(), out.end(), [&](const Series& s) { return s.label == label; });
    if (it == out.end()) {
      out.push_back({label, {}});
      it = std::prev(out.end());
    }
    it->points.emplace_back(r.axis_value, r.avg_rel_error_db);
  }
  for (auto& s : out) std::stable_sort(s.points.begin(), s.points.end());
  return out;
}

/// Plot file: one block per series, each introduced by a "# <label>" line
/// and holding "axis_value dB" pairs; blocks are separated by two blank
/// lines (gnuplot `index` friendly).
inline void emit_figure_data(const std::vector<SweepRow>& rows, Figure fig, const std::string& path) {
  const auto series = figure_series(rows, fig);
  std::ostringstream body;
  body << "# " << (fig == Figure::Fig1 ? "S" : "A") << " avg_rel_error_db\n";
  for (std::size_t i = 0; i < series.size(); ++i) {
    if (i) body << "\n\n";
    body << "# " << series[i].label << '\n';
    for (const auto& [x, y] : series[i].points) body << x << ' ' << detail::fmt_real(y) << '\n';
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw io_error("cannot write '" + path + "'");
  out << body.str();
  out.flush();
  if (!out) throw io_error("write failed for '" + path + "'");
}

}  // namespace sbacc
