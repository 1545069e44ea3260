#include <cstdio>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "sbacc/net.hpp"
#include "sbacc/sbacc.hpp"

int main(int argc, char** argv) {
  using namespace sbacc;
  CLI::App app{"SBACC master: distributes shares over TCP, decodes and reconstructs"};
  std::string listen = "0.0.0.0:7070", config;
  std::vector<std::string> sets;
  app.add_option("--listen", listen, "address to listen on (host:port)");
  app.add_option("--config", config, "key = value config file")->required();
  app.add_option("--set", sets, "override a config key (key=value), repeatable");
  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    ExperimentConfig cfg = ExperimentConfig::load(config);
    for (const auto& kv : sets) {
      const auto eq = kv.find('=');
      if (eq == std::string::npos) throw std::invalid_argument("--set expects key=value, got '" + kv + "'");
      cfg.set(kv.substr(0, eq), kv.substr(eq + 1));
    }
    cfg.validate();
    Listener listener(parse_endpoint(listen));
    std::fprintf(stderr, "listening on port %u for %zu workers (deadline %zu ms)\n",
                 static_cast<unsigned>(listener.port()), cfg.N, cfg.deadline_ms);
    const MasterReport rep = master_serve(cfg, listener);
    std::printf("workers %zu\nstragglers %zu:", cfg.N, rep.stragglers.size());
    for (const auto s : rep.stragglers) std::printf(" %zu", s);
    std::printf("\nreconstruction_points %zu\n", rep.result.reconstruction_workers.size());
    std::printf("avg_rel_error %.16e\navg_rel_error_db %.16e\n", rep.result.avg_rel_error,
                rep.result.avg_rel_error_db);
    const auto& st = rep.result.decode_stats;
    std::printf("decoded %s\nnu_histogram", st.decoded ? "yes" : "no");
    for (std::size_t v = 0; v < st.nu_histogram.size(); ++v)
      if (st.nu_histogram[v]) std::printf(" %zu:%zu", v, st.nu_histogram[v]);
    std::printf("\n");
    return 0;
  } catch (const io_error& e) {
    std::fprintf(stderr, "io error: %s\n", e.what());
    return 3;
  } catch (const std::invalid_argument& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
}
