#include <cstdio>
#include <string>

#include <CLI11.hpp>

#include "sbacc/net.hpp"

int main(int argc, char** argv) {
  using namespace sbacc;
  CLI::App app{"SBACC worker: applies f to its share and returns the result"};
  std::string connect, function = "exp", fault = "honest";
  WorkerOptions opt;
  std::optional<std::uint32_t> index;
  app.add_option("--connect", connect, "master address (host:port)")->required();
  app.add_option("--function", function, "exp|sin|relu|sigmoid|identity|recip:c|poly:c0,c1,..");
  app.add_option("--fault", fault, "honest|straggler|adversary:<variance>");
  app.add_option("--seed", opt.seed, "noise seed; match the master's seed to reproduce a simulation");
  app.add_option("--sigma-p2", opt.sigma_p2, "precision noise variance");
  app.add_option("--adversary-fraction", opt.adversary_fraction, "fraction of entries an adversary corrupts");
  app.add_option("--index", index, "preferred worker index");
  app.add_option("--timeout-ms", opt.connect_timeout_ms, "how long to keep retrying the connection");
  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  Endpoint ep;
  try {
    ep = parse_endpoint(connect);
    opt.f = TargetFunction::parse(function);
    opt.fault = parse_fault(fault);
    if (index) opt.requested_index = *index;
  } catch (const std::invalid_argument& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return 2;
  }
  const int rc = worker_serve(ep, opt);
  if (rc != 0) std::fprintf(stderr, "connection to %s lost\n", connect.c_str());
  return rc == 0 ? 0 : 3;
}
