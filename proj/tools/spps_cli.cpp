// spps_cli solve|surface <config> [--out path] [--format csv|json] [--threads n] [--verbose]
//
// Exit codes: 0 success, 1 config error, 2 solver error,
// 3 certification requested but some record failed it.

#include <chrono>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "spps/driver.hpp"

namespace {

enum Exit { kOk = 0, kConfig = 1, kSolver = 2, kUncertified = 3 };

void write_output(const std::string& path, const std::string& text) {
  if (path.empty() || path == "-") {
    std::cout << text;
    std::cout.flush();
    return;
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw spps::driver::ConfigError("cannot write '" + path + "'");
  out << text;
  if (!out) throw spps::driver::ConfigError("write to '" + path + "' failed");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Eigenvalues of polynomial Sturm-Liouville pencils by spectral parameter power series"};
  app.require_subcommand(1);
  std::string config, out, format;
  unsigned threads = 1;
  bool verbose = false;
  for (auto* sub : {app.add_subcommand("solve", "locate eigenvalues and write the result table"),
                    app.add_subcommand("surface", "write -ln|Phi_M| over the configured surface region")}) {
    sub->add_option("config", config, "problem config (JSON)")->required();
    sub->add_option("--out", out, "output file (default: config output.path, else stdout)");
    sub->add_option("--format", format, "result format for solve")->check(CLI::IsMember({"csv", "json"}));
    sub->add_option("--threads", threads, "worker threads for sweeps and surfaces")->check(CLI::Range(1u, 1024u));
    sub->add_flag("--verbose", verbose, "progress and timing on stderr");
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kConfig;
  }

  const bool solve = app.got_subcommand("solve");
  try {
    const auto t0 = std::chrono::steady_clock::now();
    spps::driver::SolveConfig cfg = spps::driver::load_config(config);
    if (!format.empty()) cfg.format = format;
    if (!out.empty()) cfg.output_path = out;
    if (verbose) std::cerr << "problem " << spps::driver::to_string(cfg.kind) << ", M = " << cfg.M << "\n";

    int code = kOk;
    if (solve) {
      const auto rs = spps::driver::run_solve(cfg, threads);
      write_output(cfg.output_path, spps::driver::format_results(rs, cfg.format));
      if (cfg.certify && !rs.all_certified()) code = kUncertified;
      if (verbose) {
        std::size_t n = 0, excluded = 0;
        for (const auto& r : rs.runs) {
          n += r.records.size();
          excluded += r.excluded_by_residual;
        }
        std::cerr << n << " records, " << excluded << " excluded by residual\n";
      }
    } else {
      write_output(cfg.output_path, spps::driver::emit_surface(cfg, threads));
    }
    if (verbose) {
      const double s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
      std::cerr << "wall time " << s << " s\n";
    }
    if (code == kUncertified) std::cerr << "error: certification failed for at least one record\n";
    return code;
  } catch (const spps::InputError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kConfig;
  } catch (const spps::Error& e) {
    std::cerr << "solver error: " << e.what() << "\n";
    return kSolver;
  } catch (const std::exception& e) {
    std::cerr << "solver error: " << e.what() << "\n";
    return kSolver;
  }
}
