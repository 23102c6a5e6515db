// fastot: solve, morph, adapt and bench subcommands.

#include <charconv>
#include <chrono>
#include <cstdio>
#include <cstdint>
#include <exception>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "CLI11.hpp"

#include "fastot/adapt.hpp"
#include "fastot/dual_solver.hpp"
#include "fastot/errors.hpp"
#include "fastot/exact_oracle.hpp"
#include "fastot/io.hpp"
#include "fastot/morph.hpp"
#include "fastot/version.hpp"

namespace fs = std::filesystem;
using namespace fastot;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitInput = 2;
constexpr int kExitSolver = 3;

std::vector<std::string_view> split(std::string_view text, char sep) {
  std::vector<std::string_view> parts;
  while (true) {
    const auto pos = text.find(sep);
    parts.push_back(text.substr(0, pos));
    if (pos == std::string_view::npos) break;
    text.remove_prefix(pos + 1);
  }
  return parts;
}

std::uint64_t parse_u64(std::string_view text, std::string_view what) {
  std::uint64_t v = 0;
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc() || ptr != text.data() + text.size()) {
    throw InvalidInput("bad " + std::string(what) + " '" + std::string(text) + "'");
  }
  return v;
}

// "7", "1,4,9" or "1..10".
std::vector<std::uint64_t> parse_list(std::string_view text, std::string_view what) {
  std::vector<std::uint64_t> out;
  for (auto part : split(text, ',')) {
    if (const auto dots = part.find(".."); dots != std::string_view::npos) {
      const auto lo = parse_u64(part.substr(0, dots), what);
      const auto hi = parse_u64(part.substr(dots + 2), what);
      if (hi < lo) throw InvalidInput("empty range '" + std::string(part) + "'");
      for (auto v = lo; v <= hi; ++v) out.push_back(v);
    } else {
      out.push_back(parse_u64(part, what));
    }
  }
  return out;
}

std::ofstream open_out(const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InvalidInput("cannot write " + path.string());
  return out;
}

struct Common {
  std::string source;
  std::string target;
  std::string method;
  std::string config;
  std::string out;
  std::string seed;
  std::string mode;
  std::string sizes;
  std::size_t frames = 5;
  std::size_t repeats = 1;
};

SolverConfig solver_config(const Common& c) {
  SolverConfig cfg = c.config.empty() ? SolverConfig{} : load_solver_config(c.config);
  if (!c.seed.empty()) cfg.seed = parse_u64(c.seed, "seed");
  return cfg;
}

int run_solve(const Common& c) {
  const auto mu_s = io::read_point_csv(c.source);
  const auto mu_t = io::read_point_csv(c.target);
  const CostOracle oracle(mu_s.cloud(), mu_t.cloud());
  nlohmann::ordered_json result;
  if (c.method == "exact") {
    const auto sol = solve_exact(mu_s, mu_t, oracle);
    result = io::plan_to_json(sol.plan);
    result["primal_cost"] = sol.objective;
    std::cout << "exact: cost " << io::format_double(sol.objective) << ", " << sol.plan.size()
              << " entries, " << sol.pivots << " pivots\n";
  } else if (c.method.empty() || c.method == "dual") {
    const auto sol = solve(mu_s, mu_t, oracle, solver_config(c));
    result = solution_to_json(sol);
    std::cout << "dual: cost " << io::format_double(sol.primal_cost) << ", gap "
              << io::format_double(sol.relative_gap) << ", " << sol.epochs_used << " epochs, "
              << sol.plan.size() << " entries, peak state " << sol.peak_state_bytes << " bytes\n";
  } else {
    throw InvalidInput("unknown method '" + c.method + "' (expected dual or exact)");
  }
  open_out(c.out) << result.dump() << '\n';
  return kExitOk;
}

int run_morph(const Common& c) {
  const auto src = parse_shape_spec(c.source.empty() ? "circle:64" : c.source);
  const auto tgt = parse_shape_spec(c.target.empty() ? "square:64" : c.target);
  const auto result = morph_sequence(src, tgt, c.frames, solver_config(c));
  const fs::path dir = c.out;
  fs::create_directories(dir);
  for (std::size_t k = 0; k < result.frames.size(); ++k) {
    char name[32];
    std::snprintf(name, sizeof name, "frame_%04zu.csv", k);
    auto out = open_out(dir / name);
    write_frame_csv(out, result.frames[k]);
  }
  std::cout << "morph: cost " << io::format_double(result.solution.primal_cost) << ", "
            << result.frames.size() << " frames written to " << dir.string() << '\n';
  return kExitOk;
}

int run_adapt(const Common& c) {
  const std::string mode_list = c.mode.empty() ? "plain,labels,full" : c.mode;
  std::vector<adapt::AdaptMode> modes;
  for (auto m : split(mode_list, ',')) {
    modes.push_back(adapt::parse_mode(m));
  }
  const auto seeds = parse_list(c.seed.empty() ? "1..10" : c.seed, "seed");
  adapt::AdaptConfig base;
  if (!c.config.empty()) base.solver = load_solver_config(c.config);
  std::ostringstream csv;
  csv << "mode,seed,baseline_target_acc,source_acc,target_acc\n";
  for (auto mode : modes) {
    double mean = 0.0;
    for (auto seed : seeds) {
      const auto r = adapt::run_benchmark(mode, seed, base);
      csv << adapt::mode_name(mode) << ',' << seed << ',' << io::format_double(r.baseline_target_acc)
          << ',' << io::format_double(r.adapted_source_acc) << ','
          << io::format_double(r.adapted_target_acc) << '\n';
      mean += r.adapted_target_acc;
    }
    std::cout << "adapt " << adapt::mode_name(mode) << ": mean target accuracy "
              << io::format_double(mean / static_cast<double>(seeds.size())) << '\n';
  }
  open_out(c.out) << csv.str();
  return kExitOk;
}

int run_bench(const Common& c) {
  const auto sizes = parse_list(c.sizes.empty() ? "100,1000" : c.sizes, "size");
  const std::string method_list = c.method.empty() ? "dual,dense" : c.method;
  const auto methods = split(method_list, ',');
  for (auto m : methods) {
    if (m != "dual" && m != "dense") throw InvalidInput("unknown bench method '" + std::string(m) + "'");
  }
  if (c.repeats == 0) throw InvalidInput("repeats must be positive");
  const SolverConfig cfg = solver_config(c);
  std::ostringstream csv;
  csv << "n,method,peak_bytes,wall_ms,cost,status\n";
  for (auto n : sizes) {
    if (n == 0) throw InvalidInput("sizes must be positive");
    const auto mu_s = uniform_measure(sample_shape(ShapeSpec::circle(std::max<std::size_t>(n, 2))));
    const auto mu_t = uniform_measure(sample_shape(ShapeSpec::square(std::max<std::size_t>(n, 2))));
    // A single point per side is a valid instance even though shapes need two.
    const auto one_s = uniform_measure(PointCloud(2, std::vector<double>{1.0, 0.0}));
    const auto one_t = uniform_measure(PointCloud(2, std::vector<double>{-1.0, -1.0}));
    const auto& src = n == 1 ? one_s : mu_s;
    const auto& tgt = n == 1 ? one_t : mu_t;
    const CostOracle oracle(src.cloud(), tgt.cloud());
    for (auto m : methods) {
      for (std::size_t r = 0; r < c.repeats; ++r) {
        std::size_t peak = 0;
        double cost = 0.0;
        std::string status = "ok";
        const auto t0 = std::chrono::steady_clock::now();
        try {
          if (m == "dual") {
            const auto sol = solve(src, tgt, oracle, cfg);
            peak = sol.peak_state_bytes;
            cost = sol.primal_cost;
          } else {
            const auto sol = solve_exact(src, tgt, oracle);
            peak = dense_gamma_bytes(n, n) + sol.working_bytes;
            cost = sol.objective;
          }
        } catch (const std::exception& e) {
          status = std::string("error: ") + e.what();
          for (auto& ch : status) {
            if (ch == ',' || ch == '\n') ch = ';';
          }
        }
        const double ms =
            std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
        csv << n << ',' << m << ',' << peak << ',' << io::format_double(ms) << ','
            << io::format_double(cost) << ',' << status << '\n';
        std::cout << "bench n=" << n << ' ' << m << ": " << peak << " bytes, " << ms << " ms, "
                  << status << '\n';
      }
    }
  }
  open_out(c.out) << csv.str();
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Fast discrete optimal transport"};
  app.set_version_flag("--version", std::string(kVersion));
  app.require_subcommand(1);
  Common c;

  auto* solve_cmd = app.add_subcommand("solve", "Transport between two point-cloud CSV files");
  solve_cmd->add_option("--source", c.source, "Source CSV")->required();
  solve_cmd->add_option("--target", c.target, "Target CSV")->required();
  solve_cmd->add_option("--method", c.method, "dual or exact (default dual)");
  solve_cmd->add_option("--config", c.config, "Solver key=value file");
  solve_cmd->add_option("--out", c.out, "Solution JSON")->required();
  solve_cmd->add_option("--seed", c.seed, "Overrides the config seed");

  auto* morph_cmd = app.add_subcommand("morph", "Morph one 2-D shape into another");
  morph_cmd->add_option("--source", c.source, "Shape: circle:N, square:N or two_circles:N (default circle:64)");
  morph_cmd->add_option("--target", c.target, "Target shape (default square:64)");
  morph_cmd->add_option("--frames", c.frames, "Number of frames (>= 2)")->capture_default_str();
  morph_cmd->add_option("--config", c.config, "Solver key=value file");
  morph_cmd->add_option("--out", c.out, "Directory for frame CSVs")->required();
  morph_cmd->add_option("--seed", c.seed, "Solver seed");

  auto* adapt_cmd = app.add_subcommand("adapt", "Synthetic domain-adaptation benchmark");
  adapt_cmd->add_option("--mode", c.mode, "Comma list of plain, labels, full (default all three)");
  adapt_cmd->add_option("--seed", c.seed, "Seeds, e.g. 1..10 or 1,2,3 (default 1..10)");
  adapt_cmd->add_option("--config", c.config, "Solver key=value file");
  adapt_cmd->add_option("--out", c.out, "Result CSV")->required();

  auto* bench_cmd = app.add_subcommand("bench", "Memory and time of dense vs dual solves");
  bench_cmd->add_option("--sizes", c.sizes, "Comma list of N (default 100,1000)");
  bench_cmd->add_option("--method", c.method, "Comma list of dual, dense (default both)");
  bench_cmd->add_option("--repeats", c.repeats, "Runs per size and method")->capture_default_str();
  bench_cmd->add_option("--config", c.config, "Solver key=value file");
  bench_cmd->add_option("--out", c.out, "Result CSV")->required();
  bench_cmd->add_option("--seed", c.seed, "Solver seed");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitInput;
  }

  try {
    if (solve_cmd->parsed()) return run_solve(c);
    if (morph_cmd->parsed()) return run_morph(c);
    if (adapt_cmd->parsed()) return run_adapt(c);
    return run_bench(c);
  } catch (const InvalidInput& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitInput;
  } catch (const IndexError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitInput;
  } catch (const fs::filesystem_error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitInput;
  } catch (const std::exception& e) {
    std::cerr << "solver failure: " << e.what() << '\n';
    return kExitSolver;
  }
}
