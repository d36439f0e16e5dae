// katokit command line: manifest runs, built-in batteries, single checks and raw simulation.

#include <cstdint>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "katokit/katokit.hpp"

namespace {

using namespace katokit;

constexpr int kExitInput = 2;

void emit(const nlohmann::ordered_json& j, const std::string& path) {
  if (path.empty() || path == "-") {
    std::cout << j.dump(2) << "\n";
    return;
  }
  std::ofstream f(path);
  if (!f) throw Error("cannot write '" + path + "'");
  f << j.dump(2) << "\n";
}

void emit_csv(const std::vector<CheckResult>& results, const std::string& path) {
  if (path.empty()) return;
  std::ofstream f(path);
  if (!f) throw Error("cannot write '" + path + "'");
  write_series_csv(results, f);
}

void print_verdicts(const std::vector<CheckResult>& results) {
  for (const auto& r : results) {
    std::cerr << r.verdict_text() << "  " << r.check;
    if (!r.pass && r.detail.contains("error")) std::cerr << "  (" << r.detail["error"].get<std::string>() << ")";
    std::cerr << "\n";
  }
}

// "key=value" as a manifest line.  Bare words become strings.
std::string override_line(const std::string& kv) {
  const auto eq = kv.find('=');
  if (eq == std::string::npos) throw ParseError("expected key=value in '" + kv + "'", 1, 1);
  const std::string key = kv.substr(0, eq);
  std::string value = kv.substr(eq + 1);
  bool literal = value.empty() || value[0] == '"' || value[0] == '[' || value == "true" || value == "false" || value == "inf";
  if (!literal) {
    try {
      std::size_t used = 0;
      std::stod(value, &used);
      literal = used == value.size();
    } catch (const std::exception&) {
    }
  }
  if (!literal) value = "\"" + value + "\"";
  return key + " = " + value;
}

struct Common {
  std::optional<std::uint64_t> seed;
  bool parallel = false;
  std::string out;
  std::string plot;
  double tolerance_scale = 1.0;
  std::optional<int> threads;

  void attach(CLI::App* cmd) {
    cmd->add_option("--seed", seed, "override the manifest seed");
    cmd->add_option("--out", out, "report path (default: manifest output key, else stdout)");
    cmd->add_option("--plot", plot, "CSV path for plot series");
    cmd->add_option("--tolerance-scale", tolerance_scale, "multiply every check tolerance")->check(CLI::PositiveNumber);
    cmd->add_option("--threads", threads, "Monte Carlo worker threads")->check(CLI::PositiveNumber);
  }
  RunOptions options() const { return {seed, parallel, tolerance_scale, threads}; }
};

int finish(const Manifest& m, const Common& c) {
  const auto outcome = run_manifest(m, c.options());
  emit(outcome.report, c.out.empty() ? m.str("output") : c.out);
  emit_csv(outcome.results, c.plot.empty() ? m.str("plot") : c.plot);
  print_verdicts(outcome.results);
  return outcome.exit_code;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"katokit: numerical checks for Kato-class potentials on model manifolds"};
  app.set_version_flag("--version", kVersion);
  app.require_subcommand(1);

  Common common;

  std::string manifest_path;
  auto* run = app.add_subcommand("run", "run the checks of a manifest in declaration order");
  run->add_option("manifest", manifest_path, "manifest file")->required();
  run->add_flag("--parallel", common.parallel, "run checks concurrently");
  common.attach(run);

  app.add_subcommand("list-batteries", "print the built-in batteries");

  std::string battery_name;
  std::optional<std::uint64_t> battery_seed;
  std::string battery_out;
  auto* battery = app.add_subcommand("battery", "run a built-in battery");
  battery->add_option("name", battery_name, "battery name")->required();
  battery->add_option("--seed", battery_seed, "base seed");
  battery->add_option("--out", battery_out, "report path (default stdout)");

  // One subcommand per check.  Flags overlay an optional manifest.
  std::string single_manifest, manifold, potential, w_minus;
  std::vector<std::string> sets;
  std::vector<std::pair<std::string, CLI::App*>> singles;
  for (const auto& spec : check_registry()) {
    auto* cmd = app.add_subcommand(spec.name, "run the " + spec.name + " check");
    cmd->add_option("manifest", single_manifest, "optional manifest supplying parameters");
    cmd->add_option("--manifold", manifold, "model spec");
    cmd->add_option("--potential", potential, "potential spec");
    cmd->add_option("--w-minus", w_minus, "nonnegative part for exponential bounds");
    cmd->add_option("--set", sets, "extra manifest entry key=value (repeatable)");
    common.attach(cmd);
    singles.emplace_back(spec.name, cmd);
  }

  SimulationConfig sim;
  std::string sim_manifold = "euclidean:1", scheme = "geodesic-walk", dump, sim_out;
  std::vector<double> start, record;
  long max_paths = 10;
  auto* simulate_cmd = app.add_subcommand("simulate", "simulate Brownian paths and print an ensemble summary");
  simulate_cmd->add_option("--manifold", sim_manifold, "model spec");
  simulate_cmd->add_option("--start", start, "start point in chart coordinates (default: model origin)")->delimiter(',');
  simulate_cmd->add_option("--time", sim.t, "horizon");
  simulate_cmd->add_option("--step", sim.h, "step size");
  simulate_cmd->add_option("--paths", sim.paths, "number of paths");
  simulate_cmd->add_option("--seed", sim.seed, "seed");
  simulate_cmd->add_option("--scheme", scheme, "geodesic-walk | chart-euler");
  simulate_cmd->add_option("--threads", sim.threads, "worker threads");
  simulate_cmd->add_option("--record", record, "record times in (0, t]")->delimiter(',');
  simulate_cmd->add_option("--dump-paths", dump, "write path,t,coords CSV rows");
  simulate_cmd->add_option("--max-paths", max_paths, "paths written by --dump-paths");
  simulate_cmd->add_option("--out", sim_out, "summary path (default stdout)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitInput;
  }

  std::string where;
  try {
    if (*run) {
      where = manifest_path;
      return finish(Manifest::load(manifest_path), common);
    }
    if (app.got_subcommand("list-batteries")) {
      list_batteries(std::cout);
      return 0;
    }
    if (*battery) {
      const Battery* b = find_battery(battery_name);
      if (!b) {
        std::cerr << "katokit: unknown battery '" << battery_name << "'\n";
        list_batteries(std::cerr);
        return kExitInput;
      }
      const auto outcome = run_battery(*b, battery_seed.value_or(20240607));
      emit(outcome.report, battery_out);
      print_verdicts(outcome.results);
      return outcome.exit_code;
    }
    if (*simulate_cmd) {
      sim.model = parse_manifold(sim_manifold);
      sim.scheme = parse_scheme(scheme);
      if (start.empty()) {
        sim.start = origin(sim.model);
      } else {
        sim.start = Eigen::Map<const Eigen::VectorXd>(start.data(), static_cast<Eigen::Index>(start.size()));
      }
      const auto ensemble = simulate(sim, record);
      emit(nlohmann::ordered_json(summary(ensemble)), sim_out);
      if (!dump.empty()) {
        std::ofstream f(dump);
        if (!f) throw Error("cannot write '" + dump + "'");
        dump_paths(sim, f, max_paths);
      }
      return 0;
    }
    for (const auto& [name, cmd] : singles) {
      if (!*cmd) continue;
      where = single_manifest.empty() ? "<flags>" : single_manifest;
      Manifest m = single_manifest.empty() ? Manifest{} : Manifest::load(single_manifest);
      std::string lines;
      if (!manifold.empty()) lines += override_line("manifold=" + manifold) + "\n";
      if (!potential.empty()) lines += override_line("potential=" + potential) + "\n";
      if (!w_minus.empty()) lines += override_line("w_minus=" + w_minus) + "\n";
      for (const auto& kv : sets) lines += override_line(kv) + "\n";
      where = "<flags>";
      m.merge(Manifest::parse(lines));
      m.set_strings("checks", {name});
      return finish(m, common);
    }
  } catch (const ParseError& e) {
    std::cerr << "katokit: " << where << ": " << e.what() << "\n";
    return kExitInput;
  } catch (const Error& e) {
    std::cerr << "katokit: " << e.what() << "\n";
    return kExitInput;
  }
  return 0;
}
