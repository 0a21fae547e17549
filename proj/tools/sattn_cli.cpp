// sattn: ablation grids, complexity tables and the invariant suite.
//
//   sattn grid  --task salient-detection --betas all,0010+deformable,dynamic --out results.csv
//   sattn grid  --config runs.json
//   sattn flops --ns 64 --c 32 --nk 3 --ng 16 --m 8
//   sattn check [--quick]

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

#include "sattn/checks/suite.hpp"
#include "sattn/complexity.hpp"
#include "sattn/errors.hpp"
#include "sattn/harness/runner.hpp"

namespace {

using namespace sattn;
using namespace sattn::harness;

struct GridArgs {
  std::string task;
  std::string stack;
  std::vector<std::string> betas{"all"};
  std::string target;
  std::optional<std::uint64_t> seed;
  std::optional<Index> steps;
  std::optional<double> rate;
  std::optional<Index> batch;
  std::string config;
  std::string out;
};

// A config file holds one RunConfig object, an array of them, or an object
// with "runs": [...]. Any entry may carry "betas": [...] to expand into rows.
std::vector<RunConfig> load_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::ios_base::failure("cannot read " + path);
  const nlohmann::json doc = nlohmann::json::parse(in);
  std::vector<nlohmann::json> entries;
  if (doc.is_array()) {
    entries.assign(doc.begin(), doc.end());
  } else if (doc.contains("runs")) {
    entries.assign(doc.at("runs").begin(), doc.at("runs").end());
  } else {
    entries.push_back(doc);
  }
  std::vector<RunConfig> out;
  for (const auto& e : entries) {
    RunConfig c = e.contains("task") && e.at("task").contains("kind")
                      ? default_run_config(parse_task_kind(e.at("task").at("kind").get<std::string>()))
                      : RunConfig{};
    from_json(e, c);
    if (e.contains("betas")) {
      for (RunConfig& x : expand_labels(c, e.at("betas").get<std::vector<std::string>>())) out.push_back(std::move(x));
    } else {
      out.push_back(std::move(c));
    }
  }
  return out;
}

int run_grid_command(const GridArgs& args) {
  std::vector<RunConfig> configs;
  if (!args.config.empty()) configs = load_config_file(args.config);
  if (!args.task.empty()) {
    RunConfig base = default_run_config(parse_task_kind(args.task));
    if (!args.stack.empty()) base.stack = parse_stack(args.stack);
    if (!args.target.empty()) base.target = parse_target(args.target);
    for (RunConfig& c : expand_labels(base, args.betas)) configs.push_back(std::move(c));
  }
  if (configs.empty()) throw ContractError("grid needs --task or --config");
  for (RunConfig& c : configs) {
    if (args.seed) c.seed = *args.seed;
    if (args.steps) c.optimizer.steps = *args.steps;
    if (args.rate) c.optimizer.rate = *args.rate;
    if (args.batch) c.optimizer.batch = *args.batch;
  }

  const std::vector<ResultRecord> records = run_configs(configs);
  if (args.out.empty()) {
    write_results_csv(std::cout, records);
  } else {
    write_results_csv(args.out, records);
  }
  int failures = 0;
  for (const ResultRecord& r : records) {
    if (!r.ok) {
      ++failures;
      std::cerr << "run failed: " << to_string(r.config.task.kind) << ' ' << to_string(r.config.stack) << ' '
                << r.config.label() << ": " << r.diagnostics << '\n';
    }
  }
  return failures == 0 ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Spatial attention toolkit: ablation grids, exact MAC tables, invariant checks"};
  app.require_subcommand(1);

  GridArgs grid;
  CLI::App* grid_cmd = app.add_subcommand("grid", "train and evaluate a grid of configurations, emit results CSV");
  grid_cmd->add_option("--task", grid.task, "permuted-copy | salient-detection | windowed-denoise");
  grid_cmd->add_option("--stack", grid.stack, "attended-block | transformer (+deformable / +dynamic)");
  grid_cmd->add_option("--betas", grid.betas, "row labels: all, 0110, 0010+deformable, dynamic")->delimiter(',');
  grid_cmd->add_option("--target", grid.target, "attention layer the beta string switches: self | encdec");
  grid_cmd->add_option("--seed", grid.seed, "model and data-order seed for every run");
  grid_cmd->add_option("--steps", grid.steps, "optimizer steps");
  grid_cmd->add_option("--rate", grid.rate, "learning rate");
  grid_cmd->add_option("--batch", grid.batch, "samples per step");
  grid_cmd->add_option("--config", grid.config, "JSON run configuration file")->check(CLI::ExistingFile);
  grid_cmd->add_option("--out", grid.out, "CSV output path (default: stdout)");

  Index ns = 64, c = 32, nk = 3, ng = 16, m = 8;
  std::string grid_shape;
  std::string flops_out;
  CLI::App* flops_cmd = app.add_subcommand("flops", "exact per-mechanism MAC table as CSV");
  flops_cmd->add_option("--ns", ns, "sequence length N_s")->check(CLI::PositiveNumber);
  flops_cmd->add_option("--grid", grid_shape, "HxW grid instead of a sequence (N_k becomes side^2)");
  flops_cmd->add_option("--c", c, "channels C")->check(CLI::PositiveNumber);
  flops_cmd->add_option("--nk", nk, "kernel taps N_k (side length for grids)")->check(CLI::PositiveNumber);
  flops_cmd->add_option("--ng", ng, "dynamic convolution groups N_g")->check(CLI::PositiveNumber);
  flops_cmd->add_option("--m", m, "attention heads M")->check(CLI::PositiveNumber);
  flops_cmd->add_option("--out", flops_out, "CSV output path (default: stdout)");

  bool quick = false;
  unsigned long long check_seed = checks::SuiteOptions{}.seed;
  CLI::App* check_cmd = app.add_subcommand("check", "run the invariant and acceptance suite");
  check_cmd->add_flag("--quick", quick, "skip the criteria that train models");
  check_cmd->add_option("--seed", check_seed, "seed of the random property instances");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*grid_cmd) return run_grid_command(grid);

    if (*flops_cmd) {
      CostShape shape;
      if (grid_shape.empty()) {
        shape = CostShape::sequence(ns, c, nk, ng, m);
      } else {
        Index h = 0, w = 0;
        char sep = 0;
        std::istringstream is(grid_shape);
        if (!(is >> h >> sep >> w) || (sep != 'x' && sep != 'X')) throw ContractError("--grid expects HxW");
        shape = CostShape::grid(h, w, c, nk, ng, m);
      }
      const FlopLedger table = emit_table(shape);
      if (flops_out.empty()) {
        table.write_csv(std::cout);
      } else {
        std::ofstream os(flops_out);
        if (!os) throw std::ios_base::failure("cannot open " + flops_out + " for writing");
        table.write_csv(os);
      }
      return 0;
    }

    if (*check_cmd) {
      checks::SuiteOptions options;
      options.training = !quick;
      options.seed = check_seed;
      bool ok = true;
      checks::run_suite(options, [&](const checks::CriterionResult& r) {
        std::cout << checks::format(r) << std::endl;
        ok = ok && (r.passed || r.skipped);
      });
      return ok ? 0 : 1;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
