#pragma once

#include <cstdint>
#include <ostream>
#include <string>
#include <vector>

#include "sattn/harness/config.hpp"
#include "sattn/harness/tasks.hpp"

namespace sattn::harness {

struct ResultRecord {
  RunConfig config;
  double accuracy = 0.0;
  /// Forward MACs of the studied modules for one eval sample.
  std::int64_t macs = 0;
  double wall_ms = 0.0;
  std::uint64_t seed = 0;
  bool ok = false;
  /// Failure reason when !ok.
  std::string diagnostics;
};

/// Trains on task.train with momentum SGD and evaluates on task.eval. Never
/// throws for numerical trouble: a non-finite loss yields ok = false.
/// Contract violations in `config` still throw.
ResultRecord train_and_evaluate(const ToyTask& task, const RunConfig& config);

/// Builds the task from config.task, then trains.
ResultRecord train_and_evaluate(const RunConfig& config);

/// Runs every configuration over a shared task; records come back sorted by
/// RunConfig::sort_key. A configuration that throws is recorded as failed.
std::vector<ResultRecord> run_grid(const ToyTask& task, const std::vector<RunConfig>& configs);

/// All 16 β strings on one stack.
std::vector<RunConfig> beta_grid(const RunConfig& base);

/// Expands row labels against `base`: "all" (the 16 β strings), a β string
/// such as "0110", "<β> + deformable" (spaces optional) and "dynamic". The
/// label picks the plain, deformable or dynamic member of base's stack family.
std::vector<RunConfig> expand_labels(const RunConfig& base, const std::vector<std::string>& labels);

/// Runs configurations that may span several tasks; each distinct task is
/// generated once. Records come back sorted by RunConfig::sort_key.
std::vector<ResultRecord> run_configs(const std::vector<RunConfig>& configs);

inline constexpr const char* kResultsHeader = "task,stack,beta,accuracy,macs,wall_ms,seed";

/// CSV with kResultsHeader; the beta column holds RunConfig::label().
void write_results_csv(std::ostream& os, const std::vector<ResultRecord>& records);
/// Throws std::ios_base::failure when the file cannot be written.
void write_results_csv(const std::string& path, const std::vector<ResultRecord>& records);

}  // namespace sattn::harness
