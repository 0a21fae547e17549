#include <doctest.h>

#include <cmath>
#include <optional>
#include <set>
#include <sstream>

#include "sattn/errors.hpp"
#include "sattn/harness/config.hpp"
#include "sattn/harness/runner.hpp"
#include "sattn/harness/tasks.hpp"

using namespace sattn;
using namespace sattn::harness;

namespace {

RunConfig small(TaskKind kind) {
  RunConfig c = default_run_config(kind);
  c.task.train_size = 64;
  c.task.eval_size = 32;
  c.optimizer.steps = 0;
  return c;
}

}  // namespace

TEST_CASE("tasks are deterministic and train/eval are disjoint") {
  for (TaskKind kind : {TaskKind::kPermutedCopy, TaskKind::kSalientDetection, TaskKind::kWindowedDenoise}) {
    CAPTURE(to_string(kind));
    const TaskSpec spec = default_task_spec(kind);
    const ToyTask a = make_task(spec), b = make_task(spec);
    REQUIRE(a.train.size() == b.train.size());
    CHECK(a.train.size() == static_cast<std::size_t>(spec.train_size));
    CHECK(a.eval.size() == static_cast<std::size_t>(spec.eval_size));
    for (std::size_t i = 0; i < a.train.size(); ++i) {
      CHECK(a.train[i].source == b.train[i].source);
      CHECK(a.train[i].labels == b.train[i].labels);
    }
    std::set<std::uint64_t> seen;
    for (const Sample& s : a.train) seen.insert(s.fingerprint);
    for (const Sample& s : a.eval) CHECK(seen.count(s.fingerprint) == 0);
  }
}

TEST_CASE("reference solvers bound the tasks") {
  const ToyTask copy = make_task(default_task_spec(TaskKind::kPermutedCopy));
  CHECK(content_matching_oracle(copy) == 1.0);
  CHECK(fixed_position_oracle(copy) < 0.3);
  const ToyTask salient = make_task(default_task_spec(TaskKind::kSalientDetection));
  CHECK(masked_average_oracle(salient) >= 0.95);
  CHECK(label_invariant_to_unmarked_permutation(salient, 3));
  CHECK(salient.chance() == doctest::Approx(0.25));
}

TEST_CASE("untrained gated model gives the same accuracy for every beta") {
  const RunConfig base = small(TaskKind::kPermutedCopy);
  const ToyTask task = make_task(base.task);
  std::optional<double> first;
  for (const RunConfig& c : beta_grid(base)) {
    const ResultRecord r = train_and_evaluate(task, c);
    REQUIRE(r.ok);
    if (!first) first = r.accuracy;
    CHECK(r.accuracy == *first);
    CHECK(r.macs > 0);
  }
}

TEST_CASE("divergent training is reported, not thrown") {
  RunConfig c = small(TaskKind::kWindowedDenoise);
  c.optimizer.steps = 50;
  c.optimizer.rate = 1e200;
  const ResultRecord r = train_and_evaluate(c);
  CHECK_FALSE(r.ok);
  CHECK_FALSE(r.diagnostics.empty());
}

TEST_CASE("invalid configurations throw") {
  RunConfig c = small(TaskKind::kSalientDetection);
  c.stack = Stack::kTransformer;
  CHECK_THROWS_AS(c.validate(), ContractError);
  c = small(TaskKind::kWindowedDenoise);
  c.target = AblationTarget::kEncoderDecoder;
  CHECK_THROWS_AS(c.validate(), ContractError);
  c = small(TaskKind::kPermutedCopy);
  c.heads = 3;
  CHECK_THROWS_AS(c.validate(), ContractError);
  CHECK_THROWS_AS(parse_stack("pyramid"), ContractError);
  CHECK_THROWS_AS(parse_task_kind("mnist"), ContractError);
}

TEST_CASE("run config json round trip") {
  RunConfig c = default_run_config(TaskKind::kSalientDetection);
  c.stack = Stack::kAttendedBlockDeformable;
  c.beta = Beta::parse("0110");
  c.seed = 42;
  c.optimizer.rate = 0.01;
  const nlohmann::json j = c;
  const RunConfig back = j.get<RunConfig>();
  CHECK(nlohmann::json(back) == j);
  CHECK(back.label() == "0110 + deformable");
  CHECK(back.seed == 42);
}

TEST_CASE("row labels expand to configurations") {
  const RunConfig base = default_run_config(TaskKind::kSalientDetection);
  const auto rows = expand_labels(base, {"all", "0010+deformable", "0010 + deformable", "dynamic"});
  REQUIRE(rows.size() == 19);
  CHECK(rows[16].stack == Stack::kAttendedBlockDeformable);
  CHECK(rows[16].label() == "0010 + deformable");
  CHECK(rows[17].label() == rows[16].label());
  CHECK(rows[18].stack == Stack::kAttendedBlockDynamic);
  CHECK(rows[18].label() == "dynamic");
  CHECK_THROWS_AS(expand_labels(base, {"2"}), ContractError);
}

TEST_CASE("grids capture failures and sort their records") {
  RunConfig base = small(TaskKind::kPermutedCopy);
  const ToyTask task = make_task(base.task);
  RunConfig bad = base;
  bad.beta = Beta::parse("0000");
  bad.heads = 3;
  RunConfig b = base, a = base;
  b.beta = Beta::parse("1000");
  a.beta = Beta::parse("0001");
  const auto records = run_grid(task, {b, bad, a});
  REQUIRE(records.size() == 3);
  for (std::size_t i = 1; i < records.size(); ++i) {
    CHECK(records[i - 1].config.sort_key() <= records[i].config.sort_key());
  }
  int failed = 0;
  for (const auto& r : records) failed += !r.ok;
  CHECK(failed == 1);
}

TEST_CASE("results csv") {
  ResultRecord ok;
  ok.config = default_run_config(TaskKind::kPermutedCopy);
  ok.accuracy = 0.5;
  ok.macs = 10;
  ok.ok = true;
  ok.seed = 1;
  ResultRecord failed = ok;
  failed.ok = false;
  std::ostringstream os;
  write_results_csv(os, {ok, failed});
  std::istringstream in(os.str());
  std::string header, row1, row2;
  std::getline(in, header);
  std::getline(in, row1);
  std::getline(in, row2);
  CHECK(header == "task,stack,beta,accuracy,macs,wall_ms,seed");
  CHECK(row1.rfind("permuted-copy,transformer,1111,0.500000,10,", 0) == 0);
  CHECK(row2.find(",nan,") != std::string::npos);
  CHECK_THROWS_AS(write_results_csv("/nonexistent-dir/results.csv", {ok}), std::ios_base::failure);
}
