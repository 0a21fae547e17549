#include "sattn/harness/config.hpp"

#include <cstdio>

#include "sattn/errors.hpp"

namespace sattn::harness {

std::string to_string(Stack stack) {
  switch (stack) {
    case Stack::kAttendedBlock: return "attended-block";
    case Stack::kAttendedBlockDeformable: return "attended-block+deformable";
    case Stack::kAttendedBlockDynamic: return "attended-block+dynamic";
    case Stack::kTransformer: return "transformer";
    case Stack::kTransformerDeformable: return "transformer+deformable";
    case Stack::kTransformerDynamic: return "transformer+dynamic";
  }
  return "?";
}

Stack parse_stack(const std::string& name) {
  for (Stack s : {Stack::kAttendedBlock, Stack::kAttendedBlockDeformable, Stack::kAttendedBlockDynamic,
                  Stack::kTransformer, Stack::kTransformerDeformable, Stack::kTransformerDynamic}) {
    if (to_string(s) == name) return s;
  }
  throw ContractError("unknown stack \"" + name + "\"");
}

bool is_grid_stack(Stack stack) {
  return stack == Stack::kAttendedBlock || stack == Stack::kAttendedBlockDeformable ||
         stack == Stack::kAttendedBlockDynamic;
}

bool uses_deformable(Stack stack) {
  return stack == Stack::kAttendedBlockDeformable || stack == Stack::kTransformerDeformable;
}

bool uses_dynamic(Stack stack) { return stack == Stack::kAttendedBlockDynamic || stack == Stack::kTransformerDynamic; }

Stack base_stack(Stack stack) { return is_grid_stack(stack) ? Stack::kAttendedBlock : Stack::kTransformer; }

Stack deformable_stack(Stack stack) {
  return is_grid_stack(stack) ? Stack::kAttendedBlockDeformable : Stack::kTransformerDeformable;
}

Stack dynamic_stack(Stack stack) { return is_grid_stack(stack) ? Stack::kAttendedBlockDynamic : Stack::kTransformerDynamic; }

std::string to_string(AblationTarget target) { return target == AblationTarget::kSelf ? "self" : "encdec"; }

AblationTarget parse_target(const std::string& name) {
  if (name == "self") return AblationTarget::kSelf;
  if (name == "encdec") return AblationTarget::kEncoderDecoder;
  throw ContractError("unknown ablation target \"" + name + "\"");
}

std::string RunConfig::label() const {
  if (uses_dynamic(stack)) return "dynamic";
  std::string out = beta.str();
  if (uses_deformable(stack)) out += " + deformable";
  return out;
}

std::string RunConfig::sort_key() const {
  char buf[256];
  std::snprintf(buf, sizeof buf, "%s|%s|%s|%s|w%03ld|k%03ld|g%03ld|c%03ld|m%03ld|s%020llu|t%020llu",
                to_string(task.kind).c_str(), to_string(stack).c_str(), to_string(target).c_str(), beta.str().c_str(),
                static_cast<long>(window), static_cast<long>(kernel), static_cast<long>(groups),
                static_cast<long>(model_dim), static_cast<long>(heads), static_cast<unsigned long long>(seed),
                static_cast<unsigned long long>(task.seed));
  return buf;
}

void RunConfig::validate() const {
  const bool grid_task = task.kind == TaskKind::kSalientDetection;
  if (grid_task != is_grid_stack(stack)) {
    throw ContractError("stack " + to_string(stack) + " does not fit task " + to_string(task.kind));
  }
  if (task.kind != TaskKind::kPermutedCopy && target == AblationTarget::kEncoderDecoder) {
    throw ContractError("task " + to_string(task.kind) + " has no encoder-decoder attention");
  }
  if (model_dim <= 0 || heads <= 0 || model_dim % heads != 0) throw ContractError("heads must divide model_dim");
  if (model_dim % (grid_task ? 4 : 2) != 0) throw ContractError("model_dim must suit the position encoding width");
  if (window < 0 || (window > 0 && window % 2 == 0)) throw ContractError("window must be 0 or odd");
  if (kernel <= 0 || kernel % 2 == 0) throw ContractError("kernel must be odd");
  if (uses_dynamic(stack) && (groups <= 0 || model_dim % groups != 0)) throw ContractError("groups must divide model_dim");
  if (optimizer.steps < 0 || optimizer.batch <= 0 || optimizer.rate <= 0.0) throw ContractError("bad optimizer settings");
}

TaskSpec default_task_spec(TaskKind kind) {
  switch (kind) {
    case TaskKind::kPermutedCopy: return {kind, 16, 8, 1, 1024, 256};
    case TaskKind::kSalientDetection: return {kind, 4, 6, 1, 512, 256};
    case TaskKind::kWindowedDenoise: return {kind, 4, 16, 1, 512, 256};
  }
  throw ContractError("unknown task kind");
}

RunConfig default_run_config(TaskKind kind) {
  RunConfig c;
  c.task = default_task_spec(kind);
  c.stack = kind == TaskKind::kSalientDetection ? Stack::kAttendedBlock : Stack::kTransformer;
  return c;
}

void to_json(nlohmann::json& j, const TaskSpec& spec) {
  j = {{"kind", to_string(spec.kind)},
       {"vocab", spec.vocab},
       {"extent", spec.extent},
       {"seed", spec.seed},
       {"train_size", spec.train_size},
       {"eval_size", spec.eval_size}};
}

void from_json(const nlohmann::json& j, TaskSpec& spec) {
  if (j.contains("kind")) spec = default_task_spec(parse_task_kind(j.at("kind").get<std::string>()));
  spec.vocab = j.value("vocab", spec.vocab);
  spec.extent = j.value("extent", spec.extent);
  spec.seed = j.value("seed", spec.seed);
  spec.train_size = j.value("train_size", spec.train_size);
  spec.eval_size = j.value("eval_size", spec.eval_size);
}

void to_json(nlohmann::json& j, const OptimizerSettings& o) {
  j = {{"rate", o.rate}, {"momentum", o.momentum}, {"steps", o.steps}, {"batch", o.batch}};
}

void from_json(const nlohmann::json& j, OptimizerSettings& o) {
  o.rate = j.value("rate", o.rate);
  o.momentum = j.value("momentum", o.momentum);
  o.steps = j.value("steps", o.steps);
  o.batch = j.value("batch", o.batch);
}

void to_json(nlohmann::json& j, const RunConfig& c) {
  j = {{"task", c.task},
       {"stack", to_string(c.stack)},
       {"beta", c.beta.str()},
       {"target", to_string(c.target)},
       {"model_dim", c.model_dim},
       {"heads", c.heads},
       {"window", c.window},
       {"kernel", c.kernel},
       {"groups", c.groups},
       {"optimizer", c.optimizer},
       {"seed", c.seed}};
}

void from_json(const nlohmann::json& j, RunConfig& c) {
  if (j.contains("task")) c.task = j.at("task").get<TaskSpec>();
  if (j.contains("stack")) c.stack = parse_stack(j.at("stack").get<std::string>());
  if (j.contains("beta")) c.beta = Beta::parse(j.at("beta").get<std::string>());
  if (j.contains("target")) c.target = parse_target(j.at("target").get<std::string>());
  c.model_dim = j.value("model_dim", c.model_dim);
  c.heads = j.value("heads", c.heads);
  c.window = j.value("window", c.window);
  c.kernel = j.value("kernel", c.kernel);
  c.groups = j.value("groups", c.groups);
  if (j.contains("optimizer")) c.optimizer = j.at("optimizer").get<OptimizerSettings>();
  c.seed = j.value("seed", c.seed);
}

}  // namespace sattn::harness
