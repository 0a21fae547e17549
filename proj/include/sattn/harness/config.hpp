#pragma once

#include <cstdint>
#include <string>

#include <json.hpp>

#include "sattn/attention.hpp"
#include "sattn/harness/tasks.hpp"

namespace sattn::harness {

/// Module arrangement, after the insertion patterns studied:
///   attended-block             grid: 3×3 regular conv, self-attention, mean pool
///   attended-block+deformable  same with the 3×3 conv made deformable
///   attended-block+dynamic     same with dynamic conv in place of attention
///   transformer                sequence: encoder self-attention (gated) and,
///                              for encoder-decoder tasks, decoder cross-attention
///   transformer+deformable     transformer with a gated kernel-3 deformable
///                              unit ahead of the encoder self-attention
///   transformer+dynamic        transformer with dynamic conv in place of the
///                              encoder self-attention
enum class Stack {
  kAttendedBlock,
  kAttendedBlockDeformable,
  kAttendedBlockDynamic,
  kTransformer,
  kTransformerDeformable,
  kTransformerDynamic,
};

std::string to_string(Stack stack);
Stack parse_stack(const std::string& name);
bool is_grid_stack(Stack stack);
bool uses_deformable(Stack stack);
bool uses_dynamic(Stack stack);
/// The plain, deformable and dynamic members of a stack's family.
Stack base_stack(Stack stack);
Stack deformable_stack(Stack stack);
Stack dynamic_stack(Stack stack);

/// Which attention layer the β string switches. The other one runs "1111".
enum class AblationTarget { kSelf, kEncoderDecoder };

std::string to_string(AblationTarget target);
AblationTarget parse_target(const std::string& name);

struct OptimizerSettings {
  double rate = 0.05;
  double momentum = 0.9;
  Index steps = 1500;
  Index batch = 16;
};

struct RunConfig {
  TaskSpec task;
  Stack stack = Stack::kTransformer;
  Beta beta = Beta::full();
  AblationTarget target = AblationTarget::kSelf;
  Index model_dim = 32;
  Index heads = 2;
  /// Local attention window (odd); 0 = the whole key set.
  Index window = 0;
  /// Taps per axis of the convolution / dynamic kernel.
  Index kernel = 3;
  /// Dynamic convolution groups; must divide model_dim.
  Index groups = 16;
  OptimizerSettings optimizer;
  std::uint64_t seed = 1;

  /// Row label in the style "0010", "0010 + deformable", "dynamic".
  std::string label() const;
  /// Total order used to sort grid output.
  std::string sort_key() const;
  void validate() const;
};

/// Desk-scale task shapes: permuted-copy 8 tokens over 16 values,
/// salient-detection 6×6 with 4 classes, windowed-denoise 16 tokens over 4.
TaskSpec default_task_spec(TaskKind kind);
/// Default task shape plus the matching base stack (attended-block for grid
/// tasks, transformer otherwise); β = "1111", self-attention ablated.
RunConfig default_run_config(TaskKind kind);

void to_json(nlohmann::json& j, const TaskSpec& spec);
void from_json(const nlohmann::json& j, TaskSpec& spec);
void to_json(nlohmann::json& j, const OptimizerSettings& o);
void from_json(const nlohmann::json& j, OptimizerSettings& o);
void to_json(nlohmann::json& j, const RunConfig& c);
/// Missing fields keep their defaults; unknown enum names throw ContractError.
void from_json(const nlohmann::json& j, RunConfig& c);

}  // namespace sattn::harness
