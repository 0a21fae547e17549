#pragma once

#include <memory>

#include "sattn/harness/config.hpp"
#include "sattn/harness/tasks.hpp"
#include "sattn/op_counter.hpp"
#include "sattn/params.hpp"
#include "sattn/rng.hpp"

namespace sattn::harness {

/// A trainable toy network built from a RunConfig.
class Model {
 public:
  virtual ~Model() = default;

  /// Class logits, one row per label of `sample`. When `study` is non-null
  /// it receives the forward counts of the modules under study (the ablated
  /// attention layer and any deformable or dynamic unit).
  virtual Tensor forward(const Sample& sample, OpCounts* study = nullptr) const = 0;
  virtual ParameterList parameters() const = 0;
};

/// Throws ContractError when the stack does not fit the task.
std::unique_ptr<Model> build_model(const ToyTask& task, const RunConfig& config, Rng& rng);

}  // namespace sattn::harness
