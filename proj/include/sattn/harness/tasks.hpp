#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "sattn/relpos.hpp"
#include "sattn/tensor.hpp"

namespace sattn::harness {

enum class TaskKind { kPermutedCopy, kSalientDetection, kWindowedDenoise };

std::string to_string(TaskKind kind);
/// Accepts "permuted-copy", "salient-detection", "windowed-denoise".
TaskKind parse_task_kind(const std::string& name);

/// One example. `source` holds the key elements (one row each, laid out by
/// ToyTask::source_layout); `queries` holds decoder queries for
/// encoder-decoder tasks and is empty otherwise. One label per prediction.
struct Sample {
  Matrix source;
  Matrix queries;
  std::vector<int> labels;
  /// Discrete fingerprint used to keep train and eval disjoint.
  std::uint64_t fingerprint = 0;
};

struct TaskSpec {
  TaskKind kind = TaskKind::kPermutedCopy;
  /// Value vocabulary (permuted-copy) or class count (other tasks).
  Index vocab = 16;
  /// Sequence length or grid side.
  Index extent = 8;
  std::uint64_t seed = 1;
  Index train_size = 1024;
  Index eval_size = 256;
};

struct ToyTask {
  TaskSpec spec;
  Index feature_dim = 0;
  Index num_classes = 0;
  Layout source_layout;
  Layout query_layout;  ///< meaningful for encoder-decoder tasks only
  bool encoder_decoder = false;
  std::vector<Sample> train;
  std::vector<Sample> eval;

  double chance() const { return 1.0 / static_cast<double>(num_classes); }
};

/// Source: `length` (key, value) tokens; keys are a fresh permutation of
/// 0..length-1, values are drawn from `vocab` symbols (distinct within a
/// sample when vocab >= length). Queries: every key once, in random order.
/// Label: the value paired with the queried key. Feature rows are
/// [one-hot key | one-hot value]; query rows carry the key part only.
ToyTask make_permuted_copy_task(std::uint64_t seed, Index vocab, Index length, Index train_size = 1024,
                                Index eval_size = 256);

/// extent×extent grid; channels = classes + 1. Every class occupies the same
/// number of cells, so the class histogram of the whole grid is flat. A few
/// cells of the target class carry the marker channel; the label is that
/// class. Class features get small Gaussian noise.
ToyTask make_salient_detection_task(std::uint64_t seed, Index extent, Index channels, Index train_size = 512,
                                    Index eval_size = 256);

/// Sequence of `length` tokens whose clean class is piecewise constant over
/// runs of at least 3; each token is independently replaced by a random
/// class with probability 0.25. Label per token: its clean class.
ToyTask make_windowed_denoise_task(std::uint64_t seed, Index classes, Index length, Index train_size = 512,
                                   Index eval_size = 256);

ToyTask make_task(const TaskSpec& spec);

// ---- reference solvers ------------------------------------------------------

/// Permuted copy: look the queried key up in the source. Accuracy on eval.
double content_matching_oracle(const ToyTask& task);

/// Permuted copy: best accuracy over fixed source positions p of always
/// answering the value stored at p.
double fixed_position_oracle(const ToyTask& task);

/// Salient detection: average the class features of marked cells and take
/// the argmax. Accuracy on eval.
double masked_average_oracle(const ToyTask& task);

/// Salient detection: label of a sample is unchanged when unmarked cells are
/// permuted among themselves (checked for one random permutation per sample).
bool label_invariant_to_unmarked_permutation(const ToyTask& task, std::uint64_t seed);

}  // namespace sattn::harness
