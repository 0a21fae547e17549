#include "sattn/harness/tasks.hpp"

#include <unordered_set>

#include "sattn/errors.hpp"
#include "sattn/rng.hpp"

namespace sattn::harness {

std::string to_string(TaskKind kind) {
  switch (kind) {
    case TaskKind::kPermutedCopy: return "permuted-copy";
    case TaskKind::kSalientDetection: return "salient-detection";
    case TaskKind::kWindowedDenoise: return "windowed-denoise";
  }
  return "?";
}

TaskKind parse_task_kind(const std::string& name) {
  if (name == "permuted-copy") return TaskKind::kPermutedCopy;
  if (name == "salient-detection") return TaskKind::kSalientDetection;
  if (name == "windowed-denoise") return TaskKind::kWindowedDenoise;
  throw ContractError("unknown task \"" + name + "\"");
}

namespace {

std::uint64_t mix(std::uint64_t h, std::uint64_t v) {
  h ^= v + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2);
  return h;
}

// Fills train then eval, rejecting eval samples whose fingerprint occurs in
// train. Each split draws from its own child stream.
template <typename Generate>
void fill_splits(ToyTask& task, Rng& rng, Generate generate) {
  Rng train_rng = rng.split();
  Rng eval_rng = rng.split();
  std::unordered_set<std::uint64_t> seen;
  for (Index i = 0; i < task.spec.train_size; ++i) {
    task.train.push_back(generate(train_rng));
    seen.insert(task.train.back().fingerprint);
  }
  const Index max_attempts = 100 * std::max<Index>(task.spec.eval_size, 1);
  Index attempts = 0;
  while (static_cast<Index>(task.eval.size()) < task.spec.eval_size) {
    if (++attempts > max_attempts) throw ContractError("task space too small for disjoint train and eval splits");
    Sample s = generate(eval_rng);
    if (seen.count(s.fingerprint)) continue;
    task.eval.push_back(std::move(s));
  }
}

}  // namespace

ToyTask make_permuted_copy_task(std::uint64_t seed, Index vocab, Index length, Index train_size, Index eval_size) {
  if (vocab < 4 || length < 4) throw ContractError("permuted copy needs vocab >= 4 and length >= 4");
  ToyTask task;
  task.spec = {TaskKind::kPermutedCopy, vocab, length, seed, train_size, eval_size};
  task.feature_dim = length + vocab;
  task.num_classes = vocab;
  task.source_layout = Layout::sequence(length);
  task.query_layout = Layout::sequence(length);
  task.encoder_decoder = true;

  Rng rng(seed);
  const bool distinct = vocab >= length;
  fill_splits(task, rng, [&](Rng& r) {
    Sample s;
    s.source = Matrix::Zero(length, task.feature_dim);
    s.queries = Matrix::Zero(length, task.feature_dim);
    const std::vector<int> keys = r.permutation(static_cast<int>(length));
    std::vector<int> values;
    if (distinct) {
      std::vector<int> pool = r.permutation(static_cast<int>(vocab));
      values.assign(pool.begin(), pool.begin() + length);
    } else {
      for (Index i = 0; i < length; ++i) values.push_back(static_cast<int>(r.below(static_cast<std::uint64_t>(vocab))));
    }
    std::vector<int> value_of_key(static_cast<std::size_t>(length));
    std::uint64_t h = 0;
    for (Index p = 0; p < length; ++p) {
      const auto i = static_cast<std::size_t>(p);
      s.source(p, keys[i]) = 1.0;
      s.source(p, length + values[i]) = 1.0;
      value_of_key[static_cast<std::size_t>(keys[i])] = values[i];
      h = mix(mix(h, static_cast<std::uint64_t>(keys[i])), static_cast<std::uint64_t>(values[i]));
    }
    const std::vector<int> order = r.permutation(static_cast<int>(length));
    for (Index t = 0; t < length; ++t) {
      const int key = order[static_cast<std::size_t>(t)];
      s.queries(t, key) = 1.0;
      s.labels.push_back(value_of_key[static_cast<std::size_t>(key)]);
      h = mix(h, static_cast<std::uint64_t>(key));
    }
    s.fingerprint = h;
    return s;
  });
  return task;
}

ToyTask make_salient_detection_task(std::uint64_t seed, Index extent, Index channels, Index train_size,
                                    Index eval_size) {
  const Index classes = channels - 1;
  const Index cells = extent * extent;
  if (classes < 2) throw ContractError("salient detection needs at least 3 channels");
  if (extent < 2 || cells % classes != 0) {
    throw ContractError("salient detection needs extent^2 divisible by the class count");
  }
  const Index per_class = cells / classes;
  const Index marked = std::min<Index>(3, per_class);
  constexpr double kNoise = 0.05;

  ToyTask task;
  task.spec = {TaskKind::kSalientDetection, classes, extent, seed, train_size, eval_size};
  task.feature_dim = channels;
  task.num_classes = classes;
  task.source_layout = Layout::grid(extent, extent);
  task.encoder_decoder = false;

  Rng rng(seed);
  fill_splits(task, rng, [&](Rng& r) {
    Sample s;
    const int label = static_cast<int>(r.below(static_cast<std::uint64_t>(classes)));
    std::vector<int> cell_class;
    for (Index c = 0; c < classes; ++c) cell_class.insert(cell_class.end(), static_cast<std::size_t>(per_class), static_cast<int>(c));
    r.shuffle(cell_class);
    std::vector<Index> candidates;
    for (Index i = 0; i < cells; ++i) {
      if (cell_class[static_cast<std::size_t>(i)] == label) candidates.push_back(i);
    }
    r.shuffle(candidates);
    s.source = Matrix::Zero(cells, channels);
    std::uint64_t h = static_cast<std::uint64_t>(label);
    for (Index i = 0; i < cells; ++i) {
      const int c = cell_class[static_cast<std::size_t>(i)];
      s.source(i, c) = 1.0;
      h = mix(h, static_cast<std::uint64_t>(c));
    }
    for (Index j = 0; j < marked; ++j) {
      s.source(candidates[static_cast<std::size_t>(j)], classes) = 1.0;
      h = mix(h, static_cast<std::uint64_t>(candidates[static_cast<std::size_t>(j)]) + 1000);
    }
    for (Index i = 0; i < cells; ++i) {
      for (Index c = 0; c < classes; ++c) s.source(i, c) += kNoise * r.normal();
    }
    s.labels.push_back(label);
    s.fingerprint = h;
    return s;
  });
  return task;
}

ToyTask make_windowed_denoise_task(std::uint64_t seed, Index classes, Index length, Index train_size,
                                   Index eval_size) {
  if (classes < 2 || length < 6) throw ContractError("windowed denoise needs >= 2 classes and length >= 6");
  constexpr double kFlip = 0.25;
  ToyTask task;
  task.spec = {TaskKind::kWindowedDenoise, classes, length, seed, train_size, eval_size};
  task.feature_dim = classes;
  task.num_classes = classes;
  task.source_layout = Layout::sequence(length);
  task.encoder_decoder = false;

  Rng rng(seed);
  fill_splits(task, rng, [&](Rng& r) {
    Sample s;
    s.source = Matrix::Zero(length, classes);
    std::uint64_t h = 0;
    Index p = 0;
    while (p < length) {
      Index run = 3 + static_cast<Index>(r.below(4));
      if (length - (p + run) < 3) run = length - p;
      const int c = static_cast<int>(r.below(static_cast<std::uint64_t>(classes)));
      for (Index i = 0; i < run; ++i) s.labels.push_back(c);
      p += run;
    }
    for (Index i = 0; i < length; ++i) {
      int observed = s.labels[static_cast<std::size_t>(i)];
      if (r.uniform() < kFlip) observed = static_cast<int>(r.below(static_cast<std::uint64_t>(classes)));
      s.source(i, observed) = 1.0;
      h = mix(mix(h, static_cast<std::uint64_t>(observed)), static_cast<std::uint64_t>(s.labels[static_cast<std::size_t>(i)]));
    }
    s.fingerprint = h;
    return s;
  });
  return task;
}

ToyTask make_task(const TaskSpec& spec) {
  switch (spec.kind) {
    case TaskKind::kPermutedCopy:
      return make_permuted_copy_task(spec.seed, spec.vocab, spec.extent, spec.train_size, spec.eval_size);
    case TaskKind::kSalientDetection:
      return make_salient_detection_task(spec.seed, spec.extent, spec.vocab + 1, spec.train_size, spec.eval_size);
    case TaskKind::kWindowedDenoise:
      return make_windowed_denoise_task(spec.seed, spec.vocab, spec.extent, spec.train_size, spec.eval_size);
  }
  throw ContractError("unknown task kind");
}

namespace {

void require_kind(const ToyTask& task, TaskKind kind, const char* oracle) {
  if (task.spec.kind != kind) throw ContractError(std::string(oracle) + " does not apply to " + to_string(task.spec.kind));
}

Index argmax_row(const Matrix& m, Index row, Index begin, Index count) {
  Index best = begin;
  for (Index j = begin; j < begin + count; ++j) {
    if (m(row, j) > m(row, best)) best = j;
  }
  return best - begin;
}

}  // namespace

double content_matching_oracle(const ToyTask& task) {
  require_kind(task, TaskKind::kPermutedCopy, "content matching oracle");
  const Index length = task.spec.extent;
  Index correct = 0;
  Index total = 0;
  for (const auto& s : task.eval) {
    for (Index t = 0; t < s.queries.rows(); ++t) {
      const Index key = argmax_row(s.queries, t, 0, length);
      for (Index p = 0; p < length; ++p) {
        if (s.source(p, key) == 1.0) {
          correct += argmax_row(s.source, p, length, task.num_classes) == s.labels[static_cast<std::size_t>(t)];
          break;
        }
      }
      ++total;
    }
  }
  return static_cast<double>(correct) / static_cast<double>(total);
}

double fixed_position_oracle(const ToyTask& task) {
  require_kind(task, TaskKind::kPermutedCopy, "fixed position oracle");
  const Index length = task.spec.extent;
  double best = 0.0;
  for (Index p = 0; p < length; ++p) {
    Index correct = 0;
    Index total = 0;
    for (const auto& s : task.eval) {
      const Index answer = argmax_row(s.source, p, length, task.num_classes);
      for (int label : s.labels) {
        correct += answer == label;
        ++total;
      }
    }
    best = std::max(best, static_cast<double>(correct) / static_cast<double>(total));
  }
  return best;
}

double masked_average_oracle(const ToyTask& task) {
  require_kind(task, TaskKind::kSalientDetection, "masked average oracle");
  const Index classes = task.num_classes;
  Index correct = 0;
  for (const auto& s : task.eval) {
    RowVector avg = RowVector::Zero(classes);
    Index marked = 0;
    for (Index i = 0; i < s.source.rows(); ++i) {
      if (s.source(i, classes) == 1.0) {
        avg += s.source.row(i).head(classes);
        ++marked;
      }
    }
    Index best = 0;
    avg.maxCoeff(&best);
    correct += marked > 0 && best == s.labels.front();
  }
  return static_cast<double>(correct) / static_cast<double>(task.eval.size());
}

bool label_invariant_to_unmarked_permutation(const ToyTask& task, std::uint64_t seed) {
  require_kind(task, TaskKind::kSalientDetection, "unmarked permutation check");
  ToyTask shuffled = task;
  Rng rng(seed);
  const Index classes = task.num_classes;
  for (auto& s : shuffled.eval) {
    std::vector<Index> unmarked;
    for (Index i = 0; i < s.source.rows(); ++i) {
      if (s.source(i, classes) != 1.0) unmarked.push_back(i);
    }
    std::vector<Index> target = unmarked;
    rng.shuffle(target);
    Matrix permuted = s.source;
    for (std::size_t j = 0; j < unmarked.size(); ++j) permuted.row(target[j]) = s.source.row(unmarked[j]);
    s.source = permuted;
  }
  return masked_average_oracle(shuffled) == masked_average_oracle(task);
}

}  // namespace sattn::harness
