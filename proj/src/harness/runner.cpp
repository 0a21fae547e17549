#include "sattn/harness/runner.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <iomanip>

#include "sattn/errors.hpp"
#include "sattn/harness/models.hpp"

namespace sattn::harness {

namespace {

Index argmax(const Matrix& logits, Index row) {
  Index best = 0;
  logits.row(row).maxCoeff(&best);
  return best;
}

double evaluate(const Model& model, const std::vector<Sample>& samples) {
  NoCountScope quiet;
  Index correct = 0;
  Index total = 0;
  for (const auto& s : samples) {
    const Matrix logits = model.forward(s).value();
    if (!logits.allFinite()) throw NumericError("non-finite logits during evaluation");
    for (std::size_t i = 0; i < s.labels.size(); ++i) {
      correct += argmax(logits, static_cast<Index>(i)) == s.labels[i];
      ++total;
    }
  }
  return total ? static_cast<double>(correct) / static_cast<double>(total) : 0.0;
}

}  // namespace

ResultRecord train_and_evaluate(const ToyTask& task, const RunConfig& config) {
  ResultRecord record;
  record.config = config;
  record.seed = config.seed;
  const auto start = std::chrono::steady_clock::now();

  Rng rng(config.seed);
  Rng init_rng = rng.split();
  Rng order_rng = rng.split();
  const auto model = build_model(task, config, init_rng);
  ParameterList params = model->parameters();
  MomentumSgd optimizer(config.optimizer.rate, config.optimizer.momentum);

  try {
    if (task.train.empty()) throw ContractError("task has no training samples");
    NoCountScope quiet;
    std::vector<int> order;
    std::size_t cursor = 0;
    for (Index step = 0; step < config.optimizer.steps; ++step) {
      Tensor loss;
      for (Index b = 0; b < config.optimizer.batch; ++b) {
        if (cursor == order.size()) {
          order = order_rng.permutation(static_cast<int>(task.train.size()));
          cursor = 0;
        }
        const Sample& s = task.train[static_cast<std::size_t>(order[cursor++])];
        const Tensor l = cross_entropy(model->forward(s), s.labels);
        loss = loss.defined() ? add(loss, l) : l;
      }
      loss = scale(loss, 1.0 / static_cast<double>(config.optimizer.batch));
      if (!std::isfinite(loss.item())) {
        throw NumericError("non-finite training loss at step " + std::to_string(step));
      }
      backward(loss);
      optimizer.step(params);
    }
    record.accuracy = evaluate(*model, task.eval);
    if (!task.eval.empty()) {
      OpCounts study;
      model->forward(task.eval.front(), &study);
      record.macs = study.macs;
    }
    record.ok = true;
  } catch (const NumericError& e) {
    record.diagnostics = e.what();
  } catch (const DegenerateRegionError& e) {
    record.diagnostics = e.what();
  }
  record.wall_ms =
      std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
  return record;
}

ResultRecord train_and_evaluate(const RunConfig& config) {
  config.validate();
  return train_and_evaluate(make_task(config.task), config);
}

std::vector<ResultRecord> run_grid(const ToyTask& task, const std::vector<RunConfig>& configs) {
  std::vector<ResultRecord> out;
  out.reserve(configs.size());
  for (const auto& c : configs) {
    try {
      out.push_back(train_and_evaluate(task, c));
    } catch (const std::exception& e) {
      ResultRecord failed;
      failed.config = c;
      failed.seed = c.seed;
      failed.diagnostics = e.what();
      out.push_back(std::move(failed));
    }
  }
  std::stable_sort(out.begin(), out.end(), [](const ResultRecord& a, const ResultRecord& b) {
    return a.config.sort_key() < b.config.sort_key();
  });
  return out;
}

std::vector<RunConfig> beta_grid(const RunConfig& base) {
  std::vector<RunConfig> out;
  for (const Beta& b : Beta::all()) {
    RunConfig c = base;
    c.beta = b;
    out.push_back(c);
  }
  return out;
}

std::vector<RunConfig> expand_labels(const RunConfig& base, const std::vector<std::string>& labels) {
  std::vector<RunConfig> out;
  for (const std::string& raw : labels) {
    std::string label;
    for (char ch : raw) {
      if (ch != ' ') label += ch;
    }
    RunConfig c = base;
    c.stack = base_stack(base.stack);
    if (label == "all") {
      for (RunConfig& g : beta_grid(c)) out.push_back(std::move(g));
      continue;
    }
    if (label == "dynamic") {
      c.stack = dynamic_stack(base.stack);
    } else {
      const std::string suffix = "+deformable";
      if (label.size() > suffix.size() && label.compare(label.size() - suffix.size(), suffix.size(), suffix) == 0) {
        c.stack = deformable_stack(base.stack);
        label.resize(label.size() - suffix.size());
      }
      c.beta = Beta::parse(label);
    }
    out.push_back(std::move(c));
  }
  return out;
}

std::vector<ResultRecord> run_configs(const std::vector<RunConfig>& configs) {
  std::vector<ResultRecord> out;
  std::vector<bool> done(configs.size(), false);
  for (std::size_t i = 0; i < configs.size(); ++i) {
    if (done[i]) continue;
    const nlohmann::json spec = configs[i].task;
    std::vector<RunConfig> group;
    for (std::size_t j = i; j < configs.size(); ++j) {
      if (!done[j] && nlohmann::json(configs[j].task) == spec) {
        group.push_back(configs[j]);
        done[j] = true;
      }
    }
    std::vector<ResultRecord> records;
    try {
      records = run_grid(make_task(configs[i].task), group);
    } catch (const std::exception& e) {
      for (const RunConfig& c : group) {
        ResultRecord failed;
        failed.config = c;
        failed.seed = c.seed;
        failed.diagnostics = e.what();
        records.push_back(std::move(failed));
      }
    }
    out.insert(out.end(), records.begin(), records.end());
  }
  std::stable_sort(out.begin(), out.end(), [](const ResultRecord& a, const ResultRecord& b) {
    return a.config.sort_key() < b.config.sort_key();
  });
  return out;
}

void write_results_csv(std::ostream& os, const std::vector<ResultRecord>& records) {
  os << kResultsHeader << '\n';
  for (const auto& r : records) {
    os << to_string(r.config.task.kind) << ',' << to_string(r.config.stack) << ',' << r.config.label() << ','
       << std::fixed << std::setprecision(6) << (r.ok ? r.accuracy : std::nan("")) << ',' << r.macs << ','
       << std::setprecision(3) << r.wall_ms << ',' << r.seed << '\n';
    os << std::defaultfloat;
  }
}

void write_results_csv(const std::string& path, const std::vector<ResultRecord>& records) {
  std::ofstream os(path);
  if (!os) throw std::ios_base::failure("cannot open " + path + " for writing");
  write_results_csv(os, records);
  os.flush();
  if (!os) throw std::ios_base::failure("failed writing " + path);
}

}  // namespace sattn::harness
