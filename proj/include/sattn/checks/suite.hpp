#pragma once

#include <functional>
#include <string>
#include <vector>

namespace sattn::checks {

struct CriterionResult {
  int id = 0;
  std::string title;
  bool passed = false;
  bool skipped = false;
  /// Measured quantities behind the verdict.
  std::string detail;
  double seconds = 0.0;
};

struct SuiteOptions {
  /// Include the criteria that train models (several minutes on one core).
  bool training = true;
  /// Seed for the random instances of the property checks.
  unsigned long long seed = 20240601ULL;
};

using Criterion = std::function<CriterionResult(const SuiteOptions&)>;

CriterionResult conv_matches_oracle(const SuiteOptions& options);
CriterionResult deformable_degenerates_to_regular(const SuiteOptions& options);
CriterionResult attention_matches_oracle(const SuiteOptions& options);
CriterionResult weights_are_normalized(const SuiteOptions& options);
CriterionResult gradients_match_finite_differences(const SuiteOptions& options);
CriterionResult counts_match_closed_form(const SuiteOptions& options);
CriterionResult encoder_decoder_needs_content(const SuiteOptions& options);
CriterionResult saliency_suffices(const SuiteOptions& options);
CriterionResult cost_ordering(const SuiteOptions& options);
CriterionResult runs_are_deterministic(const SuiteOptions& options);

/// Every criterion in order; the training ones are marked skipped when
/// options.training is false.
std::vector<CriterionResult> run_suite(const SuiteOptions& options,
                                       const std::function<void(const CriterionResult&)>& on_result = {});

/// "PASS [n] title -- detail (1.23 s)"; FAIL and SKIP likewise.
std::string format(const CriterionResult& result);

}  // namespace sattn::checks
