// One PASS/FAIL line per acceptance criterion; exit status 1 on any FAIL.
// --quick skips the criteria that train models.

#include <cstring>
#include <iostream>

#include "sattn/checks/suite.hpp"

int main(int argc, char** argv) {
  sattn::checks::SuiteOptions options;
  for (int i = 1; i < argc; ++i) {
    if (std::strcmp(argv[i], "--quick") == 0) options.training = false;
  }
  bool ok = true;
  sattn::checks::run_suite(options, [&](const sattn::checks::CriterionResult& r) {
    std::cout << sattn::checks::format(r) << std::endl;
    ok = ok && (r.passed || r.skipped);
  });
  return ok ? 0 : 1;
}
