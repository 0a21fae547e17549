#pragma once

#include <cstdint>

namespace sattn {

/// Forward-pass operation tally. One multiply (with or without the
/// accompanying add) is one MAC; exponentials and divisions are tallied
/// separately.
struct OpCounts {
  std::int64_t macs = 0;
  std::int64_t exps = 0;
  std::int64_t divs = 0;

  OpCounts& operator+=(const OpCounts& o) {
    macs += o.macs;
    exps += o.exps;
    divs += o.divs;
    return *this;
  }
  friend bool operator==(const OpCounts&, const OpCounts&) = default;
};

/// RAII scope that makes `counts` the active sink for the current thread.
/// Scopes nest; only the innermost receives counts.
class CountScope {
 public:
  explicit CountScope(OpCounts& counts);
  ~CountScope();
  CountScope(const CountScope&) = delete;
  CountScope& operator=(const CountScope&) = delete;

 private:
  OpCounts* previous_;
};

/// Suspends counting on the current thread (e.g. for backward passes).
class NoCountScope {
 public:
  NoCountScope();
  ~NoCountScope();
  NoCountScope(const NoCountScope&) = delete;
  NoCountScope& operator=(const NoCountScope&) = delete;

 private:
  OpCounts* previous_;
};

namespace counting {
void add_macs(std::int64_t n);
void add_exps(std::int64_t n);
void add_divs(std::int64_t n);
}  // namespace counting

}  // namespace sattn
