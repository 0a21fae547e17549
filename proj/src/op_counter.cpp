#include "sattn/op_counter.hpp"

namespace sattn {
namespace {
thread_local OpCounts* active_sink = nullptr;
}

CountScope::CountScope(OpCounts& counts) : previous_(active_sink) { active_sink = &counts; }
CountScope::~CountScope() { active_sink = previous_; }

NoCountScope::NoCountScope() : previous_(active_sink) { active_sink = nullptr; }
NoCountScope::~NoCountScope() { active_sink = previous_; }

namespace counting {
void add_macs(std::int64_t n) {
  if (active_sink) active_sink->macs += n;
}
void add_exps(std::int64_t n) {
  if (active_sink) active_sink->exps += n;
}
void add_divs(std::int64_t n) {
  if (active_sink) active_sink->divs += n;
}
}  // namespace counting

}  // namespace sattn
