#pragma once

#include <deque>
#include <vector>

#include "cryptorisk/appir.hpp"

namespace cryptorisk::appir::detail {

// Forward worklist over body positions. transfer(i, in) yields the out-state
// of body[i]; join(into, from) merges and reports whether `into` changed.
// Unreachable statements keep a default-constructed state of entry's size.
template <typename State, typename Transfer, typename Join>
std::vector<State> solve_forward(const MethodDef& m, State entry, Transfer&& transfer, Join&& join) {
  const std::size_t n = m.body.size();
  std::vector<State> in(n, State(entry.size()));
  if (n == 0) return in;
  std::vector<bool> reached(n, false);
  std::vector<bool> queued(n, false);
  in[0] = std::move(entry);
  reached[0] = queued[0] = true;
  std::deque<std::size_t> work{0};
  while (!work.empty()) {
    const std::size_t i = work.front();
    work.pop_front();
    queued[i] = false;
    State out = transfer(i, in[i]);
    for (std::size_t s : m.successors(i)) {
      bool changed = join(in[s], out);
      if (!reached[s]) changed = reached[s] = true;
      if (changed && !queued[s]) {
        queued[s] = true;
        work.push_back(s);
      }
    }
  }
  return in;
}

}  // namespace cryptorisk::appir::detail
