#pragma once

#include <cstddef>
#include <functional>
#include <optional>

namespace knockforge {

// Worker count: explicit value if given, else KNOCKFORGE_WORKERS, else 1.
std::size_t resolve_workers(std::optional<std::size_t> requested = std::nullopt);

// Runs body(i) for i in [0, count) on up to `workers` threads. Tasks are
// claimed dynamically, so bodies must write only to slots they own. The first
// exception thrown by any task is rethrown after all threads join.
void parallel_for(std::size_t count, std::size_t workers,
                  const std::function<void(std::size_t)>& body);

}  // namespace knockforge
