#include <gtest/gtest.h>

#include <atomic>
#include <cstdlib>
#include <stdexcept>
#include <vector>

#include "knockforge/parallel.hpp"

namespace kf = knockforge;

TEST(ResolveWorkers, ExplicitWins) {
  EXPECT_EQ(kf::resolve_workers(3), 3u);
}

TEST(ResolveWorkers, EnvironmentFallback) {
  setenv("KNOCKFORGE_WORKERS", "5", 1);
  EXPECT_EQ(kf::resolve_workers(), 5u);
  unsetenv("KNOCKFORGE_WORKERS");
  EXPECT_EQ(kf::resolve_workers(), 1u);
}

TEST(ParallelFor, VisitsEveryIndexOnce) {
  for (std::size_t workers : {1u, 2u, 8u}) {
    std::vector<std::atomic<int>> hits(1000);
    kf::parallel_for(hits.size(), workers, [&](std::size_t i) { ++hits[i]; });
    for (auto& h : hits) EXPECT_EQ(h.load(), 1);
  }
}

TEST(ParallelFor, ZeroCountIsNoop) {
  bool called = false;
  kf::parallel_for(0, 4, [&](std::size_t) { called = true; });
  EXPECT_FALSE(called);
}

TEST(ParallelFor, RethrowsTaskException) {
  EXPECT_THROW(kf::parallel_for(50, 4,
                                [](std::size_t i) {
                                  if (i == 17) throw std::runtime_error("boom");
                                }),
               std::runtime_error);
}
