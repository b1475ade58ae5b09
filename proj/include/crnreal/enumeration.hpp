#pragma once

// All structurally different realizations of a (possibly uncertain) kinetic
// system. Every realization is a subgraph of the dense one, so the search only
// ever excludes edges of the dense support.

#include <cstddef>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

#include "crnreal/realization.hpp"

namespace crnreal {

class InfeasibleError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct SupportEntry {
  EdgeSet support;
  Realization representative;
};

struct RealizationSet {
  Realization dense;
  std::vector<SupportEntry> supports;  // sorted by (size desc, edges asc)
  bool partial = false;
  std::string partial_reason;
  long solves = 0;
  double wall_seconds = 0.0;

  std::size_t count() const { return supports.size(); }
  bool Contains(const EdgeSet& support) const;
};

struct EnumerationOptions {
  RealizationOptions realization;
  int threads = 1;
  std::size_t max_realizations = 0;  // 0 = no cap
  std::function<void(std::size_t completed, std::size_t queued)> progress;
};

/// Work-queue search over exclusion sets with canonical child ordering.
/// Throws InfeasibleError when the problem has no realization at all.
RealizationSet EnumerateAll(const RealizationProblem& problem, const EnumerationOptions& options = {});

/// Checks every nonempty subset of the dense support. Refuses more than 20
/// dense edges.
RealizationSet BruteForceEnumerate(const RealizationProblem& problem,
                                   const EnumerationOptions& options = {});

struct ExclusionCount {
  EdgeSet excluded;
  std::size_t count = 0;  // 0 when the exclusion leaves nothing feasible
  std::size_t dense_edges = 0;
  bool partial = false;
};

std::vector<ExclusionCount> ExclusionStudy(const RealizationProblem& problem,
                                           const std::vector<EdgeSet>& candidate_exclusions,
                                           const EnumerationOptions& options = {});

}  // namespace crnreal
