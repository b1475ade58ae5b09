#include "crnreal/enumeration.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <condition_variable>
#include <deque>
#include <map>
#include <mutex>
#include <optional>
#include <thread>

#include "parallel.hpp"

namespace crnreal {

namespace {

bool SupportOrder(const SupportEntry& a, const SupportEntry& b) {
  if (a.support.size() != b.support.size()) return a.support.size() > b.support.size();
  return a.support < b.support;
}

// Shared machinery: the problem restricted to the dense support, and a cache
// of constrained dense results keyed on the full exclusion set inside it.
class Restricted {
 public:
  Restricted(const RealizationProblem& problem, const EnumerationOptions& options)
      : options_(options), base_(problem) {
    const DenseOutcome dense = DenseRealization(problem, options.realization);
    solves_ += dense.solves;
    if (!dense.feasible()) throw InfeasibleError(dense.certificate);
    dense_ = *dense.realization;
    edges_.assign(dense_.support.begin(), dense_.support.end());
    for (const Edge& e : AllEdges(problem.complexes.num_complexes())) {
      if (!dense_.support.count(e)) base_.excluded.insert(e);
    }
  }

  const Realization& dense() const { return dense_; }
  const std::vector<Edge>& edges() const { return edges_; }
  int IndexOf(const Edge& e) const {
    return static_cast<int>(std::lower_bound(edges_.begin(), edges_.end(), e) - edges_.begin());
  }

  EdgeSet Complement(const EdgeSet& support) const {
    EdgeSet out;
    for (const Edge& e : edges_) {
      if (!support.count(e)) out.insert(e);
    }
    return out;
  }

  /// Constrained dense realization with `exclusion` (a subset of the dense
  /// edges) forced to zero; nullopt when infeasible.
  std::optional<Realization> Solve(const EdgeSet& exclusion) {
    {
      std::lock_guard<std::mutex> lock(cache_mutex_);
      auto it = cache_.find(exclusion);
      if (it != cache_.end()) return it->second;
    }
    const DenseOutcome out = ConstrainedDense(base_, exclusion, options_.realization);
    solves_ += out.solves;
    std::lock_guard<std::mutex> lock(cache_mutex_);
    return cache_.emplace(exclusion, out.realization).first->second;
  }

  long solves() const { return solves_; }

  // The representative of a realizable support is the constrained dense
  // realization with everything else excluded; it must reproduce the support.
  SupportEntry Representative(const EdgeSet& support) {
    std::optional<Realization> r = Solve(Complement(support));
    if (!r || r->support != support) {
      throw NumericFailure("support " + EdgeSetToString(support) +
                           " failed its exact-support confirmation");
    }
    return {support, *r};
  }

 private:
  const EnumerationOptions& options_;
  RealizationProblem base_;
  Realization dense_;
  std::vector<Edge> edges_;
  std::mutex cache_mutex_;
  std::map<EdgeSet, std::optional<Realization>> cache_;
  std::atomic<long> solves_{0};
};

struct Task {
  EdgeSet exclusion;
  int max_index;
};

class Search {
 public:
  Search(Restricted& r, const EnumerationOptions& options) : r_(r), options_(options) {}

  // Returns the realizable supports found; sets `partial` when stopped early.
  std::vector<EdgeSet> Run(bool& partial, std::string& reason) {
    queue_.push_back({{}, -1});
    std::vector<std::thread> pool;
    const int threads = std::max(1, options_.threads);
    for (int t = 1; t < threads; ++t) pool.emplace_back([this] { Work(); });
    Work();
    for (auto& t : pool) t.join();
    partial = stop_;
    reason = reason_;
    return {found_.begin(), found_.end()};
  }

 private:
  void Work() {
    for (;;) {
      Task task;
      {
        std::unique_lock<std::mutex> lock(mutex_);
        cv_.wait(lock, [this] { return stop_ || !queue_.empty() || active_ == 0; });
        if (stop_ || queue_.empty()) {
          cv_.notify_all();
          return;
        }
        task = std::move(queue_.front());
        queue_.pop_front();
        ++active_;
      }
      std::vector<Task> children;
      std::string failure;
      try {
        children = Expand(task);
      } catch (const std::exception& e) {
        failure = e.what();
      }
      std::size_t completed, queued;
      {
        std::lock_guard<std::mutex> lock(mutex_);
        --active_;
        if (!failure.empty() && !stop_) {
          stop_ = true;
          reason_ = failure;
        }
        for (auto& c : children) queue_.push_back(std::move(c));
        completed = ++completed_;
        queued = queue_.size();
      }
      cv_.notify_all();
      if (options_.progress) options_.progress(completed, queued);
    }
  }

  std::vector<Task> Expand(const Task& task) {
    const std::optional<Realization> result = r_.Solve(task.exclusion);
    if (!result || result->support.empty()) return {};
    const EdgeSet& support = result->support;
    {
      std::lock_guard<std::mutex> lock(mutex_);
      if (found_.insert(support).second && options_.max_realizations &&
          found_.size() >= options_.max_realizations) {
        stop_ = true;
        reason_ = "realization cap reached";
        return {};
      }
      // Children of a support only depend on the support and the smallest
      // index allowed to be excluded next; a lower bound covers a higher one.
      auto it = expanded_.find(support);
      if (it != expanded_.end() && it->second <= task.max_index) return {};
      expanded_[support] = task.max_index;
    }
    std::vector<Task> children;
    const EdgeSet zeroed = r_.Complement(support);
    for (const Edge& e : support) {
      const int index = r_.IndexOf(e);
      if (index <= task.max_index) continue;
      EdgeSet child = zeroed;
      child.insert(e);
      children.push_back({std::move(child), index});
    }
    return children;
  }

  Restricted& r_;
  const EnumerationOptions& options_;
  std::mutex mutex_;
  std::condition_variable cv_;
  std::deque<Task> queue_;
  int active_ = 0;
  std::size_t completed_ = 0;
  bool stop_ = false;
  std::string reason_;
  std::set<EdgeSet> found_;
  std::map<EdgeSet, int> expanded_;
};

RealizationSet Collect(Restricted& r, const std::vector<EdgeSet>& supports, int threads,
                       bool partial, std::string reason) {
  RealizationSet set;
  set.dense = r.dense();
  set.partial = partial;
  set.partial_reason = std::move(reason);
  std::vector<std::optional<SupportEntry>> entries(supports.size());
  try {
    detail::ParallelFor(supports.size(), threads,
                [&](std::size_t i) { entries[i] = r.Representative(supports[i]); });
  } catch (const std::exception& e) {
    if (!set.partial) set.partial_reason = e.what();
    set.partial = true;
  }
  for (auto& e : entries) {
    if (e) set.supports.push_back(std::move(*e));
  }
  std::sort(set.supports.begin(), set.supports.end(), SupportOrder);
  return set;
}

double Seconds(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

}  // namespace

bool RealizationSet::Contains(const EdgeSet& support) const {
  return std::any_of(supports.begin(), supports.end(),
                     [&](const SupportEntry& e) { return e.support == support; });
}

RealizationSet EnumerateAll(const RealizationProblem& problem, const EnumerationOptions& options) {
  const auto start = std::chrono::steady_clock::now();
  Restricted r(problem, options);
  bool partial = false;
  std::string reason;
  const std::vector<EdgeSet> supports = Search(r, options).Run(partial, reason);
  RealizationSet set = Collect(r, supports, options.threads, partial, reason);
  set.solves = r.solves();
  set.wall_seconds = Seconds(start);
  return set;
}

RealizationSet BruteForceEnumerate(const RealizationProblem& problem,
                                   const EnumerationOptions& options) {
  const auto start = std::chrono::steady_clock::now();
  Restricted r(problem, options);
  const std::vector<Edge>& edges = r.edges();
  if (edges.size() > 20) {
    throw ContractError("brute-force enumeration refuses " + std::to_string(edges.size()) +
                        " dense edges (limit 20)");
  }
  const std::size_t subsets = (std::size_t{1} << edges.size()) - 1;
  std::vector<char> realizable(subsets + 1, 0);
  auto subset = [&](std::size_t bits) {
    EdgeSet s;
    for (std::size_t k = 0; k < edges.size(); ++k) {
      if (bits >> k & 1) s.insert(edges[k]);
    }
    return s;
  };
  detail::ParallelFor(subsets, options.threads, [&](std::size_t i) {
    const EdgeSet s = subset(i + 1);
    const std::optional<Realization> out = r.Solve(r.Complement(s));
    realizable[i + 1] = out && out->support == s;
  });
  std::vector<EdgeSet> supports;
  for (std::size_t bits = 1; bits <= subsets; ++bits) {
    if (realizable[bits]) supports.push_back(subset(bits));
  }
  RealizationSet set = Collect(r, supports, options.threads, false, "");
  set.solves = r.solves();
  set.wall_seconds = Seconds(start);
  return set;
}

std::vector<ExclusionCount> ExclusionStudy(const RealizationProblem& problem,
                                           const std::vector<EdgeSet>& candidate_exclusions,
                                           const EnumerationOptions& options) {
  std::vector<ExclusionCount> table;
  for (const EdgeSet& h : candidate_exclusions) {
    RealizationProblem restricted = problem;
    restricted.excluded.insert(h.begin(), h.end());
    ExclusionCount row;
    row.excluded = h;
    try {
      const RealizationSet set = EnumerateAll(restricted, options);
      row.count = set.count();
      row.dense_edges = set.dense.support.size();
      row.partial = set.partial;
    } catch (const InfeasibleError&) {
      row.count = 0;
    }
    table.push_back(row);
  }
  return table;
}

}  // namespace crnreal
