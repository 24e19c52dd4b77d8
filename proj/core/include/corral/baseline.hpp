#pragma once

#include <deque>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <vector>

#include "corral/events.hpp"
#include "corral/model.hpp"
#include "corral/store.hpp"

namespace corral {

// Job-start rate limiter. Budget accrues at `rate` per second and is capped
// at 1 + rate * tick_period so bursts after idle gaps stay bounded; a
// sliding ten-second window additionally guarantees the achieved start rate
// never exceeds the configured throttle over any such window.
class JobThrottle {
 public:
  JobThrottle(double rate_per_s, double tick_period_s);

  // Accrues budget for the time elapsed since the previous accrual.
  void begin_tick(Micros now);
  // Whole tokens currently available.
  int available() const;
  // Consumes one start at `now` if both the budget and the window allow.
  bool take(Micros now);

  double rate() const { return rate_; }
  double budget() const { return budget_; }

 private:
  double rate_;
  double cap_;
  double budget_ = 0;
  std::optional<Micros> last_accrue_;
  std::deque<Micros> window_;  // starts in the last 10 seconds
};

struct ShadowRecord {
  JobId job_id = 0;
  VmId vm_id;
  Micros spawn_time = 0;
  JobPhase last_status = JobPhase::Starting;
};

// How the baseline reaches its execute nodes. The push model inverts the
// pull system's direction: the scheduler calls the agents.
class BaselineAgentPool {
 public:
  virtual ~BaselineAgentPool() = default;
  // Slot roster with per-slot attributes (static per experiment).
  virtual std::vector<std::pair<VmId, AttrMap>> roster() = 0;
  // Ask the slot's host to start the job on that slot.
  virtual Result<void> claim(const VmId& vm, const JobDescriptor& job) = 0;
};

struct BaselineConfig {
  std::string listen_address = "127.0.0.1:7081";
  std::filesystem::path journal_dir = "baseline-journal";
  double throttle_rate = 0.5;  // default: one job every two seconds
  double tick_period_s = 1.0;
  std::uint64_t compact_every = 500;  // completed operations per compaction
  Durability durability = Durability::Full;
  // Cost attribution toggles for the queue-length experiment.
  bool scan_matchmaking = true;   // evaluate requirements/rank during the scan
  bool compaction_enabled = true;

  Result<void> validate() const;
};

struct BaselineStats {
  std::uint64_t ticks = 0;
  std::uint64_t starts = 0;
  std::uint64_t completions = 0;
  std::uint64_t claims_refused = 0;
  std::uint64_t compactions = 0;
  std::uint64_t queue_length = 0;
  std::uint64_t running = 0;
  std::uint64_t shadows = 0;
};

// Push-model scheduler: a single-threaded queue manager with a job
// throttle, a full queue scan per tick, one shadow per running job and
// periodic full journal compaction. All scheduling state is touched from
// one logical execution context; completion reports arriving from other
// threads are queued and drained inside the tick.
class BaselineScheduler {
 public:
  static Result<std::unique_ptr<BaselineScheduler>> create(
      BaselineConfig config, std::shared_ptr<BaselineAgentPool> pool,
      EventSink events = nullptr);

  // Same submission shape as the pull service.
  Result<std::vector<JobId>> submit_jobs(const std::string& owner, double duration_s,
                                         std::uint64_t count,
                                         const std::string& requirements,
                                         const std::optional<std::string>& rank,
                                         Micros now);

  // One scheduling tick: accrue throttle budget, drain queued completion
  // reports, linearly scan the whole job queue, and start up to
  // floor(budget) jobs on unclaimed slots. Returns the number started.
  std::uint64_t schedd_tick(Micros now);

  // Thread-safe entry for agent completion reports; processed in the next
  // tick (idempotent: unknown or duplicate job ids are ignored).
  void enqueue_completion(JobId job_id, int exit_code);

  BaselineStats stats() const;
  TupleStore& store() { return *store_; }
  const std::map<JobId, ShadowRecord>& shadows() const { return shadows_; }

 private:
  BaselineScheduler(BaselineConfig config, std::unique_ptr<TupleStore> store,
                    std::shared_ptr<BaselineAgentPool> pool, EventSink events);

  void drain_completions(Micros now);
  void handle_completion(JobId job_id, int exit_code, Micros now);
  void maybe_compact();
  void emit(Micros now, const char* kind, nlohmann::json fields);

  BaselineConfig config_;
  std::unique_ptr<TupleStore> store_;
  std::shared_ptr<BaselineAgentPool> pool_;
  EventSink events_;
  JobThrottle throttle_;

  std::vector<std::pair<VmId, AttrMap>> roster_;
  std::map<JobId, ShadowRecord> shadows_;
  std::set<VmId> busy_slots_;
  JobId next_job_id_ = 1;
  std::uint64_t completions_since_compact_ = 0;

  std::mutex inbox_mu_;
  std::deque<std::pair<JobId, int>> completion_inbox_;

  BaselineStats stats_;
};

}  // namespace corral
