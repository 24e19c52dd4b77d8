#pragma once

#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "corral/events.hpp"
#include "corral/model.hpp"
#include "corral/store.hpp"

namespace corral {

struct ServiceConfig {
  std::string listen_address = "127.0.0.1:7080";
  std::filesystem::path journal_dir = "corral-journal";
  // Paper-unit values; the effective runtime values are divided by
  // time_scale uniformly (as are job durations).
  double heartbeat_interval_s = 60;
  int match_expiry_intervals = 3;
  int dead_node_intervals = 3;
  double schedule_interval_s = 1;
  Durability durability = Durability::Full;
  double time_scale = 1;
  // Journal hygiene: snapshot + prune after this many tuple ops (0 = never).
  std::uint64_t checkpoint_every_ops = 200'000;
  bool deep_validate = false;

  Micros heartbeat_us() const {
    return micros_from_seconds(heartbeat_interval_s / time_scale);
  }
  Micros schedule_us() const {
    return micros_from_seconds(schedule_interval_s / time_scale);
  }
  Micros match_expiry_us() const { return match_expiry_intervals * heartbeat_us(); }
  Micros dead_after_us() const { return dead_node_intervals * heartbeat_us(); }

  Result<void> validate() const;
};

struct SubmitRequest {
  std::string owner;
  double duration_s = 0;
  std::uint64_t count = 1;
  std::string requirements = "true";
  std::optional<std::string> rank;
  AttrMap attributes;
  std::optional<std::string> idempotency_token;
};

enum class AcceptStatus { Ok, Stale };

struct ExpiryCounts {
  std::uint64_t expired_matches = 0;
  std::uint64_t requeued_drops = 0;
  std::uint64_t dead_machines = 0;
};

struct JobFilter {
  std::optional<JobState> state;
  std::optional<std::string> owner;
  std::uint64_t offset = 0;
  std::uint64_t limit = 0;  // 0 = unlimited
};

struct MachineFilter {
  std::optional<MachineState> state;
  std::optional<std::string> host_id;
  std::uint64_t offset = 0;
  std::uint64_t limit = 0;
};

struct HistoryFilter {
  std::optional<JobId> job_id;
  std::optional<HistoryKind> kind;
  Micros since = 0;
  std::uint64_t offset = 0;
  std::uint64_t limit = 0;
};

struct MachineInfo {
  MachineRecord record;
  MachineState state = MachineState::Unclaimed;
};

struct ServiceStats {
  StoreCounts store;
  std::uint64_t heartbeats = 0;
  std::uint64_t matches_created = 0;
  std::uint64_t drops = 0;
  std::uint64_t scheduling_passes = 0;
  std::uint64_t releases_sent = 0;
  std::uint64_t stale_accepts = 0;
  std::uint64_t stale_completions = 0;
};

// The central scheduling service: turns requests into store transactions,
// runs the matchmaking pass, and detects stale matches and dead nodes.
// Transport-free; callers supply `now` so the same core runs under a
// virtual clock (embedded) or the system clock (wire).
//
// Pull discipline: this class never initiates contact with an agent. All
// agent-bound data travels in HeartbeatResponse / accept_match returns.
class SchedulerCore {
 public:
  static Result<std::unique_ptr<SchedulerCore>> create(ServiceConfig config,
                                                       EventSink events = nullptr);

  Result<std::vector<JobId>> submit_jobs(const SubmitRequest& req, Micros now);
  Result<void> remove_job(JobId id, Micros now);
  Result<HeartbeatResponse> handle_heartbeat(const HeartbeatReport& report, Micros now);
  Result<AcceptStatus> accept_match(JobId job_id, const VmId& vm_id, Micros now);

  // Creates matches for idle jobs on fresh unclaimed machines. Returns the
  // number of matches created.
  std::uint64_t scheduling_pass(Micros now);

  // Expires overdue matches, requeues runs from dead or rebooted machines,
  // and deletes dead machine tuples.
  ExpiryCounts expire_stale(Micros now);

  std::vector<JobRecord> query_jobs(const JobFilter& f) const;
  std::vector<MachineInfo> query_machines(const MachineFilter& f) const;
  std::vector<HistoryEvent> query_history(const HistoryFilter& f) const;

  // True once a heartbeat has freed capacity while idle jobs wait; cleared
  // by the call. Drives the heartbeat-triggered scheduling pass.
  bool take_pass_trigger();

  ServiceStats stats() const;
  const ServiceConfig& config() const { return config_; }
  TupleStore& store() { return *store_; }

 private:
  SchedulerCore(ServiceConfig config, std::unique_ptr<TupleStore> store, EventSink events);

  void emit(Micros now, const char* kind, nlohmann::json fields);
  void maybe_checkpoint();
  // Requeue ops for a run that is gone (dead node, reboot, missed reports).
  // The drop event is queued in `pending_events`, to be emitted post-commit.
  Result<void> append_drop_ops(std::vector<TupleOp>& ops, const RunRecord& run,
                               Micros now, const char* reason,
                               std::vector<nlohmann::json>& pending_events);

  ServiceConfig config_;
  std::unique_ptr<TupleStore> store_;
  EventSink events_;

  mutable std::mutex mu_;
  JobId next_job_id_ = 1;
  std::map<std::string, std::vector<JobId>> submit_tokens_;
  // Consecutive host reports that omitted a running job; two strikes requeue.
  std::map<JobId, int> run_miss_counts_;
  bool pass_trigger_ = false;
  std::uint64_t ops_at_last_checkpoint_ = 0;

  std::uint64_t heartbeats_ = 0;
  std::uint64_t matches_created_ = 0;
  std::uint64_t drops_ = 0;
  std::uint64_t scheduling_passes_ = 0;
  std::uint64_t releases_sent_ = 0;
  std::uint64_t stale_accepts_ = 0;
  std::uint64_t stale_completions_ = 0;
};

}  // namespace corral
