#pragma once

#include <deque>
#include <functional>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "corral/events.hpp"
#include "corral/model.hpp"
#include "corral/result.hpp"

namespace corral {

struct AgentConfig {
  std::string server_url = "http://127.0.0.1:7080";
  std::string host_id = "node-0";
  std::uint32_t vm_count = 1;
  double heartbeat_interval_s = 60;  // paper seconds, divided by time_scale
  double time_scale = 1;
  // Host-level attributes; numeric values are divided evenly across slots,
  // strings and booleans are copied.
  AttrMap host_attributes;
  double fault_rate = 0;  // probability a started job is silently abandoned
  std::uint64_t seed = 0;

  Micros heartbeat_us() const {
    return micros_from_seconds(heartbeat_interval_s / time_scale);
  }
  Result<void> validate() const;
};

enum class SlotPhase { Unclaimed, Starting, Executing };

struct SlotState {
  VmId vm_id;
  SlotPhase phase = SlotPhase::Unclaimed;
  std::optional<JobDescriptor> job;
  Micros finish_at = 0;
  bool will_abandon = false;
};

struct AgentStats {
  std::uint64_t contacts = 0;
  std::uint64_t contact_failures = 0;
  std::uint64_t jobs_accepted = 0;
  std::uint64_t completions_reported = 0;
  std::uint64_t abandons = 0;
  std::uint64_t releases = 0;
  std::uint64_t refused_matchinfo = 0;
};

// One simulated host: V slots, a heartbeat cadence, starter workers that
// simulate duration-parameterized jobs, and optional fault injection. The
// core is transport-free and time-explicit so the same state machine runs
// under the virtual clock (embedded) and the system clock (wire). It never
// contacts the server except through the contact cycle below and the
// accept callback inside it (pull model).
//
// Contact cycle, driven by the runtime:
//   now >= next_contact_at():
//     report = begin_contact(now);     // collects finished starters
//     ... deliver report ...
//     contact_succeeded(response, now, accept_fn)   or   contact_failed(now)
class AgentCore {
 public:
  using AcceptFn = std::function<Result<AcceptStatus>(JobId, const VmId&)>;

  AgentCore(AgentConfig config, std::uint64_t boot_epoch, Micros first_contact_at,
            EventSink events = nullptr);

  Micros next_contact_at() const { return next_contact_at_; }

  // Builds the heartbeat report: full attributes until a report has been
  // acknowledged after boot; running items for busy slots; all pending
  // completion records (redelivered until acknowledged).
  HeartbeatReport begin_contact(Micros now);

  // Report delivered: acknowledged completions leave the queue, directives
  // are applied (MATCHINFO accepts then starts, RELEASE kills), and the
  // regular cadence resumes.
  void contact_succeeded(const HeartbeatResponse& response, Micros now,
                         const AcceptFn& accept);

  // Delivery failed: state retained, next attempt after exponential backoff
  // capped at one heartbeat interval.
  void contact_failed(Micros now);

  // Push-model entry (used only by the baseline scheduler): occupy a free
  // slot with the job, or report that none is available.
  Result<VmId> try_claim(const JobDescriptor& job, Micros now);
  // Push-model completion pickup: finished work since the last call.
  std::vector<CompletedItem> collect_finished_for_push(Micros now);

  void terminate();
  bool terminated() const { return terminated_; }

  const std::vector<SlotState>& slots() const { return slots_; }
  const AgentStats& stats() const { return stats_; }
  const AgentConfig& config() const { return config_; }
  std::uint64_t boot_epoch() const { return boot_epoch_; }

  // Per-slot attribute map after dividing host attributes across slots.
  static AttrMap slot_attributes(const AttrMap& host_attrs, std::uint32_t vm_count);

 private:
  void collect_finished(Micros now);
  void start_job(SlotState& slot, const JobDescriptor& job, Micros now);
  void emit(Micros now, const char* kind, nlohmann::json fields);

  AgentConfig config_;
  std::uint64_t boot_epoch_;
  EventSink events_;
  std::vector<SlotState> slots_;
  AttrMap slot_attrs_;

  struct PendingCompletion {
    VmId vm_id;
    CompletedItem item;
  };
  std::deque<PendingCompletion> pending_completions_;
  std::size_t in_flight_completions_ = 0;

  std::mt19937_64 rng_;
  Micros next_contact_at_ = 0;
  int consecutive_failures_ = 0;
  bool attrs_delivered_ = false;
  bool terminated_ = false;
  AgentStats stats_;
};

}  // namespace corral
