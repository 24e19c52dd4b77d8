#pragma once

#include <compare>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "corral/expr.hpp"
#include "corral/result.hpp"
#include "corral/time.hpp"

namespace corral {

using JobId = std::uint64_t;

// A schedulable slot: (host, slot index). Ordering is lexicographic, which is
// also the deterministic tie-break order used by the matchmaker.
struct VmId {
  std::string host_id;
  std::uint32_t slot_index = 0;

  auto operator<=>(const VmId&) const = default;

  std::string to_string() const {
    return host_id + ":" + std::to_string(slot_index);
  }
};

enum class JobState { Idle, Matched, Running };
enum class JobPhase { Starting, Executing };

const char* job_state_name(JobState s);
const char* job_phase_name(JobPhase p);

struct JobRecord {
  JobId job_id = 0;
  std::string owner;
  double duration_s = 0;
  Expression requirements;
  std::optional<Expression> rank;
  AttrMap attributes;
  JobState state = JobState::Idle;
  // Sub-state of Running, reported by the executing slot.
  std::optional<JobPhase> phase;
  Micros submit_time = 0;
  std::uint32_t retry_count = 0;
  // Set when a user removes a running job; the executing slot is told to
  // release it on its next heartbeat.
  bool release_requested = false;
  std::optional<std::string> submit_token;
};

// Machine claim state is not stored: it is derived from match/run tuple
// presence (see derive_machine_state).
struct MachineRecord {
  VmId vm_id;
  AttrMap attributes;
  Micros last_heartbeat = 0;
  std::uint64_t boot_epoch = 0;
};

enum class MachineState { Unclaimed, Matched, Claimed };

const char* machine_state_name(MachineState s);

struct MatchRecord {
  JobId job_id = 0;
  VmId vm_id;
  Micros created_at = 0;
  Micros expires_at = 0;
};

struct RunRecord {
  JobId job_id = 0;
  VmId vm_id;
  Micros started_at = 0;
};

enum class HistoryKind { Submitted, Matched, Started, Completed, Dropped, Removed };

const char* history_kind_name(HistoryKind k);

struct HistoryEvent {
  std::uint64_t seq = 0;
  JobId job_id = 0;
  std::optional<VmId> vm_id;
  HistoryKind kind = HistoryKind::Submitted;
  std::optional<int> exit_code;  // Completed only
  Micros timestamp = 0;
};

// --- Heartbeat wire types -----------------------------------------------

struct RunningItem {
  JobId job_id = 0;
  JobPhase phase = JobPhase::Starting;
};

struct CompletedItem {
  JobId job_id = 0;
  int exit_code = 0;
  Micros end_time = 0;
};

struct SlotReport {
  VmId vm_id;
  // Present only on the first report after an agent (re)start.
  std::optional<AttrMap> attributes;
  std::optional<RunningItem> running;
  std::vector<CompletedItem> completed;
};

struct HeartbeatReport {
  std::string host_id;
  std::uint64_t boot_epoch = 0;
  std::vector<SlotReport> entries;
};

enum class DirectiveAction { None, MatchInfo, Release };

const char* directive_action_name(DirectiveAction a);

// What the agent needs to start a job. Requirements/rank stay server-side.
struct JobDescriptor {
  JobId job_id = 0;
  double duration_s = 0;
  AttrMap attributes;
};

struct Directive {
  VmId vm_id;
  DirectiveAction action = DirectiveAction::None;
  std::optional<JobDescriptor> job;       // MatchInfo only
  std::optional<JobId> release_job_id;    // Release only
};

struct HeartbeatResponse {
  std::vector<Directive> directives;
};

// --- Lifecycle ------------------------------------------------------------

// Job state as a function of tuple presence. Both flags set is not a
// reachable store state and is reported as an error.
Result<JobState> derive_job_state(bool has_match, bool has_run);

MachineState derive_machine_state(bool has_match, bool has_run);

enum class LifecycleEvent {
  MatchCreated,
  MatchExpired,
  MatchAccepted,
  RunCompleted,
  RunDropped,
  JobRemoved,
};

const char* lifecycle_event_name(LifecycleEvent e);

// Outcome states for validate_event; Terminal means the job leaves the
// queue (completed or removed) and survives only in history.
enum class LifecycleState { Idle, Matched, Running, Terminal };

// Guards every tuple transition. Returns the unique legal successor or an
// illegal-transition error.
Result<LifecycleState> validate_event(JobState current, LifecycleEvent event);

}  // namespace corral
