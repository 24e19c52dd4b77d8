#include "corral/model.hpp"

namespace corral {

const char* job_state_name(JobState s) {
  switch (s) {
    case JobState::Idle: return "IDLE";
    case JobState::Matched: return "MATCHED";
    case JobState::Running: return "RUNNING";
  }
  return "?";
}

const char* job_phase_name(JobPhase p) {
  switch (p) {
    case JobPhase::Starting: return "STARTING";
    case JobPhase::Executing: return "EXECUTING";
  }
  return "?";
}

const char* machine_state_name(MachineState s) {
  switch (s) {
    case MachineState::Unclaimed: return "UNCLAIMED";
    case MachineState::Matched: return "MATCHED";
    case MachineState::Claimed: return "CLAIMED";
  }
  return "?";
}

const char* history_kind_name(HistoryKind k) {
  switch (k) {
    case HistoryKind::Submitted: return "SUBMITTED";
    case HistoryKind::Matched: return "MATCHED";
    case HistoryKind::Started: return "STARTED";
    case HistoryKind::Completed: return "COMPLETED";
    case HistoryKind::Dropped: return "DROPPED";
    case HistoryKind::Removed: return "REMOVED";
  }
  return "?";
}

const char* directive_action_name(DirectiveAction a) {
  switch (a) {
    case DirectiveAction::None: return "NONE";
    case DirectiveAction::MatchInfo: return "MATCHINFO";
    case DirectiveAction::Release: return "RELEASE";
  }
  return "?";
}

const char* lifecycle_event_name(LifecycleEvent e) {
  switch (e) {
    case LifecycleEvent::MatchCreated: return "MATCH_CREATED";
    case LifecycleEvent::MatchExpired: return "MATCH_EXPIRED";
    case LifecycleEvent::MatchAccepted: return "MATCH_ACCEPTED";
    case LifecycleEvent::RunCompleted: return "RUN_COMPLETED";
    case LifecycleEvent::RunDropped: return "RUN_DROPPED";
    case LifecycleEvent::JobRemoved: return "JOB_REMOVED";
  }
  return "?";
}

Result<JobState> derive_job_state(bool has_match, bool has_run) {
  if (has_match && has_run) {
    return make_error(Errc::invariant_violation,
                      "job referenced by both a match and a run tuple");
  }
  if (has_match) return JobState::Matched;
  if (has_run) return JobState::Running;
  return JobState::Idle;
}

MachineState derive_machine_state(bool has_match, bool has_run) {
  if (has_run) return MachineState::Claimed;
  if (has_match) return MachineState::Matched;
  return MachineState::Unclaimed;
}

Result<LifecycleState> validate_event(JobState current, LifecycleEvent event) {
  // Removal is legal from every queue state.
  if (event == LifecycleEvent::JobRemoved) return LifecycleState::Terminal;
  switch (current) {
    case JobState::Idle:
      if (event == LifecycleEvent::MatchCreated) return LifecycleState::Matched;
      break;
    case JobState::Matched:
      if (event == LifecycleEvent::MatchExpired) return LifecycleState::Idle;
      if (event == LifecycleEvent::MatchAccepted) return LifecycleState::Running;
      break;
    case JobState::Running:
      if (event == LifecycleEvent::RunCompleted) return LifecycleState::Terminal;
      if (event == LifecycleEvent::RunDropped) return LifecycleState::Idle;
      break;
  }
  return make_error(Errc::illegal_transition,
                    std::string("no edge ") + job_state_name(current) + " -> " +
                        lifecycle_event_name(event));
}

}  // namespace corral
