#include "corral/agent.hpp"

#include <algorithm>

namespace corral {

Result<void> AgentConfig::validate() const {
  if (vm_count < 1) return make_error(Errc::validation, "vm_count must be >= 1");
  if (fault_rate < 0 || fault_rate > 1) {
    return make_error(Errc::validation, "fault_rate must be in [0,1]");
  }
  if (heartbeat_interval_s <= 0 || time_scale <= 0) {
    return make_error(Errc::validation, "intervals and time_scale must be positive");
  }
  if (host_id.empty()) return make_error(Errc::validation, "host_id must be set");
  return {};
}

AttrMap AgentCore::slot_attributes(const AttrMap& host_attrs, std::uint32_t vm_count) {
  AttrMap out;
  for (const auto& [name, value] : host_attrs) {
    if (const auto* i = std::get_if<std::int64_t>(&value)) {
      out[name] = *i / static_cast<std::int64_t>(vm_count);
    } else if (const auto* d = std::get_if<double>(&value)) {
      out[name] = *d / vm_count;
    } else {
      out[name] = value;
    }
  }
  return out;
}

AgentCore::AgentCore(AgentConfig config, std::uint64_t boot_epoch,
                     Micros first_contact_at, EventSink events)
    : config_(std::move(config)),
      boot_epoch_(boot_epoch),
      events_(std::move(events)),
      rng_(config_.seed ^ std::hash<std::string>{}(config_.host_id)) {
  slot_attrs_ = slot_attributes(config_.host_attributes, config_.vm_count);
  slots_.reserve(config_.vm_count);
  for (std::uint32_t i = 0; i < config_.vm_count; ++i) {
    SlotState slot;
    slot.vm_id = VmId{config_.host_id, i};
    slots_.push_back(std::move(slot));
  }
  next_contact_at_ = first_contact_at;
}

void AgentCore::emit(Micros now, const char* kind, nlohmann::json fields) {
  if (!events_) return;
  fields["t"] = now;
  fields["event"] = kind;
  events_(fields);
}

void AgentCore::collect_finished(Micros now) {
  for (SlotState& slot : slots_) {
    if (slot.phase != SlotPhase::Executing || slot.finish_at > now) continue;
    if (slot.will_abandon) {
      ++stats_.abandons;
      emit(now, "abandon", {{"vm", slot.vm_id.to_string()}, {"job_id", slot.job->job_id}});
    } else {
      PendingCompletion done;
      done.vm_id = slot.vm_id;
      done.item.job_id = slot.job->job_id;
      done.item.exit_code = 0;
      done.item.end_time = slot.finish_at;
      pending_completions_.push_back(std::move(done));
    }
    slot.phase = SlotPhase::Unclaimed;
    slot.job.reset();
    slot.finish_at = 0;
    slot.will_abandon = false;
  }
}

HeartbeatReport AgentCore::begin_contact(Micros now) {
  collect_finished(now);
  HeartbeatReport report;
  report.host_id = config_.host_id;
  report.boot_epoch = boot_epoch_;
  report.entries.reserve(slots_.size());
  for (const SlotState& slot : slots_) {
    SlotReport entry;
    entry.vm_id = slot.vm_id;
    if (!attrs_delivered_) entry.attributes = slot_attrs_;
    if (slot.phase != SlotPhase::Unclaimed) {
      RunningItem running;
      running.job_id = slot.job->job_id;
      running.phase =
          slot.phase == SlotPhase::Starting ? JobPhase::Starting : JobPhase::Executing;
      entry.running = running;
    }
    report.entries.push_back(std::move(entry));
  }
  // Every pending completion rides this report; the set is acknowledged as a
  // whole when the response arrives (the server handles redelivery).
  in_flight_completions_ = pending_completions_.size();
  for (const PendingCompletion& done : pending_completions_) {
    for (SlotReport& entry : report.entries) {
      if (entry.vm_id == done.vm_id) {
        entry.completed.push_back(done.item);
        break;
      }
    }
  }
  ++stats_.contacts;
  return report;
}

void AgentCore::contact_succeeded(const HeartbeatResponse& response, Micros now,
                                  const AcceptFn& accept) {
  consecutive_failures_ = 0;
  attrs_delivered_ = true;
  stats_.completions_reported += in_flight_completions_;
  pending_completions_.erase(pending_completions_.begin(),
                             pending_completions_.begin() + in_flight_completions_);
  in_flight_completions_ = 0;
  next_contact_at_ = now + config_.heartbeat_us();

  for (const Directive& d : response.directives) {
    auto slot_it = std::find_if(slots_.begin(), slots_.end(), [&d](const SlotState& s) {
      return s.vm_id == d.vm_id;
    });
    if (slot_it == slots_.end()) continue;
    SlotState& slot = *slot_it;
    switch (d.action) {
      case DirectiveAction::None:
        break;
      case DirectiveAction::MatchInfo: {
        if (!d.job.has_value()) break;
        if (slot.phase != SlotPhase::Unclaimed) {
          // Protocol anomaly: an offer for a busy slot is refused locally.
          ++stats_.refused_matchinfo;
          emit(now, "refused_matchinfo",
               {{"vm", slot.vm_id.to_string()}, {"job_id", d.job->job_id}});
          break;
        }
        auto status = accept(d.job->job_id, slot.vm_id);
        if (status.ok() && status.value() == AcceptStatus::Ok) {
          start_job(slot, *d.job, now);
        }
        // STALE (or a failed call): the slot simply stays unclaimed.
        break;
      }
      case DirectiveAction::Release: {
        if (slot.phase != SlotPhase::Unclaimed && d.release_job_id.has_value() &&
            slot.job->job_id == *d.release_job_id) {
          ++stats_.releases;
          emit(now, "release", {{"vm", slot.vm_id.to_string()}, {"job_id", *d.release_job_id}});
          slot.phase = SlotPhase::Unclaimed;
          slot.job.reset();
          slot.finish_at = 0;
          slot.will_abandon = false;
        }
        break;
      }
    }
  }
}

void AgentCore::contact_failed(Micros now) {
  ++stats_.contact_failures;
  in_flight_completions_ = 0;  // nothing acknowledged; redeliver next time
  consecutive_failures_ = std::min(consecutive_failures_ + 1, 6);
  Micros base = std::max<Micros>(config_.heartbeat_us() / 8, 1);
  Micros backoff = base << (consecutive_failures_ - 1);
  next_contact_at_ = now + std::min(backoff, config_.heartbeat_us());
}

void AgentCore::start_job(SlotState& slot, const JobDescriptor& job, Micros now) {
  slot.phase = SlotPhase::Starting;
  slot.job = job;
  ++stats_.jobs_accepted;
  // The starter takes over immediately; the fault draw decides now whether
  // this execution will silently vanish at its end time.
  Micros duration = micros_from_seconds(job.duration_s / config_.time_scale);
  slot.finish_at = now + std::max<Micros>(duration, 1);
  slot.will_abandon =
      config_.fault_rate > 0 &&
      std::uniform_real_distribution<double>(0.0, 1.0)(rng_) < config_.fault_rate;
  slot.phase = SlotPhase::Executing;
  emit(now, "agent_start", {{"vm", slot.vm_id.to_string()}, {"job_id", job.job_id}});
}

Result<VmId> AgentCore::try_claim(const JobDescriptor& job, Micros now) {
  collect_finished(now);
  for (SlotState& slot : slots_) {
    if (slot.phase == SlotPhase::Unclaimed) {
      start_job(slot, job, now);
      return slot.vm_id;
    }
  }
  return make_error(Errc::unavailable, "no free slot on " + config_.host_id);
}

std::vector<CompletedItem> AgentCore::collect_finished_for_push(Micros now) {
  collect_finished(now);
  std::vector<CompletedItem> out;
  out.reserve(pending_completions_.size());
  for (const PendingCompletion& done : pending_completions_) {
    out.push_back(done.item);
  }
  pending_completions_.clear();
  return out;
}

void AgentCore::terminate() { terminated_ = true; }

}  // namespace corral
