#include "corral/scheduler.hpp"

#include <algorithm>
#include <set>

#include "corral/codec.hpp"
#include "corral/matchmaker.hpp"

namespace corral {

Result<void> ServiceConfig::validate() const {
  if (heartbeat_interval_s <= 0 || schedule_interval_s <= 0) {
    return make_error(Errc::validation, "intervals must be positive");
  }
  if (match_expiry_intervals < 1 || dead_node_intervals < 1) {
    return make_error(Errc::validation, "expiry interval counts must be >= 1");
  }
  if (time_scale <= 0) {
    return make_error(Errc::validation, "time_scale must be positive");
  }
  return {};
}

SchedulerCore::SchedulerCore(ServiceConfig config, std::unique_ptr<TupleStore> store,
                             EventSink events)
    : config_(std::move(config)), store_(std::move(store)), events_(std::move(events)) {
  next_job_id_ = store_->max_job_id_seen() + 1;
  // Restore idempotency tokens for jobs still in the queue.
  for (const auto& job : store_->select_jobs(
           [](const JobRecord& j) { return j.submit_token.has_value(); })) {
    submit_tokens_[*job.submit_token].push_back(job.job_id);
  }
  ops_at_last_checkpoint_ = store_->counts().tuple_ops;
}

Result<std::unique_ptr<SchedulerCore>> SchedulerCore::create(ServiceConfig config,
                                                             EventSink events) {
  if (auto v = config.validate(); !v.ok()) return v.error();
  StoreOptions opts;
  opts.durability = config.durability;
  opts.deep_validate = config.deep_validate;
  auto store = TupleStore::open(config.journal_dir, opts);
  if (!store.ok()) return store.error();
  return std::unique_ptr<SchedulerCore>(
      new SchedulerCore(std::move(config), store.take(), std::move(events)));
}

void SchedulerCore::emit(Micros now, const char* kind, nlohmann::json fields) {
  if (!events_) return;
  fields["t"] = now;
  fields["event"] = kind;
  events_(fields);
}

void SchedulerCore::maybe_checkpoint() {
  if (config_.checkpoint_every_ops == 0) return;
  std::uint64_t ops = store_->counts().tuple_ops;
  if (ops - ops_at_last_checkpoint_ < config_.checkpoint_every_ops) return;
  ops_at_last_checkpoint_ = ops;
  if (auto w = store_->checkpoint(); w.ok()) {
    store_->prune(w.value());
  }
}

Result<std::vector<JobId>> SchedulerCore::submit_jobs(const SubmitRequest& req, Micros now) {
  if (!(req.duration_s > 0)) {
    return make_error(Errc::validation, "duration_s must be positive");
  }
  if (req.count < 1) {
    return make_error(Errc::validation, "count must be >= 1");
  }
  auto requirements = Expression::parse(req.requirements);
  if (!requirements.ok()) {
    return make_error(Errc::validation,
                      "requirements: " + requirements.error().message);
  }
  std::optional<Expression> rank;
  if (req.rank.has_value()) {
    auto parsed = Expression::parse(*req.rank);
    if (!parsed.ok()) {
      return make_error(Errc::validation, "rank: " + parsed.error().message);
    }
    rank = parsed.take();
  }

  std::lock_guard lock(mu_);
  if (req.idempotency_token.has_value()) {
    if (auto it = submit_tokens_.find(*req.idempotency_token); it != submit_tokens_.end()) {
      return it->second;
    }
  }

  std::vector<JobId> ids;
  std::vector<TupleOp> ops;
  ids.reserve(req.count);
  ops.reserve(req.count * 2);
  for (std::uint64_t i = 0; i < req.count; ++i) {
    JobRecord job;
    job.job_id = next_job_id_++;
    job.owner = req.owner;
    job.duration_s = req.duration_s;
    job.requirements = requirements.value();
    job.rank = rank;
    job.attributes = req.attributes;
    job.state = JobState::Idle;
    job.submit_time = now;
    job.submit_token = req.idempotency_token;
    ids.push_back(job.job_id);
    ops.push_back(TupleOp::insert_job(std::move(job)));
    HistoryEvent ev;
    ev.job_id = ids.back();
    ev.kind = HistoryKind::Submitted;
    ev.timestamp = now;
    ops.push_back(TupleOp::append_history(std::move(ev)));
  }
  if (auto r = store_->execute(std::move(ops)); !r.ok()) {
    next_job_id_ -= req.count;
    return make_error(Errc::unavailable, "submit failed: " + r.error().message);
  }
  if (req.idempotency_token.has_value()) {
    submit_tokens_[*req.idempotency_token] = ids;
  }
  for (JobId id : ids) {
    emit(now, "submit",
         {{"job_id", id}, {"owner", req.owner}, {"duration_s", req.duration_s}});
  }
  if (store_->counts().machines > 0) pass_trigger_ = true;
  maybe_checkpoint();
  return ids;
}

Result<void> SchedulerCore::remove_job(JobId id, Micros now) {
  std::lock_guard lock(mu_);
  auto job = store_->get_job(id);
  if (!job.has_value()) {
    auto last = store_->last_history_kind(id);
    if (last == HistoryKind::Completed || last == HistoryKind::Removed) {
      return make_error(Errc::already_terminal,
                        "job " + std::to_string(id) + " already finished");
    }
    return make_error(Errc::not_found, "job " + std::to_string(id) + " not found");
  }

  if (job->state == JobState::Running) {
    // Deletion happens on the executing slot's next heartbeat, which carries
    // the RELEASE directive.
    if (job->release_requested) return {};
    JobRecord updated = *job;
    updated.release_requested = true;
    auto r = store_->execute({TupleOp::update_job(std::move(updated))});
    if (!r.ok()) return make_error(Errc::unavailable, r.error().message);
    emit(now, "remove_pending", {{"job_id", id}});
    return {};
  }

  auto next = validate_event(job->state, LifecycleEvent::JobRemoved);
  if (!next.ok()) return next.error();
  std::vector<TupleOp> ops;
  if (job->state == JobState::Matched) {
    ops.push_back(TupleOp::delete_match(id));
  }
  ops.push_back(TupleOp::delete_job(id));
  HistoryEvent ev;
  ev.job_id = id;
  ev.kind = HistoryKind::Removed;
  ev.timestamp = now;
  ops.push_back(TupleOp::append_history(std::move(ev)));
  auto r = store_->execute(std::move(ops));
  if (!r.ok()) return make_error(Errc::unavailable, r.error().message);
  emit(now, "remove", {{"job_id", id}, {"from_state", job_state_name(job->state)}});
  maybe_checkpoint();
  return {};
}

Result<void> SchedulerCore::append_drop_ops(std::vector<TupleOp>& ops, const RunRecord& run,
                                            Micros now, const char* reason,
                                            std::vector<nlohmann::json>& pending_events) {
  auto job = store_->get_job(run.job_id);
  if (!job.has_value()) {
    return make_error(Errc::invariant_violation, "run without job");
  }
  auto next = validate_event(job->state, LifecycleEvent::RunDropped);
  if (!next.ok()) return next.error();
  ops.push_back(TupleOp::delete_run(run.job_id));
  JobRecord requeued = *job;
  requeued.state = JobState::Idle;
  requeued.phase.reset();
  requeued.retry_count += 1;
  ops.push_back(TupleOp::update_job(std::move(requeued)));
  HistoryEvent ev;
  ev.job_id = run.job_id;
  ev.vm_id = run.vm_id;
  ev.kind = HistoryKind::Dropped;
  ev.timestamp = now;
  ops.push_back(TupleOp::append_history(std::move(ev)));
  pending_events.push_back({{"event", "drop"},
                            {"t", now},
                            {"job_id", run.job_id},
                            {"vm", run.vm_id.to_string()},
                            {"reason", reason}});
  return {};
}

Result<HeartbeatResponse> SchedulerCore::handle_heartbeat(const HeartbeatReport& report,
                                                          Micros now) {
  // Report well-formedness.
  {
    std::set<VmId> seen;
    for (const auto& entry : report.entries) {
      if (!seen.insert(entry.vm_id).second) {
        return make_error(Errc::validation,
                          "duplicate vm_id in report: " + entry.vm_id.to_string());
      }
      if (entry.vm_id.host_id != report.host_id) {
        return make_error(Errc::validation, "slot host does not match report host");
      }
      if (entry.running.has_value()) {
        for (const auto& done : entry.completed) {
          if (done.job_id == entry.running->job_id) {
            return make_error(Errc::validation,
                              "slot reports a job as both running and completed");
          }
        }
      }
    }
  }

  std::lock_guard lock(mu_);
  ++heartbeats_;
  std::vector<TupleOp> ops;
  std::vector<nlohmann::json> pending_events;
  std::map<VmId, JobId> release_for_vm;
  std::set<JobId> jobs_touched;      // runs resolved by this report
  std::set<JobId> dropped_in_txn;    // requeued inside this transaction
  std::set<JobId> clear_misses;      // liveness confirmed by this report
  std::uint64_t freed_slots = 0;
  std::uint64_t drops_in_txn = 0;
  auto note = [&pending_events, now](const char* kind, nlohmann::json fields) {
    fields["t"] = now;
    fields["event"] = kind;
    pending_events.push_back(std::move(fields));
  };

  // (a) Machine upserts; a boot_epoch change replaces attributes and voids
  // the host's previous matches and runs.
  bool host_restarted = false;
  for (const auto& entry : report.entries) {
    auto existing = store_->get_machine(entry.vm_id);
    MachineRecord rec;
    rec.vm_id = entry.vm_id;
    rec.last_heartbeat = now;
    rec.boot_epoch = report.boot_epoch;
    if (existing.has_value()) {
      bool rebooted = report.boot_epoch != existing->boot_epoch;
      host_restarted = host_restarted || rebooted;
      rec.attributes = entry.attributes.has_value() ? *entry.attributes
                                                    : existing->attributes;
      ops.push_back(TupleOp::update_machine(rec));
      if (rebooted) {
        if (auto run = store_->run_for_vm(entry.vm_id)) {
          if (auto d = append_drop_ops(ops, *run, now, "reboot", pending_events); !d.ok()) {
            return d.error();
          }
          jobs_touched.insert(run->job_id);
          dropped_in_txn.insert(run->job_id);
          ++drops_in_txn;
          ++freed_slots;
        } else if (auto match = store_->match_for_vm(entry.vm_id)) {
          // The offer outlived the agent; return the job to the queue.
          auto job = store_->get_job(match->job_id);
          if (job.has_value()) {
            ops.push_back(TupleOp::delete_match(match->job_id));
            JobRecord back = *job;
            back.state = JobState::Idle;
            ops.push_back(TupleOp::update_job(std::move(back)));
            note("match_expire", {{"job_id", match->job_id},
                                  {"vm", entry.vm_id.to_string()},
                                  {"reason", "reboot"}});
          }
        }
      }
    } else {
      rec.attributes = entry.attributes.has_value() ? *entry.attributes : AttrMap{};
      ops.push_back(TupleOp::insert_machine(rec));
      ++freed_slots;
    }
  }
  if (host_restarted) {
    note("machine_restart", {{"host", report.host_id}, {"boot_epoch", report.boot_epoch}});
  }

  // (b) Completions: delete run and job, record COMPLETED. Unknown or stale
  // completions are acknowledged and logged with no state change.
  for (const auto& entry : report.entries) {
    for (const auto& done : entry.completed) {
      auto run = store_->get_run(done.job_id);
      auto job = store_->get_job(done.job_id);
      if (!run.has_value() || !(run->vm_id == entry.vm_id) || !job.has_value() ||
          jobs_touched.count(done.job_id)) {
        ++stale_completions_;
        note("stale_completion",
             {{"job_id", done.job_id}, {"vm", entry.vm_id.to_string()}});
        continue;
      }
      auto next = validate_event(job->state, LifecycleEvent::RunCompleted);
      if (!next.ok()) return next.error();
      ops.push_back(TupleOp::delete_run(done.job_id));
      ops.push_back(TupleOp::delete_job(done.job_id));
      HistoryEvent ev;
      ev.job_id = done.job_id;
      ev.vm_id = entry.vm_id;
      ev.kind = HistoryKind::Completed;
      ev.exit_code = done.exit_code;
      ev.timestamp = now;
      ops.push_back(TupleOp::append_history(std::move(ev)));
      jobs_touched.insert(done.job_id);
      clear_misses.insert(done.job_id);
      ++freed_slots;
      note("complete", {{"job_id", done.job_id},
                        {"vm", entry.vm_id.to_string()},
                        {"exit_code", done.exit_code}});
    }
  }

  // (c) Running items refresh run liveness and job phase; jobs flagged for
  // removal are deleted here and released below.
  for (const auto& entry : report.entries) {
    if (!entry.running.has_value()) continue;
    const RunningItem& item = *entry.running;
    auto run = store_->get_run(item.job_id);
    if (!run.has_value() || !(run->vm_id == entry.vm_id) || jobs_touched.count(item.job_id)) {
      // This slot is executing something the store does not know about
      // (e.g. the job was requeued after missed reports); stop it.
      release_for_vm[entry.vm_id] = item.job_id;
      note("unknown_running", {{"job_id", item.job_id}, {"vm", entry.vm_id.to_string()}});
      continue;
    }
    auto job = store_->get_job(item.job_id);
    jobs_touched.insert(item.job_id);
    clear_misses.insert(item.job_id);
    if (job->release_requested) {
      release_for_vm[entry.vm_id] = item.job_id;
      ops.push_back(TupleOp::delete_run(item.job_id));
      ops.push_back(TupleOp::delete_job(item.job_id));
      HistoryEvent ev;
      ev.job_id = item.job_id;
      ev.kind = HistoryKind::Removed;
      ev.vm_id = entry.vm_id;
      ev.timestamp = now;
      ops.push_back(TupleOp::append_history(std::move(ev)));
      ++freed_slots;
      note("remove", {{"job_id", item.job_id}, {"from_state", "RUNNING"}});
      continue;
    }
    if (job->phase != item.phase) {
      JobRecord updated = *job;
      updated.phase = item.phase;
      ops.push_back(TupleOp::update_job(std::move(updated)));
    }
  }

  // (d) Runs this host should have reported but did not: after two
  // consecutive silent reports the job is requeued.
  std::vector<JobId> missed_once;
  for (const RunRecord& run : store_->runs_for_host(report.host_id)) {
    if (jobs_touched.count(run.job_id)) continue;
    int prior = 0;
    if (auto it = run_miss_counts_.find(run.job_id); it != run_miss_counts_.end()) {
      prior = it->second;
    }
    if (prior + 1 >= 2) {
      if (auto d = append_drop_ops(ops, run, now, "missed", pending_events); !d.ok()) {
        return d.error();
      }
      jobs_touched.insert(run.job_id);
      dropped_in_txn.insert(run.job_id);
      ++drops_in_txn;
      ++freed_slots;
    } else {
      missed_once.push_back(run.job_id);
    }
  }

  if (!ops.empty()) {
    auto r = store_->execute(std::move(ops));
    if (!r.ok()) return make_error(Errc::unavailable, r.error().message);
  }
  // Soft liveness bookkeeping changes only once the transaction stuck.
  drops_ += drops_in_txn;
  for (JobId id : clear_misses) run_miss_counts_.erase(id);
  for (JobId id : dropped_in_txn) run_miss_counts_.erase(id);
  for (JobId id : missed_once) ++run_miss_counts_[id];
  for (const auto& e : pending_events) {
    if (events_) events_(e);
  }

  // Response: exactly one directive per reported slot, RELEASE dominating,
  // MATCHINFO for slots holding a live match.
  HeartbeatResponse response;
  response.directives.reserve(report.entries.size());
  for (const auto& entry : report.entries) {
    Directive d;
    d.vm_id = entry.vm_id;
    if (auto it = release_for_vm.find(entry.vm_id); it != release_for_vm.end()) {
      d.action = DirectiveAction::Release;
      d.release_job_id = it->second;
      ++releases_sent_;
    } else if (auto match = store_->match_for_vm(entry.vm_id);
               match.has_value() && match->expires_at > now) {
      auto job = store_->get_job(match->job_id);
      if (job.has_value()) {
        d.action = DirectiveAction::MatchInfo;
        JobDescriptor desc;
        desc.job_id = job->job_id;
        desc.duration_s = job->duration_s;
        desc.attributes = job->attributes;
        d.job = std::move(desc);
      }
    }
    response.directives.push_back(std::move(d));
  }

  if (freed_slots > 0 && store_->idle_job_count() > 0) {
    pass_trigger_ = true;
  }
  maybe_checkpoint();
  return response;
}

Result<AcceptStatus> SchedulerCore::accept_match(JobId job_id, const VmId& vm_id,
                                                 Micros now) {
  std::lock_guard lock(mu_);
  // Idempotent retry: the run already exists.
  if (auto run = store_->get_run(job_id); run.has_value() && run->vm_id == vm_id) {
    return AcceptStatus::Ok;
  }
  auto match = store_->get_match(job_id);
  if (!match.has_value() || !(match->vm_id == vm_id)) {
    ++stale_accepts_;
    return AcceptStatus::Stale;
  }
  auto job = store_->get_job(job_id);
  if (!job.has_value()) {
    ++stale_accepts_;
    return AcceptStatus::Stale;
  }
  if (match->expires_at <= now) {
    // Lazily expire: the accept loses, the job goes back to the queue.
    auto next = validate_event(job->state, LifecycleEvent::MatchExpired);
    if (!next.ok()) return next.error();
    std::vector<TupleOp> ops;
    ops.push_back(TupleOp::delete_match(job_id));
    JobRecord back = *job;
    back.state = JobState::Idle;
    ops.push_back(TupleOp::update_job(std::move(back)));
    if (auto r = store_->execute(std::move(ops)); !r.ok()) {
      return make_error(Errc::unavailable, r.error().message);
    }
    emit(now, "match_expire",
         {{"job_id", job_id}, {"vm", vm_id.to_string()}, {"reason", "accept-late"}});
    ++stale_accepts_;
    return AcceptStatus::Stale;
  }

  auto next = validate_event(job->state, LifecycleEvent::MatchAccepted);
  if (!next.ok()) return next.error();
  std::vector<TupleOp> ops;
  ops.push_back(TupleOp::delete_match(job_id));
  RunRecord run;
  run.job_id = job_id;
  run.vm_id = vm_id;
  run.started_at = now;
  ops.push_back(TupleOp::insert_run(std::move(run)));
  JobRecord updated = *job;
  updated.state = JobState::Running;
  updated.phase = JobPhase::Starting;
  ops.push_back(TupleOp::update_job(std::move(updated)));
  HistoryEvent ev;
  ev.job_id = job_id;
  ev.vm_id = vm_id;
  ev.kind = HistoryKind::Started;
  ev.timestamp = now;
  ops.push_back(TupleOp::append_history(std::move(ev)));
  if (auto r = store_->execute(std::move(ops)); !r.ok()) {
    return make_error(Errc::unavailable, r.error().message);
  }
  emit(now, "start", {{"job_id", job_id}, {"vm", vm_id.to_string()}});
  return AcceptStatus::Ok;
}

std::uint64_t SchedulerCore::scheduling_pass(Micros now) {
  std::lock_guard lock(mu_);
  ++scheduling_passes_;
  std::vector<MachineRecord> machines =
      store_->unclaimed_fresh_machines(now - config_.dead_after_us());
  if (machines.empty()) return 0;

  std::uint64_t created = 0;
  std::uint64_t offset = 0;
  std::uint64_t chunk = machines.size() * 2 + 64;
  while (!machines.empty()) {
    std::vector<JobRecord> idle = store_->idle_jobs_in_order(offset, chunk);
    if (idle.empty()) break;
    offset += idle.size();
    chunk *= 2;
    std::vector<MatchPair> pairs = find_matches(std::move(idle), machines, now);
    for (const MatchPair& pair : pairs) {
      auto job = store_->get_job(pair.job_id);
      if (!job.has_value()) continue;
      auto next = validate_event(job->state, LifecycleEvent::MatchCreated);
      if (!next.ok()) continue;
      std::vector<TupleOp> ops;
      MatchRecord match;
      match.job_id = pair.job_id;
      match.vm_id = pair.vm_id;
      match.created_at = now;
      match.expires_at = now + config_.match_expiry_us();
      ops.push_back(TupleOp::insert_match(std::move(match)));
      JobRecord updated = *job;
      updated.state = JobState::Matched;
      ops.push_back(TupleOp::update_job(std::move(updated)));
      HistoryEvent ev;
      ev.job_id = pair.job_id;
      ev.vm_id = pair.vm_id;
      ev.kind = HistoryKind::Matched;
      ev.timestamp = now;
      ops.push_back(TupleOp::append_history(std::move(ev)));
      // A failed pair is skipped; the next pass retries.
      if (store_->execute(std::move(ops)).ok()) {
        ++created;
        ++matches_created_;
        emit(now, "match", {{"job_id", pair.job_id}, {"vm", pair.vm_id.to_string()}});
        machines.erase(std::remove_if(machines.begin(), machines.end(),
                                      [&](const MachineRecord& m) {
                                        return m.vm_id == pair.vm_id;
                                      }),
                       machines.end());
      }
    }
  }
  maybe_checkpoint();
  return created;
}

ExpiryCounts SchedulerCore::expire_stale(Micros now) {
  std::lock_guard lock(mu_);
  ExpiryCounts counts;

  for (const MatchRecord& match : store_->select_matches(
           [now](const MatchRecord& m) { return m.expires_at <= now; })) {
    auto job = store_->get_job(match.job_id);
    if (!job.has_value()) continue;
    auto next = validate_event(job->state, LifecycleEvent::MatchExpired);
    if (!next.ok()) continue;
    std::vector<TupleOp> ops;
    ops.push_back(TupleOp::delete_match(match.job_id));
    JobRecord back = *job;
    back.state = JobState::Idle;
    ops.push_back(TupleOp::update_job(std::move(back)));
    if (store_->execute(std::move(ops)).ok()) {
      ++counts.expired_matches;
      emit(now, "match_expire",
           {{"job_id", match.job_id}, {"vm", match.vm_id.to_string()}, {"reason", "timeout"}});
    }
  }

  Micros dead_cutoff = now - config_.dead_after_us();
  for (const MachineRecord& machine : store_->select_machines(
           [dead_cutoff](const MachineRecord& m) { return m.last_heartbeat <= dead_cutoff; })) {
    std::vector<TupleOp> ops;
    std::vector<nlohmann::json> pending_events;
    bool dropped_run = false;
    if (auto run = store_->run_for_vm(machine.vm_id)) {
      if (auto d = append_drop_ops(ops, *run, now, "dead", pending_events); !d.ok()) continue;
      dropped_run = true;
    } else if (auto match = store_->match_for_vm(machine.vm_id)) {
      auto job = store_->get_job(match->job_id);
      if (job.has_value()) {
        ops.push_back(TupleOp::delete_match(match->job_id));
        JobRecord back = *job;
        back.state = JobState::Idle;
        ops.push_back(TupleOp::update_job(std::move(back)));
        pending_events.push_back({{"event", "match_expire"},
                                  {"t", now},
                                  {"job_id", match->job_id},
                                  {"vm", machine.vm_id.to_string()},
                                  {"reason", "dead"}});
      }
    }
    ops.push_back(TupleOp::delete_machine(machine.vm_id));
    if (store_->execute(std::move(ops)).ok()) {
      ++counts.dead_machines;
      if (dropped_run) {
        ++counts.requeued_drops;
        ++drops_;
      }
      for (const auto& e : pending_events) {
        if (events_) events_(e);
      }
      emit(now, "machine_dead", {{"vm", machine.vm_id.to_string()}});
    }
  }

  if ((counts.expired_matches > 0 || counts.requeued_drops > 0) &&
      store_->idle_job_count() > 0) {
    pass_trigger_ = true;
  }
  return counts;
}

std::vector<JobRecord> SchedulerCore::query_jobs(const JobFilter& f) const {
  std::vector<JobRecord> rows = store_->select_jobs([&f](const JobRecord& j) {
    if (f.state.has_value() && j.state != *f.state) return false;
    if (f.owner.has_value() && j.owner != *f.owner) return false;
    return true;
  });
  // select_jobs scans the primary key map, so rows are already id-ordered.
  if (f.offset > 0) {
    rows.erase(rows.begin(),
               rows.begin() + std::min<std::size_t>(f.offset, rows.size()));
  }
  if (f.limit > 0 && rows.size() > f.limit) rows.resize(f.limit);
  return rows;
}

std::vector<MachineInfo> SchedulerCore::query_machines(const MachineFilter& f) const {
  std::vector<MachineInfo> out;
  for (auto& rec : store_->select_machines([&f](const MachineRecord& m) {
         if (f.host_id.has_value() && m.vm_id.host_id != *f.host_id) return false;
         return true;
       })) {
    MachineInfo info;
    info.state = store_->machine_state(rec.vm_id);
    info.record = std::move(rec);
    if (f.state.has_value() && info.state != *f.state) continue;
    out.push_back(std::move(info));
  }
  if (f.offset > 0) {
    out.erase(out.begin(), out.begin() + std::min<std::size_t>(f.offset, out.size()));
  }
  if (f.limit > 0 && out.size() > f.limit) out.resize(f.limit);
  return out;
}

std::vector<HistoryEvent> SchedulerCore::query_history(const HistoryFilter& f) const {
  std::vector<HistoryEvent> rows = store_->select_history([&f](const HistoryEvent& e) {
    if (f.job_id.has_value() && e.job_id != *f.job_id) return false;
    if (f.kind.has_value() && e.kind != *f.kind) return false;
    if (e.timestamp < f.since) return false;
    return true;
  });
  if (f.offset > 0) {
    rows.erase(rows.begin(),
               rows.begin() + std::min<std::size_t>(f.offset, rows.size()));
  }
  if (f.limit > 0 && rows.size() > f.limit) rows.resize(f.limit);
  return rows;
}

bool SchedulerCore::take_pass_trigger() {
  std::lock_guard lock(mu_);
  bool t = pass_trigger_;
  pass_trigger_ = false;
  return t;
}

ServiceStats SchedulerCore::stats() const {
  std::lock_guard lock(mu_);
  ServiceStats s;
  s.store = store_->counts();
  s.heartbeats = heartbeats_;
  s.matches_created = matches_created_;
  s.drops = drops_;
  s.scheduling_passes = scheduling_passes_;
  s.releases_sent = releases_sent_;
  s.stale_accepts = stale_accepts_;
  s.stale_completions = stale_completions_;
  return s;
}

}  // namespace corral
