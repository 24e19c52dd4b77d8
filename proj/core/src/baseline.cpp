#include "corral/baseline.hpp"

#include <algorithm>
#include <cmath>

#include "corral/matchmaker.hpp"

namespace corral {

JobThrottle::JobThrottle(double rate_per_s, double tick_period_s)
    : rate_(rate_per_s), cap_(1.0 + rate_per_s * tick_period_s) {}

void JobThrottle::begin_tick(Micros now) {
  if (last_accrue_.has_value()) {
    double elapsed = seconds_from_micros(now - *last_accrue_);
    if (elapsed > 0) budget_ = std::min(cap_, budget_ + rate_ * elapsed);
  }
  last_accrue_ = now;
}

int JobThrottle::available() const {
  return static_cast<int>(std::floor(budget_ + 1e-9));
}

bool JobThrottle::take(Micros now) {
  if (available() < 1) return false;
  while (!window_.empty() && window_.front() <= now - 10 * kMicrosPerSecond) {
    window_.pop_front();
  }
  if (static_cast<double>(window_.size()) + 1.0 > rate_ * 10.0 + 1e-9) {
    return false;
  }
  budget_ -= 1.0;
  window_.push_back(now);
  return true;
}

Result<void> BaselineConfig::validate() const {
  if (throttle_rate <= 0) return make_error(Errc::validation, "throttle must be positive");
  if (tick_period_s <= 0) return make_error(Errc::validation, "tick period must be positive");
  if (compact_every < 1) return make_error(Errc::validation, "compact_every must be >= 1");
  return {};
}

BaselineScheduler::BaselineScheduler(BaselineConfig config,
                                     std::unique_ptr<TupleStore> store,
                                     std::shared_ptr<BaselineAgentPool> pool,
                                     EventSink events)
    : config_(std::move(config)),
      store_(std::move(store)),
      pool_(std::move(pool)),
      events_(std::move(events)),
      throttle_(config_.throttle_rate, config_.tick_period_s) {
  next_job_id_ = store_->max_job_id_seen() + 1;
  roster_ = pool_->roster();
  std::sort(roster_.begin(), roster_.end(),
            [](const auto& a, const auto& b) { return a.first < b.first; });
  // Runs that survived recovery keep their shadows.
  for (const auto& run : store_->select_runs([](const RunRecord&) { return true; })) {
    ShadowRecord shadow;
    shadow.job_id = run.job_id;
    shadow.vm_id = run.vm_id;
    shadow.spawn_time = run.started_at;
    shadows_[run.job_id] = shadow;
    busy_slots_.insert(run.vm_id);
  }
}

Result<std::unique_ptr<BaselineScheduler>> BaselineScheduler::create(
    BaselineConfig config, std::shared_ptr<BaselineAgentPool> pool, EventSink events) {
  if (auto v = config.validate(); !v.ok()) return v.error();
  StoreOptions opts;
  opts.durability = config.durability;
  auto store = TupleStore::open(config.journal_dir, opts);
  if (!store.ok()) return store.error();
  return std::unique_ptr<BaselineScheduler>(new BaselineScheduler(
      std::move(config), store.take(), std::move(pool), std::move(events)));
}

void BaselineScheduler::emit(Micros now, const char* kind, nlohmann::json fields) {
  if (!events_) return;
  fields["t"] = now;
  fields["event"] = kind;
  events_(fields);
}

Result<std::vector<JobId>> BaselineScheduler::submit_jobs(
    const std::string& owner, double duration_s, std::uint64_t count,
    const std::string& requirements, const std::optional<std::string>& rank,
    Micros now) {
  if (!(duration_s > 0)) return make_error(Errc::validation, "duration_s must be positive");
  if (count < 1) return make_error(Errc::validation, "count must be >= 1");
  auto req_expr = Expression::parse(requirements);
  if (!req_expr.ok()) return make_error(Errc::validation, req_expr.error().message);
  std::optional<Expression> rank_expr;
  if (rank.has_value()) {
    auto parsed = Expression::parse(*rank);
    if (!parsed.ok()) return make_error(Errc::validation, parsed.error().message);
    rank_expr = parsed.take();
  }
  std::vector<JobId> ids;
  std::vector<TupleOp> ops;
  for (std::uint64_t i = 0; i < count; ++i) {
    JobRecord job;
    job.job_id = next_job_id_++;
    job.owner = owner;
    job.duration_s = duration_s;
    job.requirements = req_expr.value();
    job.rank = rank_expr;
    job.state = JobState::Idle;
    job.submit_time = now;
    ids.push_back(job.job_id);
    ops.push_back(TupleOp::insert_job(std::move(job)));
    HistoryEvent ev;
    ev.job_id = ids.back();
    ev.kind = HistoryKind::Submitted;
    ev.timestamp = now;
    ops.push_back(TupleOp::append_history(std::move(ev)));
  }
  if (auto r = store_->execute(std::move(ops)); !r.ok()) {
    next_job_id_ -= count;
    return make_error(Errc::unavailable, r.error().message);
  }
  return ids;
}

void BaselineScheduler::enqueue_completion(JobId job_id, int exit_code) {
  std::lock_guard lock(inbox_mu_);
  completion_inbox_.emplace_back(job_id, exit_code);
}

void BaselineScheduler::drain_completions(Micros now) {
  std::deque<std::pair<JobId, int>> batch;
  {
    std::lock_guard lock(inbox_mu_);
    batch.swap(completion_inbox_);
  }
  for (const auto& [job_id, exit_code] : batch) {
    handle_completion(job_id, exit_code, now);
  }
}

void BaselineScheduler::handle_completion(JobId job_id, int exit_code, Micros now) {
  auto shadow = shadows_.find(job_id);
  if (shadow == shadows_.end()) {
    // Unknown or duplicate report; idempotent no-op.
    emit(now, "stale_completion", {{"job_id", job_id}});
    return;
  }
  std::vector<TupleOp> ops;
  ops.push_back(TupleOp::delete_run(job_id));
  ops.push_back(TupleOp::delete_job(job_id));
  HistoryEvent ev;
  ev.job_id = job_id;
  ev.vm_id = shadow->second.vm_id;
  ev.kind = HistoryKind::Completed;
  ev.exit_code = exit_code;
  ev.timestamp = now;
  ops.push_back(TupleOp::append_history(std::move(ev)));
  if (!store_->execute(std::move(ops)).ok()) return;
  busy_slots_.erase(shadow->second.vm_id);
  shadows_.erase(shadow);
  ++stats_.completions;
  ++completions_since_compact_;
  emit(now, "complete", {{"job_id", job_id}, {"exit_code", exit_code}});
  maybe_compact();
}

void BaselineScheduler::maybe_compact() {
  if (!config_.compaction_enabled) return;
  if (completions_since_compact_ < config_.compact_every) return;
  completions_since_compact_ = 0;
  // Full rewrite of the persistent queue, inline on this thread; cost grows
  // with queue length, which is part of what the experiment measures.
  if (auto w = store_->checkpoint(); w.ok()) {
    store_->prune(w.value());
    ++stats_.compactions;
  }
}

std::uint64_t BaselineScheduler::schedd_tick(Micros now) {
  ++stats_.ticks;
  throttle_.begin_tick(now);
  drain_completions(now);

  // Phase 1: deliberate full scan of the in-memory queue. Every idle job is
  // evaluated against the free slots (rank forces a full pass over them);
  // only the first few eligible jobs become start candidates, bounded by
  // the current budget plus slack for refused claims.
  struct Candidate {
    JobRecord job;
    VmId vm;
  };
  std::vector<Candidate> candidates;
  const std::size_t want = static_cast<std::size_t>(std::max(throttle_.available(), 0));
  const std::size_t collect_cap = want == 0 ? 0 : want * 2 + 4;
  std::set<VmId> tentative_busy = busy_slots_;
  store_->scan_jobs([&](const JobRecord& job) {
    if (job.state != JobState::Idle) return;
    const AttrMap job_attrs = job_eval_attrs(job);
    int best = -1;
    double best_rank = 0;
    if (config_.scan_matchmaking) {
      for (std::size_t i = 0; i < roster_.size(); ++i) {
        if (tentative_busy.count(roster_[i].first)) continue;
        if (!job.requirements.evaluate(job_attrs, roster_[i].second).is_true()) continue;
        double rank = job.rank
                          ? job.rank->evaluate(job_attrs, roster_[i].second).rank_weight()
                          : 0.0;
        if (best < 0 || rank > best_rank) {
          best = static_cast<int>(i);
          best_rank = rank;
        }
      }
    } else {
      for (std::size_t i = 0; i < roster_.size(); ++i) {
        if (!tentative_busy.count(roster_[i].first)) {
          best = static_cast<int>(i);
          break;
        }
      }
    }
    if (best < 0 || candidates.size() >= collect_cap) return;
    tentative_busy.insert(roster_[best].first);
    candidates.push_back(Candidate{job, roster_[best].first});
  });

  // Phase 2: claim and start up to floor(budget) of the candidates.
  std::uint64_t started = 0;
  for (const Candidate& cand : candidates) {
    if (throttle_.available() < 1) break;
    JobDescriptor desc;
    desc.job_id = cand.job.job_id;
    desc.duration_s = cand.job.duration_s;
    desc.attributes = cand.job.attributes;
    if (auto c = pool_->claim(cand.vm, desc); !c.ok()) {
      // Refused claim: the job stays idle and no budget is consumed.
      ++stats_.claims_refused;
      busy_slots_.insert(cand.vm);
      continue;
    }
    if (!throttle_.take(now)) break;

    std::vector<TupleOp> ops;
    RunRecord run;
    run.job_id = cand.job.job_id;
    run.vm_id = cand.vm;
    run.started_at = now;
    ops.push_back(TupleOp::insert_run(std::move(run)));
    JobRecord updated = cand.job;
    updated.state = JobState::Running;
    updated.phase = JobPhase::Starting;
    ops.push_back(TupleOp::update_job(std::move(updated)));
    HistoryEvent ev;
    ev.job_id = cand.job.job_id;
    ev.vm_id = cand.vm;
    ev.kind = HistoryKind::Started;
    ev.timestamp = now;
    ops.push_back(TupleOp::append_history(std::move(ev)));
    if (!store_->execute(std::move(ops)).ok()) continue;

    ShadowRecord shadow;
    shadow.job_id = cand.job.job_id;
    shadow.vm_id = cand.vm;
    shadow.spawn_time = now;
    shadows_[cand.job.job_id] = shadow;
    busy_slots_.insert(cand.vm);
    ++started;
    ++stats_.starts;
    emit(now, "start", {{"job_id", cand.job.job_id}, {"vm", cand.vm.to_string()}});
  }
  stats_.queue_length = store_->counts().jobs_idle;
  stats_.running = store_->counts().jobs_running;
  stats_.shadows = shadows_.size();
  return started;
}

BaselineStats BaselineScheduler::stats() const {
  BaselineStats s = stats_;
  s.queue_length = store_->counts().jobs_idle;
  s.running = store_->counts().jobs_running;
  s.shadows = shadows_.size();
  return s;
}

}  // namespace corral
