#include "corral/http_service.hpp"

#include <httplib.h>

#include "corral/wire.hpp"

namespace corral {

namespace {

int status_for(Errc code) {
  switch (code) {
    case Errc::not_found: return 404;
    case Errc::already_terminal: return 409;
    case Errc::validation:
    case Errc::bad_filter:
    case Errc::syntax_error: return 400;
    case Errc::unavailable: return 503;
    default: return 500;
  }
}

void reply_error(httplib::Response& res, const Error& e) {
  res.status = status_for(e.code);
  res.set_content(error_body(e).dump(), "application/json");
}

void reply_json(httplib::Response& res, const json& body) {
  res.set_content(body.dump(), "application/json");
}

template <typename T>
bool parse_body(const httplib::Request& req, httplib::Response& res, T* out) {
  json parsed = json::parse(req.body, nullptr, false);
  if (parsed.is_discarded()) {
    reply_error(res, make_error(Errc::validation, "request body is not valid JSON"));
    return false;
  }
  try {
    parsed.get_to(*out);
  } catch (const std::exception& e) {
    reply_error(res, make_error(Errc::validation, e.what()));
    return false;
  }
  return true;
}

Result<std::optional<JobState>> parse_job_state(const httplib::Request& req) {
  if (!req.has_param("state")) return std::optional<JobState>{};
  std::string s = req.get_param_value("state");
  json j = s;
  JobState state = j.get<JobState>();
  // Unknown names decode to the first enum value; re-encode to verify.
  if (json(state).get<std::string>() != s) {
    return make_error(Errc::bad_filter, "unknown job state: " + s);
  }
  return std::optional<JobState>{state};
}

std::uint64_t param_u64(const httplib::Request& req, const char* name,
                        std::uint64_t fallback) {
  if (!req.has_param(name)) return fallback;
  return std::strtoull(req.get_param_value(name).c_str(), nullptr, 10);
}

}  // namespace

struct HttpService::Impl {
  httplib::Server server;
};

HttpService::HttpService(SchedulerCore* core, EventSink events)
    : core_(core), events_(std::move(events)), impl_(std::make_unique<Impl>()) {}

HttpService::~HttpService() { stop(); }

Micros HttpService::now() const { return steady_now_us(); }

Result<int> HttpService::start(const std::string& host, int port) {
  auto& server = impl_->server;

  server.Post("/v1/jobs", [this](const httplib::Request& req, httplib::Response& res) {
    SubmitRequest submit;
    if (!parse_body(req, res, &submit)) return;
    auto ids = core_->submit_jobs(submit, now());
    if (!ids.ok()) return reply_error(res, ids.error());
    reply_json(res, json{{"job_ids", ids.value()}});
  });

  server.Delete(R"(/v1/jobs/(\d+))", [this](const httplib::Request& req, httplib::Response& res) {
    JobId id = std::strtoull(req.matches[1].str().c_str(), nullptr, 10);
    auto r = core_->remove_job(id, now());
    if (!r.ok()) return reply_error(res, r.error());
    reply_json(res, json{{"status", "ok"}});
  });

  server.Get("/v1/jobs", [this](const httplib::Request& req, httplib::Response& res) {
    auto state = parse_job_state(req);
    if (!state.ok()) return reply_error(res, state.error());
    JobFilter f;
    f.state = state.value();
    if (req.has_param("owner")) f.owner = req.get_param_value("owner");
    f.offset = param_u64(req, "offset", 0);
    f.limit = param_u64(req, "limit", 0);
    reply_json(res, json{{"jobs", core_->query_jobs(f)}});
  });

  server.Get("/v1/machines", [this](const httplib::Request& req, httplib::Response& res) {
    MachineFilter f;
    if (req.has_param("state")) {
      std::string s = req.get_param_value("state");
      json j = s;
      MachineState state = j.get<MachineState>();
      if (json(state).get<std::string>() != s) {
        return reply_error(res, make_error(Errc::bad_filter, "unknown machine state: " + s));
      }
      f.state = state;
    }
    if (req.has_param("host")) f.host_id = req.get_param_value("host");
    f.offset = param_u64(req, "offset", 0);
    f.limit = param_u64(req, "limit", 0);
    json machines = json::array();
    for (const auto& info : core_->query_machines(f)) {
      json row = info.record;
      row["state"] = info.state;
      machines.push_back(std::move(row));
    }
    reply_json(res, json{{"machines", machines}});
  });

  server.Get("/v1/history", [this](const httplib::Request& req, httplib::Response& res) {
    HistoryFilter f;
    if (req.has_param("job_id")) f.job_id = param_u64(req, "job_id", 0);
    if (req.has_param("kind")) {
      std::string s = req.get_param_value("kind");
      json j = s;
      HistoryKind kind = j.get<HistoryKind>();
      if (json(kind).get<std::string>() != s) {
        return reply_error(res, make_error(Errc::bad_filter, "unknown history kind: " + s));
      }
      f.kind = kind;
    }
    f.since = static_cast<Micros>(param_u64(req, "since", 0));
    f.offset = param_u64(req, "offset", 0);
    f.limit = param_u64(req, "limit", 0);
    reply_json(res, json{{"events", core_->query_history(f)}});
  });

  server.Post("/v1/heartbeat", [this](const httplib::Request& req, httplib::Response& res) {
    HeartbeatReport report;
    if (!parse_body(req, res, &report)) return;
    Stopwatch timer;
    Micros t = now();
    auto response = core_->handle_heartbeat(report, t);
    Micros latency = timer.elapsed_us();
    if (!response.ok()) return reply_error(res, response.error());
    if (events_) {
      events_({{"t", t},
               {"event", "heartbeat"},
               {"host", report.host_id},
               {"slots", report.entries.size()},
               {"latency_us", latency}});
    }
    if (core_->take_pass_trigger()) timer_cv_.notify_one();
    reply_json(res, json(response.value()));
  });

  server.Post("/v1/accept-match", [this](const httplib::Request& req, httplib::Response& res) {
    json body = json::parse(req.body, nullptr, false);
    if (body.is_discarded() || !body.contains("job_id") || !body.contains("vm_id")) {
      return reply_error(res, make_error(Errc::validation, "need job_id and vm_id"));
    }
    JobId job_id = body["job_id"].get<JobId>();
    VmId vm_id = body["vm_id"].get<VmId>();
    auto status = core_->accept_match(job_id, vm_id, now());
    if (!status.ok()) return reply_error(res, status.error());
    reply_json(res, json{{"status", status.value() == AcceptStatus::Ok ? "OK" : "STALE"}});
  });

  server.Get("/v1/stats", [this](const httplib::Request&, httplib::Response& res) {
    ServiceStats s = core_->stats();
    reply_json(res, json{{"submitted", s.store.submitted},
                         {"completed", s.store.completed},
                         {"removed", s.store.removed},
                         {"dropped_events", s.store.dropped_events},
                         {"idle", s.store.jobs_idle},
                         {"matched", s.store.jobs_matched},
                         {"running", s.store.jobs_running},
                         {"machines", s.store.machines},
                         {"committed_txns", s.store.committed_txns},
                         {"tuple_ops", s.store.tuple_ops},
                         {"heartbeats", s.heartbeats},
                         {"matches_created", s.matches_created},
                         {"drops", s.drops},
                         {"scheduling_passes", s.scheduling_passes}});
  });

  if (port == 0) {
    port_ = server.bind_to_any_port(host);
    if (port_ <= 0) return make_error(Errc::io_error, "cannot bind " + host);
  } else {
    if (!server.bind_to_port(host, port)) {
      return make_error(Errc::io_error, "cannot bind " + host + ":" + std::to_string(port));
    }
    port_ = port;
  }
  server_thread_ = std::thread([this] { impl_->server.listen_after_bind(); });
  timer_thread_ = std::thread([this] { timer_loop(); });
  return port_;
}

void HttpService::timer_loop() {
  const auto interval = std::chrono::microseconds(core_->config().schedule_us());
  while (!stopping_) {
    {
      std::unique_lock lock(timer_mu_);
      timer_cv_.wait_for(lock, interval, [this] { return stopping_.load(); });
    }
    if (stopping_) break;
    Micros t = now();
    core_->expire_stale(t);
    core_->scheduling_pass(t);
  }
}

void HttpService::stop() {
  bool expected = false;
  if (!stopping_.compare_exchange_strong(expected, true)) return;
  timer_cv_.notify_all();
  impl_->server.stop();
  if (server_thread_.joinable()) server_thread_.join();
  if (timer_thread_.joinable()) timer_thread_.join();
}

// --- Baseline ---------------------------------------------------------------

struct BaselineHttpService::Impl {
  httplib::Server server;
};

BaselineHttpService::BaselineHttpService(BaselineScheduler* schedd, double tick_period_s)
    : schedd_(schedd), tick_period_s_(tick_period_s), impl_(std::make_unique<Impl>()) {}

BaselineHttpService::~BaselineHttpService() { stop(); }

Result<int> BaselineHttpService::start(const std::string& host, int port) {
  auto& server = impl_->server;

  server.Post("/v1/jobs", [this](const httplib::Request& req, httplib::Response& res) {
    SubmitRequest submit;
    if (!parse_body(req, res, &submit)) return;
    auto ids = schedd_->submit_jobs(submit.owner, submit.duration_s, submit.count,
                                    submit.requirements, submit.rank, steady_now_us());
    if (!ids.ok()) return reply_error(res, ids.error());
    reply_json(res, json{{"job_ids", ids.value()}});
  });

  server.Post("/v1/completions", [this](const httplib::Request& req, httplib::Response& res) {
    json body = json::parse(req.body, nullptr, false);
    if (body.is_discarded() || !body.contains("job_id")) {
      return reply_error(res, make_error(Errc::validation, "need job_id"));
    }
    schedd_->enqueue_completion(body["job_id"].get<JobId>(), body.value("exit_code", 0));
    reply_json(res, json{{"status", "ok"}});
  });

  server.Get("/v1/jobs", [this](const httplib::Request& req, httplib::Response& res) {
    auto state = parse_job_state(req);
    if (!state.ok()) return reply_error(res, state.error());
    auto filter_state = state.value();
    json jobs = json::array();
    schedd_->store().scan_jobs([&](const JobRecord& j) {
      if (filter_state.has_value() && j.state != *filter_state) return;
      jobs.push_back(j);
    });
    reply_json(res, json{{"jobs", jobs}});
  });

  server.Get("/v1/stats", [this](const httplib::Request&, httplib::Response& res) {
    BaselineStats s = schedd_->stats();
    StoreCounts c = schedd_->store().counts();
    reply_json(res, json{{"ticks", s.ticks},
                         {"starts", s.starts},
                         {"completions", s.completions},
                         {"queue_length", s.queue_length},
                         {"running", s.running},
                         {"shadows", s.shadows},
                         {"compactions", s.compactions},
                         {"submitted", c.submitted},
                         {"completed", c.completed}});
  });

  int bound;
  if (port == 0) {
    bound = server.bind_to_any_port(host);
    if (bound <= 0) return make_error(Errc::io_error, "cannot bind " + host);
  } else {
    if (!server.bind_to_port(host, port)) {
      return make_error(Errc::io_error, "cannot bind " + host + ":" + std::to_string(port));
    }
    bound = port;
  }
  server_thread_ = std::thread([this] { impl_->server.listen_after_bind(); });
  tick_thread_ = std::thread([this] { tick_loop(); });
  return bound;
}

void BaselineHttpService::tick_loop() {
  const auto period = std::chrono::microseconds(micros_from_seconds(tick_period_s_));
  auto next = std::chrono::steady_clock::now();
  while (!stopping_) {
    schedd_->schedd_tick(steady_now_us());
    next += period;
    auto now = std::chrono::steady_clock::now();
    if (next < now) next = now;  // overloaded ticks run back to back
    while (!stopping_ && std::chrono::steady_clock::now() < next) {
      std::this_thread::sleep_for(std::chrono::milliseconds(2));
    }
  }
}

void BaselineHttpService::stop() {
  bool expected = false;
  if (!stopping_.compare_exchange_strong(expected, true)) return;
  impl_->server.stop();
  if (server_thread_.joinable()) server_thread_.join();
  if (tick_thread_.joinable()) tick_thread_.join();
}

}  // namespace corral
