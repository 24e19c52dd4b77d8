#pragma once

#include <atomic>
#include <condition_variable>
#include <memory>
#include <string>
#include <thread>

#include "corral/baseline.hpp"
#include "corral/scheduler.hpp"

namespace corral {

// HTTP facade for the scheduler: transforms wire requests into store
// transactions via SchedulerCore and runs the periodic scheduling/expiry
// timers. The timer wakes early when a heartbeat frees capacity.
class HttpService {
 public:
  HttpService(SchedulerCore* core, EventSink events = nullptr);
  ~HttpService();

  // Binds and serves in background threads. A port of 0 picks a free port;
  // the chosen one is returned.
  Result<int> start(const std::string& host, int port);
  void stop();

  int port() const { return port_; }

 private:
  void timer_loop();
  Micros now() const;

  SchedulerCore* core_;
  EventSink events_;
  struct Impl;
  std::unique_ptr<Impl> impl_;
  std::thread server_thread_;
  std::thread timer_thread_;
  std::mutex timer_mu_;
  std::condition_variable timer_cv_;
  std::atomic<bool> stopping_{false};
  int port_ = 0;
};

// HTTP facade for the push baseline: accepts the same submission shape as
// the pull service, receives agent completion reports, and runs the
// single-threaded schedd tick loop.
class BaselineHttpService {
 public:
  BaselineHttpService(BaselineScheduler* schedd, double tick_period_s);
  ~BaselineHttpService();

  Result<int> start(const std::string& host, int port);
  void stop();

 private:
  void tick_loop();

  BaselineScheduler* schedd_;
  double tick_period_s_;
  struct Impl;
  std::unique_ptr<Impl> impl_;
  std::thread server_thread_;
  std::thread tick_thread_;
  std::atomic<bool> stopping_{false};
};

}  // namespace corral
