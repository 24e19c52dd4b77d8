#include "corral/agent_runtime.hpp"

#include <httplib.h>

#include <fstream>
#include <mutex>

#include "corral/wire.hpp"

namespace corral {

AgentRuntime::AgentRuntime(AgentConfig config, std::filesystem::path state_dir,
                           std::string claim_listen)
    : config_(std::move(config)),
      state_dir_(std::move(state_dir)),
      claim_listen_(std::move(claim_listen)) {}

AgentRuntime::~AgentRuntime() { stop(); }

std::uint64_t AgentRuntime::bump_boot_epoch(const std::filesystem::path& file) {
  std::uint64_t epoch = 0;
  {
    std::ifstream in(file);
    if (in) in >> epoch;
  }
  ++epoch;
  std::ofstream out(file, std::ios::trunc);
  out << epoch << "\n";
  return epoch;
}

Result<void> AgentRuntime::run() {
  if (auto v = config_.validate(); !v.ok()) return v.error();
  std::error_code ec;
  std::filesystem::create_directories(state_dir_, ec);
  boot_epoch_ = bump_boot_epoch(state_dir_ / ("agent-" + config_.host_id + ".epoch"));
  core_ = std::make_unique<AgentCore>(config_, boot_epoch_, steady_now_us());
  return claim_listen_.empty() ? run_pull() : run_push();
}

Result<void> AgentRuntime::run_pull() {
  ServerClient client(config_.server_url);
  AgentCore::AcceptFn accept = [&client](JobId job, const VmId& vm) {
    return client.accept_match(job, vm);
  };
  while (!stopping_) {
    Micros now = steady_now_us();
    if (now < core_->next_contact_at()) {
      Micros wait = std::min<Micros>(core_->next_contact_at() - now, 50'000);
      std::this_thread::sleep_for(std::chrono::microseconds(wait));
      continue;
    }
    HeartbeatReport report = core_->begin_contact(now);
    auto response = client.heartbeat(report);
    if (response.ok()) {
      core_->contact_succeeded(response.value(), steady_now_us(), accept);
    } else {
      core_->contact_failed(steady_now_us());
    }
  }
  return {};
}

Result<void> AgentRuntime::run_push() {
  auto listen = split_listen_address(claim_listen_);
  if (!listen.ok()) return listen.error();

  std::mutex core_mu;
  httplib::Server server;
  server.Post("/v1/claim", [this, &core_mu](const httplib::Request& req,
                                            httplib::Response& res) {
    json body = json::parse(req.body, nullptr, false);
    if (body.is_discarded()) {
      res.status = 400;
      res.set_content(error_body(make_error(Errc::validation, "bad JSON")).dump(),
                      "application/json");
      return;
    }
    ClaimRequest claim = body.get<ClaimRequest>();
    std::lock_guard lock(core_mu);
    auto vm = core_->try_claim(claim.job, steady_now_us());
    if (!vm.ok()) {
      res.status = 409;
      res.set_content(error_body(vm.error()).dump(), "application/json");
      return;
    }
    res.set_content(json{{"vm_id", vm.value()}}.dump(), "application/json");
  });

  int port = listen.value().second;
  int bound = port == 0 ? server.bind_to_any_port(listen.value().first)
                        : (server.bind_to_port(listen.value().first, port) ? port : -1);
  if (bound <= 0) {
    return make_error(Errc::io_error, "cannot bind claim listener " + claim_listen_);
  }
  std::thread server_thread([&server] { server.listen_after_bind(); });

  // Completions go back to the scheduler as explicit reports.
  ServerClient client(config_.server_url);
  std::vector<CompletedItem> backlog;
  while (!stopping_) {
    {
      std::lock_guard lock(core_mu);
      auto finished = core_->collect_finished_for_push(steady_now_us());
      backlog.insert(backlog.end(), finished.begin(), finished.end());
    }
    std::vector<CompletedItem> still_pending;
    for (const CompletedItem& item : backlog) {
      if (!client.post_completion(item.job_id, item.exit_code).ok()) {
        still_pending.push_back(item);
      }
    }
    backlog.swap(still_pending);
    std::this_thread::sleep_for(std::chrono::milliseconds(50));
  }
  server.stop();
  server_thread.join();
  return {};
}

void AgentRuntime::stop() { stopping_ = true; }

}  // namespace corral
