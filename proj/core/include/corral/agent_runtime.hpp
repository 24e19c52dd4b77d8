#pragma once

#include <atomic>
#include <filesystem>
#include <memory>
#include <string>
#include <thread>

#include "corral/agent.hpp"

namespace corral {

// Wire-mode agent process body: drives an AgentCore against a real server
// over HTTP on the system clock. With `claim_listen` set the agent also
// serves the push baseline's POST /v1/claim endpoint and reports
// completions by POSTing them back to the server instead of heartbeating.
class AgentRuntime {
 public:
  AgentRuntime(AgentConfig config, std::filesystem::path state_dir,
               std::string claim_listen = {});
  ~AgentRuntime();

  // Blocks until stop() (from a signal handler or another thread).
  Result<void> run();
  void stop();

  std::uint64_t boot_epoch() const { return boot_epoch_; }

 private:
  Result<void> run_pull();
  Result<void> run_push();
  static std::uint64_t bump_boot_epoch(const std::filesystem::path& file);

  AgentConfig config_;
  std::filesystem::path state_dir_;
  std::string claim_listen_;
  std::uint64_t boot_epoch_ = 1;
  std::unique_ptr<AgentCore> core_;
  std::atomic<bool> stopping_{false};
};

}  // namespace corral
