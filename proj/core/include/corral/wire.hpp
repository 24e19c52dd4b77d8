#pragma once

#include <optional>
#include <string>

#include "corral/codec.hpp"
#include "corral/scheduler.hpp"

namespace corral {

// JSON bodies for the HTTP API (field names are the wire contract).

void to_json(json& j, const SubmitRequest& r);
void from_json(const json& j, SubmitRequest& r);

json error_body(const Error& e);

struct ClaimRequest {
  JobDescriptor job;
  std::string report_url;  // where the agent posts the completion
};

void to_json(json& j, const ClaimRequest& r);
void from_json(const json& j, ClaimRequest& r);

// Blocking HTTP client for the scheduler (and baseline) API. Thin wrapper
// over cpp-httplib; every call returns a Result.
class ServerClient {
 public:
  explicit ServerClient(const std::string& base_url);
  ~ServerClient();
  ServerClient(const ServerClient&) = delete;
  ServerClient& operator=(const ServerClient&) = delete;

  Result<std::vector<JobId>> submit(const SubmitRequest& req);
  Result<void> remove_job(JobId id);
  Result<HeartbeatResponse> heartbeat(const HeartbeatReport& report);
  Result<AcceptStatus> accept_match(JobId job_id, const VmId& vm_id);
  Result<json> stats();
  Result<json> get(const std::string& path_and_query);
  // Baseline-only endpoints.
  Result<void> post_completion(JobId job_id, int exit_code);
  // Agent claim endpoint (push model).
  Result<void> claim(const std::string& agent_url, const ClaimRequest& req);

 private:
  Result<json> post_json(const std::string& path, const json& body);

  std::string base_url_;
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

// Parses "host:port" or full "http://host:port"; returns (host, port).
Result<std::pair<std::string, int>> split_listen_address(const std::string& addr);

}  // namespace corral
