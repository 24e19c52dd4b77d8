#include "corral/wire.hpp"

#include <httplib.h>

namespace corral {

void to_json(json& j, const SubmitRequest& r) {
  j = json{{"owner", r.owner},
           {"duration_s", r.duration_s},
           {"count", r.count},
           {"requirements", r.requirements},
           {"attributes", r.attributes}};
  if (r.rank) j["rank"] = *r.rank;
  if (r.idempotency_token) j["idempotency_token"] = *r.idempotency_token;
}

void from_json(const json& j, SubmitRequest& r) {
  j.at("owner").get_to(r.owner);
  j.at("duration_s").get_to(r.duration_s);
  r.count = j.value("count", std::uint64_t{1});
  r.requirements = j.value("requirements", std::string("true"));
  if (auto it = j.find("attributes"); it != j.end() && !it->is_null()) {
    it->get_to(r.attributes);
  }
  if (auto it = j.find("rank"); it != j.end() && !it->is_null()) {
    r.rank = it->get<std::string>();
  } else {
    r.rank.reset();
  }
  if (auto it = j.find("idempotency_token"); it != j.end() && !it->is_null()) {
    r.idempotency_token = it->get<std::string>();
  } else {
    r.idempotency_token.reset();
  }
}

json error_body(const Error& e) {
  return json{{"error", {{"code", errc_name(e.code)}, {"message", e.message}}}};
}

void to_json(json& j, const ClaimRequest& r) {
  j = json{{"job", r.job}, {"report_url", r.report_url}};
}

void from_json(const json& j, ClaimRequest& r) {
  j.at("job").get_to(r.job);
  r.report_url = j.value("report_url", std::string{});
}

Result<std::pair<std::string, int>> split_listen_address(const std::string& addr) {
  std::string rest = addr;
  if (rest.rfind("http://", 0) == 0) rest = rest.substr(7);
  auto colon = rest.rfind(':');
  if (colon == std::string::npos) {
    return make_error(Errc::validation, "listen address must be host:port");
  }
  std::string host = rest.substr(0, colon);
  int port = std::atoi(rest.c_str() + colon + 1);
  if (host.empty() || port < 0 || port > 65535) {
    return make_error(Errc::validation, "bad listen address: " + addr);
  }
  return std::make_pair(host, port);
}

struct ServerClient::Impl {
  explicit Impl(const std::string& url) : cli(url) {
    cli.set_connection_timeout(5, 0);
    cli.set_read_timeout(30, 0);
    cli.set_keep_alive(true);
  }
  httplib::Client cli;
};

ServerClient::ServerClient(const std::string& base_url)
    : base_url_(base_url), impl_(std::make_unique<Impl>(base_url)) {}

ServerClient::~ServerClient() = default;

Result<json> ServerClient::post_json(const std::string& path, const json& body) {
  auto res = impl_->cli.Post(path, body.dump(), "application/json");
  if (!res) {
    return make_error(Errc::unavailable, "no response from " + base_url_ + path);
  }
  json parsed;
  if (!res->body.empty()) {
    parsed = json::parse(res->body, nullptr, false);
    if (parsed.is_discarded()) {
      return make_error(Errc::unavailable, "unparsable response from " + path);
    }
  }
  if (res->status >= 400) {
    std::string message = parsed.contains("error")
                              ? parsed["error"].value("message", res->body)
                              : res->body;
    return make_error(res->status == 404 ? Errc::not_found : Errc::validation, message);
  }
  return parsed;
}

Result<std::vector<JobId>> ServerClient::submit(const SubmitRequest& req) {
  auto res = post_json("/v1/jobs", req);
  if (!res.ok()) return res.error();
  return res.value().at("job_ids").get<std::vector<JobId>>();
}

Result<void> ServerClient::remove_job(JobId id) {
  auto res = impl_->cli.Delete("/v1/jobs/" + std::to_string(id));
  if (!res) return make_error(Errc::unavailable, "no response");
  if (res->status >= 400) {
    return make_error(res->status == 404 ? Errc::not_found : Errc::validation, res->body);
  }
  return {};
}

Result<HeartbeatResponse> ServerClient::heartbeat(const HeartbeatReport& report) {
  auto res = post_json("/v1/heartbeat", report);
  if (!res.ok()) return res.error();
  return res.value().get<HeartbeatResponse>();
}

Result<AcceptStatus> ServerClient::accept_match(JobId job_id, const VmId& vm_id) {
  auto res = post_json("/v1/accept-match", json{{"job_id", job_id}, {"vm_id", vm_id}});
  if (!res.ok()) return res.error();
  std::string status = res.value().value("status", "STALE");
  return status == "OK" ? AcceptStatus::Ok : AcceptStatus::Stale;
}

Result<json> ServerClient::stats() { return get("/v1/stats"); }

Result<json> ServerClient::get(const std::string& path_and_query) {
  auto res = impl_->cli.Get(path_and_query);
  if (!res) return make_error(Errc::unavailable, "no response from " + path_and_query);
  if (res->status >= 400) {
    return make_error(res->status == 404 ? Errc::not_found : Errc::bad_filter, res->body);
  }
  json parsed = json::parse(res->body, nullptr, false);
  if (parsed.is_discarded()) {
    return make_error(Errc::unavailable, "unparsable response");
  }
  return parsed;
}

Result<void> ServerClient::post_completion(JobId job_id, int exit_code) {
  auto res = post_json("/v1/completions",
                       json{{"job_id", job_id}, {"exit_code", exit_code}});
  if (!res.ok()) return res.error();
  return {};
}

Result<void> ServerClient::claim(const std::string& agent_url, const ClaimRequest& req) {
  httplib::Client cli(agent_url);
  cli.set_connection_timeout(5, 0);
  cli.set_read_timeout(10, 0);
  json body = req;
  auto res = cli.Post("/v1/claim", body.dump(), "application/json");
  if (!res) return make_error(Errc::unavailable, "agent unreachable: " + agent_url);
  if (res->status >= 400) {
    return make_error(Errc::unavailable, "claim refused: " + res->body);
  }
  return {};
}

}  // namespace corral
