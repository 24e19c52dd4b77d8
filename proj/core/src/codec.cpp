#include "corral/codec.hpp"

#include <stdexcept>

namespace corral {

void to_json(json& j, const AttrValue& v) {
  std::visit([&j](const auto& x) { j = x; }, v);
}

void from_json(const json& j, AttrValue& v) {
  switch (j.type()) {
    case json::value_t::number_integer:
    case json::value_t::number_unsigned:
      v = j.get<std::int64_t>();
      return;
    case json::value_t::number_float:
      v = j.get<double>();
      return;
    case json::value_t::boolean:
      v = j.get<bool>();
      return;
    case json::value_t::string:
      v = j.get<std::string>();
      return;
    default:
      throw std::invalid_argument("attribute values must be scalar (int, real, bool, string)");
  }
}

void to_json(json& j, const VmId& v) {
  j = json{{"host_id", v.host_id}, {"slot_index", v.slot_index}};
}

void from_json(const json& j, VmId& v) {
  j.at("host_id").get_to(v.host_id);
  j.at("slot_index").get_to(v.slot_index);
}

void to_json(json& j, const Expression& e) { j = e.text(); }

void from_json(const json& j, Expression& e) {
  auto parsed = Expression::parse(j.get<std::string>());
  if (!parsed.ok()) {
    throw std::invalid_argument("bad expression: " + parsed.error().to_string());
  }
  e = parsed.take();
}

namespace {

template <typename T>
void set_optional(json& j, const char* key, const std::optional<T>& v) {
  if (v.has_value()) j[key] = *v;
}

template <typename T>
void get_optional(const json& j, const char* key, std::optional<T>& v) {
  if (auto it = j.find(key); it != j.end() && !it->is_null()) {
    v = it->get<T>();
  } else {
    v.reset();
  }
}

}  // namespace

void to_json(json& j, const JobRecord& r) {
  j = json{{"job_id", r.job_id},
           {"owner", r.owner},
           {"duration_s", r.duration_s},
           {"requirements", r.requirements},
           {"attributes", r.attributes},
           {"state", r.state},
           {"submit_time", r.submit_time},
           {"retry_count", r.retry_count}};
  set_optional(j, "rank", r.rank);
  set_optional(j, "phase", r.phase);
  if (r.release_requested) j["release_requested"] = true;
  set_optional(j, "submit_token", r.submit_token);
}

void from_json(const json& j, JobRecord& r) {
  j.at("job_id").get_to(r.job_id);
  j.at("owner").get_to(r.owner);
  j.at("duration_s").get_to(r.duration_s);
  j.at("requirements").get_to(r.requirements);
  j.at("attributes").get_to(r.attributes);
  j.at("state").get_to(r.state);
  j.at("submit_time").get_to(r.submit_time);
  j.at("retry_count").get_to(r.retry_count);
  get_optional(j, "rank", r.rank);
  get_optional(j, "phase", r.phase);
  r.release_requested = j.value("release_requested", false);
  get_optional(j, "submit_token", r.submit_token);
}

void to_json(json& j, const MachineRecord& r) {
  j = json{{"vm_id", r.vm_id},
           {"attributes", r.attributes},
           {"last_heartbeat", r.last_heartbeat},
           {"boot_epoch", r.boot_epoch}};
}

void from_json(const json& j, MachineRecord& r) {
  j.at("vm_id").get_to(r.vm_id);
  j.at("attributes").get_to(r.attributes);
  j.at("last_heartbeat").get_to(r.last_heartbeat);
  j.at("boot_epoch").get_to(r.boot_epoch);
}

void to_json(json& j, const MatchRecord& r) {
  j = json{{"job_id", r.job_id},
           {"vm_id", r.vm_id},
           {"created_at", r.created_at},
           {"expires_at", r.expires_at}};
}

void from_json(const json& j, MatchRecord& r) {
  j.at("job_id").get_to(r.job_id);
  j.at("vm_id").get_to(r.vm_id);
  j.at("created_at").get_to(r.created_at);
  j.at("expires_at").get_to(r.expires_at);
}

void to_json(json& j, const RunRecord& r) {
  j = json{{"job_id", r.job_id}, {"vm_id", r.vm_id}, {"started_at", r.started_at}};
}

void from_json(const json& j, RunRecord& r) {
  j.at("job_id").get_to(r.job_id);
  j.at("vm_id").get_to(r.vm_id);
  j.at("started_at").get_to(r.started_at);
}

void to_json(json& j, const HistoryEvent& r) {
  j = json{{"seq", r.seq},
           {"job_id", r.job_id},
           {"kind", r.kind},
           {"timestamp", r.timestamp}};
  set_optional(j, "vm_id", r.vm_id);
  set_optional(j, "exit_code", r.exit_code);
}

void from_json(const json& j, HistoryEvent& r) {
  j.at("seq").get_to(r.seq);
  j.at("job_id").get_to(r.job_id);
  j.at("kind").get_to(r.kind);
  j.at("timestamp").get_to(r.timestamp);
  get_optional(j, "vm_id", r.vm_id);
  get_optional(j, "exit_code", r.exit_code);
}

void to_json(json& j, const RunningItem& r) {
  j = json{{"job_id", r.job_id}, {"phase", r.phase}};
}

void from_json(const json& j, RunningItem& r) {
  j.at("job_id").get_to(r.job_id);
  j.at("phase").get_to(r.phase);
}

void to_json(json& j, const CompletedItem& r) {
  j = json{{"job_id", r.job_id}, {"exit_code", r.exit_code}, {"end_time", r.end_time}};
}

void from_json(const json& j, CompletedItem& r) {
  j.at("job_id").get_to(r.job_id);
  j.at("exit_code").get_to(r.exit_code);
  j.at("end_time").get_to(r.end_time);
}

void to_json(json& j, const SlotReport& r) {
  j = json{{"vm_id", r.vm_id}};
  set_optional(j, "attributes", r.attributes);
  set_optional(j, "running", r.running);
  if (!r.completed.empty()) j["completed"] = r.completed;
}

void from_json(const json& j, SlotReport& r) {
  j.at("vm_id").get_to(r.vm_id);
  get_optional(j, "attributes", r.attributes);
  get_optional(j, "running", r.running);
  if (auto it = j.find("completed"); it != j.end() && !it->is_null()) {
    it->get_to(r.completed);
  } else {
    r.completed.clear();
  }
}

void to_json(json& j, const HeartbeatReport& r) {
  j = json{{"host_id", r.host_id}, {"boot_epoch", r.boot_epoch}, {"entries", r.entries}};
}

void from_json(const json& j, HeartbeatReport& r) {
  j.at("host_id").get_to(r.host_id);
  j.at("boot_epoch").get_to(r.boot_epoch);
  j.at("entries").get_to(r.entries);
}

void to_json(json& j, const JobDescriptor& r) {
  j = json{{"job_id", r.job_id}, {"duration_s", r.duration_s}, {"attributes", r.attributes}};
}

void from_json(const json& j, JobDescriptor& r) {
  j.at("job_id").get_to(r.job_id);
  j.at("duration_s").get_to(r.duration_s);
  j.at("attributes").get_to(r.attributes);
}

void to_json(json& j, const Directive& r) {
  j = json{{"vm_id", r.vm_id}, {"action", r.action}};
  set_optional(j, "job", r.job);
  set_optional(j, "release_job_id", r.release_job_id);
}

void from_json(const json& j, Directive& r) {
  j.at("vm_id").get_to(r.vm_id);
  j.at("action").get_to(r.action);
  get_optional(j, "job", r.job);
  get_optional(j, "release_job_id", r.release_job_id);
}

void to_json(json& j, const HeartbeatResponse& r) {
  j = json{{"directives", r.directives}};
}

void from_json(const json& j, HeartbeatResponse& r) {
  j.at("directives").get_to(r.directives);
}

}  // namespace corral
