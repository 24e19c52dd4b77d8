#include "corral/matchmaker.hpp"

#include <algorithm>

namespace corral {

AttrMap job_eval_attrs(const JobRecord& job) {
  AttrMap attrs = job.attributes;
  attrs.emplace("owner", job.owner);
  attrs.emplace("duration_s", job.duration_s);
  return attrs;
}

namespace {

// A machine may carry a `requirements` attribute constraining which jobs it
// accepts. It is parsed lazily; an unparsable expression never matches.
bool machine_side_accepts(const AttrMap& job_attrs, const MachineRecord& machine) {
  auto it = machine.attributes.find("requirements");
  if (it == machine.attributes.end()) return true;
  const auto* text = std::get_if<std::string>(&it->second);
  if (text == nullptr) return false;
  auto expr = Expression::parse(*text);
  if (!expr.ok()) return false;
  return expr.value().evaluate(job_attrs, machine.attributes).is_true();
}

}  // namespace

bool mutually_acceptable(const JobRecord& job, const MachineRecord& machine) {
  AttrMap job_attrs = job_eval_attrs(job);
  if (!job.requirements.evaluate(job_attrs, machine.attributes).is_true()) {
    return false;
  }
  return machine_side_accepts(job_attrs, machine);
}

double rank_of(const JobRecord& job, const MachineRecord& machine) {
  if (!job.rank.has_value()) return 0.0;
  return job.rank->evaluate(job_eval_attrs(job), machine.attributes).rank_weight();
}

std::vector<MatchPair> find_matches(std::vector<JobRecord> idle_jobs,
                                    std::vector<MachineRecord> unclaimed,
                                    Micros /*now*/) {
  std::sort(idle_jobs.begin(), idle_jobs.end(),
            [](const JobRecord& a, const JobRecord& b) {
              if (a.submit_time != b.submit_time) return a.submit_time < b.submit_time;
              return a.job_id < b.job_id;
            });
  std::sort(unclaimed.begin(), unclaimed.end(),
            [](const MachineRecord& a, const MachineRecord& b) { return a.vm_id < b.vm_id; });

  std::vector<bool> taken(unclaimed.size(), false);
  size_t remaining = unclaimed.size();
  std::vector<MatchPair> out;
  for (const JobRecord& job : idle_jobs) {
    if (remaining == 0) break;
    AttrMap job_attrs = job_eval_attrs(job);
    int best = -1;
    double best_rank = 0;
    for (size_t i = 0; i < unclaimed.size(); ++i) {
      if (taken[i]) continue;
      const MachineRecord& m = unclaimed[i];
      if (!job.requirements.evaluate(job_attrs, m.attributes).is_true()) continue;
      if (!machine_side_accepts(job_attrs, m)) continue;
      double rank = job.rank ? job.rank->evaluate(job_attrs, m.attributes).rank_weight() : 0.0;
      // Machines are scanned in vm_id order, so strict improvement keeps the
      // smallest vm_id among rank ties.
      if (best < 0 || rank > best_rank) {
        best = static_cast<int>(i);
        best_rank = rank;
      }
    }
    if (best >= 0) {
      taken[best] = true;
      --remaining;
      out.push_back(MatchPair{job.job_id, unclaimed[best].vm_id});
    }
  }
  return out;
}

}  // namespace corral
