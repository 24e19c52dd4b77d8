#include "corral/harness/workload.hpp"

namespace corral {

WorkloadSpec WorkloadSpec::uniform(std::uint64_t count, double duration_s) {
  WorkloadSpec spec;
  spec.kind = WorkloadKind::Uniform;
  spec.groups = {WorkloadGroup{count, duration_s}};
  return spec;
}

WorkloadSpec WorkloadSpec::mixed(std::vector<WorkloadGroup> groups) {
  WorkloadSpec spec;
  spec.kind = WorkloadKind::Mixed;
  spec.groups = std::move(groups);
  return spec;
}

WorkloadSpec WorkloadSpec::pulsed(std::uint64_t batch_count, std::uint64_t batch_size,
                                  double batch_interval_s, double duration_s) {
  WorkloadSpec spec;
  spec.kind = WorkloadKind::Pulsed;
  spec.batch_count = batch_count;
  spec.batch_size = batch_size;
  spec.batch_interval_s = batch_interval_s;
  spec.duration_s = duration_s;
  return spec;
}

Result<void> WorkloadSpec::validate() const {
  if (kind == WorkloadKind::Pulsed) {
    if (batch_interval_s <= 0) {
      return make_error(Errc::validation, "batch_interval must be positive");
    }
    if (!(duration_s > 0)) {
      return make_error(Errc::validation, "durations must be positive");
    }
    return {};
  }
  for (const WorkloadGroup& g : groups) {
    if (!(g.duration_s > 0)) {
      return make_error(Errc::validation, "durations must be positive");
    }
  }
  return {};
}

std::uint64_t WorkloadSpec::total_jobs() const {
  if (kind == WorkloadKind::Pulsed) return batch_count * batch_size;
  std::uint64_t total = 0;
  for (const WorkloadGroup& g : groups) total += g.count;
  return total;
}

double WorkloadSpec::total_work_s() const {
  if (kind == WorkloadKind::Pulsed) {
    return static_cast<double>(batch_count * batch_size) * duration_s;
  }
  double total = 0;
  for (const WorkloadGroup& g : groups) total += static_cast<double>(g.count) * g.duration_s;
  return total;
}

double WorkloadSpec::mean_duration_s() const {
  std::uint64_t jobs = total_jobs();
  return jobs == 0 ? 0 : total_work_s() / static_cast<double>(jobs);
}

std::vector<SubmitCall> generate_workload(const WorkloadSpec& spec) {
  std::vector<SubmitCall> plan;
  if (spec.kind == WorkloadKind::Pulsed) {
    plan.reserve(spec.batch_count);
    for (std::uint64_t k = 0; k < spec.batch_count; ++k) {
      if (spec.batch_size == 0) continue;
      plan.push_back(SubmitCall{static_cast<double>(k) * spec.batch_interval_s,
                                spec.batch_size, spec.duration_s});
    }
    return plan;
  }
  for (const WorkloadGroup& g : spec.groups) {
    if (g.count == 0) continue;
    plan.push_back(SubmitCall{0.0, g.count, g.duration_s});
  }
  return plan;
}

double ideal_throughput(std::uint64_t slots, double mean_duration_s) {
  return static_cast<double>(slots) / mean_duration_s;
}

}  // namespace corral
