#pragma once

#include <cstdint>
#include <vector>

#include "corral/result.hpp"

namespace corral {

enum class WorkloadKind { Uniform, Mixed, Pulsed };

struct WorkloadGroup {
  std::uint64_t count = 0;
  double duration_s = 0;
};

struct WorkloadSpec {
  WorkloadKind kind = WorkloadKind::Uniform;
  // Uniform: one group submitted at t=0. Mixed: all groups at t=0, in list
  // order. Pulsed: batch_count batches of batch_size jobs of duration_s,
  // one batch every batch_interval_s.
  std::vector<WorkloadGroup> groups;
  std::uint64_t batch_count = 0;
  std::uint64_t batch_size = 0;
  double batch_interval_s = 0;
  double duration_s = 0;  // pulsed job length

  static WorkloadSpec uniform(std::uint64_t count, double duration_s);
  static WorkloadSpec mixed(std::vector<WorkloadGroup> groups);
  static WorkloadSpec pulsed(std::uint64_t batch_count, std::uint64_t batch_size,
                             double batch_interval_s, double duration_s);

  Result<void> validate() const;
  std::uint64_t total_jobs() const;
  double total_work_s() const;
  double mean_duration_s() const;
};

// One timed submission; times are paper seconds from experiment start.
struct SubmitCall {
  double at_s = 0;
  std::uint64_t count = 0;
  double duration_s = 0;
};

// Deterministic submission plan for a workload.
std::vector<SubmitCall> generate_workload(const WorkloadSpec& spec);

// Scheduling throughput demand of a fully utilized cluster: slots divided by
// mean job length.
double ideal_throughput(std::uint64_t slots, double mean_duration_s);

}  // namespace corral
