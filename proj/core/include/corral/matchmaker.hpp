#pragma once

#include <vector>

#include "corral/model.hpp"

namespace corral {

// Attribute view of a job as seen by expressions: the job's attribute map
// plus builtin `owner` and `duration_s`.
AttrMap job_eval_attrs(const JobRecord& job);

// TRUE iff the job's requirements hold on the machine AND the machine's
// optional `requirements` attribute (an expression string, default true)
// holds for the job. Three-valued: UNDEFINED does not match.
bool mutually_acceptable(const JobRecord& job, const MachineRecord& machine);

// Rank of `machine` for `job`: the job's rank expression coerced to a
// number; UNDEFINED or missing rank counts as 0.
double rank_of(const JobRecord& job, const MachineRecord& machine);

struct MatchPair {
  JobId job_id = 0;
  VmId vm_id;
};

// Greedy FIFO matchmaking over snapshots of idle jobs and unclaimed
// machines: jobs in (submit_time, job_id) order each take the eligible
// machine with the highest rank (ties to the smallest vm_id); every machine
// is used at most once. Deterministic in its inputs, independent of input
// order. Jobs with no eligible machine are skipped.
std::vector<MatchPair> find_matches(std::vector<JobRecord> idle_jobs,
                                    std::vector<MachineRecord> unclaimed,
                                    Micros now);

}  // namespace corral
