#pragma once

#include <cstdio>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <shared_mutex>
#include <string>
#include <vector>

#include "corral/model.hpp"
#include "corral/result.hpp"

namespace corral {

enum class Relation { Jobs, Machines, Matches, Runs, History };

const char* relation_name(Relation r);

// One mutation inside a transaction. Inserts and updates carry the full
// tuple; deletes carry only the key. Jobs, matches and runs are keyed by
// job_id, machines by vm_id, history by an append sequence assigned at
// commit time.
struct TupleOp {
  enum class Kind { Insert, Update, Delete };

  Kind kind = Kind::Insert;
  Relation relation = Relation::Jobs;

  JobId job_id = 0;  // jobs / matches / runs key
  VmId vm_id;        // machines key
  std::uint64_t seq = 0;  // history key (assigned by the store)

  std::optional<JobRecord> job;
  std::optional<MachineRecord> machine;
  std::optional<MatchRecord> match;
  std::optional<RunRecord> run;
  std::optional<HistoryEvent> history;

  static TupleOp insert_job(JobRecord r);
  static TupleOp update_job(JobRecord r);
  static TupleOp delete_job(JobId id);
  static TupleOp insert_machine(MachineRecord r);
  static TupleOp update_machine(MachineRecord r);
  static TupleOp delete_machine(VmId id);
  static TupleOp insert_match(MatchRecord r);
  static TupleOp delete_match(JobId id);
  static TupleOp insert_run(RunRecord r);
  static TupleOp update_run(RunRecord r);
  static TupleOp delete_run(JobId id);
  static TupleOp append_history(HistoryEvent e);

  const char* kind_name() const;
  // Human-readable one-liner used by the transaction trace.
  std::string describe() const;
};

enum class Durability { Full, Batched };

struct StoreOptions {
  Durability durability = Durability::Full;
  // Re-run the full-scan invariant checker after every transaction.
  bool deep_validate = false;
  // In batched mode, maximum time between physical syncs.
  Micros sync_window_us = 50'000;
};

struct CommitInfo {
  std::uint64_t txn_id = 0;
  std::uint64_t first_lsn = 0;
  std::uint64_t last_lsn = 0;  // lsn of the commit marker
};

struct StoreCounts {
  std::uint64_t jobs_idle = 0;
  std::uint64_t jobs_matched = 0;
  std::uint64_t jobs_running = 0;
  std::uint64_t machines = 0;
  std::uint64_t matches = 0;
  std::uint64_t runs = 0;
  std::uint64_t submitted = 0;
  std::uint64_t completed = 0;
  std::uint64_t removed = 0;
  std::uint64_t dropped_events = 0;
  std::uint64_t committed_txns = 0;
  std::uint64_t tuple_ops = 0;
};

// Journaled, transactional tuple store over {jobs, machines, matches, runs,
// history}. One writer at a time; readers take consistent snapshots. All
// acknowledged transactions survive crash and recovery.
//
// On-disk layout (documented in docs/storage.md):
//   <dir>/journal/segment-<n>.log   length-prefixed CRC32-checked records
//   <dir>/snapshot/state-<lsn>.snap full-state checkpoint
class TupleStore {
 public:
  using TxnObserver =
      std::function<void(std::uint64_t txn_id, const std::vector<TupleOp>& ops)>;

  // Opens (and if necessary recovers) a store rooted at `dir`.
  static Result<std::unique_ptr<TupleStore>> open(const std::filesystem::path& dir,
                                                  StoreOptions options = {});

  ~TupleStore();
  TupleStore(const TupleStore&) = delete;
  TupleStore& operator=(const TupleStore&) = delete;

  // Applies `ops` atomically. On success the transaction is durable per the
  // configured durability mode. On error no state changes.
  Result<CommitInfo> execute(std::vector<TupleOp> ops);

  // --- Snapshot reads -------------------------------------------------
  std::vector<JobRecord> select_jobs(
      const std::function<bool(const JobRecord&)>& pred) const;
  std::vector<MachineRecord> select_machines(
      const std::function<bool(const MachineRecord&)>& pred) const;
  std::vector<MatchRecord> select_matches(
      const std::function<bool(const MatchRecord&)>& pred) const;
  std::vector<RunRecord> select_runs(
      const std::function<bool(const RunRecord&)>& pred) const;
  std::vector<HistoryEvent> select_history(
      const std::function<bool(const HistoryEvent&)>& pred) const;

  std::optional<JobRecord> get_job(JobId id) const;
  std::optional<MachineRecord> get_machine(const VmId& id) const;
  std::optional<MatchRecord> get_match(JobId id) const;
  std::optional<RunRecord> get_run(JobId id) const;
  std::optional<MatchRecord> match_for_vm(const VmId& id) const;
  std::optional<RunRecord> run_for_vm(const VmId& id) const;
  MachineState machine_state(const VmId& id) const;
  std::optional<HistoryKind> last_history_kind(JobId id) const;

  // State lookups used by the scheduling pass and heartbeat handling.
  // Idle jobs in FIFO (submit_time, job_id) order, paged.
  std::vector<JobRecord> idle_jobs_in_order(std::uint64_t offset, std::uint64_t limit) const;
  std::uint64_t idle_job_count() const;
  // Machines with no match/run tuple whose heartbeat is at or after the cutoff.
  std::vector<MachineRecord> unclaimed_fresh_machines(Micros min_last_heartbeat) const;
  std::vector<RunRecord> runs_for_host(const std::string& host_id) const;
  // In-place iteration over the jobs relation in key order, without copying.
  // `fn` must not call back into the store's mutating interface.
  void scan_jobs(const std::function<void(const JobRecord&)>& fn) const;

  StoreCounts counts() const;
  std::uint64_t last_committed_lsn() const;
  // Largest job id that has ever appeared (jobs relation or history); the
  // service allocates ids above this after recovery.
  JobId max_job_id_seen() const;

  // --- Maintenance ------------------------------------------------------
  // Writes a full-state snapshot at the current committed lsn and starts a
  // fresh journal segment. Returns the snapshot watermark lsn.
  Result<std::uint64_t> checkpoint();
  // Removes journal segments and snapshots wholly covered by the watermark.
  Result<void> prune(std::uint64_t watermark_lsn);

  // Full-scan invariant checker (the test-build oracle): referential
  // integrity, state denormalization agreement, exclusivity, history shape
  // and accounting conservation.
  Result<void> validate_full() const;

  // Called after each commit, in commit order, with the applied ops.
  void set_txn_observer(TxnObserver observer);

  // Forces a physical sync (batched mode).
  Result<void> sync();

  const std::filesystem::path& dir() const { return dir_; }

 private:
  struct Relations {
    std::map<JobId, JobRecord> jobs;
    std::map<VmId, MachineRecord> machines;
    std::map<JobId, MatchRecord> matches;
    std::map<JobId, RunRecord> runs;
    std::vector<HistoryEvent> history;

    // Secondary indexes and accounting, rebuilt on recovery.
    std::map<VmId, JobId> match_by_vm;
    std::map<VmId, JobId> run_by_vm;
    std::map<std::pair<Micros, JobId>, JobId> idle_queue;  // FIFO order
    std::set<VmId> unclaimed;
    std::map<JobId, HistoryKind> last_history_kind;
    std::map<JobId, Micros> last_history_ts;
    std::map<JobId, std::uint32_t> drop_events_by_job;
    std::uint64_t jobs_by_state[3] = {0, 0, 0};
    std::uint64_t submitted = 0;
    std::uint64_t completed = 0;
    std::uint64_t removed = 0;
    std::uint64_t dropped_events = 0;
    JobId max_job_id = 0;

    Result<void> apply(const TupleOp& op);
    void index_history(const HistoryEvent& e);
    void index_job_insert(const JobRecord& r);
    void index_job_erase(const JobRecord& r);
    void refresh_unclaimed(const VmId& vm);
  };

  TupleStore(std::filesystem::path dir, StoreOptions options);

  Result<void> recover_locked();
  Result<void> open_segment_locked(std::uint64_t segment_no);
  Result<void> append_record_locked(const std::vector<std::uint8_t>& payload);
  Result<void> commit_to_disk_locked();
  Result<void> validate_txn_locked(const std::vector<TupleOp>& ops) const;
  Result<void> validate_full_internal() const;
  Result<void> write_snapshot_locked(std::uint64_t watermark);
  Result<void> load_snapshot(const std::filesystem::path& file, std::uint64_t* lsn);

  std::filesystem::path dir_;
  StoreOptions options_;

  mutable std::shared_mutex mu_;
  Relations state_;

  std::FILE* segment_file_ = nullptr;
  std::uint64_t segment_no_ = 0;
  // Highest lsn stored in each closed segment; lets prune() decide coverage
  // without re-reading files.
  std::map<std::uint64_t, std::uint64_t> segment_last_lsn_;
  std::uint64_t next_lsn_ = 1;
  std::uint64_t next_txn_id_ = 1;
  std::uint64_t next_history_seq_ = 1;
  std::uint64_t last_committed_lsn_ = 0;
  std::uint64_t committed_txns_ = 0;
  std::uint64_t tuple_ops_ = 0;
  Micros last_sync_us_ = 0;

  TxnObserver observer_;
};

}  // namespace corral
