#include "corral/store.hpp"

#include <unistd.h>
#include <zlib.h>

#include <algorithm>
#include <cstring>
#include <fstream>
#include <set>

#include "corral/codec.hpp"
#include "corral/time.hpp"

namespace corral {

namespace fs = std::filesystem;

namespace {

constexpr char kJournalMagic[4] = {'C', 'R', 'J', 'L'};
constexpr char kSnapshotMagic[4] = {'C', 'R', 'S', 'N'};
constexpr size_t kRecordHeader = 12;  // magic + payload_len + crc32

std::uint32_t crc32_of(const std::uint8_t* data, size_t len) {
  return static_cast<std::uint32_t>(
      ::crc32(::crc32(0L, Z_NULL, 0), reinterpret_cast<const Bytef*>(data),
              static_cast<uInt>(len)));
}

void put_u32(std::uint8_t* out, std::uint32_t v) {
  out[0] = static_cast<std::uint8_t>(v);
  out[1] = static_cast<std::uint8_t>(v >> 8);
  out[2] = static_cast<std::uint8_t>(v >> 16);
  out[3] = static_cast<std::uint8_t>(v >> 24);
}

std::uint32_t get_u32(const std::uint8_t* in) {
  return static_cast<std::uint32_t>(in[0]) | (static_cast<std::uint32_t>(in[1]) << 8) |
         (static_cast<std::uint32_t>(in[2]) << 16) |
         (static_cast<std::uint32_t>(in[3]) << 24);
}

Result<void> sync_fd(std::FILE* f) {
  if (std::fflush(f) != 0 || ::fdatasync(fileno(f)) != 0) {
    return make_error(Errc::io_error, "journal sync failed: " + std::string(strerror(errno)));
  }
  return {};
}

Result<void> sync_directory(const fs::path& dir) {
  std::FILE* d = std::fopen(dir.c_str(), "r");
  if (d == nullptr) return {};  // best effort; not all filesystems allow it
  ::fsync(fileno(d));
  std::fclose(d);
  return {};
}

json op_to_json(const TupleOp& op) {
  json j;
  switch (op.kind) {
    case TupleOp::Kind::Insert: j["k"] = "i"; break;
    case TupleOp::Kind::Update: j["k"] = "u"; break;
    case TupleOp::Kind::Delete: j["k"] = "d"; break;
  }
  j["r"] = relation_name(op.relation);
  switch (op.relation) {
    case Relation::Jobs:
      j["id"] = op.job_id;
      if (op.job) j["v"] = *op.job;
      break;
    case Relation::Machines:
      j["id"] = op.vm_id;
      if (op.machine) j["v"] = *op.machine;
      break;
    case Relation::Matches:
      j["id"] = op.job_id;
      if (op.match) j["v"] = *op.match;
      break;
    case Relation::Runs:
      j["id"] = op.job_id;
      if (op.run) j["v"] = *op.run;
      break;
    case Relation::History:
      j["id"] = op.seq;
      if (op.history) j["v"] = *op.history;
      break;
  }
  return j;
}

Result<TupleOp> op_from_json(const json& j) {
  TupleOp op;
  std::string k = j.at("k").get<std::string>();
  op.kind = k == "i"   ? TupleOp::Kind::Insert
            : k == "u" ? TupleOp::Kind::Update
                       : TupleOp::Kind::Delete;
  std::string rel = j.at("r").get<std::string>();
  if (rel == "jobs") {
    op.relation = Relation::Jobs;
    op.job_id = j.at("id").get<JobId>();
    if (j.contains("v")) op.job = j.at("v").get<JobRecord>();
  } else if (rel == "machines") {
    op.relation = Relation::Machines;
    op.vm_id = j.at("id").get<VmId>();
    if (j.contains("v")) op.machine = j.at("v").get<MachineRecord>();
  } else if (rel == "matches") {
    op.relation = Relation::Matches;
    op.job_id = j.at("id").get<JobId>();
    if (j.contains("v")) op.match = j.at("v").get<MatchRecord>();
  } else if (rel == "runs") {
    op.relation = Relation::Runs;
    op.job_id = j.at("id").get<JobId>();
    if (j.contains("v")) op.run = j.at("v").get<RunRecord>();
  } else if (rel == "history") {
    op.relation = Relation::History;
    op.seq = j.at("id").get<std::uint64_t>();
    if (j.contains("v")) op.history = j.at("v").get<HistoryEvent>();
  } else {
    return make_error(Errc::corrupt_journal, "unknown relation '" + rel + "'");
  }
  return op;
}

struct ParsedRecord {
  std::uint64_t lsn = 0;
  std::uint64_t txn_id = 0;
  bool commit = false;
  std::optional<TupleOp> op;
};

// Decodes one record at `offset`. Returns the record and advances *offset,
// or an error if the bytes there do not form a valid record.
Result<ParsedRecord> parse_record(const std::vector<std::uint8_t>& buf, size_t* offset) {
  size_t off = *offset;
  if (off + kRecordHeader > buf.size()) {
    return make_error(Errc::corrupt_journal, "truncated record header");
  }
  if (std::memcmp(buf.data() + off, kJournalMagic, 4) != 0) {
    return make_error(Errc::corrupt_journal, "bad record magic");
  }
  std::uint32_t len = get_u32(buf.data() + off + 4);
  std::uint32_t crc = get_u32(buf.data() + off + 8);
  if (len > (1u << 30) || off + kRecordHeader + len > buf.size()) {
    return make_error(Errc::corrupt_journal, "truncated record payload");
  }
  const std::uint8_t* payload = buf.data() + off + kRecordHeader;
  if (crc32_of(payload, len) != crc) {
    return make_error(Errc::corrupt_journal, "record checksum mismatch");
  }
  ParsedRecord rec;
  try {
    json j = json::from_cbor(std::vector<std::uint8_t>(payload, payload + len));
    rec.lsn = j.at("lsn").get<std::uint64_t>();
    rec.txn_id = j.at("txn").get<std::uint64_t>();
    if (j.value("commit", false)) {
      rec.commit = true;
    } else {
      auto op = op_from_json(j.at("op"));
      if (!op.ok()) return op.error();
      rec.op = op.take();
    }
  } catch (const std::exception& e) {
    return make_error(Errc::corrupt_journal, std::string("record decode: ") + e.what());
  }
  *offset = off + kRecordHeader + len;
  return rec;
}

// After a bad record, looks for any later decodable record in the same file.
// Finding one means the damage is interior, not a torn tail.
bool valid_record_after(const std::vector<std::uint8_t>& buf, size_t bad_offset) {
  for (size_t off = bad_offset + 1; off + kRecordHeader <= buf.size(); ++off) {
    if (std::memcmp(buf.data() + off, kJournalMagic, 4) != 0) continue;
    size_t probe = off;
    if (parse_record(buf, &probe).ok()) return true;
  }
  return false;
}

Result<std::vector<std::uint8_t>> read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) return make_error(Errc::io_error, "cannot open " + path.string());
  std::vector<std::uint8_t> buf((std::istreambuf_iterator<char>(in)),
                                std::istreambuf_iterator<char>());
  return buf;
}

}  // namespace

const char* relation_name(Relation r) {
  switch (r) {
    case Relation::Jobs: return "jobs";
    case Relation::Machines: return "machines";
    case Relation::Matches: return "matches";
    case Relation::Runs: return "runs";
    case Relation::History: return "history";
  }
  return "?";
}

// --- TupleOp helpers --------------------------------------------------------

TupleOp TupleOp::insert_job(JobRecord r) {
  TupleOp op;
  op.kind = Kind::Insert;
  op.relation = Relation::Jobs;
  op.job_id = r.job_id;
  op.job = std::move(r);
  return op;
}

TupleOp TupleOp::update_job(JobRecord r) {
  TupleOp op = insert_job(std::move(r));
  op.kind = Kind::Update;
  return op;
}

TupleOp TupleOp::delete_job(JobId id) {
  TupleOp op;
  op.kind = Kind::Delete;
  op.relation = Relation::Jobs;
  op.job_id = id;
  return op;
}

TupleOp TupleOp::insert_machine(MachineRecord r) {
  TupleOp op;
  op.kind = Kind::Insert;
  op.relation = Relation::Machines;
  op.vm_id = r.vm_id;
  op.machine = std::move(r);
  return op;
}

TupleOp TupleOp::update_machine(MachineRecord r) {
  TupleOp op = insert_machine(std::move(r));
  op.kind = Kind::Update;
  return op;
}

TupleOp TupleOp::delete_machine(VmId id) {
  TupleOp op;
  op.kind = Kind::Delete;
  op.relation = Relation::Machines;
  op.vm_id = std::move(id);
  return op;
}

TupleOp TupleOp::insert_match(MatchRecord r) {
  TupleOp op;
  op.kind = Kind::Insert;
  op.relation = Relation::Matches;
  op.job_id = r.job_id;
  op.match = std::move(r);
  return op;
}

TupleOp TupleOp::delete_match(JobId id) {
  TupleOp op;
  op.kind = Kind::Delete;
  op.relation = Relation::Matches;
  op.job_id = id;
  return op;
}

TupleOp TupleOp::insert_run(RunRecord r) {
  TupleOp op;
  op.kind = Kind::Insert;
  op.relation = Relation::Runs;
  op.job_id = r.job_id;
  op.run = std::move(r);
  return op;
}

TupleOp TupleOp::update_run(RunRecord r) {
  TupleOp op = insert_run(std::move(r));
  op.kind = Kind::Update;
  return op;
}

TupleOp TupleOp::delete_run(JobId id) {
  TupleOp op;
  op.kind = Kind::Delete;
  op.relation = Relation::Runs;
  op.job_id = id;
  return op;
}

TupleOp TupleOp::append_history(HistoryEvent e) {
  TupleOp op;
  op.kind = Kind::Insert;
  op.relation = Relation::History;
  op.seq = e.seq;
  op.history = std::move(e);
  return op;
}

const char* TupleOp::kind_name() const {
  switch (kind) {
    case Kind::Insert: return "insert";
    case Kind::Update: return "update";
    case Kind::Delete: return "delete";
  }
  return "?";
}

std::string TupleOp::describe() const {
  std::string out = kind_name();
  out += ' ';
  out += relation_name(relation);
  switch (relation) {
    case Relation::Jobs:
      out += " job=" + std::to_string(job_id);
      if (job) {
        out += std::string(" state=") + job_state_name(job->state);
        if (job->phase) out += std::string(" phase=") + job_phase_name(*job->phase);
      }
      break;
    case Relation::Machines:
      out += " vm=" + vm_id.to_string();
      break;
    case Relation::Matches:
      out += " job=" + std::to_string(job_id);
      if (match) out += " vm=" + match->vm_id.to_string();
      break;
    case Relation::Runs:
      out += " job=" + std::to_string(job_id);
      if (run) out += " vm=" + run->vm_id.to_string();
      break;
    case Relation::History:
      if (history) {
        out += std::string(" kind=") + history_kind_name(history->kind) +
               " job=" + std::to_string(history->job_id);
      }
      break;
  }
  return out;
}

// --- Relations --------------------------------------------------------------

void TupleStore::Relations::index_job_insert(const JobRecord& r) {
  ++jobs_by_state[static_cast<int>(r.state)];
  if (r.state == JobState::Idle) {
    idle_queue[{r.submit_time, r.job_id}] = r.job_id;
  }
  max_job_id = std::max(max_job_id, r.job_id);
}

void TupleStore::Relations::index_job_erase(const JobRecord& r) {
  --jobs_by_state[static_cast<int>(r.state)];
  if (r.state == JobState::Idle) {
    idle_queue.erase({r.submit_time, r.job_id});
  }
}

void TupleStore::Relations::refresh_unclaimed(const VmId& vm) {
  if (machines.count(vm) && !match_by_vm.count(vm) && !run_by_vm.count(vm)) {
    unclaimed.insert(vm);
  } else {
    unclaimed.erase(vm);
  }
}

void TupleStore::Relations::index_history(const HistoryEvent& e) {
  last_history_kind[e.job_id] = e.kind;
  last_history_ts[e.job_id] = e.timestamp;
  max_job_id = std::max(max_job_id, e.job_id);
  switch (e.kind) {
    case HistoryKind::Submitted: ++submitted; break;
    case HistoryKind::Completed: ++completed; break;
    case HistoryKind::Removed: ++removed; break;
    case HistoryKind::Dropped:
      ++dropped_events;
      ++drop_events_by_job[e.job_id];
      break;
    default: break;
  }
}

Result<void> TupleStore::Relations::apply(const TupleOp& op) {
  auto conflict = [&op]() {
    return make_error(Errc::key_conflict, "cannot apply " + op.describe());
  };
  switch (op.relation) {
    case Relation::Jobs:
      if (op.kind == TupleOp::Kind::Delete) {
        auto it = jobs.find(op.job_id);
        if (it == jobs.end()) return conflict();
        index_job_erase(it->second);
        jobs.erase(it);
      } else {
        if (!op.job) return conflict();
        auto it = jobs.find(op.job_id);
        if (op.kind == TupleOp::Kind::Insert && it != jobs.end()) return conflict();
        if (op.kind == TupleOp::Kind::Update && it == jobs.end()) return conflict();
        if (it != jobs.end()) {
          index_job_erase(it->second);
          it->second = *op.job;
          index_job_insert(it->second);
        } else {
          index_job_insert(*op.job);
          jobs.emplace(op.job_id, *op.job);
        }
      }
      return {};
    case Relation::Machines:
      if (op.kind == TupleOp::Kind::Delete) {
        if (machines.erase(op.vm_id) == 0) return conflict();
        refresh_unclaimed(op.vm_id);
      } else {
        if (!op.machine) return conflict();
        if (op.kind == TupleOp::Kind::Insert && machines.count(op.vm_id)) return conflict();
        if (op.kind == TupleOp::Kind::Update && !machines.count(op.vm_id)) return conflict();
        machines[op.vm_id] = *op.machine;
        refresh_unclaimed(op.vm_id);
      }
      return {};
    case Relation::Matches:
      if (op.kind == TupleOp::Kind::Delete) {
        auto it = matches.find(op.job_id);
        if (it == matches.end()) return conflict();
        VmId vm = it->second.vm_id;
        match_by_vm.erase(vm);
        matches.erase(it);
        refresh_unclaimed(vm);
      } else {
        if (!op.match || op.kind == TupleOp::Kind::Update) return conflict();
        if (matches.count(op.job_id)) return conflict();
        matches[op.job_id] = *op.match;
        match_by_vm[op.match->vm_id] = op.job_id;
        refresh_unclaimed(op.match->vm_id);
      }
      return {};
    case Relation::Runs:
      if (op.kind == TupleOp::Kind::Delete) {
        auto it = runs.find(op.job_id);
        if (it == runs.end()) return conflict();
        VmId vm = it->second.vm_id;
        run_by_vm.erase(vm);
        runs.erase(it);
        refresh_unclaimed(vm);
      } else {
        if (!op.run) return conflict();
        if (op.kind == TupleOp::Kind::Insert && runs.count(op.job_id)) return conflict();
        if (op.kind == TupleOp::Kind::Update && !runs.count(op.job_id)) return conflict();
        runs[op.job_id] = *op.run;
        run_by_vm[op.run->vm_id] = op.job_id;
        refresh_unclaimed(op.run->vm_id);
      }
      return {};
    case Relation::History:
      if (op.kind != TupleOp::Kind::Insert || !op.history) {
        return make_error(Errc::invariant_violation, "history is append-only");
      }
      history.push_back(*op.history);
      index_history(*op.history);
      return {};
  }
  return conflict();
}

// --- TupleStore -------------------------------------------------------------

TupleStore::TupleStore(fs::path dir, StoreOptions options)
    : dir_(std::move(dir)), options_(options) {}

TupleStore::~TupleStore() {
  if (segment_file_ != nullptr) {
    sync_fd(segment_file_);
    std::fclose(segment_file_);
  }
}

Result<std::unique_ptr<TupleStore>> TupleStore::open(const fs::path& dir,
                                                     StoreOptions options) {
  std::error_code ec;
  fs::create_directories(dir / "journal", ec);
  fs::create_directories(dir / "snapshot", ec);
  if (ec) return make_error(Errc::io_error, "cannot create store directories: " + ec.message());

  auto store = std::unique_ptr<TupleStore>(new TupleStore(dir, options));
  std::unique_lock lock(store->mu_);
  if (auto r = store->recover_locked(); !r.ok()) return r.error();
  return store;
}

Result<void> TupleStore::load_snapshot(const fs::path& file, std::uint64_t* lsn) {
  auto data = read_file(file);
  if (!data.ok()) return data.error();
  const auto& buf = data.value();
  if (buf.size() < kRecordHeader || std::memcmp(buf.data(), kSnapshotMagic, 4) != 0) {
    return make_error(Errc::corrupt_journal, "bad snapshot header: " + file.string());
  }
  std::uint32_t len = get_u32(buf.data() + 4);
  std::uint32_t crc = get_u32(buf.data() + 8);
  if (kRecordHeader + len > buf.size() ||
      crc32_of(buf.data() + kRecordHeader, len) != crc) {
    return make_error(Errc::corrupt_journal, "snapshot checksum mismatch: " + file.string());
  }
  try {
    json j = json::from_cbor(
        std::vector<std::uint8_t>(buf.begin() + kRecordHeader, buf.begin() + kRecordHeader + len));
    Relations state;
    for (const auto& item : j.at("jobs")) {
      auto rec = item.get<JobRecord>();
      state.index_job_insert(rec);
      state.jobs.emplace(rec.job_id, std::move(rec));
    }
    for (const auto& item : j.at("machines")) {
      auto rec = item.get<MachineRecord>();
      state.machines[rec.vm_id] = std::move(rec);
    }
    for (const auto& item : j.at("matches")) {
      auto rec = item.get<MatchRecord>();
      state.match_by_vm[rec.vm_id] = rec.job_id;
      state.matches[rec.job_id] = std::move(rec);
    }
    for (const auto& item : j.at("runs")) {
      auto rec = item.get<RunRecord>();
      state.run_by_vm[rec.vm_id] = rec.job_id;
      state.runs[rec.job_id] = std::move(rec);
    }
    for (const auto& item : j.at("history")) {
      auto rec = item.get<HistoryEvent>();
      state.history.push_back(rec);
      state.index_history(rec);
    }
    for (const auto& [vm, rec] : state.machines) {
      state.refresh_unclaimed(vm);
    }
    *lsn = j.at("lsn").get<std::uint64_t>();
    next_txn_id_ = j.at("next_txn_id").get<std::uint64_t>();
    next_history_seq_ = j.at("next_history_seq").get<std::uint64_t>();
    state_ = std::move(state);
  } catch (const std::exception& e) {
    return make_error(Errc::corrupt_journal, std::string("snapshot decode: ") + e.what());
  }
  return {};
}

Result<void> TupleStore::recover_locked() {
  state_ = Relations{};
  next_lsn_ = 1;
  next_txn_id_ = 1;
  next_history_seq_ = 1;
  last_committed_lsn_ = 0;

  // Newest loadable snapshot wins; unreadable ones are skipped.
  std::uint64_t snapshot_lsn = 0;
  std::vector<std::pair<std::uint64_t, fs::path>> snaps;
  for (const auto& entry : fs::directory_iterator(dir_ / "snapshot")) {
    const std::string name = entry.path().filename().string();
    if (name.rfind("state-", 0) == 0 && name.size() > 11) {
      snaps.emplace_back(std::strtoull(name.c_str() + 6, nullptr, 10), entry.path());
    }
  }
  std::sort(snaps.rbegin(), snaps.rend());
  for (const auto& [lsn, path] : snaps) {
    std::uint64_t loaded = 0;
    if (load_snapshot(path, &loaded).ok()) {
      snapshot_lsn = loaded;
      break;
    }
    state_ = Relations{};
  }
  last_committed_lsn_ = snapshot_lsn;
  next_lsn_ = snapshot_lsn + 1;

  std::vector<std::pair<std::uint64_t, fs::path>> segments;
  for (const auto& entry : fs::directory_iterator(dir_ / "journal")) {
    const std::string name = entry.path().filename().string();
    if (name.rfind("segment-", 0) == 0) {
      segments.emplace_back(std::strtoull(name.c_str() + 8, nullptr, 10), entry.path());
    }
  }
  std::sort(segments.begin(), segments.end());

  std::map<std::uint64_t, std::vector<TupleOp>> pending;
  segment_last_lsn_.clear();
  for (size_t si = 0; si < segments.size(); ++si) {
    const auto& [segno, path] = segments[si];
    auto data = read_file(path);
    if (!data.ok()) return data.error();
    const auto& buf = data.value();
    segment_last_lsn_[segno] = 0;
    size_t offset = 0;
    while (offset < buf.size()) {
      size_t record_start = offset;
      auto rec = parse_record(buf, &offset);
      if (!rec.ok()) {
        // A damaged record is a clean torn tail only if nothing decodable
        // follows it, in this segment or any later one.
        bool interior = valid_record_after(buf, record_start) || si + 1 < segments.size();
        if (interior) {
          return make_error(Errc::corrupt_journal,
                            "interior journal corruption in " + path.string() +
                                " after lsn " + std::to_string(next_lsn_ - 1) + ": " +
                                rec.error().message);
        }
        std::error_code ec;
        fs::resize_file(path, record_start, ec);
        if (ec) {
          return make_error(Errc::io_error, "cannot truncate torn tail: " + ec.message());
        }
        break;
      }
      const ParsedRecord& r = rec.value();
      segment_last_lsn_[segno] = std::max(segment_last_lsn_[segno], r.lsn);
      if (r.lsn < next_lsn_) continue;  // covered by the snapshot
      if (!pending[r.txn_id].empty() || r.commit) {
        // Within a transaction lsns must be contiguous.
        if (r.lsn != next_lsn_) {
          return make_error(Errc::corrupt_journal,
                            "lsn gap inside transaction at lsn " + std::to_string(r.lsn));
        }
      }
      next_lsn_ = r.lsn + 1;
      if (r.commit) {
        auto it = pending.find(r.txn_id);
        if (it != pending.end()) {
          for (const auto& op : it->second) {
            if (auto a = state_.apply(op); !a.ok()) {
              return make_error(Errc::corrupt_journal,
                                "journal replay failed at lsn " + std::to_string(r.lsn) +
                                    ": " + a.error().message);
            }
          }
          pending.erase(it);
        }
        last_committed_lsn_ = r.lsn;
        next_txn_id_ = std::max(next_txn_id_, r.txn_id + 1);
        ++committed_txns_;
      } else {
        pending[r.txn_id].push_back(*r.op);
      }
    }
  }
  // Uncommitted trailing ops are discarded (atomicity).

  for (const auto& e : state_.history) {
    next_history_seq_ = std::max(next_history_seq_, e.seq + 1);
  }

  std::uint64_t next_segment = segments.empty() ? 1 : segments.back().first + 1;
  return open_segment_locked(next_segment);
}

Result<void> TupleStore::open_segment_locked(std::uint64_t segment_no) {
  if (segment_file_ != nullptr) {
    sync_fd(segment_file_);
    std::fclose(segment_file_);
    segment_file_ = nullptr;
  }
  fs::path path = dir_ / "journal" / ("segment-" + std::to_string(segment_no) + ".log");
  segment_file_ = std::fopen(path.c_str(), "ab");
  if (segment_file_ == nullptr) {
    return make_error(Errc::io_error, "cannot open journal segment " + path.string());
  }
  segment_no_ = segment_no;
  sync_directory(dir_ / "journal");
  return {};
}

Result<void> TupleStore::append_record_locked(const std::vector<std::uint8_t>& payload) {
  std::uint8_t header[kRecordHeader];
  std::memcpy(header, kJournalMagic, 4);
  put_u32(header + 4, static_cast<std::uint32_t>(payload.size()));
  put_u32(header + 8, crc32_of(payload.data(), payload.size()));
  if (std::fwrite(header, 1, sizeof(header), segment_file_) != sizeof(header) ||
      std::fwrite(payload.data(), 1, payload.size(), segment_file_) != payload.size()) {
    return make_error(Errc::io_error, "journal append failed");
  }
  return {};
}

Result<void> TupleStore::commit_to_disk_locked() {
  if (options_.durability == Durability::Full) {
    return sync_fd(segment_file_);
  }
  if (std::fflush(segment_file_) != 0) {
    return make_error(Errc::io_error, "journal flush failed");
  }
  Micros now = steady_now_us();
  if (now - last_sync_us_ >= options_.sync_window_us) {
    last_sync_us_ = now;
    return sync_fd(segment_file_);
  }
  return {};
}

// Validates a transaction against an overlay view of the would-be post-
// transaction state, tracking only keys the transaction touches.
Result<void> TupleStore::validate_txn_locked(const std::vector<TupleOp>& ops) const {
  std::map<JobId, std::optional<JobRecord>> jobs;
  std::map<VmId, std::optional<MachineRecord>> machines;
  std::map<JobId, std::optional<MatchRecord>> matches;
  std::map<JobId, std::optional<RunRecord>> runs;
  std::map<VmId, std::optional<JobId>> match_vm;
  std::map<VmId, std::optional<JobId>> run_vm;
  std::vector<const HistoryEvent*> new_history;

  auto job_at = [&](JobId id) -> std::optional<JobRecord> {
    if (auto it = jobs.find(id); it != jobs.end()) return it->second;
    if (auto it = state_.jobs.find(id); it != state_.jobs.end()) return it->second;
    return std::nullopt;
  };
  auto machine_at = [&](const VmId& id) -> std::optional<MachineRecord> {
    if (auto it = machines.find(id); it != machines.end()) return it->second;
    if (auto it = state_.machines.find(id); it != state_.machines.end()) return it->second;
    return std::nullopt;
  };
  auto match_at = [&](JobId id) -> std::optional<MatchRecord> {
    if (auto it = matches.find(id); it != matches.end()) return it->second;
    if (auto it = state_.matches.find(id); it != state_.matches.end()) return it->second;
    return std::nullopt;
  };
  auto run_at = [&](JobId id) -> std::optional<RunRecord> {
    if (auto it = runs.find(id); it != runs.end()) return it->second;
    if (auto it = state_.runs.find(id); it != state_.runs.end()) return it->second;
    return std::nullopt;
  };
  auto match_on_vm = [&](const VmId& id) -> std::optional<JobId> {
    if (auto it = match_vm.find(id); it != match_vm.end()) return it->second;
    if (auto it = state_.match_by_vm.find(id); it != state_.match_by_vm.end()) return it->second;
    return std::nullopt;
  };
  auto run_on_vm = [&](const VmId& id) -> std::optional<JobId> {
    if (auto it = run_vm.find(id); it != run_vm.end()) return it->second;
    if (auto it = state_.run_by_vm.find(id); it != state_.run_by_vm.end()) return it->second;
    return std::nullopt;
  };
  auto conflict = [](const TupleOp& op, const char* why) {
    return make_error(Errc::key_conflict, std::string(why) + ": " + op.describe());
  };
  auto violation = [](const std::string& why) {
    return make_error(Errc::invariant_violation, why);
  };

  for (const TupleOp& op : ops) {
    switch (op.relation) {
      case Relation::Jobs: {
        bool exists = job_at(op.job_id).has_value();
        if (op.kind == TupleOp::Kind::Insert && exists) return conflict(op, "insert on existing key");
        if (op.kind != TupleOp::Kind::Insert && !exists) return conflict(op, "missing key");
        if (op.kind == TupleOp::Kind::Delete) {
          jobs[op.job_id] = std::nullopt;
        } else {
          if (!op.job || op.job->job_id != op.job_id) return conflict(op, "malformed op");
          jobs[op.job_id] = *op.job;
        }
        break;
      }
      case Relation::Machines: {
        bool exists = machine_at(op.vm_id).has_value();
        if (op.kind == TupleOp::Kind::Insert && exists) return conflict(op, "insert on existing key");
        if (op.kind != TupleOp::Kind::Insert && !exists) return conflict(op, "missing key");
        if (op.kind == TupleOp::Kind::Delete) {
          machines[op.vm_id] = std::nullopt;
        } else {
          if (!op.machine || !(op.machine->vm_id == op.vm_id)) return conflict(op, "malformed op");
          machines[op.vm_id] = *op.machine;
        }
        break;
      }
      case Relation::Matches: {
        bool exists = match_at(op.job_id).has_value();
        if (op.kind == TupleOp::Kind::Update) return violation("matches tuples are immutable");
        if (op.kind == TupleOp::Kind::Insert) {
          if (exists) return conflict(op, "insert on existing key");
          if (!op.match || op.match->job_id != op.job_id) return conflict(op, "malformed op");
          matches[op.job_id] = *op.match;
          match_vm[op.match->vm_id] = op.job_id;
        } else {
          if (!exists) return conflict(op, "missing key");
          match_vm[match_at(op.job_id)->vm_id] = std::nullopt;
          matches[op.job_id] = std::nullopt;
        }
        break;
      }
      case Relation::Runs: {
        bool exists = run_at(op.job_id).has_value();
        if (op.kind == TupleOp::Kind::Insert && exists) return conflict(op, "insert on existing key");
        if (op.kind != TupleOp::Kind::Insert && !exists) return conflict(op, "missing key");
        if (op.kind == TupleOp::Kind::Delete) {
          run_vm[run_at(op.job_id)->vm_id] = std::nullopt;
          runs[op.job_id] = std::nullopt;
        } else {
          if (!op.run || op.run->job_id != op.job_id) return conflict(op, "malformed op");
          runs[op.job_id] = *op.run;
          run_vm[op.run->vm_id] = op.job_id;
        }
        break;
      }
      case Relation::History: {
        if (op.kind != TupleOp::Kind::Insert || !op.history) {
          return violation("history is append-only");
        }
        new_history.push_back(&*op.history);
        break;
      }
    }
  }

  // Semantic checks over everything the transaction touched.
  std::set<JobId> touched_jobs;
  for (const auto& [id, _] : jobs) touched_jobs.insert(id);
  for (const auto& [id, _] : matches) touched_jobs.insert(id);
  for (const auto& [id, _] : runs) touched_jobs.insert(id);

  for (JobId id : touched_jobs) {
    auto job = job_at(id);
    auto match = match_at(id);
    auto run = run_at(id);
    if (match && run) {
      return violation("job " + std::to_string(id) + " has both match and run tuples");
    }
    if ((match || run) && !job) {
      return violation("match/run references missing job " + std::to_string(id));
    }
    if (match) {
      if (match->expires_at <= match->created_at) {
        return violation("match for job " + std::to_string(id) + " expires before creation");
      }
      if (!machine_at(match->vm_id)) {
        return violation("match references missing machine " + match->vm_id.to_string());
      }
    }
    if (run && !machine_at(run->vm_id)) {
      return violation("run references missing machine " + run->vm_id.to_string());
    }
    if (job) {
      if (!(job->duration_s > 0)) {
        return violation("job " + std::to_string(id) + " duration must be positive");
      }
      auto derived = derive_job_state(match.has_value(), run.has_value());
      if (!derived.ok()) return derived.error();
      if (job->state != derived.value()) {
        return violation("job " + std::to_string(id) + " state " +
                         job_state_name(job->state) + " disagrees with tuple presence " +
                         job_state_name(derived.value()));
      }
      if (job->phase.has_value() != (job->state == JobState::Running)) {
        return violation("job " + std::to_string(id) + " phase must be set exactly when running");
      }
      std::uint32_t drops = 0;
      if (auto it = state_.drop_events_by_job.find(id); it != state_.drop_events_by_job.end()) {
        drops = it->second;
      }
      for (const auto* e : new_history) {
        if (e->job_id == id && e->kind == HistoryKind::Dropped) ++drops;
      }
      if (job->retry_count != drops) {
        return violation("job " + std::to_string(id) + " retry_count " +
                         std::to_string(job->retry_count) + " != drop events " +
                         std::to_string(drops));
      }
    }
  }

  // A machine cannot be deleted while matches or runs still reference it.
  for (const auto& [vm, rec] : machines) {
    if (!rec.has_value()) {
      if (match_on_vm(vm) || run_on_vm(vm)) {
        return violation("machine " + vm.to_string() + " deleted while referenced");
      }
    }
  }
  // Slot exclusivity across the final view.
  for (const auto& [vm, job] : match_vm) {
    if (job && run_on_vm(vm)) {
      return violation("machine " + vm.to_string() + " has both match and run tuples");
    }
  }
  for (const auto& [vm, job] : run_vm) {
    if (job && match_on_vm(vm)) {
      return violation("machine " + vm.to_string() + " has both match and run tuples");
    }
  }

  // History stream shape per job.
  std::map<JobId, HistoryKind> last_kind;
  std::map<JobId, Micros> last_ts;
  for (const auto* e : new_history) {
    HistoryKind prior_kind;
    bool has_prior = false;
    if (auto it = last_kind.find(e->job_id); it != last_kind.end()) {
      prior_kind = it->second;
      has_prior = true;
    } else if (auto it2 = state_.last_history_kind.find(e->job_id);
               it2 != state_.last_history_kind.end()) {
      prior_kind = it2->second;
      has_prior = true;
    }
    if (has_prior &&
        (prior_kind == HistoryKind::Completed || prior_kind == HistoryKind::Removed)) {
      return violation("history event after terminal state for job " +
                       std::to_string(e->job_id));
    }
    if (!has_prior && e->kind != HistoryKind::Submitted) {
      return violation("first history event for job " + std::to_string(e->job_id) +
                       " must be SUBMITTED");
    }
    Micros prior_ts = INT64_MIN;
    if (auto it = last_ts.find(e->job_id); it != last_ts.end()) {
      prior_ts = it->second;
    } else if (auto it2 = state_.last_history_ts.find(e->job_id);
               it2 != state_.last_history_ts.end()) {
      prior_ts = it2->second;
    }
    if (e->timestamp < prior_ts) {
      return violation("history timestamps must be nondecreasing for job " +
                       std::to_string(e->job_id));
    }
    if ((e->kind == HistoryKind::Completed) != e->exit_code.has_value()) {
      return violation("exit_code present iff history kind is COMPLETED");
    }
    last_kind[e->job_id] = e->kind;
    last_ts[e->job_id] = e->timestamp;
  }

  return {};
}

Result<CommitInfo> TupleStore::execute(std::vector<TupleOp> ops) {
  std::unique_lock lock(mu_);
  if (segment_file_ == nullptr) {
    return make_error(Errc::unavailable, "store is closed");
  }
  if (auto v = validate_txn_locked(ops); !v.ok()) return v.error();

  const std::uint64_t txn_id = next_txn_id_;
  const std::uint64_t first_lsn = next_lsn_;
  const std::uint64_t saved_history_seq = next_history_seq_;
  long pre_offset = std::ftell(segment_file_);

  auto fail_io = [&](Error e) -> Result<CommitInfo> {
    next_lsn_ = first_lsn;
    next_history_seq_ = saved_history_seq;
    if (pre_offset >= 0) {
      std::fflush(segment_file_);
      if (::ftruncate(fileno(segment_file_), pre_offset) == 0) {
        std::fseek(segment_file_, 0, SEEK_END);
      }
    }
    return e;
  };

  for (TupleOp& op : ops) {
    if (op.relation == Relation::History) {
      op.seq = next_history_seq_++;
      op.history->seq = op.seq;
    }
    json j{{"lsn", next_lsn_}, {"txn", txn_id}, {"op", op_to_json(op)}};
    std::vector<std::uint8_t> payload = json::to_cbor(j);
    if (auto a = append_record_locked(payload); !a.ok()) return fail_io(a.error());
    ++next_lsn_;
  }
  json commit{{"lsn", next_lsn_}, {"txn", txn_id}, {"commit", true}};
  if (auto a = append_record_locked(json::to_cbor(commit)); !a.ok()) {
    return fail_io(a.error());
  }
  const std::uint64_t commit_lsn = next_lsn_++;
  if (auto s = commit_to_disk_locked(); !s.ok()) return fail_io(s.error());

  for (const TupleOp& op : ops) {
    auto a = state_.apply(op);
    // Validation guarantees applicability; a failure here is a logic bug.
    if (!a.ok()) {
      return make_error(Errc::invariant_violation,
                        "validated op failed to apply: " + a.error().message);
    }
  }
  last_committed_lsn_ = commit_lsn;
  ++next_txn_id_;
  ++committed_txns_;
  tuple_ops_ += ops.size();

  if (observer_) observer_(txn_id, ops);

  if (options_.deep_validate) {
    if (auto v = validate_full_internal(); !v.ok()) return v.error();
  }
  return CommitInfo{txn_id, first_lsn, commit_lsn};
}

// --- Reads ------------------------------------------------------------------

std::vector<JobRecord> TupleStore::select_jobs(
    const std::function<bool(const JobRecord&)>& pred) const {
  std::shared_lock lock(mu_);
  std::vector<JobRecord> out;
  for (const auto& [_, rec] : state_.jobs) {
    if (pred(rec)) out.push_back(rec);
  }
  return out;
}

std::vector<MachineRecord> TupleStore::select_machines(
    const std::function<bool(const MachineRecord&)>& pred) const {
  std::shared_lock lock(mu_);
  std::vector<MachineRecord> out;
  for (const auto& [_, rec] : state_.machines) {
    if (pred(rec)) out.push_back(rec);
  }
  return out;
}

std::vector<MatchRecord> TupleStore::select_matches(
    const std::function<bool(const MatchRecord&)>& pred) const {
  std::shared_lock lock(mu_);
  std::vector<MatchRecord> out;
  for (const auto& [_, rec] : state_.matches) {
    if (pred(rec)) out.push_back(rec);
  }
  return out;
}

std::vector<RunRecord> TupleStore::select_runs(
    const std::function<bool(const RunRecord&)>& pred) const {
  std::shared_lock lock(mu_);
  std::vector<RunRecord> out;
  for (const auto& [_, rec] : state_.runs) {
    if (pred(rec)) out.push_back(rec);
  }
  return out;
}

std::vector<HistoryEvent> TupleStore::select_history(
    const std::function<bool(const HistoryEvent&)>& pred) const {
  std::shared_lock lock(mu_);
  std::vector<HistoryEvent> out;
  for (const auto& rec : state_.history) {
    if (pred(rec)) out.push_back(rec);
  }
  return out;
}

std::optional<JobRecord> TupleStore::get_job(JobId id) const {
  std::shared_lock lock(mu_);
  if (auto it = state_.jobs.find(id); it != state_.jobs.end()) return it->second;
  return std::nullopt;
}

std::optional<MachineRecord> TupleStore::get_machine(const VmId& id) const {
  std::shared_lock lock(mu_);
  if (auto it = state_.machines.find(id); it != state_.machines.end()) return it->second;
  return std::nullopt;
}

std::optional<MatchRecord> TupleStore::get_match(JobId id) const {
  std::shared_lock lock(mu_);
  if (auto it = state_.matches.find(id); it != state_.matches.end()) return it->second;
  return std::nullopt;
}

std::optional<RunRecord> TupleStore::get_run(JobId id) const {
  std::shared_lock lock(mu_);
  if (auto it = state_.runs.find(id); it != state_.runs.end()) return it->second;
  return std::nullopt;
}

std::optional<MatchRecord> TupleStore::match_for_vm(const VmId& id) const {
  std::shared_lock lock(mu_);
  if (auto it = state_.match_by_vm.find(id); it != state_.match_by_vm.end()) {
    return state_.matches.at(it->second);
  }
  return std::nullopt;
}

std::optional<RunRecord> TupleStore::run_for_vm(const VmId& id) const {
  std::shared_lock lock(mu_);
  if (auto it = state_.run_by_vm.find(id); it != state_.run_by_vm.end()) {
    return state_.runs.at(it->second);
  }
  return std::nullopt;
}

MachineState TupleStore::machine_state(const VmId& id) const {
  std::shared_lock lock(mu_);
  return derive_machine_state(state_.match_by_vm.count(id) > 0,
                              state_.run_by_vm.count(id) > 0);
}

std::optional<HistoryKind> TupleStore::last_history_kind(JobId id) const {
  std::shared_lock lock(mu_);
  if (auto it = state_.last_history_kind.find(id); it != state_.last_history_kind.end()) {
    return it->second;
  }
  return std::nullopt;
}

std::vector<JobRecord> TupleStore::idle_jobs_in_order(std::uint64_t offset,
                                                      std::uint64_t limit) const {
  std::shared_lock lock(mu_);
  std::vector<JobRecord> out;
  auto it = state_.idle_queue.begin();
  for (std::uint64_t i = 0; i < offset && it != state_.idle_queue.end(); ++i) ++it;
  while (it != state_.idle_queue.end() && out.size() < limit) {
    out.push_back(state_.jobs.at(it->second));
    ++it;
  }
  return out;
}

std::uint64_t TupleStore::idle_job_count() const {
  std::shared_lock lock(mu_);
  return state_.jobs_by_state[static_cast<int>(JobState::Idle)];
}

std::vector<MachineRecord> TupleStore::unclaimed_fresh_machines(
    Micros min_last_heartbeat) const {
  std::shared_lock lock(mu_);
  std::vector<MachineRecord> out;
  for (const VmId& vm : state_.unclaimed) {
    const MachineRecord& rec = state_.machines.at(vm);
    if (rec.last_heartbeat >= min_last_heartbeat) out.push_back(rec);
  }
  return out;
}

std::vector<RunRecord> TupleStore::runs_for_host(const std::string& host_id) const {
  std::shared_lock lock(mu_);
  std::vector<RunRecord> out;
  for (auto it = state_.run_by_vm.lower_bound(VmId{host_id, 0});
       it != state_.run_by_vm.end() && it->first.host_id == host_id; ++it) {
    out.push_back(state_.runs.at(it->second));
  }
  return out;
}

void TupleStore::scan_jobs(const std::function<void(const JobRecord&)>& fn) const {
  std::shared_lock lock(mu_);
  for (const auto& [_, rec] : state_.jobs) {
    fn(rec);
  }
}

StoreCounts TupleStore::counts() const {
  std::shared_lock lock(mu_);
  StoreCounts c;
  c.jobs_idle = state_.jobs_by_state[static_cast<int>(JobState::Idle)];
  c.jobs_matched = state_.jobs_by_state[static_cast<int>(JobState::Matched)];
  c.jobs_running = state_.jobs_by_state[static_cast<int>(JobState::Running)];
  c.machines = state_.machines.size();
  c.matches = state_.matches.size();
  c.runs = state_.runs.size();
  c.submitted = state_.submitted;
  c.completed = state_.completed;
  c.removed = state_.removed;
  c.dropped_events = state_.dropped_events;
  c.committed_txns = committed_txns_;
  c.tuple_ops = tuple_ops_;
  return c;
}

std::uint64_t TupleStore::last_committed_lsn() const {
  std::shared_lock lock(mu_);
  return last_committed_lsn_;
}

JobId TupleStore::max_job_id_seen() const {
  std::shared_lock lock(mu_);
  return state_.max_job_id;
}

// --- Maintenance ------------------------------------------------------------

Result<void> TupleStore::write_snapshot_locked(std::uint64_t watermark) {
  json j;
  j["lsn"] = watermark;
  j["next_txn_id"] = next_txn_id_;
  j["next_history_seq"] = next_history_seq_;
  json jobs = json::array(), machines = json::array(), matches = json::array(),
       runs = json::array(), history = json::array();
  for (const auto& [_, rec] : state_.jobs) jobs.push_back(rec);
  for (const auto& [_, rec] : state_.machines) machines.push_back(rec);
  for (const auto& [_, rec] : state_.matches) matches.push_back(rec);
  for (const auto& [_, rec] : state_.runs) runs.push_back(rec);
  for (const auto& rec : state_.history) history.push_back(rec);
  j["jobs"] = std::move(jobs);
  j["machines"] = std::move(machines);
  j["matches"] = std::move(matches);
  j["runs"] = std::move(runs);
  j["history"] = std::move(history);

  std::vector<std::uint8_t> payload = json::to_cbor(j);
  fs::path final_path =
      dir_ / "snapshot" / ("state-" + std::to_string(watermark) + ".snap");
  fs::path tmp_path = final_path;
  tmp_path += ".tmp";

  std::FILE* f = std::fopen(tmp_path.c_str(), "wb");
  if (f == nullptr) return make_error(Errc::io_error, "cannot create snapshot temp file");
  std::uint8_t header[kRecordHeader];
  std::memcpy(header, kSnapshotMagic, 4);
  put_u32(header + 4, static_cast<std::uint32_t>(payload.size()));
  put_u32(header + 8, crc32_of(payload.data(), payload.size()));
  bool ok = std::fwrite(header, 1, sizeof(header), f) == sizeof(header) &&
            std::fwrite(payload.data(), 1, payload.size(), f) == payload.size() &&
            std::fflush(f) == 0 && ::fdatasync(fileno(f)) == 0;
  std::fclose(f);
  if (!ok) {
    std::error_code ec;
    fs::remove(tmp_path, ec);
    return make_error(Errc::io_error, "snapshot write failed");
  }
  std::error_code ec;
  fs::rename(tmp_path, final_path, ec);
  if (ec) {
    fs::remove(tmp_path, ec);
    return make_error(Errc::io_error, "snapshot rename failed");
  }
  sync_directory(dir_ / "snapshot");
  return {};
}

Result<std::uint64_t> TupleStore::checkpoint() {
  std::unique_lock lock(mu_);
  const std::uint64_t watermark = last_committed_lsn_;
  if (auto w = write_snapshot_locked(watermark); !w.ok()) return w.error();
  segment_last_lsn_[segment_no_] = watermark;
  if (auto r = open_segment_locked(segment_no_ + 1); !r.ok()) return r.error();
  segment_last_lsn_[segment_no_] = 0;
  return watermark;
}

Result<void> TupleStore::prune(std::uint64_t watermark_lsn) {
  std::unique_lock lock(mu_);
  std::error_code ec;
  for (const auto& entry : fs::directory_iterator(dir_ / "journal")) {
    const std::string name = entry.path().filename().string();
    if (name.rfind("segment-", 0) != 0) continue;
    std::uint64_t segno = std::strtoull(name.c_str() + 8, nullptr, 10);
    if (segno == segment_no_) continue;
    auto it = segment_last_lsn_.find(segno);
    if (it != segment_last_lsn_.end() && it->second <= watermark_lsn) {
      fs::remove(entry.path(), ec);
      segment_last_lsn_.erase(it);
    }
  }
  for (const auto& entry : fs::directory_iterator(dir_ / "snapshot")) {
    const std::string name = entry.path().filename().string();
    if (name.rfind("state-", 0) != 0) continue;
    std::uint64_t lsn = std::strtoull(name.c_str() + 6, nullptr, 10);
    if (lsn < watermark_lsn) fs::remove(entry.path(), ec);
  }
  return {};
}

Result<void> TupleStore::sync() {
  std::unique_lock lock(mu_);
  if (segment_file_ == nullptr) return {};
  return sync_fd(segment_file_);
}

void TupleStore::set_txn_observer(TxnObserver observer) {
  std::unique_lock lock(mu_);
  observer_ = std::move(observer);
}

// --- Full-scan validation ----------------------------------------------------

Result<void> TupleStore::validate_full() const {
  std::shared_lock lock(mu_);
  return validate_full_internal();
}

Result<void> TupleStore::validate_full_internal() const {
  auto violation = [](const std::string& why) {
    return make_error(Errc::invariant_violation, "full-scan: " + why);
  };

  std::map<VmId, int> vm_refs;
  for (const auto& [job_id, m] : state_.matches) {
    if (m.job_id != job_id) return violation("match key mismatch");
    if (m.expires_at <= m.created_at) return violation("match expires before creation");
    auto job = state_.jobs.find(job_id);
    if (job == state_.jobs.end()) return violation("match references missing job");
    if (job->second.state != JobState::Matched) return violation("matched job not MATCHED");
    if (!state_.machines.count(m.vm_id)) return violation("match references missing machine");
    if (state_.runs.count(job_id)) return violation("job has both match and run");
    if (++vm_refs[m.vm_id] > 1) return violation("machine referenced twice");
  }
  for (const auto& [job_id, r] : state_.runs) {
    if (r.job_id != job_id) return violation("run key mismatch");
    auto job = state_.jobs.find(job_id);
    if (job == state_.jobs.end()) return violation("run references missing job");
    if (job->second.state != JobState::Running) return violation("running job not RUNNING");
    if (!state_.machines.count(r.vm_id)) return violation("run references missing machine");
    if (++vm_refs[r.vm_id] > 1) return violation("machine referenced twice");
  }
  std::map<JobId, std::uint32_t> drops;
  std::map<JobId, HistoryKind> last_kind;
  std::map<JobId, Micros> last_ts;
  std::uint64_t submitted = 0, completed = 0, removed = 0, dropped = 0;
  std::uint64_t prev_seq = 0;
  for (const auto& e : state_.history) {
    if (e.seq <= prev_seq) return violation("history seq not strictly increasing");
    prev_seq = e.seq;
    auto lk = last_kind.find(e.job_id);
    if (lk == last_kind.end()) {
      if (e.kind != HistoryKind::Submitted) return violation("history does not begin with SUBMITTED");
    } else {
      if (lk->second == HistoryKind::Completed || lk->second == HistoryKind::Removed) {
        return violation("history event after terminal");
      }
      if (e.timestamp < last_ts[e.job_id]) return violation("history timestamps decrease");
    }
    if ((e.kind == HistoryKind::Completed) != e.exit_code.has_value()) {
      return violation("exit_code present iff COMPLETED");
    }
    last_kind[e.job_id] = e.kind;
    last_ts[e.job_id] = e.timestamp;
    switch (e.kind) {
      case HistoryKind::Submitted: ++submitted; break;
      case HistoryKind::Completed: ++completed; break;
      case HistoryKind::Removed: ++removed; break;
      case HistoryKind::Dropped: ++dropped; ++drops[e.job_id]; break;
      default: break;
    }
  }
  std::uint64_t idle = 0, matched = 0, running = 0;
  for (const auto& [id, job] : state_.jobs) {
    if (job.job_id != id) return violation("job key mismatch");
    if (!(job.duration_s > 0)) return violation("job duration not positive");
    auto derived =
        derive_job_state(state_.matches.count(id) > 0, state_.runs.count(id) > 0);
    if (!derived.ok()) return derived.error();
    if (job.state != derived.value()) return violation("job state disagrees with tuples");
    if (job.phase.has_value() != (job.state == JobState::Running)) {
      return violation("job phase present iff RUNNING");
    }
    std::uint32_t expect_drops = drops.count(id) ? drops[id] : 0;
    if (job.retry_count != expect_drops) return violation("retry_count != DROPPED events");
    switch (job.state) {
      case JobState::Idle: ++idle; break;
      case JobState::Matched: ++matched; break;
      case JobState::Running: ++running; break;
    }
    if (last_kind.count(id) &&
        (last_kind[id] == HistoryKind::Completed || last_kind[id] == HistoryKind::Removed)) {
      return violation("live job has terminal history");
    }
  }
  // Accounting conservation: every submission is live or terminal.
  if (submitted != idle + matched + running + completed + removed) {
    return violation("conservation: submitted=" + std::to_string(submitted) +
                     " != idle+matched+running+completed+removed=" +
                     std::to_string(idle + matched + running + completed + removed));
  }
  if (submitted != state_.submitted || completed != state_.completed ||
      removed != state_.removed || dropped != state_.dropped_events) {
    return violation("incremental counters disagree with recount");
  }
  // Index agreement.
  if (state_.match_by_vm.size() != state_.matches.size() ||
      state_.run_by_vm.size() != state_.runs.size()) {
    return violation("secondary index size mismatch");
  }
  if (state_.jobs_by_state[0] != idle || state_.jobs_by_state[1] != matched ||
      state_.jobs_by_state[2] != running || state_.idle_queue.size() != idle) {
    return violation("job state index disagrees with recount");
  }
  for (const auto& [vm, _] : state_.machines) {
    bool expect = !state_.match_by_vm.count(vm) && !state_.run_by_vm.count(vm);
    if (expect != (state_.unclaimed.count(vm) > 0)) {
      return violation("unclaimed index disagrees for " + vm.to_string());
    }
  }
  for (const auto& [vm, job_id] : state_.match_by_vm) {
    auto it = state_.matches.find(job_id);
    if (it == state_.matches.end() || !(it->second.vm_id == vm)) {
      return violation("match_by_vm index mismatch");
    }
  }
  for (const auto& [vm, job_id] : state_.run_by_vm) {
    auto it = state_.runs.find(job_id);
    if (it == state_.runs.end() || !(it->second.vm_id == vm)) {
      return violation("run_by_vm index mismatch");
    }
  }
  return {};
}

}  // namespace corral
