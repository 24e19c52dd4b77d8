#pragma once

#include <nlohmann/json.hpp>

#include "corral/model.hpp"

// JSON conversions for the domain types. The same field names appear on the
// wire (lower_snake_case) and, via CBOR, in journal and snapshot records.

namespace corral {

using nlohmann::json;

void to_json(json& j, const AttrValue& v);
void from_json(const json& j, AttrValue& v);

void to_json(json& j, const VmId& v);
void from_json(const json& j, VmId& v);

void to_json(json& j, const Expression& e);
void from_json(const json& j, Expression& e);

void to_json(json& j, const JobRecord& r);
void from_json(const json& j, JobRecord& r);

void to_json(json& j, const MachineRecord& r);
void from_json(const json& j, MachineRecord& r);

void to_json(json& j, const MatchRecord& r);
void from_json(const json& j, MatchRecord& r);

void to_json(json& j, const RunRecord& r);
void from_json(const json& j, RunRecord& r);

void to_json(json& j, const HistoryEvent& r);
void from_json(const json& j, HistoryEvent& r);

void to_json(json& j, const RunningItem& r);
void from_json(const json& j, RunningItem& r);

void to_json(json& j, const CompletedItem& r);
void from_json(const json& j, CompletedItem& r);

void to_json(json& j, const SlotReport& r);
void from_json(const json& j, SlotReport& r);

void to_json(json& j, const HeartbeatReport& r);
void from_json(const json& j, HeartbeatReport& r);

void to_json(json& j, const JobDescriptor& r);
void from_json(const json& j, JobDescriptor& r);

void to_json(json& j, const Directive& r);
void from_json(const json& j, Directive& r);

void to_json(json& j, const HeartbeatResponse& r);
void from_json(const json& j, HeartbeatResponse& r);

// Enum names use the wire spelling (IDLE, MATCHINFO, ...).
NLOHMANN_JSON_SERIALIZE_ENUM(JobState, {{JobState::Idle, "IDLE"},
                                        {JobState::Matched, "MATCHED"},
                                        {JobState::Running, "RUNNING"}})

NLOHMANN_JSON_SERIALIZE_ENUM(JobPhase, {{JobPhase::Starting, "STARTING"},
                                        {JobPhase::Executing, "EXECUTING"}})

NLOHMANN_JSON_SERIALIZE_ENUM(MachineState, {{MachineState::Unclaimed, "UNCLAIMED"},
                                            {MachineState::Matched, "MATCHED"},
                                            {MachineState::Claimed, "CLAIMED"}})

NLOHMANN_JSON_SERIALIZE_ENUM(HistoryKind, {{HistoryKind::Submitted, "SUBMITTED"},
                                           {HistoryKind::Matched, "MATCHED"},
                                           {HistoryKind::Started, "STARTED"},
                                           {HistoryKind::Completed, "COMPLETED"},
                                           {HistoryKind::Dropped, "DROPPED"},
                                           {HistoryKind::Removed, "REMOVED"}})

NLOHMANN_JSON_SERIALIZE_ENUM(DirectiveAction, {{DirectiveAction::None, "NONE"},
                                               {DirectiveAction::MatchInfo, "MATCHINFO"},
                                               {DirectiveAction::Release, "RELEASE"}})

}  // namespace corral
