#pragma once

#include <string>

#include "dsr/agent.hpp"
#include "dsr/baseline.hpp"

namespace dsr {

inline constexpr std::uint32_t kSnapshotVersion = 1;

enum class SnapshotKind : std::uint8_t { Dsr = 0, Baseline = 1 };

/// Versioned, checksummed binary container of named tensors plus the full
/// dynamic training state. save -> load -> save is byte-identical.
void save_agent_snapshot(const AgentSnapshot& snapshot, const std::string& path);
AgentSnapshot load_agent_snapshot(const std::string& path);

void save_baseline_snapshot(const BaselineSnapshot& snapshot, const std::string& path);
BaselineSnapshot load_baseline_snapshot(const std::string& path);

/// Peeks at the header without loading the body.
SnapshotKind snapshot_kind(const std::string& path);

}  // namespace dsr
