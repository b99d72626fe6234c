#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "fedmask/federation.hpp"
#include "fedmask/model.hpp"
#include "fedmask/simnet.hpp"

namespace fedmask {

/// Writes content to a temp file in the target directory, then renames.
void atomic_write(const std::string& path, const std::string& content);

/// Checkpoint layout: u64 LE value count, values as LE doubles, u64 LE
/// round index.
void save_checkpoint(const std::string& path, const ParamVector& params, std::uint64_t round);
struct Checkpoint {
  ParamVector params;
  std::uint64_t round = 0;
};
Checkpoint load_checkpoint(const std::string& path);

std::string metrics_csv(const std::vector<RoundMetrics>& metrics);

/// Extra rows appended by --personalize: round column "personalized_<id>".
struct PartyMetricsRow {
  std::string label;
  double loss = 0;
  double accuracy = 0;
  double precision = 0;
  double recall = 0;
  double f1 = 0;
};
std::string party_metrics_rows(const std::vector<PartyMetricsRow>& rows);

/// One JSON object per line per message.
std::string transcript_jsonl(const Transcript& transcript);

}  // namespace fedmask
