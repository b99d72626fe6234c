#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

#include "fedmask/federation.hpp"
#include "fedmask/model.hpp"
#include "fedmask/simnet.hpp"

namespace fedmask {

/// Scenario file problems map to CLI exit code 2.
struct SchemaError : std::runtime_error {
  explicit SchemaError(const std::string& what) : std::runtime_error(what) {}
};

struct DataParams {
  int samples_per_party = 200;
  int dim = 32;
  double heterogeneity = 0.0;
};

/// Parsed scenario file. The JSON schema is strict: unknown keys are
/// rejected at every level.
struct Scenario {
  int parties = 3;
  int k = 2;
  Protocol protocol = Protocol::Masked;
  NetworkSpec model;
  FedConfig fed;
  DataParams data;
  LatencyMatrix latency;
  std::uint64_t seed = 0;
};

Scenario load_scenario(const std::string& path);
Scenario parse_scenario_json(const std::string& text);

/// Named presets with synthetic (invented) geographic latencies mirroring
/// 3-, 5- and 10-party deployments; "scenario1" | "scenario2" | "scenario3".
LatencyMatrix latency_preset(const std::string& name);
int preset_party_count(const std::string& name);

}  // namespace fedmask
