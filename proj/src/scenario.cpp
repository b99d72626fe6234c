#include "fedmask/scenario.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

namespace fedmask {

namespace {

using nlohmann::json;

void reject_unknown(const json& obj, const std::set<std::string>& allowed, const std::string& where) {
  for (const auto& [key, value] : obj.items())
    if (!allowed.contains(key)) throw SchemaError("unknown key \"" + key + "\" in " + where);
}

NetworkSpec parse_model(const json& j) {
  reject_unknown(j, {"layer_sizes", "head_start_layer"}, "model");
  NetworkSpec spec;
  if (!j.contains("layer_sizes") || !j["layer_sizes"].is_array())
    throw SchemaError("model.layer_sizes must be an array of integers");
  for (const auto& v : j["layer_sizes"]) spec.layer_sizes.push_back(v.get<int>());
  spec.head_start_layer = j.value("head_start_layer", 1);
  try {
    spec.validate();
  } catch (const ShapeError& e) {
    throw SchemaError(std::string("model: ") + e.what());
  }
  return spec;
}

FedConfig parse_fed(const json& j) {
  reject_unknown(j, {"rounds", "local_updates", "alpha", "batch_size", "optimizer",
                     "weighted_mean", "frac_bits", "clamp_range"},
                 "fed");
  FedConfig cfg;
  cfg.rounds = j.value("rounds", 50);
  cfg.local_updates = j.value("local_updates", 1);
  cfg.alpha = j.value("alpha", 1e-3);
  cfg.batch_size = j.value("batch_size", 16);
  cfg.weighted_mean = j.value("weighted_mean", false);
  cfg.codec.frac_bits = j.value("frac_bits", 20);
  cfg.codec.clamp_range = j.value("clamp_range", 1024.0);
  const std::string opt = j.value("optimizer", "adam");
  if (opt == "sgd") cfg.optimizer = Optimizer::Sgd;
  else if (opt == "adam") cfg.optimizer = Optimizer::Adam;
  else throw SchemaError("fed.optimizer must be \"sgd\" or \"adam\"");
  if (cfg.rounds < 1 || cfg.local_updates < 1)
    throw SchemaError("fed.rounds and fed.local_updates must be >= 1");
  if (cfg.codec.frac_bits <= 0 || cfg.codec.frac_bits >= 40)
    throw SchemaError("fed.frac_bits must be in (0, 40)");
  return cfg;
}

DataParams parse_data(const json& j) {
  reject_unknown(j, {"samples_per_party", "dim", "heterogeneity"}, "data");
  DataParams d;
  d.samples_per_party = j.value("samples_per_party", 200);
  d.dim = j.value("dim", 32);
  d.heterogeneity = j.value("heterogeneity", 0.0);
  if (d.dim < 8) throw SchemaError("data.dim must be >= 8");
  if (d.heterogeneity < 0.0 || d.heterogeneity > 1.0)
    throw SchemaError("data.heterogeneity must be in [0, 1]");
  return d;
}

LatencyMatrix parse_latency(const json& j, int parties) {
  if (j.is_string()) {
    const std::string name = j.get<std::string>();
    LatencyMatrix l = latency_preset(name);
    if (l.size() != parties + 1)
      throw SchemaError("latency preset \"" + name + "\" is for " +
                        std::to_string(preset_party_count(name)) + " parties");
    return l;
  }
  if (!j.is_array()) throw SchemaError("latency must be a preset name or a matrix");
  LatencyMatrix l;
  const auto n = static_cast<Eigen::Index>(j.size());
  l.latency.resize(n, n);
  for (Eigen::Index r = 0; r < n; ++r) {
    if (!j[r].is_array() || static_cast<Eigen::Index>(j[r].size()) != n)
      throw SchemaError("latency matrix must be square");
    for (Eigen::Index c = 0; c < n; ++c) l.latency(r, c) = j[r][c].get<double>();
  }
  if (l.size() != parties + 1)
    throw SchemaError("latency matrix must be (parties + 1) x (parties + 1)");
  try {
    l.validate();
  } catch (const std::exception& e) {
    throw SchemaError(std::string("latency: ") + e.what());
  }
  return l;
}

}  // namespace

Scenario parse_scenario_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw SchemaError(e.what());  // carries "at line N, column M"
  }
  reject_unknown(j, {"parties", "k", "protocol", "model", "fed", "data", "latency", "seed"},
                 "scenario root");
  Scenario s;
  s.parties = j.value("parties", 3);
  if (s.parties < 1) throw SchemaError("parties must be >= 1");
  s.k = j.value("k", 2);
  try {
    s.protocol = protocol_from_string(j.value("protocol", "masked"));
  } catch (const std::invalid_argument& e) {
    throw SchemaError(e.what());
  }
  if (j.contains("model")) s.model = parse_model(j["model"]);
  else s.model = NetworkSpec{{32, 16, 8, 2}, 2};
  if (j.contains("fed")) s.fed = parse_fed(j["fed"]);
  if (j.contains("data")) s.data = parse_data(j["data"]);
  s.fed.protocol = s.protocol;
  s.fed.k = s.k;
  if (j.contains("latency")) s.latency = parse_latency(j["latency"], s.parties);
  else s.latency = uniform_latency(s.parties + 1, 10.0);
  s.seed = j.value("seed", 0);
  if (s.model.input_dim() != s.data.dim)
    throw SchemaError("model input dim must equal data.dim");
  return s;
}

Scenario load_scenario(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw SchemaError("cannot open scenario file: " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_scenario_json(ss.str());
}

LatencyMatrix latency_preset(const std::string& name) {
  // Synthetic link delays (ms); shaped like a mediator in northern Europe
  // with holders spread progressively wider. Not measurements.
  auto build = [](const std::vector<double>& to_mediator, double spread) {
    const int n = static_cast<int>(to_mediator.size());
    LatencyMatrix l;
    l.latency.resize(n + 1, n + 1);
    for (int i = 0; i < n; ++i) {
      l.latency(i, n) = to_mediator[i];
      l.latency(n, i) = to_mediator[i];
      for (int j = 0; j < n; ++j)
        l.latency(i, j) = i == j ? 0.0 : (to_mediator[i] + to_mediator[j]) * spread;
    }
    l.latency(n, n) = 0.0;
    return l;
  };
  if (name == "scenario1") return build({14.0, 22.0, 17.0}, 0.8);
  if (name == "scenario2") return build({14.0, 22.0, 17.0, 96.0, 128.0}, 0.8);
  if (name == "scenario3")
    return build({14.0, 22.0, 17.0, 96.0, 128.0, 105.0, 182.0, 168.0, 174.0, 236.0}, 0.8);
  throw SchemaError("unknown latency preset: " + name);
}

int preset_party_count(const std::string& name) {
  if (name == "scenario1") return 3;
  if (name == "scenario2") return 5;
  if (name == "scenario3") return 10;
  throw SchemaError("unknown latency preset: " + name);
}

}  // namespace fedmask
