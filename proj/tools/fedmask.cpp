// Scenario runner and report emitter for the secure-aggregation /
// federated-learning framework. Batch experiments only; every command is
// deterministic under --seed and writes plain CSV/JSON/JSONL files.

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "fedmask/analysis.hpp"
#include "fedmask/data.hpp"
#include "fedmask/federation.hpp"
#include "fedmask/io.hpp"
#include "fedmask/model.hpp"
#include "fedmask/protocols.hpp"
#include "fedmask/scenario.hpp"

namespace fs = std::filesystem;
using namespace fedmask;

namespace {

constexpr int kExitSchema = 2;
constexpr int kExitRoundAborted = 3;
constexpr int kExitMissingCheckpoint = 4;

std::uint64_t resolve_seed(const std::optional<std::uint64_t>& cli_seed, std::uint64_t scenario_seed) {
  if (cli_seed) return *cli_seed;
  if (scenario_seed != 0) return scenario_seed;
  if (const char* env = std::getenv("FEDMASK_SEED")) return std::strtoull(env, nullptr, 10);
  return 0;
}

std::vector<int> parse_int_list(const std::string& s) {
  std::vector<int> out;
  std::stringstream ss(s);
  std::string tok;
  while (std::getline(ss, tok, ',')) out.push_back(std::stoi(tok));
  return out;
}

std::vector<Shard> scenario_shards(const Scenario& sc, std::uint64_t seed) {
  return generate_shards(sc.parties, sc.data.samples_per_party, sc.data.dim, seed,
                         sc.data.heterogeneity);
}

int run_init_train(const std::string& scenario_path, const std::string& out_dir,
                   const std::optional<std::uint64_t>& cli_seed) {
  Scenario sc = load_scenario(scenario_path);
  const std::uint64_t seed = resolve_seed(cli_seed, sc.seed);
  fs::create_directories(out_dir);
  std::vector<Shard> shards = scenario_shards(sc, seed);
  FedRunResult result = run_init_phase(shards, sc.model, sc.fed, sc.latency, seed);
  save_checkpoint((fs::path(out_dir) / "model.ckpt").string(), result.params,
                  static_cast<std::uint64_t>(sc.fed.rounds));
  atomic_write((fs::path(out_dir) / "metrics.csv").string(), metrics_csv(result.metrics));
  atomic_write((fs::path(out_dir) / "transcript.jsonl").string(),
               transcript_jsonl(result.transcript));
  std::cout << "init-train: " << sc.fed.rounds << " rounds, final val accuracy "
            << result.metrics.back().val_accuracy << "\n";
  return 0;
}

int run_edge_train(const std::string& scenario_path, const std::string& base_ckpt,
                   const std::string& out_dir, const std::optional<std::uint64_t>& cli_seed,
                   bool distill, const std::string& student_layers_arg, bool personalize_flag,
                   int personalize_epochs) {
  Scenario sc = load_scenario(scenario_path);
  if (!fs::exists(base_ckpt)) {
    std::cerr << "error: base checkpoint not found: " << base_ckpt << "\n";
    return kExitMissingCheckpoint;
  }
  const std::uint64_t seed = resolve_seed(cli_seed, sc.seed);
  fs::create_directories(out_dir);
  Checkpoint base = load_checkpoint(base_ckpt);
  if (base.params.values.size() != param_count(sc.model)) {
    std::cerr << "error: checkpoint does not match the scenario model\n";
    return kExitSchema;
  }

  std::vector<Shard> shards = scenario_shards(sc, seed);
  std::mt19937_64 rng(seed ^ 0xd15711ULL);

  NetworkSpec edge_spec = sc.model;
  ParamVector edge_params = base.params;
  if (distill) {
    std::vector<int> student_sizes;
    if (!student_layers_arg.empty()) {
      student_sizes = parse_int_list(student_layers_arg);
    } else {
      // Default student: halve each hidden width in the base.
      for (int l = 0; l <= sc.model.head_start_layer; ++l) {
        int size = sc.model.layer_sizes[l];
        if (l != 0 && l != sc.model.head_start_layer) size = std::max(2, size / 2);
        student_sizes.push_back(size);
      }
    }
    Eigen::MatrixXd transfer(0, sc.data.dim);
    for (const auto& sh : shards) {
      Eigen::MatrixXd merged(transfer.rows() + sh.data.windows.rows(), sc.data.dim);
      merged << transfer, sh.data.windows;
      transfer = std::move(merged);
    }
    DistillResult dr = distill_base(sc.model, base.params, student_sizes, transfer, 200, 1e-2, rng);
    NetworkSpec student_spec;
    student_spec.layer_sizes = student_sizes;
    for (int l = sc.model.head_start_layer; l < sc.model.num_layers(); ++l)
      student_spec.layer_sizes.push_back(sc.model.layer_sizes[l + 1]);
    student_spec.head_start_layer = static_cast<int>(student_sizes.size()) - 1;
    ParamVector combined;
    combined.values.resize(param_count(student_spec));
    combined.values.head(head_offset(student_spec)) = dr.student_base.values;
    combined.values.tail(param_count(student_spec) - head_offset(student_spec)) =
        base.params.values.tail(param_count(sc.model) - head_offset(sc.model));
    edge_spec = student_spec;
    edge_params = std::move(combined);
    std::cout << "distilled base: final loss " << dr.epoch_losses.back() << "\n";
  }

  const double head_fraction = static_cast<double>(head_param_count(edge_spec)) /
                               static_cast<double>(param_count(edge_spec));
  std::cout << "head parameters: " << head_param_count(edge_spec) << " of "
            << param_count(edge_spec) << " (" << head_fraction * 100.0 << "%)\n";

  Eigen::VectorXd base_before = edge_params.values.head(head_offset(edge_spec));
  FedRunResult result = run_edge_phase(shards, edge_spec, edge_params, sc.fed, sc.latency, seed);
  const bool frozen =
      result.params.values.head(head_offset(edge_spec)).cwiseEqual(base_before).all();
  std::cout << "base frozen: " << (frozen ? "ok" : "VIOLATED") << "\n";

  std::string csv = metrics_csv(result.metrics);
  if (personalize_flag) {
    std::vector<PartyMetricsRow> rows;
    for (const auto& sh : shards) {
      ParamVector personal =
          personalize(edge_spec, result.params, sh, sc.fed, personalize_epochs, seed);
      Batch test = make_batch(sh.data, sh.test_idx);
      std::vector<int> preds = predict(edge_spec, personal, test.inputs);
      std::vector<int> labels;
      for (int i : sh.test_idx) labels.push_back(sh.data.labels[i]);
      Metrics mm = metrics(preds, labels);
      rows.push_back({"personalized_" + std::to_string(sh.party_id),
                      loss_mse(edge_spec, personal, test), mm.accuracy, mm.precision, mm.recall,
                      mm.f1});
    }
    csv += party_metrics_rows(rows);
  }

  save_checkpoint((fs::path(out_dir) / "model.ckpt").string(), result.params,
                  static_cast<std::uint64_t>(sc.fed.rounds));
  atomic_write((fs::path(out_dir) / "metrics.csv").string(), csv);
  atomic_write((fs::path(out_dir) / "transcript.jsonl").string(),
               transcript_jsonl(result.transcript));
  std::cout << "edge-train: " << sc.fed.rounds << " rounds, final val accuracy "
            << result.metrics.back().val_accuracy << "\n";
  return 0;
}

int run_protocol_bench(const std::string& n_list, int k, int dim, const std::string& preset,
                       const std::optional<std::uint64_t>& cli_seed, const std::string& out_path) {
  const std::uint64_t seed = resolve_seed(cli_seed, 0);
  std::vector<int> ns = parse_int_list(n_list);
  std::vector<ConformanceCell> cells;
  if (preset.empty()) {
    cells = verify_table4(ns, k, static_cast<std::size_t>(dim), nullptr, seed);
  } else {
    LatencyMatrix lat = latency_preset(preset);
    cells = verify_table4(ns, k, static_cast<std::size_t>(dim), &lat, seed);
  }
  std::cout << render_conformance_table(cells);
  if (!out_path.empty()) {
    nlohmann::json j = nlohmann::json::array();
    for (const auto& c : cells)
      j.push_back({{"protocol", c.protocol},
                   {"n", c.n},
                   {"k", c.k},
                   {"total_events", c.total_events},
                   {"expected_events", c.expected_events},
                   {"counts_ok", c.counts_ok},
                   {"measured_latency_ms", c.measured_latency},
                   {"formula_latency_ms", c.formula_latency},
                   {"latency_ok", c.latency_ok}});
    atomic_write(out_path, j.dump(2) + "\n");
  }
  const bool all_ok = std::all_of(cells.begin(), cells.end(),
                                  [](const auto& c) { return c.counts_ok && c.latency_ok; });
  return all_ok ? 0 : 1;
}

int run_collusion(const std::string& protocol, int n, int k, const std::string& colluders_arg,
                  int trials, const std::optional<std::uint64_t>& cli_seed,
                  const std::string& out_path) {
  const std::uint64_t seed = resolve_seed(cli_seed, 0);
  std::mt19937_64 rng(seed);
  GraphOptions gopt;
  gopt.use_dh = false;
  NeighborGraph graph = build_neighbor_graph(n, std::min(k, n - 1), rng, gopt);

  CollusionScenario sc;
  sc.protocol = protocol_from_string(protocol);
  sc.victim = 0;
  sc.trials = trials;
  sc.threshold = k;
  sc.mediator_colludes = false;
  // Colluder spec: "all-neighbors", "k-1-neighbors", or a comma list of
  // ids; append "+mediator" to include the mediator.
  std::string spec = colluders_arg;
  if (auto pos = spec.find("+mediator"); pos != std::string::npos) {
    sc.mediator_colludes = true;
    spec.erase(pos);
  }
  if (spec == "all-neighbors") {
    for (int i : graph.neighbors[sc.victim]) sc.colluders.insert(i);
  } else if (spec == "k-1-neighbors") {
    const auto& nb = graph.neighbors[sc.victim];
    for (std::size_t i = 0; i + 1 < nb.size(); ++i) sc.colluders.insert(nb[i]);
  } else if (!spec.empty()) {
    for (int id : parse_int_list(spec)) sc.colluders.insert(id);
  }

  FixedPointCodec codec;
  std::uniform_real_distribution<double> val(-1.0, 1.0);
  std::vector<RingVector> secrets(n);
  for (auto& s : secrets) {
    s = RingVector(4);
    for (auto& e : s.elems) e = quantize(val(rng), codec);
  }
  LatencyMatrix lat = uniform_latency(n + 1, 1.0);
  AttackReport report = collude(sc, secrets, graph, lat, seed + 1);

  if (report.exact_recovery)
    std::cout << "RECOVERED (exact, " << report.trials << " trials)\n";
  else
    std::cout << "NOT RECOVERED, p=" << report.chi_square_p << " (residual entropy ~"
              << report.residual_entropy_bits << " bits/element, " << report.trials
              << " trials)\n";
  if (!out_path.empty()) {
    nlohmann::json j = {{"protocol", protocol},
                        {"n", n},
                        {"k", k},
                        {"exact_recovery", report.exact_recovery},
                        {"chi_square_p", report.chi_square_p},
                        {"residual_entropy_bits", report.residual_entropy_bits},
                        {"trials", report.trials}};
    atomic_write(out_path, j.dump(2) + "\n");
  }
  return 0;
}

int run_sweep(const std::string& scenario_path, const std::string& e_list, double threshold,
              int n_seeds, const std::optional<std::uint64_t>& cli_seed,
              const std::string& out_path) {
  Scenario sc = load_scenario(scenario_path);
  const std::uint64_t base_seed = resolve_seed(cli_seed, sc.seed);
  std::vector<int> es = parse_int_list(e_list);

  std::ostringstream csv;
  csv << "E,median_rounds,seeds\n";
  for (int e : es) {
    std::vector<int> rounds_per_seed;
    for (int s = 0; s < n_seeds; ++s) {
      const std::uint64_t seed = base_seed + static_cast<std::uint64_t>(s) * 1000003ULL;
      std::vector<Shard> shards = scenario_shards(sc, seed);
      std::mt19937_64 rng(seed);
      ParamVector initial = init_params(sc.model, rng);
      FedConfig cfg = sc.fed;
      cfg.local_updates = e;
      FedRunResult run = run_edge_phase(shards, sc.model, initial, cfg, sc.latency, seed);
      rounds_per_seed.push_back(first_round_below(run.metrics, threshold));
    }
    // Median with "not reached" (-1) sorted to the top.
    std::vector<int> sorted = rounds_per_seed;
    for (auto& r : sorted)
      if (r < 0) r = sc.fed.rounds + 1;
    std::sort(sorted.begin(), sorted.end());
    const int median = sorted[sorted.size() / 2];
    csv << e << ',' << (median > sc.fed.rounds ? std::string("NR") : std::to_string(median)) << ','
        << n_seeds << '\n';
  }
  std::cout << csv.str();
  if (!out_path.empty()) atomic_write(out_path, csv.str());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"fedmask: masked secure aggregation and two-phase federated training"};
  app.require_subcommand(1);
  app.fallthrough();
  std::optional<std::uint64_t> seed;
  app.add_option("--seed", seed, "Seed override (falls back to scenario file, then FEDMASK_SEED)");

  std::string scenario_path, out_dir = "out", base_ckpt, student_layers, colluders = "all-neighbors";
  std::string n_list = "3,5,10", preset, out_path, protocol = "masked", e_list = "1,5,20";
  bool distill = false, do_personalize = false;
  int k = 2, dim = 64, n = 5, trials = 1000, personalize_epochs = 5, n_seeds = 10;
  double threshold = 0.15;

  auto* init = app.add_subcommand("init-train", "Initialization-phase masked-gradient training");
  init->add_option("scenario", scenario_path, "Scenario JSON file")->required();
  init->add_option("--out", out_dir, "Output directory");

  auto* edge = app.add_subcommand("edge-train", "Edge-phase head-only training over a frozen base");
  edge->add_option("scenario", scenario_path, "Scenario JSON file")->required();
  edge->add_option("--base", base_ckpt, "Base checkpoint from init-train")->required();
  edge->add_option("--out", out_dir, "Output directory");
  edge->add_flag("--distill", distill, "Distill the base before edge training");
  edge->add_option("--student-layers", student_layers, "Student base layer sizes, comma separated");
  edge->add_flag("--personalize", do_personalize, "Per-party head fine-tuning after training");
  edge->add_option("--personalize-epochs", personalize_epochs, "Personalization epochs");

  auto* bench = app.add_subcommand("protocol-bench", "Message-count and latency conformance");
  bench->add_option("--n", n_list, "Party counts, comma separated");
  bench->add_option("--k", k, "Mask neighbors / Shamir threshold");
  bench->add_option("--dim", dim, "Secret vector dimension");
  bench->add_option("--latency-preset", preset, "scenario1|scenario2|scenario3 (default: random)");
  bench->add_option("--out", out_path, "JSON report path");

  auto* coll = app.add_subcommand("collusion", "Empirical collusion attack");
  coll->add_option("--protocol", protocol, "nosmc|stsmc|shamir|masked");
  coll->add_option("--n", n, "Party count");
  coll->add_option("--k", k, "Mask neighbors / Shamir threshold");
  coll->add_option("--colluders", colluders,
                   "all-neighbors | k-1-neighbors | id list; append +mediator");
  coll->add_option("--trials", trials, "Attack trials");
  coll->add_option("--out", out_path, "JSON report path");

  auto* sweep = app.add_subcommand("sweep-local-updates", "Rounds-to-threshold vs local updates E");
  sweep->add_option("scenario", scenario_path, "Scenario JSON file")->required();
  sweep->add_option("--E", e_list, "Local update counts, comma separated");
  sweep->add_option("--threshold", threshold, "Validation loss threshold");
  sweep->add_option("--seeds", n_seeds, "Seeds per E");
  sweep->add_option("--out", out_path, "CSV output path");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitSchema;
  }

  try {
    if (init->parsed()) return run_init_train(scenario_path, out_dir, seed);
    if (edge->parsed())
      return run_edge_train(scenario_path, base_ckpt, out_dir, seed, distill, student_layers,
                            do_personalize, personalize_epochs);
    if (bench->parsed()) return run_protocol_bench(n_list, k, dim, preset, seed, out_path);
    if (coll->parsed()) return run_collusion(protocol, n, k, colluders, trials, seed, out_path);
    if (sweep->parsed()) return run_sweep(scenario_path, e_list, threshold, n_seeds, seed, out_path);
  } catch (const SchemaError& e) {
    std::cerr << "scenario error: " << e.what() << "\n";
    return kExitSchema;
  } catch (const RoundAborted& e) {
    std::cerr << "round aborted: " << e.what() << "\n";
    return kExitRoundAborted;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
