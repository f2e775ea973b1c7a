#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "fedsim/orchestrator.hpp"
#include "fedsim/synthetic.hpp"

namespace fedsim {

enum class TaskKind { sequence, quadratic };

const char* to_string(TaskKind task);
std::optional<TaskKind> task_from_string(std::string_view name);

/// Everything that identifies an experiment run. Serializes to the config
/// echo; a run replayed from its echo is byte-identical.
struct ExperimentSpec {
  TaskKind task = TaskKind::sequence;
  std::string scenario = "k10";          // k3 | k10 | k30 | custom
  std::vector<int> clients_per_dataset;  // used when scenario == custom
  double data_scale = 0.1;
  std::uint64_t data_seed = 17;
  double heterogeneity = 1.0;
  std::size_t quad_dims = 6;
  std::uint32_t feature_dim = 128;
  std::uint32_t output_dim = 128;
  int loc_bins = 16;
  std::vector<MaskObjective> objectives = {MaskObjective::tm, MaskObjective::lm,
                                           MaskObjective::tlm};
  int val_docs_per_dataset = 24;
  double fraction_pretrain = 0.35;   // C_pt
  double fraction_finetune = 0.35;   // C_ft
  int rounds_pretrain = 10;          // T_pt; 0 skips the phase
  int rounds_finetune = 10;          // T_ft
  ServerOpt server_opt_pretrain = ServerOpt::fedavg;
  ServerOpt server_opt_finetune = ServerOpt::fedavg;
  ServerHyperparams server_hparams;
  AggregationMode aggregation = AggregationMode::literal;
  CountMode count_mode = CountMode::questions;
  TrainerConfig trainer;
  std::vector<std::uint64_t> seeds = {1};
  std::string out_dir;
  int workers = 1;
  std::optional<std::string> manifest_path;

  void validate() const;
  // Client allocation per dataset implied by the scenario.
  std::vector<int> allocation() const;

  nlohmann::json to_json(std::optional<std::uint64_t> seed_override = {}) const;
  static ExperimentSpec from_json(const nlohmann::json& j);
  // Grouping key for cross-seed comparisons: the config minus seed, worker
  // count, and output location.
  std::string config_label() const;
};

// Builds the population a spec describes; shared across that spec's seeds.
std::shared_ptr<ClientPopulation> build_population(const ExperimentSpec& spec);

// One seed's training, no disk I/O. Used by tests and the acceptance suite.
TrainingResult run_single(const ExperimentSpec& spec,
                          const ClientPopulation& population,
                          std::uint64_t seed);

struct RunResult {
  std::uint64_t seed = 0;
  std::filesystem::path dir;
  double final_val_loss = 0.0;
  double final_two_step = 0.0;
};

// Runs every seed and writes per-seed artifacts under
// out_dir/seed_<seed>/: config.json (the echo), rounds.csv, summary.json,
// and timing.txt (wall time; the one file excluded from replay comparison).
std::vector<RunResult> run_experiment(const ExperimentSpec& spec);

// Cross product over client fractions: one spec per (C_pt, C_ft) pair, each
// writing under out_dir/cpt<C>_cft<C>/. Singleton lists leave the spec and
// its output directory untouched.
std::vector<ExperimentSpec> expand_fraction_grid(
    const ExperimentSpec& base, std::span<const double> fractions_pretrain,
    std::span<const double> fractions_finetune);

struct CompareRow {
  std::string label;
  std::vector<std::pair<std::uint64_t, double>> per_seed;
  double median = 0.0;
};

struct CompareTable {
  std::string metric;
  std::vector<CompareRow> rows;  // sorted by median, then label
  std::string render() const;    // marks equal medians as ties
};

// metric is "two_step" or "val_loss", read from each run's summary.json.
CompareTable compare_runs(std::span<const std::string> run_dirs,
                          const std::string& metric);

double median_of(std::vector<double> values);

}  // namespace fedsim
