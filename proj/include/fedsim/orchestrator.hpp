#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "fedsim/client_trainer.hpp"
#include "fedsim/core.hpp"
#include "fedsim/server_optimizer.hpp"

namespace fedsim {

// How the round's client deltas are combined into the pseudo-gradient.
//   literal:    (1/|S|) * sum over S of p_k * delta_k, with global p_k.
//   normalized: sum over S of (n_k / sum_{j in S} n_j) * delta_k.
// With partial participation the literal rule's weights sum to less than
// one; normalized is the better default for convergence studies.
enum class AggregationMode { literal, normalized };

const char* to_string(AggregationMode mode);
std::optional<AggregationMode> aggregation_from_string(std::string_view name);

struct EvalReport {
  double val_loss = 0.0;
  std::map<std::string, double> per_dataset;
  double two_step = 0.0;
};

/// Data-side view the round loop trains against: per-client shards for each
/// phase plus a validation hook.
class ClientPopulation {
 public:
  virtual ~ClientPopulation() = default;

  virtual int client_count() const = 0;
  virtual std::size_t dimension() const = 0;
  virtual ClientShard shard(int client_id, Phase phase) const = 0;
  // n_k per client, in client-id order; feeds PopulationWeights.
  virtual std::vector<std::int64_t> sample_counts() const = 0;
  virtual EvalReport evaluate(Phase phase, const ParameterVector& theta) const = 0;
  virtual std::vector<std::string> dataset_names() const = 0;
};

struct PhasePlan {
  Phase kind = Phase::finetune;
  double client_fraction = 1.0;  // C
  int rounds = 10;               // T
  ServerOpt server_opt = ServerOpt::fedavg;
  ServerHyperparams server_hparams;
};

struct RunConfig {
  std::uint64_t seed = 0;
  AggregationMode aggregation = AggregationMode::literal;
  TrainerConfig trainer;
  int workers = 1;  // concurrent local trainings; never changes results
};

struct TrainingPlan {
  std::vector<PhasePlan> phases;
  RunConfig run;
};

struct RoundRecord {
  int round = 0;
  Phase phase = Phase::finetune;
  std::vector<int> selected;
  double delta_norm = 0.0;
  double val_loss = 0.0;
  std::map<std::string, double> per_dataset;
  double two_step = 0.0;
};

// Exactly max(1, round-half-up(C*K)) distinct ids drawn uniformly without
// replacement, returned ascending; a pure function of (seed, round).
std::vector<int> sample_clients(int total_clients, double fraction,
                                std::int64_t round, std::uint64_t seed);

// Combines updates in ascending client-id order. Updates must be non-empty
// with distinct ids and matching dimensions.
ParameterVector aggregate_updates(std::span<const ClientUpdate> updates,
                                  const PopulationWeights& weights,
                                  AggregationMode mode);

struct RoundOutcome {
  ServerState state;
  RoundRecord record;
};

// One sample -> broadcast -> local train -> aggregate -> server-step cycle.
// Local trainings may run on `workers` threads; results are identical to
// sequential execution. RNG streams derive from (seed, phase kind, round,
// client), so a finetuning phase draws the same randomness whether or not a
// pretraining phase ran before it.
RoundOutcome run_round(const ServerState& state, const PhasePlan& phase,
                       const RunConfig& run, const ClientPopulation& population,
                       const PopulationWeights& weights, std::int64_t round);

struct TrainingResult {
  ParameterVector final_theta;
  std::vector<RoundRecord> records;
};

// Runs every phase in order, carrying theta across phases and resetting the
// server optimizer state at each phase boundary. theta0 defaults to zeros.
TrainingResult run_training(const TrainingPlan& plan,
                            const ClientPopulation& population,
                            std::optional<ParameterVector> theta0 = {});

// One CSV row per round; the schema is frozen by a golden-file test.
void write_rounds_csv(std::ostream& out,
                      std::span<const RoundRecord> records,
                      std::span<const std::string> dataset_names);

// %.17g, enough digits to round-trip a double exactly.
std::string format_double(double value);

}  // namespace fedsim
