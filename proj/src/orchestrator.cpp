#include "fedsim/orchestrator.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <functional>
#include <numeric>
#include <ostream>
#include <thread>

namespace fedsim {

const char* to_string(AggregationMode mode) {
  return mode == AggregationMode::literal ? "literal" : "normalized";
}

std::optional<AggregationMode> aggregation_from_string(std::string_view name) {
  if (name == "literal") return AggregationMode::literal;
  if (name == "normalized") return AggregationMode::normalized;
  return std::nullopt;
}

std::vector<int> sample_clients(int total_clients, double fraction,
                                std::int64_t round, std::uint64_t seed) {
  if (total_clients < 1) {
    throw DomainError("sample_clients: need at least one client");
  }
  if (!(fraction > 0.0 && fraction <= 1.0)) {
    throw DomainError("sample_clients: fraction must be in (0, 1]");
  }
  // Round half up, pinned so that C=0.35, K=10 selects 4 clients.
  int count = static_cast<int>(
      std::floor(fraction * static_cast<double>(total_clients) + 0.5));
  count = std::clamp(count, 1, total_clients);

  std::vector<int> ids(total_clients);
  std::iota(ids.begin(), ids.end(), 0);
  Rng rng = stream_rng(seed, {stream_tag::sample,
                              static_cast<std::uint64_t>(round)});
  // Partial Fisher-Yates: the first `count` slots end up uniform without
  // replacement.
  for (int i = 0; i < count; ++i) {
    int j = i + static_cast<int>(rng.next_below(
                    static_cast<std::uint64_t>(total_clients - i)));
    std::swap(ids[i], ids[j]);
  }
  ids.resize(count);
  std::sort(ids.begin(), ids.end());
  return ids;
}

ParameterVector aggregate_updates(std::span<const ClientUpdate> updates,
                                  const PopulationWeights& weights,
                                  AggregationMode mode) {
  if (updates.empty()) {
    throw ProtocolError("aggregate: empty update set");
  }
  std::vector<const ClientUpdate*> ordered;
  ordered.reserve(updates.size());
  for (const ClientUpdate& u : updates) ordered.push_back(&u);
  std::sort(ordered.begin(), ordered.end(),
            [](const ClientUpdate* a, const ClientUpdate* b) {
              return a->client_id < b->client_id;
            });

  std::size_t dim = ordered.front()->delta.dim();
  for (const ClientUpdate* u : ordered) {
    if (u->delta.dim() != dim) {
      throw DimensionError("aggregate: client " + std::to_string(u->client_id) +
                           " delta has mismatched dimension");
    }
  }
  for (std::size_t i = 1; i < ordered.size(); ++i) {
    if (ordered[i]->client_id == ordered[i - 1]->client_id) {
      throw ProtocolError("aggregate: duplicate update from client " +
                          std::to_string(ordered[i]->client_id));
    }
  }

  std::vector<double> sum(dim, 0.0);
  if (mode == AggregationMode::literal) {
    double inv_s = 1.0 / static_cast<double>(ordered.size());
    for (const ClientUpdate* u : ordered) {
      double w = weights.weight(static_cast<std::size_t>(u->client_id)) * inv_s;
      for (std::size_t i = 0; i < dim; ++i) sum[i] += w * u->delta[i];
    }
  } else {
    std::int64_t total = 0;
    for (const ClientUpdate* u : ordered) {
      if (u->sample_count < 1) {
        throw ProtocolError("aggregate: client " +
                            std::to_string(u->client_id) +
                            " reports sample count < 1");
      }
      total += u->sample_count;
    }
    for (const ClientUpdate* u : ordered) {
      double w = static_cast<double>(u->sample_count) /
                 static_cast<double>(total);
      for (std::size_t i = 0; i < dim; ++i) sum[i] += w * u->delta[i];
    }
  }
  return ParameterVector(std::move(sum));
}

namespace {

// Runs fn(0..n-1) on up to `workers` threads. Each index writes only its own
// slot, so scheduling order cannot change results.
void parallel_for(int n, int workers, const std::function<void(int)>& fn) {
  if (workers <= 1 || n <= 1) {
    for (int i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<int> next{0};
  auto worker = [&]() {
    for (;;) {
      int i = next.fetch_add(1);
      if (i >= n) return;
      fn(i);
    }
  };
  int spawn = std::min(workers, n);
  std::vector<std::thread> threads;
  threads.reserve(spawn);
  for (int t = 0; t < spawn; ++t) threads.emplace_back(worker);
  for (std::thread& t : threads) t.join();
}

}  // namespace

RoundOutcome run_round(const ServerState& state, const PhasePlan& phase,
                       const RunConfig& run, const ClientPopulation& population,
                       const PopulationWeights& weights, std::int64_t round) {
  if (round >= phase.rounds) {
    throw ProtocolError("run_round: no rounds remaining (round " +
                        std::to_string(round) + " of " +
                        std::to_string(phase.rounds) + ")");
  }
  int total = population.client_count();
  std::uint64_t phase_tag = static_cast<std::uint64_t>(phase.kind);
  std::uint64_t sample_seed = derive_stream(run.seed, {phase_tag});
  std::vector<int> selected =
      sample_clients(total, phase.client_fraction, round, sample_seed);

  int n = static_cast<int>(selected.size());
  std::vector<ClientUpdate> updates(n);
  std::vector<std::string> failures(n);
  parallel_for(n, run.workers, [&](int slot) {
    int client = selected[slot];
    try {
      ClientShard shard = population.shard(client, phase.kind);
      Rng rng = stream_rng(run.seed,
                           {stream_tag::client_train, phase_tag,
                            static_cast<std::uint64_t>(round),
                            static_cast<std::uint64_t>(client)});
      updates[slot] = local_train(state.theta, shard, run.trainer, rng);
    } catch (const std::exception& e) {
      failures[slot] = e.what();
    }
  });
  for (int slot = 0; slot < n; ++slot) {
    if (!failures[slot].empty()) {
      throw NumericError("round " + std::to_string(round) + ": client " +
                         std::to_string(selected[slot]) +
                         " failed: " + failures[slot]);
    }
  }

  ParameterVector delta = aggregate_updates(updates, weights, run.aggregation);
  ServerState next = server_step(phase.server_opt, state, delta);
  next.round = state.round + 1;

  RoundOutcome outcome;
  outcome.record.round = static_cast<int>(round);
  outcome.record.phase = phase.kind;
  outcome.record.selected = std::move(selected);
  outcome.record.delta_norm = l2_norm(delta);
  EvalReport eval = population.evaluate(phase.kind, next.theta);
  outcome.record.val_loss = eval.val_loss;
  outcome.record.per_dataset = std::move(eval.per_dataset);
  outcome.record.two_step = eval.two_step;
  outcome.state = std::move(next);
  return outcome;
}

TrainingResult run_training(const TrainingPlan& plan,
                            const ClientPopulation& population,
                            std::optional<ParameterVector> theta0) {
  ParameterVector theta =
      theta0.has_value() ? std::move(*theta0)
                         : ParameterVector::zeros(population.dimension());
  if (theta.dim() != population.dimension()) {
    throw DimensionError("run_training: theta0 dimension mismatch");
  }
  std::vector<std::int64_t> counts = population.sample_counts();
  PopulationWeights weights = PopulationWeights::from_counts(counts);

  TrainingResult result;
  for (std::size_t p = 0; p < plan.phases.size(); ++p) {
    const PhasePlan& phase = plan.phases[p];
    if (phase.rounds < 0) {
      throw DomainError("run_training: negative round count");
    }
    // Fresh server-optimizer state per phase; only theta carries over.
    ServerState state = ServerState::init(std::move(theta), phase.server_hparams);
    for (int t = 0; t < phase.rounds; ++t) {
      RoundOutcome outcome =
          run_round(state, phase, plan.run, population, weights, t);
      state = std::move(outcome.state);
      result.records.push_back(std::move(outcome.record));
    }
    theta = std::move(state.theta);
  }
  result.final_theta = std::move(theta);
  return result;
}

std::string format_double(double value) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", value);
  return buf;
}

void write_rounds_csv(std::ostream& out,
                      std::span<const RoundRecord> records,
                      std::span<const std::string> dataset_names) {
  out << "round,phase,selected,delta_norm,val_loss";
  for (const std::string& name : dataset_names) {
    out << ",metric_" << name;
  }
  out << ",two_step\n";
  for (const RoundRecord& rec : records) {
    out << rec.round << ',' << to_string(rec.phase) << ',';
    for (std::size_t i = 0; i < rec.selected.size(); ++i) {
      if (i > 0) out << '|';
      out << rec.selected[i];
    }
    out << ',' << format_double(rec.delta_norm) << ','
        << format_double(rec.val_loss);
    for (const std::string& name : dataset_names) {
      auto it = rec.per_dataset.find(name);
      out << ',' << format_double(it == rec.per_dataset.end() ? 0.0 : it->second);
    }
    out << ',' << format_double(rec.two_step) << '\n';
  }
}

}  // namespace fedsim
