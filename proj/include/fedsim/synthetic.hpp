#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "fedsim/fsp.hpp"
#include "fedsim/metrics.hpp"
#include "fedsim/objectives.hpp"
#include "fedsim/orchestrator.hpp"
#include "fedsim/partitioner.hpp"

namespace fedsim {

/// Least-squares federation: three (or more) clusters of clients whose
/// optima spread apart as heterogeneity grows. At heterogeneity zero every
/// client draws the identical problem, the IID limit.
class QuadraticFederation final : public ClientPopulation {
 public:
  struct Config {
    int total_clients = 3;
    std::vector<int> clients_per_cluster = {1, 1, 1};
    double heterogeneity = 1.0;
    std::size_t dims = 6;
    // Examples per cluster, split evenly across the cluster's clients.
    // Defaults mirror the benchmark's per-dataset document counts at 1/10.
    std::vector<std::int64_t> examples_per_cluster = {135, 1019, 1316};
    std::uint64_t seed = 0;
  };

  explicit QuadraticFederation(const Config& config);

  int client_count() const override;
  std::size_t dimension() const override { return dims_; }
  ClientShard shard(int client_id, Phase phase) const override;
  std::vector<std::int64_t> sample_counts() const override;
  EvalReport evaluate(Phase phase, const ParameterVector& theta) const override;
  std::vector<std::string> dataset_names() const override;

  const QuadraticObjective& client_objective(int client_id) const;
  int cluster_of(int client_id) const { return cluster_of_[client_id]; }

 private:
  std::size_t dims_;
  std::vector<std::string> cluster_names_;
  std::vector<int> cluster_of_;
  std::vector<std::shared_ptr<QuadraticObjective>> objectives_;
};

// Spec-shaped constructor: cluster client counts must sum to total_clients.
QuadraticFederation make_synthetic_federation(
    int total_clients, std::span<const int> clients_per_cluster,
    double heterogeneity, std::size_t dims, std::uint64_t seed);

/// Document federation: synthetic key/value table documents partitioned per
/// the manifest, compiled into denoising pairs for the pretraining phase and
/// answer-prediction examples for finetuning. Both tasks share one linear
/// model, so pretraining genuinely warm-starts finetuning.
class DocumentFederation final : public ClientPopulation {
 public:
  struct Config {
    // Manifest with document lists and per-dataset client allocations.
    std::vector<DatasetDescriptor> manifest;
    // Probability that a cluster remaps a key away from the shared base
    // mapping; 0 makes every dataset use the same key->value table.
    double heterogeneity = 1.0;
    std::uint32_t feature_dim = 128;
    std::uint32_t output_dim = 128;
    int loc_bins = 16;  // coordinate vocabulary for the surrogate corpus
    std::vector<MaskObjective> objectives = {MaskObjective::tm,
                                             MaskObjective::lm,
                                             MaskObjective::tlm};
    int mask_cap = kDefaultMaskCap;
    CountMode count_mode = CountMode::questions;
    int val_docs_per_dataset = 24;
    std::uint64_t data_seed = 0;
  };

  explicit DocumentFederation(const Config& config);

  int client_count() const override;
  std::size_t dimension() const override;
  ClientShard shard(int client_id, Phase phase) const override;
  std::vector<std::int64_t> sample_counts() const override;
  EvalReport evaluate(Phase phase, const ParameterVector& theta) const override;
  std::vector<std::string> dataset_names() const override;

  // Deterministic document content for (dataset index, document index);
  // indices past the manifest's documents are the held-out validation docs.
  DocumentExample document(std::size_t dataset_index,
                           std::size_t doc_index) const;

 private:
  struct ValExample {
    std::string dataset;
    std::vector<std::pair<std::uint32_t, double>> features;
    std::string gold;
    MetricKind kind;
  };

  void build_client(const ClientShardPlan& plan, std::size_t dataset_index);
  std::pair<std::vector<std::string>, std::string> make_question(
      std::size_t dataset_index, const DocumentExample& doc, Rng& rng,
      MetricKind kind) const;
  void append_fsp_examples(std::vector<SparseExample>& out,
                           std::size_t dataset_index, std::size_t doc_index,
                           const DocumentExample& doc) const;

  Config config_;
  HashedBagFeaturizer featurizer_;
  Discretizer loc_discretizer_;
  std::vector<std::string> dataset_names_;
  std::vector<std::vector<int>> cluster_mapping_;  // per dataset: key -> value
  std::vector<std::shared_ptr<SequenceDenoisingObjective>> pretrain_objectives_;
  std::vector<std::shared_ptr<SequenceDenoisingObjective>> finetune_objectives_;
  std::vector<std::int64_t> sample_counts_;
  std::shared_ptr<SequenceDenoisingObjective> val_pretrain_;
  std::shared_ptr<SequenceDenoisingObjective> val_finetune_;
  std::vector<ValExample> val_examples_;
  std::vector<std::pair<std::string, std::uint32_t>> answer_bins_;
};

}  // namespace fedsim
