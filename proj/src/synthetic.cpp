#include "fedsim/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <sstream>
#include <string_view>

namespace fedsim {

namespace {

constexpr int kNumKeys = 32;
constexpr int kNumValues = 32;
constexpr double kRowNoise = 0.2;
constexpr double kClientJitter = 0.25;
constexpr double kLabelNoise = 0.05;

std::string key_token(int k) {
  std::ostringstream s;
  s << "k" << (k < 10 ? "0" : "") << k;
  return s.str();
}

std::string value_token(int v) {
  std::ostringstream s;
  s << "v" << (v < 10 ? "0" : "") << v;
  return s.str();
}

std::vector<std::string> default_cluster_names(std::size_t clusters) {
  if (clusters == 3) return {"WTQ", "DocVQA", "TabFact"};
  std::vector<std::string> names;
  for (std::size_t i = 0; i < clusters; ++i) {
    names.push_back("cluster" + std::to_string(i));
  }
  return names;
}

// Even split of `total` into `parts`, earliest parts take the remainder.
std::vector<std::int64_t> even_split(std::int64_t total, int parts) {
  std::vector<std::int64_t> out(parts);
  std::int64_t base = total / parts;
  std::int64_t extra = total % parts;
  for (int i = 0; i < parts; ++i) {
    out[i] = base + (i < extra ? 1 : 0);
  }
  return out;
}

}  // namespace

QuadraticFederation::QuadraticFederation(const Config& config)
    : dims_(config.dims) {
  if (config.dims == 0) {
    throw DomainError("quadratic federation: dims must be positive");
  }
  if (config.clients_per_cluster.empty() ||
      config.clients_per_cluster.size() != config.examples_per_cluster.size()) {
    throw DomainError("quadratic federation: cluster shape mismatch");
  }
  int declared = 0;
  for (int c : config.clients_per_cluster) {
    if (c < 0) throw DomainError("quadratic federation: negative client count");
    declared += c;
  }
  if (declared != config.total_clients) {
    throw DomainError("quadratic federation: cluster counts sum to " +
                      std::to_string(declared) + ", expected " +
                      std::to_string(config.total_clients));
  }
  if (!(config.heterogeneity >= 0.0)) {
    throw DomainError("quadratic federation: heterogeneity must be >= 0");
  }

  std::size_t clusters = config.clients_per_cluster.size();
  cluster_names_ = default_cluster_names(clusters);
  double het = config.heterogeneity;

  // Shared base problem; per-cluster and per-client terms scale with the
  // heterogeneity knob so that zero collapses everything onto one problem.
  Rng base_rng = stream_rng(config.seed, {stream_tag::quad_base});
  std::vector<double> theta_star0(dims_);
  for (double& x : theta_star0) x = base_rng.next_normal();

  std::int64_t max_rows = 0;
  std::vector<std::vector<std::int64_t>> rows_per_client(clusters);
  for (std::size_t c = 0; c < clusters; ++c) {
    if (config.clients_per_cluster[c] == 0) continue;
    rows_per_client[c] = even_split(config.examples_per_cluster[c],
                                    config.clients_per_cluster[c]);
    for (std::int64_t r : rows_per_client[c]) max_rows = std::max(max_rows, r);
  }
  std::vector<double> base_rows(static_cast<std::size_t>(max_rows) * dims_);
  for (double& x : base_rows) x = base_rng.next_normal();

  std::vector<std::vector<double>> cluster_dirs(clusters,
                                                std::vector<double>(dims_));
  for (std::size_t c = 0; c < clusters; ++c) {
    Rng rng = stream_rng(config.seed, {stream_tag::quad_cluster, c});
    for (double& x : cluster_dirs[c]) x = rng.next_normal();
  }

  int client_id = 0;
  for (std::size_t c = 0; c < clusters; ++c) {
    for (int member = 0; member < config.clients_per_cluster[c]; ++member) {
      std::int64_t rows = rows_per_client[c][member];
      if (rows < 1) {
        throw DomainError("quadratic federation: cluster " + std::to_string(c) +
                          " leaves a client without examples");
      }
      Rng rng = stream_rng(config.seed, {stream_tag::quad_client,
                                         static_cast<std::uint64_t>(client_id)});
      std::vector<double> theta_star(dims_);
      for (std::size_t i = 0; i < dims_; ++i) {
        theta_star[i] = theta_star0[i] +
                        het * (cluster_dirs[c][i] +
                               kClientJitter * rng.next_normal());
      }
      std::vector<double> a(static_cast<std::size_t>(rows) * dims_);
      std::vector<double> b(rows);
      for (std::int64_t r = 0; r < rows; ++r) {
        double dot = 0.0;
        for (std::size_t i = 0; i < dims_; ++i) {
          double entry = base_rows[static_cast<std::size_t>(r) * dims_ + i] +
                         kRowNoise * het * rng.next_normal();
          a[static_cast<std::size_t>(r) * dims_ + i] = entry;
          dot += entry * theta_star[i];
        }
        b[r] = dot;
      }
      objectives_.push_back(std::make_shared<QuadraticObjective>(
          dims_, std::move(a), std::move(b)));
      cluster_of_.push_back(static_cast<int>(c));
      ++client_id;
    }
  }
}

int QuadraticFederation::client_count() const {
  return static_cast<int>(objectives_.size());
}

ClientShard QuadraticFederation::shard(int client_id, Phase) const {
  ClientShard shard;
  shard.client_id = client_id;
  shard.objective = objectives_.at(client_id);
  shard.sample_count =
      static_cast<std::int64_t>(objectives_.at(client_id)->example_count());
  return shard;
}

std::vector<std::int64_t> QuadraticFederation::sample_counts() const {
  std::vector<std::int64_t> counts;
  counts.reserve(objectives_.size());
  for (const auto& obj : objectives_) {
    counts.push_back(static_cast<std::int64_t>(obj->example_count()));
  }
  return counts;
}

EvalReport QuadraticFederation::evaluate(Phase,
                                         const ParameterVector& theta) const {
  PopulationWeights weights = PopulationWeights::from_counts(sample_counts());
  EvalReport report;
  std::vector<double> cluster_sum(cluster_names_.size(), 0.0);
  std::vector<int> cluster_n(cluster_names_.size(), 0);
  for (std::size_t k = 0; k < objectives_.size(); ++k) {
    double loss = objectives_[k]->mean_loss(theta.values());
    report.val_loss += weights.weight(k) * loss;
    cluster_sum[cluster_of_[k]] += loss;
    cluster_n[cluster_of_[k]] += 1;
  }
  double total = 0.0;
  int present = 0;
  for (std::size_t c = 0; c < cluster_names_.size(); ++c) {
    if (cluster_n[c] == 0) continue;
    double mean = cluster_sum[c] / cluster_n[c];
    report.per_dataset[cluster_names_[c]] = mean;
    total += mean;
    ++present;
  }
  // For the least-squares population the "metric" columns carry per-cluster
  // losses; the two-step value is their unweighted mean.
  report.two_step = present > 0 ? total / present : 0.0;
  return report;
}

std::vector<std::string> QuadraticFederation::dataset_names() const {
  return cluster_names_;
}

const QuadraticObjective& QuadraticFederation::client_objective(
    int client_id) const {
  return *objectives_.at(client_id);
}

QuadraticFederation make_synthetic_federation(
    int total_clients, std::span<const int> clients_per_cluster,
    double heterogeneity, std::size_t dims, std::uint64_t seed) {
  QuadraticFederation::Config config;
  config.total_clients = total_clients;
  config.clients_per_cluster.assign(clients_per_cluster.begin(),
                                    clients_per_cluster.end());
  config.heterogeneity = heterogeneity;
  config.dims = dims;
  config.seed = seed;
  if (config.clients_per_cluster.size() != config.examples_per_cluster.size()) {
    config.examples_per_cluster =
        even_split(2470, static_cast<int>(config.clients_per_cluster.size()));
  }
  return QuadraticFederation(config);
}

DocumentFederation::DocumentFederation(const Config& config)
    : config_(config),
      featurizer_(config.feature_dim, config.output_dim),
      loc_discretizer_(config.loc_bins) {
  if (config_.manifest.empty()) {
    throw DomainError("document federation: empty manifest");
  }
  for (const DatasetDescriptor& desc : config_.manifest) {
    dataset_names_.push_back(desc.name);
  }

  // Per-dataset key->value mapping: a shared base table with cluster-local
  // remaps drawn with probability `heterogeneity`.
  cluster_mapping_.resize(config_.manifest.size());
  for (std::size_t c = 0; c < config_.manifest.size(); ++c) {
    Rng rng = stream_rng(config_.data_seed, {stream_tag::doc_cluster, c});
    cluster_mapping_[c].resize(kNumKeys);
    for (int k = 0; k < kNumKeys; ++k) {
      bool remap = rng.next_unit() < config_.heterogeneity;
      int drawn = static_cast<int>(rng.next_below(kNumValues));
      cluster_mapping_[c][k] = remap ? drawn : k;
    }
  }

  // Answer vocabulary: every value token plus the yes/no verdicts.
  for (int v = 0; v < kNumValues; ++v) {
    answer_bins_.emplace_back(value_token(v), 0u);
  }
  answer_bins_.emplace_back("yes", 0u);
  answer_bins_.emplace_back("no", 0u);
  std::sort(answer_bins_.begin(), answer_bins_.end());
  for (auto& [token, bin] : answer_bins_) {
    bin = featurizer_.output_bin(token);
  }

  std::vector<ClientShardPlan> plans =
      partition(config_.manifest, config_.data_seed);
  pretrain_objectives_.resize(plans.size());
  finetune_objectives_.resize(plans.size());
  sample_counts_.resize(plans.size());
  for (const ClientShardPlan& plan : plans) {
    std::size_t dataset_index = 0;
    while (config_.manifest[dataset_index].name != plan.dataset) {
      ++dataset_index;
    }
    build_client(plan, dataset_index);
  }

  // Held-out validation documents drawn from each dataset's distribution.
  std::vector<SparseExample> val_fsp;
  std::vector<SparseExample> val_qa;
  for (std::size_t c = 0; c < config_.manifest.size(); ++c) {
    const DatasetDescriptor& desc = config_.manifest[c];
    std::size_t n_docs = desc.document_ids.size();
    std::int64_t mean_q = std::max<std::int64_t>(
        1, desc.total_questions() / static_cast<std::int64_t>(n_docs));
    MetricKind kind = metric_for_dataset(desc.name);
    for (int v = 0; v < config_.val_docs_per_dataset; ++v) {
      std::size_t doc_index = n_docs + static_cast<std::size_t>(v);
      DocumentExample doc = document(c, doc_index);
      append_fsp_examples(val_fsp, c, doc_index, doc);
      Rng qa_rng = stream_rng(config_.data_seed,
                              {stream_tag::doc_qa, c, doc_index});
      for (std::int64_t q = 0; q < mean_q; ++q) {
        auto [tokens, answer] = make_question(c, doc, qa_rng, kind);
        SparseExample ex;
        ex.features = featurizer_.features(tokens);
        ex.target = {{featurizer_.output_bin(answer), 1.0}};
        ValExample val;
        val.dataset = desc.name;
        val.features = ex.features;
        val.gold = answer;
        val.kind = kind;
        val_examples_.push_back(std::move(val));
        val_qa.push_back(std::move(ex));
      }
    }
  }
  if (!val_fsp.empty()) {
    val_pretrain_ = std::make_shared<SequenceDenoisingObjective>(
        config_.feature_dim, config_.output_dim, std::move(val_fsp));
  }
  val_finetune_ = std::make_shared<SequenceDenoisingObjective>(
      config_.feature_dim, config_.output_dim, std::move(val_qa));
}

DocumentExample DocumentFederation::document(std::size_t dataset_index,
                                             std::size_t doc_index) const {
  Rng rng = stream_rng(config_.data_seed,
                       {stream_tag::doc_content, dataset_index, doc_index});
  const std::vector<int>& mapping = cluster_mapping_[dataset_index];
  int rows = 6 + static_cast<int>(rng.next_below(7));
  DocumentExample doc;
  doc.image_ref = dataset_names_[dataset_index] + "/doc" +
                  std::to_string(doc_index);
  for (int r = 0; r < rows; ++r) {
    // Key popularity is tilted per dataset so domains overlap only partly.
    int key = static_cast<int>((rng.next_below(16) +
                                8 * (dataset_index % 4)) %
                               kNumKeys);
    int value = mapping[key];
    if (rng.next_unit() < kLabelNoise) {
      value = static_cast<int>(rng.next_below(kNumValues));
    }
    double y0 = (static_cast<double>(r) + 0.05) / rows;
    double y1 = (static_cast<double>(r) + 0.95) / rows;
    doc.tokens.push_back(key_token(key));
    doc.boxes.push_back(Box{0.06, y0, 0.44, y1});
    doc.tokens.push_back(value_token(value));
    doc.boxes.push_back(Box{0.56, y0, 0.94, y1});
  }
  return doc;
}

std::pair<std::vector<std::string>, std::string>
DocumentFederation::make_question(std::size_t dataset_index,
                                  const DocumentExample& doc, Rng& rng,
                                  MetricKind kind) const {
  std::size_t rows = doc.tokens.size() / 2;
  std::size_t row = rng.next_below(rows);
  const std::string& key = doc.tokens[2 * row];
  const std::string& value = doc.tokens[2 * row + 1];
  std::vector<std::string> tokens;
  tokens.push_back("q:" + dataset_names_[dataset_index]);
  tokens.push_back(key);
  if (kind == MetricKind::anls) {
    // Extractive question: which value sits in this cell?
    const Box& box = doc.boxes[2 * row + 1];
    tokens.push_back(loc_token(loc_discretizer_.bin(box.x0)));
    tokens.push_back(loc_token(loc_discretizer_.bin(box.y0)));
    tokens.push_back(loc_token(loc_discretizer_.bin(box.x1)));
    tokens.push_back(loc_token(loc_discretizer_.bin(box.y1)));
    return {std::move(tokens), value};
  }
  // Verification question: does this key carry that value?
  bool claim_true = rng.next_unit() < 0.5;
  std::string claimed =
      claim_true ? value
                 : value_token(static_cast<int>(rng.next_below(kNumValues)));
  tokens.push_back(claimed);
  return {std::move(tokens), claimed == value ? "yes" : "no"};
}

void DocumentFederation::append_fsp_examples(std::vector<SparseExample>& out,
                                             std::size_t dataset_index,
                                             std::size_t doc_index,
                                             const DocumentExample& doc) const {
  for (std::size_t o = 0; o < config_.objectives.size(); ++o) {
    MaskObjective objective = config_.objectives[o];
    Rng rng = stream_rng(config_.data_seed,
                         {stream_tag::doc_mask, o, dataset_index, doc_index});
    MaskPlan plan =
        sample_mask(objective, static_cast<int>(doc.tokens.size()),
                    default_mask_prob(objective), config_.mask_cap, rng);
    if (plan.size() == 0) continue;  // nothing to supervise
    SequencePair pair = build_pair(objective, doc, plan, loc_discretizer_);
    SparseExample ex;
    ex.features = featurizer_.features(pair.input);
    ex.target = featurizer_.target_distribution(pair.target);
    out.push_back(std::move(ex));
  }
}

void DocumentFederation::build_client(const ClientShardPlan& plan,
                                      std::size_t dataset_index) {
  const DatasetDescriptor& desc = config_.manifest[dataset_index];
  MetricKind kind = metric_for_dataset(desc.name);

  // Map shard document ids back to their manifest positions, which key the
  // content streams.
  std::map<std::string_view, std::size_t> position;
  for (std::size_t i = 0; i < desc.document_ids.size(); ++i) {
    position[desc.document_ids[i]] = i;
  }
  std::vector<SparseExample> fsp;
  std::vector<SparseExample> qa;
  for (std::size_t i = 0; i < plan.document_ids.size(); ++i) {
    std::size_t doc_index = position.at(plan.document_ids[i]);
    DocumentExample doc = document(dataset_index, doc_index);
    if (!config_.objectives.empty()) {
      append_fsp_examples(fsp, dataset_index, doc_index, doc);
    }
    Rng qa_rng = stream_rng(config_.data_seed,
                            {stream_tag::doc_qa, dataset_index, doc_index});
    for (int q = 0; q < plan.question_counts[i]; ++q) {
      auto [tokens, answer] = make_question(dataset_index, doc, qa_rng, kind);
      SparseExample ex;
      ex.features = featurizer_.features(tokens);
      ex.target = {{featurizer_.output_bin(answer), 1.0}};
      qa.push_back(std::move(ex));
    }
  }

  int id = plan.client_id;
  sample_counts_[id] = plan.sample_count(config_.count_mode);
  if (!fsp.empty()) {
    pretrain_objectives_[id] = std::make_shared<SequenceDenoisingObjective>(
        config_.feature_dim, config_.output_dim, std::move(fsp));
  }
  if (qa.empty()) {
    throw DomainError("document federation: client " + std::to_string(id) +
                      " has no question examples");
  }
  finetune_objectives_[id] = std::make_shared<SequenceDenoisingObjective>(
      config_.feature_dim, config_.output_dim, std::move(qa));
}

int DocumentFederation::client_count() const {
  return static_cast<int>(finetune_objectives_.size());
}

std::size_t DocumentFederation::dimension() const {
  return static_cast<std::size_t>(config_.feature_dim) * config_.output_dim;
}

ClientShard DocumentFederation::shard(int client_id, Phase phase) const {
  ClientShard shard;
  shard.client_id = client_id;
  if (phase == Phase::pretrain) {
    shard.objective = pretrain_objectives_.at(client_id);
    if (!shard.objective) {
      throw ProtocolError("document federation: client " +
                          std::to_string(client_id) +
                          " has no pretraining examples");
    }
  } else {
    shard.objective = finetune_objectives_.at(client_id);
  }
  shard.sample_count = sample_counts_.at(client_id);
  return shard;
}

std::vector<std::int64_t> DocumentFederation::sample_counts() const {
  return sample_counts_;
}

EvalReport DocumentFederation::evaluate(Phase phase,
                                        const ParameterVector& theta) const {
  EvalReport report;
  if (phase == Phase::pretrain && val_pretrain_) {
    report.val_loss = val_pretrain_->mean_loss(theta.values());
  } else {
    report.val_loss = val_finetune_->mean_loss(theta.values());
  }

  // Answer-vocabulary-constrained decoding, then the two-step metric.
  std::vector<double> logits(config_.output_dim);
  std::vector<EvalExample> scored;
  scored.reserve(val_examples_.size());
  for (const ValExample& val : val_examples_) {
    SequenceDenoisingObjective::logits(theta.values(), config_.feature_dim,
                                       config_.output_dim, val.features,
                                       logits);
    const std::string* best = nullptr;
    double best_score = 0.0;
    for (const auto& [token, bin] : answer_bins_) {
      double score = logits[bin];
      if (best == nullptr || score > best_score) {
        best = &token;
        best_score = score;
      }
    }
    EvalExample ex;
    ex.dataset = val.dataset;
    ex.prediction = *best;
    ex.golds = {val.gold};
    ex.kind = val.kind;
    scored.push_back(std::move(ex));
  }
  ScoreReport score = two_step_average(scored);
  report.per_dataset = std::move(score.per_dataset);
  report.two_step = score.final_score;
  return report;
}

std::vector<std::string> DocumentFederation::dataset_names() const {
  return dataset_names_;
}

}  // namespace fedsim
