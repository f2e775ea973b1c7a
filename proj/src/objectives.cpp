#include "fedsim/objectives.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <map>
#include <sstream>

namespace fedsim {

namespace {

void check_batch(std::span<const std::uint32_t> batch, std::size_t n,
                 const char* who) {
  if (batch.empty()) {
    throw DomainError(std::string(who) + ": empty batch");
  }
  for (std::uint32_t id : batch) {
    if (id >= n) {
      throw DimensionError(std::string(who) + ": example id " +
                           std::to_string(id) + " out of range");
    }
  }
}

void check_theta(std::span<const double> theta, std::size_t dim,
                 const char* who) {
  if (theta.size() != dim) {
    throw DimensionError(std::string(who) + ": theta dimension " +
                         std::to_string(theta.size()) + " != " +
                         std::to_string(dim));
  }
}

// log(sum exp(logits)) with the usual max shift.
double log_sum_exp(std::span<const double> logits) {
  double max_logit = logits[0];
  for (double l : logits) max_logit = std::max(max_logit, l);
  double sum = 0.0;
  for (double l : logits) sum += std::exp(l - max_logit);
  return max_logit + std::log(sum);
}

}  // namespace

QuadraticObjective::QuadraticObjective(std::size_t dim,
                                       std::vector<double> rows_row_major,
                                       std::vector<double> targets)
    : dim_(dim), rows_(std::move(rows_row_major)), targets_(std::move(targets)) {
  if (dim_ == 0 || targets_.empty() || rows_.size() != dim_ * targets_.size()) {
    throw DimensionError("quadratic objective: inconsistent shapes");
  }
}

std::span<const double> QuadraticObjective::row(std::uint32_t example) const {
  return std::span<const double>(rows_.data() + example * dim_, dim_);
}

double QuadraticObjective::loss(std::span<const double> theta,
                                std::span<const std::uint32_t> batch) const {
  check_theta(theta, dim_, "quadratic");
  check_batch(batch, targets_.size(), "quadratic");
  double sum = 0.0;
  for (std::uint32_t id : batch) {
    std::span<const double> a = row(id);
    double r = -targets_[id];
    for (std::size_t i = 0; i < dim_; ++i) r += a[i] * theta[i];
    sum += 0.5 * r * r;
  }
  return sum / static_cast<double>(batch.size());
}

void QuadraticObjective::gradient(std::span<const double> theta,
                                  std::span<const std::uint32_t> batch,
                                  std::span<double> grad) const {
  check_theta(theta, dim_, "quadratic");
  check_theta(grad, dim_, "quadratic gradient");
  check_batch(batch, targets_.size(), "quadratic");
  std::fill(grad.begin(), grad.end(), 0.0);
  double inv = 1.0 / static_cast<double>(batch.size());
  for (std::uint32_t id : batch) {
    std::span<const double> a = row(id);
    double r = -targets_[id];
    for (std::size_t i = 0; i < dim_; ++i) r += a[i] * theta[i];
    for (std::size_t i = 0; i < dim_; ++i) grad[i] += inv * r * a[i];
  }
}

LogisticObjective::LogisticObjective(std::size_t num_classes,
                                     std::size_t feature_dim,
                                     std::vector<double> features_row_major,
                                     std::vector<std::uint32_t> labels)
    : num_classes_(num_classes),
      feature_dim_(feature_dim),
      features_(std::move(features_row_major)),
      labels_(std::move(labels)) {
  if (num_classes_ < 2 || feature_dim_ == 0 || labels_.empty() ||
      features_.size() != feature_dim_ * labels_.size()) {
    throw DimensionError("logistic objective: inconsistent shapes");
  }
  for (std::uint32_t y : labels_) {
    if (y >= num_classes_) {
      throw DomainError("logistic objective: label out of range");
    }
  }
}

double LogisticObjective::loss(std::span<const double> theta,
                               std::span<const std::uint32_t> batch) const {
  std::vector<double> scratch(dimension());
  return loss_and_gradient(theta, batch, scratch);
}

void LogisticObjective::gradient(std::span<const double> theta,
                                 std::span<const std::uint32_t> batch,
                                 std::span<double> grad) const {
  loss_and_gradient(theta, batch, grad);
}

double LogisticObjective::loss_and_gradient(
    std::span<const double> theta, std::span<const std::uint32_t> batch,
    std::span<double> grad) const {
  check_theta(theta, dimension(), "logistic");
  check_theta(grad, dimension(), "logistic gradient");
  check_batch(batch, labels_.size(), "logistic");
  std::fill(grad.begin(), grad.end(), 0.0);
  double inv = 1.0 / static_cast<double>(batch.size());
  std::vector<double> logits(num_classes_);
  double loss_sum = 0.0;
  for (std::uint32_t id : batch) {
    const double* x = features_.data() + static_cast<std::size_t>(id) * feature_dim_;
    for (std::size_t c = 0; c < num_classes_; ++c) {
      const double* w = theta.data() + c * feature_dim_;
      double dot = 0.0;
      for (std::size_t f = 0; f < feature_dim_; ++f) dot += w[f] * x[f];
      logits[c] = dot;
    }
    double lse = log_sum_exp(logits);
    loss_sum += lse - logits[labels_[id]];
    for (std::size_t c = 0; c < num_classes_; ++c) {
      double p = std::exp(logits[c] - lse);
      double coeff = inv * (p - (c == labels_[id] ? 1.0 : 0.0));
      double* g = grad.data() + c * feature_dim_;
      for (std::size_t f = 0; f < feature_dim_; ++f) g[f] += coeff * x[f];
    }
  }
  return loss_sum * inv;
}

SequenceDenoisingObjective::SequenceDenoisingObjective(
    std::uint32_t feature_dim, std::uint32_t output_dim,
    std::vector<SparseExample> examples)
    : feature_dim_(feature_dim),
      output_dim_(output_dim),
      examples_(std::move(examples)) {
  if (feature_dim_ == 0 || output_dim_ == 0 || examples_.empty()) {
    throw DimensionError("denoising objective: empty configuration");
  }
  for (const SparseExample& ex : examples_) {
    if (ex.target.empty()) {
      throw DomainError("denoising objective: example with empty target");
    }
    for (const auto& [bin, _] : ex.features) {
      if (bin >= feature_dim_) {
        throw DimensionError("denoising objective: feature bin out of range");
      }
    }
    for (const auto& [bin, _] : ex.target) {
      if (bin >= output_dim_) {
        throw DimensionError("denoising objective: target bin out of range");
      }
    }
  }
}

void SequenceDenoisingObjective::logits(
    std::span<const double> theta, std::uint32_t feature_dim,
    std::uint32_t output_dim,
    std::span<const std::pair<std::uint32_t, double>> features,
    std::span<double> out) {
  for (std::uint32_t v = 0; v < output_dim; ++v) {
    const double* w = theta.data() + static_cast<std::size_t>(v) * feature_dim;
    double dot = 0.0;
    for (const auto& [f, x] : features) dot += w[f] * x;
    out[v] = dot;
  }
}

double SequenceDenoisingObjective::loss(
    std::span<const double> theta, std::span<const std::uint32_t> batch) const {
  check_theta(theta, dimension(), "denoising");
  check_batch(batch, examples_.size(), "denoising");
  std::vector<double> l(output_dim_);
  double loss_sum = 0.0;
  for (std::uint32_t id : batch) {
    const SparseExample& ex = examples_[id];
    logits(theta, feature_dim_, output_dim_, ex.features, l);
    double lse = log_sum_exp(l);
    double ce = 0.0;
    for (const auto& [bin, q] : ex.target) ce += q * (lse - l[bin]);
    loss_sum += ce;
  }
  return loss_sum / static_cast<double>(batch.size());
}

void SequenceDenoisingObjective::gradient(std::span<const double> theta,
                                          std::span<const std::uint32_t> batch,
                                          std::span<double> grad) const {
  loss_and_gradient(theta, batch, grad);
}

double SequenceDenoisingObjective::loss_and_gradient(
    std::span<const double> theta, std::span<const std::uint32_t> batch,
    std::span<double> grad) const {
  check_theta(theta, dimension(), "denoising");
  check_theta(grad, dimension(), "denoising gradient");
  check_batch(batch, examples_.size(), "denoising");
  std::fill(grad.begin(), grad.end(), 0.0);
  double inv = 1.0 / static_cast<double>(batch.size());
  std::vector<double> l(output_dim_);
  double loss_sum = 0.0;
  for (std::uint32_t id : batch) {
    const SparseExample& ex = examples_[id];
    logits(theta, feature_dim_, output_dim_, ex.features, l);
    double lse = log_sum_exp(l);
    double ce = 0.0;
    for (const auto& [bin, q] : ex.target) ce += q * (lse - l[bin]);
    loss_sum += ce;
    // d/dW = (softmax - q) x^T, accumulated over the sparse support only.
    for (std::uint32_t v = 0; v < output_dim_; ++v) {
      double coeff = std::exp(l[v] - lse);
      l[v] = coeff;  // reuse as probability buffer
    }
    for (const auto& [bin, q] : ex.target) l[bin] -= q;
    for (std::uint32_t v = 0; v < output_dim_; ++v) {
      double coeff = inv * l[v];
      if (coeff == 0.0) continue;
      double* g = grad.data() + static_cast<std::size_t>(v) * feature_dim_;
      for (const auto& [f, x] : ex.features) g[f] += coeff * x;
    }
  }
  return loss_sum * inv;
}

std::vector<SparseExample> examples_from_pairs(
    std::istream& in, const HashedBagFeaturizer& featurizer) {
  std::vector<SparseExample> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::size_t tab = line.find('\t');
    if (tab == std::string::npos) {
      throw ParseError("pairs line " + std::to_string(line_no) +
                       ": expected input TAB target");
    }
    auto tokenize = [](const std::string& text) {
      std::vector<std::string> tokens;
      std::istringstream stream(text);
      std::string token;
      while (stream >> token) tokens.push_back(std::move(token));
      return tokens;
    };
    std::vector<std::string> input = tokenize(line.substr(0, tab));
    std::vector<std::string> target = tokenize(line.substr(tab + 1));
    if (target.empty()) continue;
    SparseExample ex;
    ex.features = featurizer.features(input);
    ex.target = featurizer.target_distribution(target);
    out.push_back(std::move(ex));
  }
  return out;
}

std::uint64_t fnv1a64(std::string_view text) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (char c : text) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ull;
  }
  return h;
}

HashedBagFeaturizer::HashedBagFeaturizer(std::uint32_t feature_dim,
                                         std::uint32_t output_dim)
    : feature_dim_(feature_dim), output_dim_(output_dim) {
  if (feature_dim_ == 0 || output_dim_ == 0) {
    throw DomainError("featurizer: dimensions must be positive");
  }
}

std::vector<std::pair<std::uint32_t, double>> HashedBagFeaturizer::features(
    std::span<const std::string> tokens) const {
  std::map<std::uint32_t, double> counts;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    std::uint64_t h = fnv1a64(tokens[i]);
    counts[static_cast<std::uint32_t>((h ^ (h >> 32)) % feature_dim_)] += 1.0;
    if (i + 1 < tokens.size()) {
      std::uint64_t hb = fnv1a64(tokens[i] + "\x1f" + tokens[i + 1]);
      counts[static_cast<std::uint32_t>((hb ^ (hb >> 32)) % feature_dim_)] += 1.0;
    }
  }
  double total = 0.0;
  for (const auto& [_, c] : counts) total += c;
  std::vector<std::pair<std::uint32_t, double>> out;
  out.reserve(counts.size());
  for (const auto& [bin, c] : counts) {
    out.emplace_back(bin, total > 0.0 ? c / total : 0.0);
  }
  return out;
}

std::uint32_t HashedBagFeaturizer::output_bin(std::string_view token) const {
  std::uint64_t h = fnv1a64(std::string("out\x1f") + std::string(token));
  return static_cast<std::uint32_t>((h ^ (h >> 32)) % output_dim_);
}

std::vector<std::pair<std::uint32_t, double>>
HashedBagFeaturizer::target_distribution(
    std::span<const std::string> tokens) const {
  std::map<std::uint32_t, double> counts;
  for (const std::string& t : tokens) {
    counts[output_bin(t)] += 1.0;
  }
  double total = 0.0;
  for (const auto& [_, c] : counts) total += c;
  std::vector<std::pair<std::uint32_t, double>> out;
  out.reserve(counts.size());
  for (const auto& [bin, c] : counts) {
    out.emplace_back(bin, total > 0.0 ? c / total : 0.0);
  }
  return out;
}

}  // namespace fedsim
