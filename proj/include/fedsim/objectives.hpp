#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "fedsim/client_trainer.hpp"
#include "fedsim/core.hpp"

namespace fedsim {

/// Least squares: mean over examples of 0.5*(a_i . theta - b_i)^2, one row
/// per example.
class QuadraticObjective final : public LocalObjective {
 public:
  QuadraticObjective(std::size_t dim, std::vector<double> rows_row_major,
                     std::vector<double> targets);

  std::size_t dimension() const override { return dim_; }
  std::size_t example_count() const override { return targets_.size(); }
  double loss(std::span<const double> theta,
              std::span<const std::uint32_t> batch) const override;
  void gradient(std::span<const double> theta,
                std::span<const std::uint32_t> batch,
                std::span<double> grad) const override;

  std::span<const double> row(std::uint32_t example) const;
  double target(std::uint32_t example) const { return targets_[example]; }

 private:
  std::size_t dim_;
  std::vector<double> rows_;
  std::vector<double> targets_;
};

/// Softmax classification over dense features; theta packs the class-major
/// weight matrix W[class][feature].
class LogisticObjective final : public LocalObjective {
 public:
  LogisticObjective(std::size_t num_classes, std::size_t feature_dim,
                    std::vector<double> features_row_major,
                    std::vector<std::uint32_t> labels);

  std::size_t dimension() const override { return num_classes_ * feature_dim_; }
  std::size_t example_count() const override { return labels_.size(); }
  double loss(std::span<const double> theta,
              std::span<const std::uint32_t> batch) const override;
  void gradient(std::span<const double> theta,
                std::span<const std::uint32_t> batch,
                std::span<double> grad) const override;
  double loss_and_gradient(std::span<const double> theta,
                           std::span<const std::uint32_t> batch,
                           std::span<double> grad) const override;

 private:
  std::size_t num_classes_;
  std::size_t feature_dim_;
  std::vector<double> features_;
  std::vector<std::uint32_t> labels_;
};

/// Sparse bag-of-token example: input features and a target distribution
/// over output bins. Entries are sorted by bin index.
struct SparseExample {
  std::vector<std::pair<std::uint32_t, double>> features;
  std::vector<std::pair<std::uint32_t, double>> target;  // sums to 1
};

/// Cross-entropy between softmax(W x) and a target token distribution,
/// where W is theta reshaped to output_dim x feature_dim. This is the
/// linear embedding of the denoising task; with one-hot targets it doubles
/// as the answer-prediction task, so both phases share parameters.
class SequenceDenoisingObjective final : public LocalObjective {
 public:
  SequenceDenoisingObjective(std::uint32_t feature_dim, std::uint32_t output_dim,
                             std::vector<SparseExample> examples);

  std::size_t dimension() const override {
    return static_cast<std::size_t>(feature_dim_) * output_dim_;
  }
  std::size_t example_count() const override { return examples_.size(); }
  double loss(std::span<const double> theta,
              std::span<const std::uint32_t> batch) const override;
  void gradient(std::span<const double> theta,
                std::span<const std::uint32_t> batch,
                std::span<double> grad) const override;
  double loss_and_gradient(std::span<const double> theta,
                           std::span<const std::uint32_t> batch,
                           std::span<double> grad) const override;

  std::uint32_t feature_dim() const { return feature_dim_; }
  std::uint32_t output_dim() const { return output_dim_; }

  // Class scores W x for one example's features; used by evaluators.
  static void logits(std::span<const double> theta, std::uint32_t feature_dim,
                     std::uint32_t output_dim,
                     std::span<const std::pair<std::uint32_t, double>> features,
                     std::span<double> out);

 private:
  std::uint32_t feature_dim_;
  std::uint32_t output_dim_;
  std::vector<SparseExample> examples_;
};

std::uint64_t fnv1a64(std::string_view text);

// Loads `input TAB target` records (space-separated tokens, the compile
// subcommand's output) into featurized examples; records with an empty
// target are skipped.
std::vector<SparseExample> examples_from_pairs(
    std::istream& in, const class HashedBagFeaturizer& featurizer);

/// Hashes token sequences into fixed-width bag features (unigrams plus
/// adjacent bigrams, L1-normalized) and tokens into output bins. Input and
/// output spaces use independent hash salts.
class HashedBagFeaturizer {
 public:
  HashedBagFeaturizer(std::uint32_t feature_dim, std::uint32_t output_dim);

  std::uint32_t feature_dim() const { return feature_dim_; }
  std::uint32_t output_dim() const { return output_dim_; }

  std::vector<std::pair<std::uint32_t, double>> features(
      std::span<const std::string> tokens) const;
  std::uint32_t output_bin(std::string_view token) const;
  std::vector<std::pair<std::uint32_t, double>> target_distribution(
      std::span<const std::string> tokens) const;

 private:
  std::uint32_t feature_dim_;
  std::uint32_t output_dim_;
};

}  // namespace fedsim
