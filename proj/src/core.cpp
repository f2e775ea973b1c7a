#include "fedsim/core.hpp"

#include <cmath>

namespace fedsim {

const char* to_string(Phase phase) {
  return phase == Phase::pretrain ? "pretrain" : "finetune";
}

const char* to_string(CountMode mode) {
  return mode == CountMode::questions ? "questions" : "documents";
}

ParameterVector::ParameterVector(std::vector<double> values)
    : values_(std::move(values)) {
  check_finite("ParameterVector");
}

ParameterVector ParameterVector::zeros(std::size_t dim) {
  ParameterVector v;
  v.values_.assign(dim, 0.0);
  return v;
}

void ParameterVector::check_finite(const char* context) const {
  for (std::size_t i = 0; i < values_.size(); ++i) {
    if (!std::isfinite(values_[i])) {
      throw NumericError(std::string(context) + ": non-finite entry at index " +
                         std::to_string(i));
    }
  }
}

ParameterVector axpy(double a, const ParameterVector& x,
                     const ParameterVector& y) {
  if (x.dim() != y.dim()) {
    throw DimensionError("axpy: dimension mismatch (" +
                         std::to_string(x.dim()) + " vs " +
                         std::to_string(y.dim()) + ")");
  }
  if (!std::isfinite(a)) {
    throw NumericError("axpy: non-finite scalar");
  }
  std::vector<double> out(x.dim());
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = a * x[i] + y[i];
  }
  return ParameterVector(std::move(out));
}

double l2_norm(const ParameterVector& x) {
  double acc = 0.0;
  for (std::size_t i = 0; i < x.dim(); ++i) {
    acc += x[i] * x[i];
  }
  return std::sqrt(acc);
}

PopulationWeights PopulationWeights::from_counts(
    std::span<const std::int64_t> counts) {
  if (counts.empty()) {
    throw DomainError("population_weights: empty sample counts");
  }
  std::int64_t total = 0;
  for (std::size_t i = 0; i < counts.size(); ++i) {
    if (counts[i] < 1) {
      throw DomainError("population_weights: count for client " +
                        std::to_string(i) + " must be >= 1");
    }
    total += counts[i];
  }
  PopulationWeights w;
  w.weights_.resize(counts.size());
  for (std::size_t i = 0; i < counts.size(); ++i) {
    w.weights_[i] = static_cast<double>(counts[i]) / static_cast<double>(total);
  }
  return w;
}

double PopulationWeights::weight(std::size_t client_id) const {
  if (client_id >= weights_.size()) {
    throw DimensionError("PopulationWeights: client id " +
                         std::to_string(client_id) + " out of range");
  }
  return weights_[client_id];
}

}  // namespace fedsim
