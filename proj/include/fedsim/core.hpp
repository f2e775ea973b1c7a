#pragma once

#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace fedsim {

// Error taxonomy shared by all modules. Everything derives from Error so the
// CLI boundary can catch the whole family.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Shape mismatch between values that must agree elementwise.
struct DimensionError : Error {
  using Error::Error;
};
// Input outside an operation's documented domain.
struct DomainError : Error {
  using Error::Error;
};
// NaN or infinity where a finite value is required.
struct NumericError : Error {
  using Error::Error;
};
// Round-protocol violation (empty update set, exhausted schedule, ...).
struct ProtocolError : Error {
  using Error::Error;
};
// Malformed serialized artifact (manifest, sequence pair, run config).
struct ParseError : Error {
  using Error::Error;
};

// Training phases of a two-stage schedule.
enum class Phase { pretrain, finetune };

// What n_k counts when client weights are derived from data sizes.
enum class CountMode { questions, documents };

const char* to_string(Phase phase);
const char* to_string(CountMode mode);

/// Flat 64-bit model state; also the shape of client deltas and aggregated
/// pseudo-gradients. Entries are finite by construction and the dimension is
/// fixed for the lifetime of a run.
class ParameterVector {
 public:
  ParameterVector() = default;
  explicit ParameterVector(std::vector<double> values);
  static ParameterVector zeros(std::size_t dim);

  std::size_t dim() const { return values_.size(); }
  bool empty() const { return values_.empty(); }
  double operator[](std::size_t i) const { return values_[i]; }
  double& operator[](std::size_t i) { return values_[i]; }
  std::span<const double> values() const { return values_; }
  std::span<double> values() { return values_; }

  // Revalidates the finiteness invariant after in-place mutation.
  void check_finite(const char* context) const;

  bool operator==(const ParameterVector& other) const = default;

 private:
  std::vector<double> values_;
};

// a*x + y elementwise; inputs untouched. Throws DimensionError on shape
// mismatch and NumericError if the scalar or the result is not finite.
ParameterVector axpy(double a, const ParameterVector& x,
                     const ParameterVector& y);

// Euclidean norm accumulated in ascending index order.
double l2_norm(const ParameterVector& x);

// One client's contribution to a round: delta = theta_t - y_E plus the
// sample count that drives aggregation weights.
struct ClientUpdate {
  int client_id = -1;
  ParameterVector delta;
  std::int64_t sample_count = 0;  // n_k
  double train_loss = 0.0;        // diagnostic only
};

/// Per-client weights p_k = n_k / sum_j n_j over the full population,
/// indexed by client id.
class PopulationWeights {
 public:
  static PopulationWeights from_counts(std::span<const std::int64_t> counts);

  std::size_t size() const { return weights_.size(); }
  double weight(std::size_t client_id) const;
  std::span<const double> weights() const { return weights_; }

 private:
  std::vector<double> weights_;
};

}  // namespace fedsim
