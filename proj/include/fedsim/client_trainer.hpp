#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string_view>

#include "fedsim/core.hpp"
#include "fedsim/rng.hpp"

namespace fedsim {

enum class ClientOpt { adam, gd };

const char* to_string(ClientOpt opt);
std::optional<ClientOpt> client_opt_from_string(std::string_view name);

struct TrainerConfig {
  ClientOpt optimizer = ClientOpt::adam;
  double eta_l = 0.0005;
  double weight_decay = 0.01;  // decoupled
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  int batch_size = 16;
  int epochs = 1;  // E; 0 is a test hook producing a zero delta
};

/// A differentiable task over a flat parameter vector. Batches are index
/// sets into the objective's own example store; loss and gradient are means
/// over the batch, accumulated in the order the indices are given.
class LocalObjective {
 public:
  virtual ~LocalObjective() = default;

  virtual std::size_t dimension() const = 0;
  virtual std::size_t example_count() const = 0;

  virtual double loss(std::span<const double> theta,
                      std::span<const std::uint32_t> batch) const = 0;
  // Adds nothing to `grad`; overwrites it with the mean batch gradient.
  virtual void gradient(std::span<const double> theta,
                        std::span<const std::uint32_t> batch,
                        std::span<double> grad) const = 0;
  // Single-pass variant; default does two passes.
  virtual double loss_and_gradient(std::span<const double> theta,
                                   std::span<const std::uint32_t> batch,
                                   std::span<double> grad) const;

  // Mean loss over all examples.
  double mean_loss(std::span<const double> theta) const;
  // Mean gradient over all examples.
  void mean_gradient(std::span<const double> theta,
                     std::span<double> grad) const;
};

/// One client's local dataset as the round loop sees it: the objective to
/// train plus the declared sample count n_k that drives aggregation weights.
struct ClientShard {
  int client_id = -1;
  std::shared_ptr<const LocalObjective> objective;
  std::int64_t sample_count = 0;
};

// E epochs of minibatch training starting from theta, with the optimizer
// state zeroed at entry (no state carries across rounds). Batch order is a
// fresh shuffle per epoch drawn from `rng`; the last partial batch trains.
// Returns delta = theta - y_E and the shard's n_k.
ClientUpdate local_train(const ParameterVector& theta, const ClientShard& shard,
                         const TrainerConfig& config, Rng& rng);

}  // namespace fedsim
