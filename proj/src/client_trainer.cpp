#include "fedsim/client_trainer.hpp"

#include <cmath>
#include <numeric>
#include <vector>

namespace fedsim {

const char* to_string(ClientOpt opt) {
  return opt == ClientOpt::adam ? "adam" : "gd";
}

std::optional<ClientOpt> client_opt_from_string(std::string_view name) {
  if (name == "adam") return ClientOpt::adam;
  if (name == "gd") return ClientOpt::gd;
  return std::nullopt;
}

double LocalObjective::loss_and_gradient(std::span<const double> theta,
                                         std::span<const std::uint32_t> batch,
                                         std::span<double> grad) const {
  gradient(theta, batch, grad);
  return loss(theta, batch);
}

double LocalObjective::mean_loss(std::span<const double> theta) const {
  std::vector<std::uint32_t> all(example_count());
  std::iota(all.begin(), all.end(), 0u);
  return loss(theta, all);
}

void LocalObjective::mean_gradient(std::span<const double> theta,
                                   std::span<double> grad) const {
  std::vector<std::uint32_t> all(example_count());
  std::iota(all.begin(), all.end(), 0u);
  gradient(theta, all, grad);
}

ClientUpdate local_train(const ParameterVector& theta, const ClientShard& shard,
                         const TrainerConfig& config, Rng& rng) {
  if (!shard.objective || shard.objective->example_count() == 0) {
    throw DomainError("local_train: client " + std::to_string(shard.client_id) +
                      " has an empty shard");
  }
  const LocalObjective& objective = *shard.objective;
  if (objective.dimension() != theta.dim()) {
    throw DimensionError("local_train: objective dimension " +
                         std::to_string(objective.dimension()) +
                         " != model dimension " + std::to_string(theta.dim()));
  }
  if (config.eta_l <= 0.0 || config.batch_size < 1 || config.epochs < 0) {
    throw DomainError("local_train: invalid trainer configuration");
  }

  std::size_t dim = theta.dim();
  std::size_t n = objective.example_count();
  std::vector<double> y(theta.values().begin(), theta.values().end());
  std::vector<double> grad(dim, 0.0);

  // Optimizer state is freshly zeroed every call; rounds never leak state.
  std::vector<double> m, v;
  if (config.optimizer == ClientOpt::adam) {
    m.assign(dim, 0.0);
    v.assign(dim, 0.0);
  }
  std::int64_t step = 0;

  std::vector<std::uint32_t> order(n);
  std::iota(order.begin(), order.end(), 0u);

  double last_epoch_loss = config.epochs == 0 ? objective.mean_loss(y) : 0.0;
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    rng.shuffle(std::span<std::uint32_t>(order));
    double loss_sum = 0.0;
    std::int64_t batches = 0;
    for (std::size_t start = 0; start < n; start += config.batch_size) {
      std::size_t end = std::min(n, start + config.batch_size);
      std::span<const std::uint32_t> batch(order.data() + start, end - start);
      double loss = objective.loss_and_gradient(y, batch, grad);
      if (!std::isfinite(loss)) {
        throw NumericError("local_train: client " +
                           std::to_string(shard.client_id) +
                           " diverged (non-finite loss) at epoch " +
                           std::to_string(epoch) + ", batch " +
                           std::to_string(batches));
      }
      loss_sum += loss;
      ++batches;
      ++step;
      if (config.optimizer == ClientOpt::gd) {
        for (std::size_t i = 0; i < dim; ++i) {
          y[i] -= config.eta_l * (grad[i] + config.weight_decay * y[i]);
        }
      } else {
        double bc1 = 1.0 - std::pow(config.beta1, static_cast<double>(step));
        double bc2 = 1.0 - std::pow(config.beta2, static_cast<double>(step));
        for (std::size_t i = 0; i < dim; ++i) {
          m[i] = config.beta1 * m[i] + (1.0 - config.beta1) * grad[i];
          v[i] = config.beta2 * v[i] + (1.0 - config.beta2) * grad[i] * grad[i];
          double m_hat = m[i] / bc1;
          double v_hat = v[i] / bc2;
          y[i] -= config.eta_l * (m_hat / (std::sqrt(v_hat) + config.epsilon) +
                                  config.weight_decay * y[i]);
        }
      }
    }
    last_epoch_loss = loss_sum / static_cast<double>(batches);
  }

  std::vector<double> delta(dim);
  for (std::size_t i = 0; i < dim; ++i) {
    delta[i] = theta[i] - y[i];
  }
  ClientUpdate update;
  update.client_id = shard.client_id;
  update.delta = ParameterVector(std::move(delta));
  update.sample_count = shard.sample_count;
  update.train_loss = last_epoch_loss;
  return update;
}

}  // namespace fedsim
