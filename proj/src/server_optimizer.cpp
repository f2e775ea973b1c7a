#include "fedsim/server_optimizer.hpp"

#include <cmath>

namespace fedsim {

namespace {

void check_delta(const ServerState& state, const ParameterVector& delta,
                 const char* who) {
  if (delta.dim() != state.theta.dim()) {
    throw DimensionError(std::string(who) + ": delta dimension " +
                         std::to_string(delta.dim()) + " != model dimension " +
                         std::to_string(state.theta.dim()));
  }
  delta.check_finite(who);
}

}  // namespace

const char* to_string(ServerOpt opt) {
  switch (opt) {
    case ServerOpt::fedavg: return "fedavg";
    case ServerOpt::fedavgm: return "fedavgm";
    case ServerOpt::fedadam: return "fedadam";
  }
  return "fedavg";
}

std::optional<ServerOpt> server_opt_from_string(std::string_view name) {
  if (name == "fedavg") return ServerOpt::fedavg;
  if (name == "fedavgm") return ServerOpt::fedavgm;
  if (name == "fedadam") return ServerOpt::fedadam;
  return std::nullopt;
}

ServerState ServerState::init(ParameterVector theta0, ServerHyperparams hp) {
  ServerState s;
  s.m = ParameterVector::zeros(theta0.dim());
  s.v = ParameterVector::zeros(theta0.dim());
  s.theta = std::move(theta0);
  s.round = 0;
  s.hparams = hp;
  return s;
}

ServerState fedavg_step(const ServerState& state, const ParameterVector& delta) {
  check_delta(state, delta, "fedavg_step");
  ServerState next = state;
  double scale = state.hparams.fedavg_scaled ? state.hparams.eta_s : 1.0;
  next.theta = axpy(-scale, delta, state.theta);
  return next;
}

ServerState fedavgm_step(const ServerState& state, const ParameterVector& delta) {
  check_delta(state, delta, "fedavgm_step");
  double beta = state.hparams.momentum;
  std::size_t dim = delta.dim();
  std::vector<double> m(dim), theta(dim);
  for (std::size_t i = 0; i < dim; ++i) {
    m[i] = beta * state.m[i] + (1.0 - beta) * delta[i];
    theta[i] = state.theta[i] - m[i];
  }
  ServerState next = state;
  next.m = ParameterVector(std::move(m));
  next.theta = ParameterVector(std::move(theta));
  return next;
}

ServerState fedadam_step(const ServerState& state, const ParameterVector& delta) {
  check_delta(state, delta, "fedadam_step");
  const ServerHyperparams& hp = state.hparams;
  std::size_t dim = delta.dim();
  std::vector<double> m(dim), v(dim), theta(dim);
  for (std::size_t i = 0; i < dim; ++i) {
    m[i] = hp.beta1 * state.m[i] + (1.0 - hp.beta1) * delta[i];
    v[i] = hp.beta2 * state.v[i] + (1.0 - hp.beta2) * delta[i] * delta[i];
    theta[i] = state.theta[i] - hp.eta_s * m[i] / (std::sqrt(v[i]) + hp.epsilon);
  }
  ServerState next = state;
  next.m = ParameterVector(std::move(m));
  next.v = ParameterVector(std::move(v));
  next.theta = ParameterVector(std::move(theta));
  return next;
}

ServerState server_step(ServerOpt opt, const ServerState& state,
                        const ParameterVector& delta) {
  switch (opt) {
    case ServerOpt::fedavg: return fedavg_step(state, delta);
    case ServerOpt::fedavgm: return fedavgm_step(state, delta);
    case ServerOpt::fedadam: return fedadam_step(state, delta);
  }
  throw DomainError("server_step: unknown optimizer");
}

}  // namespace fedsim
