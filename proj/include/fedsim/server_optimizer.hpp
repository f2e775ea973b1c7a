#pragma once

#include <cstdint>
#include <optional>
#include <string_view>

#include "fedsim/core.hpp"

namespace fedsim {

enum class ServerOpt { fedavg, fedavgm, fedadam };

const char* to_string(ServerOpt opt);
std::optional<ServerOpt> server_opt_from_string(std::string_view name);

struct ServerHyperparams {
  double eta_s = 0.001;    // server learning rate (fedadam)
  double momentum = 0.9;   // beta (fedavgm)
  double beta1 = 0.9;      // fedadam first moment
  double beta2 = 0.99;     // fedadam second moment
  double epsilon = 1e-5;   // fedadam denominator guard
  // The plain-averaging rule takes a unit step; this opts it into eta_s.
  bool fedavg_scaled = false;
};

/// Server-side optimizer state: the global model plus first/second moment
/// accumulators, which start at zero and stay entrywise finite (v >= 0).
struct ServerState {
  ParameterVector theta;
  ParameterVector m;
  ParameterVector v;
  std::int64_t round = 0;
  ServerHyperparams hparams;

  static ServerState init(ParameterVector theta0, ServerHyperparams hp = {});
};

// theta <- theta - delta (times eta_s when fedavg_scaled); moments untouched.
ServerState fedavg_step(const ServerState& state, const ParameterVector& delta);

// m <- beta*m + (1-beta)*delta; theta <- theta - m.
ServerState fedavgm_step(const ServerState& state, const ParameterVector& delta);

// m <- beta1*m + (1-beta1)*delta; v <- beta2*v + (1-beta2)*delta^2;
// theta <- theta - eta_s * m / (sqrt(v) + eps). No bias correction.
ServerState fedadam_step(const ServerState& state, const ParameterVector& delta);

ServerState server_step(ServerOpt opt, const ServerState& state,
                        const ParameterVector& delta);

}  // namespace fedsim
