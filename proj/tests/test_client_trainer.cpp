#include <doctest.h>

#include <cmath>
#include <memory>
#include <sstream>
#include <vector>

#include "fedsim/client_trainer.hpp"
#include "fedsim/objectives.hpp"
#include "fedsim/rng.hpp"

using namespace fedsim;

namespace {

// Independent scalar AdamW step: bias-corrected moments, decoupled decay.
struct RefAdamW {
  double m = 0.0, v = 0.0;
  int t = 0;

  double step(double y, double grad, const TrainerConfig& cfg) {
    ++t;
    m = cfg.beta1 * m + (1.0 - cfg.beta1) * grad;
    v = cfg.beta2 * v + (1.0 - cfg.beta2) * grad * grad;
    double m_hat = m / (1.0 - std::pow(cfg.beta1, t));
    double v_hat = v / (1.0 - std::pow(cfg.beta2, t));
    return y - cfg.eta_l * (m_hat / (std::sqrt(v_hat) + cfg.epsilon) +
                            cfg.weight_decay * y);
  }
};

ClientShard quadratic_shard(int client_id, std::size_t dim,
                            std::vector<double> rows,
                            std::vector<double> targets) {
  ClientShard shard;
  shard.client_id = client_id;
  auto obj = std::make_shared<QuadraticObjective>(dim, std::move(rows),
                                                  std::move(targets));
  shard.sample_count = static_cast<std::int64_t>(obj->example_count());
  shard.objective = std::move(obj);
  return shard;
}

// Mean least-squares gradient computed from the closed form, independent of
// the objective implementation.
std::vector<double> closed_form_gradient(std::size_t dim,
                                         const std::vector<double>& rows,
                                         const std::vector<double>& targets,
                                         const std::vector<double>& theta) {
  std::vector<double> grad(dim, 0.0);
  std::size_t n = targets.size();
  for (std::size_t e = 0; e < n; ++e) {
    double r = -targets[e];
    for (std::size_t i = 0; i < dim; ++i) r += rows[e * dim + i] * theta[i];
    for (std::size_t i = 0; i < dim; ++i) {
      grad[i] += r * rows[e * dim + i] / static_cast<double>(n);
    }
  }
  return grad;
}

}  // namespace

TEST_CASE("zero epochs is a zero delta") {
  ClientShard shard = quadratic_shard(0, 1, {2.0}, {1.0});
  TrainerConfig cfg;
  cfg.epochs = 0;
  Rng rng(1);
  ClientUpdate u = local_train(ParameterVector({5.0}), shard, cfg, rng);
  CHECK(u.delta[0] == 0.0);
  CHECK(u.sample_count == 1);
  CHECK(u.train_loss == doctest::Approx(0.5 * 81.0));  // loss at theta
}

TEST_CASE("single full-batch gd step equals eta times the gradient") {
  std::size_t dim = 3;
  std::vector<double> rows{1, 2, 0, 0, 1, 3, 2, 0, 1, 1, 1, 1};
  std::vector<double> targets{1, -2, 0.5, 3};
  ClientShard shard = quadratic_shard(2, dim, rows, targets);

  TrainerConfig cfg;
  cfg.optimizer = ClientOpt::gd;
  cfg.eta_l = 0.1;
  cfg.weight_decay = 0.0;
  cfg.epochs = 1;
  cfg.batch_size = 16;  // >= n, one batch per epoch

  std::vector<double> theta{0.3, -0.7, 1.1};
  Rng rng(4);
  ClientUpdate u = local_train(ParameterVector(theta), shard, cfg, rng);

  std::vector<double> grad = closed_form_gradient(dim, rows, targets, theta);
  for (std::size_t i = 0; i < dim; ++i) {
    CHECK(std::abs(u.delta[i] - cfg.eta_l * grad[i]) <= 1e-12);
  }
}

TEST_CASE("adam trajectory matches the scalar oracle") {
  // One example, full batch: three epochs are three deterministic steps.
  std::vector<double> rows{2.0};
  std::vector<double> targets{1.0};
  ClientShard shard = quadratic_shard(1, 1, rows, targets);

  TrainerConfig cfg;
  cfg.optimizer = ClientOpt::adam;
  cfg.eta_l = 0.05;
  cfg.weight_decay = 0.01;
  cfg.epochs = 3;
  cfg.batch_size = 8;

  double theta0 = 4.0;
  Rng rng(6);
  ClientUpdate u = local_train(ParameterVector({theta0}), shard, cfg, rng);

  RefAdamW ref;
  double y = theta0;
  for (int step = 0; step < 3; ++step) {
    double grad = 2.0 * (2.0 * y - 1.0);  // d/dy 0.5(2y-1)^2
    y = ref.step(y, grad, cfg);
  }
  CHECK(std::abs((theta0 - y) - u.delta[0]) <= 1e-12);
}

TEST_CASE("optimizer state does not leak across calls") {
  ClientShard shard =
      quadratic_shard(3, 2, {1, 0.5, -0.25, 2, 0.75, 1}, {1, 2, 3});
  TrainerConfig cfg;
  cfg.epochs = 2;
  cfg.batch_size = 2;
  ParameterVector theta({0.1, -0.4});
  Rng rng_a(99), rng_b(99);
  ClientUpdate a = local_train(theta, shard, cfg, rng_a);
  ClientUpdate b = local_train(theta, shard, cfg, rng_b);
  CHECK(a.delta.values()[0] == b.delta.values()[0]);
  CHECK(a.delta.values()[1] == b.delta.values()[1]);
  CHECK(a.train_loss == b.train_loss);
}

TEST_CASE("gd loss is non-increasing below the stability step size") {
  Rng data_rng(7);
  std::size_t dim = 4, n = 24;
  std::vector<double> rows(n * dim), targets(n);
  for (double& x : rows) x = data_rng.next_normal();
  for (double& x : targets) x = data_rng.next_normal();
  auto obj = std::make_shared<QuadraticObjective>(dim, rows, targets);

  TrainerConfig cfg;
  cfg.optimizer = ClientOpt::gd;
  cfg.eta_l = 0.02;  // far below 2/L for unit-normal rows
  cfg.weight_decay = 0.0;
  cfg.epochs = 40;
  cfg.batch_size = 64;  // full batch

  std::vector<double> y(dim, 0.0);
  double prev = obj->mean_loss(y);
  std::vector<double> grad(dim);
  for (int step = 0; step < cfg.epochs; ++step) {
    obj->mean_gradient(y, grad);
    for (std::size_t i = 0; i < dim; ++i) y[i] -= cfg.eta_l * grad[i];
    double cur = obj->mean_loss(y);
    CHECK(cur <= prev + 1e-12);
    prev = cur;
  }
}

TEST_CASE("chained full-batch gd rounds never increase the loss") {
  Rng data_rng(15);
  std::size_t dim = 3, n = 18;
  std::vector<double> rows(n * dim), targets(n);
  for (double& x : rows) x = data_rng.next_normal();
  for (double& x : targets) x = data_rng.next_normal();
  ClientShard shard = quadratic_shard(0, dim, rows, targets);

  TrainerConfig cfg;
  cfg.optimizer = ClientOpt::gd;
  cfg.eta_l = 0.02;
  cfg.weight_decay = 0.0;
  cfg.epochs = 1;
  cfg.batch_size = 32;  // full batch, one step per call

  ParameterVector theta = ParameterVector::zeros(dim);
  double prev = shard.objective->mean_loss(theta.values());
  for (int round = 0; round < 30; ++round) {
    Rng rng(static_cast<std::uint64_t>(round));
    ClientUpdate u = local_train(theta, shard, cfg, rng);
    theta = axpy(-1.0, u.delta, theta);
    double cur = shard.objective->mean_loss(theta.values());
    CHECK(cur <= prev + 1e-12);
    prev = cur;
  }
}

TEST_CASE("divergence raises a numeric error naming the client") {
  ClientShard shard = quadratic_shard(7, 1, {1e3}, {0.0});
  TrainerConfig cfg;
  cfg.optimizer = ClientOpt::gd;
  cfg.eta_l = 1e8;  // way past the stability limit
  cfg.weight_decay = 0.0;
  cfg.epochs = 50;
  cfg.batch_size = 4;
  Rng rng(3);
  try {
    local_train(ParameterVector({1.0}), shard, cfg, rng);
    FAIL("expected NumericError");
  } catch (const NumericError& e) {
    CHECK(std::string(e.what()).find("client 7") != std::string::npos);
  }
}

TEST_CASE("empty shard is a domain error") {
  ClientShard shard;
  shard.client_id = 0;
  TrainerConfig cfg;
  Rng rng(1);
  CHECK_THROWS_AS(local_train(ParameterVector({1.0}), shard, cfg, rng),
                  DomainError);
}

TEST_CASE("gradients match central finite differences") {
  Rng rng(42);
  const double h = 1e-6;
  auto check_objective = [&](const LocalObjective& obj,
                             std::span<const std::uint32_t> batch) {
    std::vector<double> theta(obj.dimension());
    for (double& x : theta) x = 0.5 * rng.next_normal();
    std::vector<double> grad(obj.dimension());
    obj.gradient(theta, batch, grad);
    // Spot-check a deterministic spread of coordinates.
    std::size_t stride = std::max<std::size_t>(1, obj.dimension() / 23);
    for (std::size_t i = 0; i < obj.dimension(); i += stride) {
      std::vector<double> plus = theta, minus = theta;
      plus[i] += h;
      minus[i] -= h;
      double fd = (obj.loss(plus, batch) - obj.loss(minus, batch)) / (2.0 * h);
      double scale = std::max({1.0, std::abs(fd), std::abs(grad[i])});
      CHECK(std::abs(fd - grad[i]) / scale <= 1e-5);
    }
  };

  {
    std::vector<double> rows(5 * 3), targets(5);
    for (double& x : rows) x = rng.next_normal();
    for (double& x : targets) x = rng.next_normal();
    QuadraticObjective obj(3, rows, targets);
    std::vector<std::uint32_t> batch{0, 2, 4};
    check_objective(obj, batch);
  }
  {
    std::vector<double> feats(6 * 4);
    for (double& x : feats) x = rng.next_normal();
    std::vector<std::uint32_t> labels{0, 2, 1, 2, 0, 1};
    LogisticObjective obj(3, 4, feats, labels);
    std::vector<std::uint32_t> batch{0, 1, 2, 3, 4, 5};
    check_objective(obj, batch);
  }
  {
    std::vector<SparseExample> examples;
    for (int e = 0; e < 4; ++e) {
      SparseExample ex;
      ex.features = {{static_cast<std::uint32_t>(e), 0.5},
                     {static_cast<std::uint32_t>(e + 3), 0.5}};
      ex.target = {{static_cast<std::uint32_t>((e + 1) % 5), 0.75},
                   {static_cast<std::uint32_t>((e + 3) % 5), 0.25}};
      examples.push_back(std::move(ex));
    }
    SequenceDenoisingObjective obj(8, 5, std::move(examples));
    std::vector<std::uint32_t> batch{0, 1, 2, 3};
    check_objective(obj, batch);
  }
}

TEST_CASE("compiled pairs load back as a trainable objective") {
  std::istringstream pairs(
      "alpha <text_0> <loc_3> <loc_4> <loc_5> <loc_6>\t<text_0> beta\n"
      "skipped because empty target\t\n"
      "<layout_0> gamma </layout_0>\t<layout_0> <loc_1> <loc_2> <loc_3> <loc_4>\n");
  HashedBagFeaturizer featurizer(64, 32);
  std::vector<SparseExample> examples = examples_from_pairs(pairs, featurizer);
  REQUIRE(examples.size() == 2);  // the empty-target record is dropped
  SequenceDenoisingObjective obj(64, 32, std::move(examples));
  std::vector<double> theta(obj.dimension(), 0.0);
  CHECK(obj.mean_loss(theta) == doctest::Approx(std::log(32.0)).epsilon(1e-12));

  std::istringstream malformed("no tab separator here\n");
  CHECK_THROWS_AS(examples_from_pairs(malformed, featurizer), ParseError);
}

TEST_CASE("featurizer output is deterministic and normalized") {
  HashedBagFeaturizer f(64, 32);
  std::vector<std::string> tokens{"alpha", "beta", "alpha"};
  auto a = f.features(tokens);
  auto b = f.features(tokens);
  CHECK(a == b);
  double total = 0.0;
  for (const auto& [bin, w] : a) {
    CHECK(bin < 64);
    total += w;
  }
  CHECK(total == doctest::Approx(1.0).epsilon(1e-12));

  auto dist = f.target_distribution(tokens);
  double mass = 0.0;
  for (const auto& [bin, w] : dist) {
    CHECK(bin < 32);
    mass += w;
  }
  CHECK(mass == doctest::Approx(1.0).epsilon(1e-12));
}
