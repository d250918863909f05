#include <doctest.h>

#include <cmath>
#include <sstream>

#include "negsim/dataset.hpp"
#include "negsim/neural.hpp"

using namespace negsim;

namespace {

DatasetRow row_with(PolicyAction a, std::optional<Price> offer, double seed_value) {
  DatasetRow r;
  for (std::size_t i = 0; i < kFeatureDim; ++i) r.features[i] = std::sin(seed_value * (i + 1));
  r.features[2] = 0;
  r.features[3] = 1;
  r.features[4] = 0;
  r.features[5] = 0;
  r.label_action = a;
  r.label_offer = offer;
  r.ip_b = 300;
  r.rp_b = 500;
  return r;
}

Dataset toy_dataset(int n) {
  Dataset d;
  for (int i = 0; i < n; ++i) {
    const double v = 0.37 * (i + 1);
    const bool offer = i % 3 != 0;
    d.push_back(row_with(offer ? PolicyAction::CounterOffer : PolicyAction::Accept,
                         offer ? std::optional<Price>(300 + 200 * (0.5 + 0.4 * std::sin(v))) : std::nullopt, v));
  }
  return d;
}

}  // namespace

TEST_CASE("dimension checks") {
  PolicyNetwork net;
  CHECK_THROWS_AS(net.predict(Matrix::Zero(3, 2)), DimensionMismatch);
  CHECK_NOTHROW(net.predict(Matrix::Zero(kFeatureDim, 2)));
}

TEST_CASE("zero network is uniform over actions") {
  PolicyNetwork net;
  for (auto* b : net.blocks()) std::fill(b->params().begin(), b->params().end(), 0.0);
  const auto out = net.predict(Matrix::Random(kFeatureDim, 4));
  for (Eigen::Index j = 0; j < 4; ++j) {
    for (Eigen::Index i = 0; i < static_cast<Eigen::Index>(kPolicyActions); ++i) CHECK(out.probs(i, j) == doctest::Approx(0.2));
    CHECK(out.offer(j) == doctest::Approx(0.5));
  }
}

TEST_CASE("train and eval agree without dropout; eval is pure") {
  Rng rng(1);
  PolicyArchitecture arch;
  arch.dropout = 0.0;
  PolicyNetwork net(arch, rng);
  const Matrix x = Matrix::Random(kFeatureDim, 5);
  const auto a = net.forward(x, Mode::Train, &rng);
  const auto b = net.forward(x, Mode::Eval);
  CHECK(a.logits.isApprox(b.logits, 1e-15));
  CHECK(a.offer.isApprox(b.offer, 1e-15));
  const auto c = net.predict(x);
  CHECK(c.logits == b.logits);
}

TEST_CASE("dropout is seeded") {
  Rng init(2);
  PolicyNetwork net(PolicyArchitecture{}, init);
  const Matrix x = Matrix::Random(kFeatureDim, 5);
  Rng r1(9), r2(9);
  const auto a = net.forward(x, Mode::Train, &r1);
  const auto b = net.forward(x, Mode::Train, &r2);
  CHECK(a.logits == b.logits);
  const auto e = net.forward(x, Mode::Eval);
  CHECK_FALSE(a.logits.isApprox(e.logits, 1e-9));
}

TEST_CASE("outputs are well formed") {
  Rng rng(3);
  PolicyNetwork net(PolicyArchitecture{}, rng);
  const auto out = net.predict(Matrix::Random(kFeatureDim, 50) * 10);
  for (Eigen::Index j = 0; j < 50; ++j) {
    CHECK(std::abs(out.probs.col(j).sum() - 1.0) < 1e-9);
    CHECK(out.offer(j) > 0.0);
    CHECK(out.offer(j) < 1.0);
    CHECK(out.logits.col(j).allFinite());
  }
}

TEST_CASE("softmax is stable for large logits") {
  Matrix z(3, 1);
  z << 1000, 1000, -1000;
  const Matrix p = softmax_columns(z);
  CHECK(p(0, 0) == doctest::Approx(0.5));
  CHECK(p(2, 0) == doctest::Approx(0.0));
}

TEST_CASE("gradient checks") {
  Rng rng(4);
  SUBCASE("single linear layer, quadratic loss") {
    Mlp lin({4, 3}, {Activation::Identity});
    lin.init(rng);
    const Matrix x = Matrix::Random(4, 6);
    const Matrix y = Matrix::Random(3, 6);
    CHECK(gradient_check(lin, x, y, rng, 15) <= 1e-7);
  }
  SUBCASE("policy network, with and without frozen dropout") {
    PolicyNetwork net(PolicyArchitecture{}, rng);
    const Dataset d = toy_dataset(16);
    CHECK(gradient_check(net, d, rng, 300, false) <= 1e-4);
    CHECK(gradient_check(net, d, rng, 300, true) <= 1e-4);
  }
  SUBCASE("sigmoid and tanh layers") {
    Mlp net({5, 7, 2}, {Activation::Tanh, Activation::Sigmoid}, 0.3);
    net.init(rng);
    const Matrix x = Matrix::Random(5, 4);
    const Matrix y = Matrix::Random(2, 4);
    CHECK(gradient_check(net, x, y, rng, 200, true) <= 1e-4);
  }
}

TEST_CASE("supervised training memorizes a repeated row") {
  Dataset d(40, row_with(PolicyAction::CounterOffer, 420.0, 0.7));
  Rng rng(5);
  PolicyNetwork net(PolicyArchitecture{}, rng);
  TrainConfig cfg;
  cfg.epochs = 200;
  cfg.batch_size = 8;
  cfg.dropout_rate = 0.0;
  cfg.learning_rate = 1e-2;
  const auto h = train_supervised(net, d, cfg);
  CHECK(h.epochs.back().train_accuracy == 1.0);
  const auto ev = evaluate_policy(net, d);
  CHECK(ev.offer_rmse * ev.offer_rmse < 1e-4);
}

TEST_CASE("zero offer weight leaves the offer head untouched") {
  Dataset d = toy_dataset(30);
  Rng rng(6);
  PolicyNetwork net(PolicyArchitecture{}, rng);
  const Mlp before = net.offer_head();
  TrainConfig cfg;
  cfg.epochs = 3;
  cfg.offer_weight = 0.0;
  train_supervised(net, d, cfg);
  CHECK(net.offer_head() == before);
}

TEST_CASE("training loss is nonincreasing at a small learning rate") {
  Dataset d = toy_dataset(48);
  Rng rng(7);
  PolicyNetwork net(PolicyArchitecture{}, rng);
  TrainConfig cfg;
  cfg.epochs = 15;
  cfg.learning_rate = 1e-4;
  cfg.batch_size = 48;
  cfg.dropout_rate = 0.0;
  cfg.validation_fraction = 0.02;
  const auto h = train_supervised(net, d, cfg);
  for (std::size_t i = 1; i < h.epochs.size(); ++i) {
    CHECK(h.epochs[i].train_loss <= h.epochs[i - 1].train_loss + 1e-12);
  }
}

TEST_CASE("training is deterministic and validates its config") {
  Dataset d = toy_dataset(30);
  TrainConfig cfg;
  cfg.epochs = 2;
  Rng r1(8), r2(8);
  PolicyNetwork a(PolicyArchitecture{}, r1), b(PolicyArchitecture{}, r2);
  train_supervised(a, d, cfg);
  train_supervised(b, d, cfg);
  CHECK(a == b);
  CHECK_THROWS_AS(train_supervised(a, Dataset{}, cfg), EmptyDataset);
  cfg.validation_fraction = 1.0;
  CHECK_FALSE(cfg.validate().empty());
  CHECK_THROWS(train_supervised(a, d, cfg));
}

TEST_CASE("checkpoints round-trip bit-exactly") {
  Rng rng(9);
  PolicyNetwork net(PolicyArchitecture{}, rng);
  std::stringstream ss;
  save_policy(net, ss);
  const PolicyNetwork back = load_policy_stream(ss);
  CHECK(back == net);
  const Matrix x = Matrix::Random(kFeatureDim, 3);
  CHECK(back.predict(x).logits == net.predict(x).logits);
  std::stringstream bad("negsim-policy 2\n");
  CHECK_THROWS_AS(load_policy_stream(bad), CheckpointError);
  CHECK_THROWS_AS(load_policy("/nonexistent/policy.txt"), CheckpointError);
}
