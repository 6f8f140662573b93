#include <cmath>

#include "doctest.h"
#include "nolab/datagen.hpp"
#include "nolab/training.hpp"
#include "testkit.hpp"

using namespace nolab;
using namespace nolab::training;
namespace tk = nolab::testkit;

namespace {

datagen::DatasetPair darcy16(std::size_t n_train = 8, std::size_t n_test = 4) {
  datagen::DatasetSpec spec;
  spec.family = datagen::Family::darcy;
  spec.grid = 16;
  spec.n_train = n_train;
  spec.n_test = n_test;
  spec.seed = 2;
  return datagen::build_dataset(spec);
}

// Target = input on smooth wave initial data.
datagen::DatasetPair identity_task(std::size_t n_train, std::size_t n_test) {
  datagen::DatasetSpec spec;
  spec.family = datagen::Family::wave;
  spec.grid = 16;
  spec.n_train = n_train;
  spec.n_test = n_test;
  spec.seed = 5;
  auto pair = datagen::build_dataset(spec);
  for (auto* c : {&pair.train, &pair.test}) {
    c->targets = c->inputs;
    c->metadata["normalization"]["target"] = c->metadata["normalization"]["input"];
  }
  return pair;
}

models::ModelConfig small_fno(std::size_t width = 6) {
  models::ModelConfig c;
  c.grid = 16;
  c.width = width;
  c.depth = 2;
  c.modes = 4;
  c.proj_width = 8;
  return c;
}

}  // namespace

TEST_SUITE("training") {

TEST_CASE("relative l2 examples") {
  auto t = tk::random_tensor({3, 4, 4}, 1);
  CHECK(relative_l2(t, t).item() == 0.0);
  CHECK(relative_l2(Tensor::zeros({3, 4, 4}), t).item() == doctest::Approx(1.0));
  CHECK(relative_l2(ops::scale(t, 2.0), t).item() == doctest::Approx(1.0));
  auto p = tk::random_tensor({3, 4, 4}, 2);
  CHECK(relative_l2(ops::scale(p, 7.5), ops::scale(t, 7.5)).item() ==
        doctest::Approx(relative_l2(p, t).item()).epsilon(1e-14));
  auto per = relative_l2_per_sample(p, t);
  CHECK(per.size() == 3);
  CHECK((per[0] + per[1] + per[2]) / 3 == doctest::Approx(relative_l2(p, t).item()).epsilon(1e-14));
  CHECK_THROWS_AS(relative_l2(p, tk::random_tensor({3, 16}, 1)), ShapeError);
  CHECK(relative_l2(Tensor::full({1, 2}, 1e-3), Tensor::zeros({1, 2})).item() == doctest::Approx(std::sqrt(2e-6) / 1e-12));
}

TEST_CASE("adam first step matches the closed form") {
  TrainConfig cfg;
  cfg.dtype = DType::f64;
  OptimizerState st;
  std::vector<Tensor> params{Tensor::from({1}, {1.0})};
  adam_step(params, {Tensor::from({1}, {2.0})}, st, cfg, 0.1);
  const double mhat = (0.1 * 2.0) / (1 - 0.9), vhat = (0.001 * 4.0) / (1 - 0.999);
  CHECK(params[0][0] - 1.0 == doctest::Approx(-0.1 * mhat / (std::sqrt(vhat) + 1e-8)).epsilon(1e-14));
  CHECK(params[0][0] - 1.0 == doctest::Approx(-0.09999).epsilon(1e-4));
  CHECK(st.step == 1);

  std::vector<Tensor> still{Tensor::from({2}, {0.5, -0.5})};
  OptimizerState s2;
  adam_step(still, {Tensor::zeros({2})}, s2, cfg, 0.1);
  CHECK(still[0][0] == 0.5);
  CHECK(still[0][1] == -0.5);

  std::vector<Tensor> bad{Tensor::from({1}, {1.0})};
  std::vector<Tensor> g{Tensor::from({1}, {1.0})};
  g[0].mutable_values()[0] = std::nan("");
  CHECK_THROWS_AS(adam_step(bad, g, s2, cfg, 0.1), NumericError);
}

TEST_CASE("learning-rate schedule") {
  TrainConfig cfg;
  cfg.lr = 1e-2;
  CHECK(scheduled_lr(cfg, 0, 100) == doctest::Approx(1e-2));
  CHECK(scheduled_lr(cfg, 50, 100) == doctest::Approx(5e-3));
  CHECK(scheduled_lr(cfg, 100, 100) == doctest::Approx(0.0));
  cfg.schedule = "constant";
  CHECK(scheduled_lr(cfg, 70, 100) == 1e-2);
  cfg.schedule = "step";
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  TrainConfig bad;
  bad.beta1 = 1.0;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  CHECK(TrainConfig::from_json(TrainConfig{}.to_json()).to_json() == TrainConfig{}.to_json());
}

TEST_CASE("zero epochs returns the initial state") {
  auto data = darcy16();
  auto init = models::init_model(small_fno());
  TrainConfig cfg;
  cfg.epochs = 0;
  auto r = train(init, data.train, data.test, cfg);
  CHECK(r.history.empty());
  for (std::size_t p = 0; p < init.params.size(); ++p)
    for (std::size_t i = 0; i < init.params[p].value.numel(); ++i)
      REQUIRE(r.final_state.params[p].value[i] == init.params[p].value[i]);
}

TEST_CASE("training is bit-reproducible and never reads the test split") {
  auto data = darcy16();
  auto init = models::init_model(small_fno());
  TrainConfig cfg;
  cfg.epochs = 3;
  cfg.batch_size = 4;
  cfg.seed = 9;
  auto a = train(init, data.train, data.test, cfg);
  auto b = train(init, data.train, data.test, cfg);
  CHECK(a.history.size() == 3);
  CHECK(history_digest(a.history) == history_digest(b.history));

  auto scrambled = data.test;
  for (auto& v : scrambled.targets) v = -3.0f * v + 1.0f;
  auto c = train(init, data.train, scrambled, cfg);
  for (std::size_t p = 0; p < init.params.size(); ++p)
    for (std::size_t i = 0; i < init.params[p].value.numel(); ++i) {
      REQUIRE(a.final_state.params[p].value[i] == b.final_state.params[p].value[i]);
      REQUIRE(a.final_state.params[p].value[i] == c.final_state.params[p].value[i]);
    }
  for (std::size_t e = 0; e < 3; ++e) CHECK(a.history[e].train_loss == c.history[e].train_loss);
  CHECK(a.best_epoch >= 1);
  CHECK(a.best_epoch <= 3);

  auto t = history_table(a.history);
  CHECK(t.header == std::vector<std::string>{"epoch", "train_rel_l2", "test_rel_l2", "lr"});
  CHECK(t.rows.size() == 3);
}

TEST_CASE("training errors") {
  auto data = darcy16();
  auto init = models::init_model(small_fno());
  TrainConfig cfg;
  cfg.epochs = 1;
  auto empty = data.train;
  empty.inputs.clear();
  empty.targets.clear();
  empty.metadata["n_samples"] = 0;
  CHECK_THROWS_AS(train(init, empty, data.test, cfg), ConfigError);
  auto wrong = small_fno();
  wrong.grid = 32;
  CHECK_THROWS_AS(train(models::init_model(wrong), data.train, data.test, cfg), ShapeError);
  cfg.divergence_threshold = 1e-9;
  CHECK_THROWS_AS(train(init, data.train, data.test, cfg), NumericError);
}

TEST_CASE("identity task is learned") {
  auto data = identity_task(32, 8);
  auto init = models::init_model(small_fno(8));
  TrainConfig cfg;
  cfg.epochs = 100;  // 2 steps per epoch
  cfg.batch_size = 16;
  cfg.lr = 5e-3;
  auto r = train(init, data.train, data.test, cfg);
  MESSAGE("identity task test rel l2 " << r.history.back().test_rel_l2);
  CHECK(r.history.back().test_rel_l2 < 0.02);
  CHECK(evaluate(r.final_state, data.test, cfg) == doctest::Approx(r.history.back().test_rel_l2).epsilon(1e-12));
}

}  // TEST_SUITE
