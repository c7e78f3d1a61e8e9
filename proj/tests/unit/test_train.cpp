#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>

#include "fcgaga/checkpoint.hpp"
#include "fcgaga/graph.hpp"
#include "fcgaga/synth.hpp"
#include "fcgaga/train.hpp"
#include "helpers.hpp"

using namespace fcgaga;
using testutil::random_tensor;

namespace {

ModelConfig small_config(std::size_t nodes) {
  ModelConfig c;
  c.num_nodes = nodes;
  c.history = 4;
  c.horizon = 4;
  c.embedding_dim = 3;
  c.hidden_dim = 8;
  c.fc_layers = 2;
  c.blocks = 2;
  c.layers = 2;
  return c;
}

SpeedPanel synth_panel(std::size_t nodes, std::size_t steps, std::uint64_t seed) {
  SynthConfig s;
  s.num_nodes = nodes;
  s.num_steps = steps;
  s.seed = seed;
  return generate(s).panel;
}

std::vector<double> flat(const ModelParams& p) {
  std::vector<double> out;
  for (const auto& np : p.named_parameters()) out.insert(out.end(), np.tensor.values().begin(), np.tensor.values().end());
  return out;
}

}  // namespace

TEST_SUITE("train") {
  TEST_CASE("masked mae") {
    const auto y = Tensor::matrix({{60, 0, 30}});
    CHECK(masked_mae_loss(y, y).item() == 0.0);
    CHECK(masked_mae_loss(Tensor::matrix({{50, 10, 40}}), y).item() == doctest::Approx(10.0).epsilon(1e-15));
    CHECK(masked_mae_loss(Tensor::matrix({{5, 6}}), Tensor::zeros({1, 2})).item() == 0.0);
  }

  TEST_CASE("masked entries carry no gradient") {
    GraphScope scope;
    auto f = Tensor::matrix({{50, 10, 40}});
    f.set_requires_grad(true);
    backward(masked_mae_loss(f, Tensor::matrix({{60, 0, 30}})));
    CHECK(f.grad()[0] == -0.5);
    CHECK(f.grad()[1] == 0.0);
    CHECK(f.grad()[2] == 0.5);
  }

  TEST_CASE("weight decay") {
    auto c = small_config(3);
    auto params = init_params(c, 0);
    CHECK(weight_decay_penalty(params, 0.0).item() == 0.0);

    double oracle = 0.0;
    for (const auto& p : params.named_parameters()) {
      if (p.kind != ParamKind::kWeight) continue;
      for (double v : p.tensor.values()) oracle += v * v;
    }
    CHECK(weight_decay_penalty(params, 1e-5).item() == doctest::Approx(1e-5 * oracle).epsilon(1e-12));

    ModelParams single;
    single.layers.resize(1);
    auto& tg = single.layers[0].time_gate;
    tg.hidden_weight = Tensor::matrix({{1, 1}, {1, 1}});
    CHECK(weight_decay_penalty(single, 1e-5).item() == doctest::Approx(4e-5).epsilon(1e-15));

    const double before = weight_decay_penalty(params, 1e-5).item();
    for (auto& v : params.layers[0].embedding.data()) v += 3.0;
    CHECK(weight_decay_penalty(params, 1e-5).item() == before);
  }

  TEST_CASE("adam first step") {
    auto p = Tensor::vector({0.5, -2.0});
    p.mutable_grad()[0] = 1.0;
    p.mutable_grad()[1] = 0.0;
    Adam adam({{"p", p, ParamKind::kWeight}});
    adam.step();
    CHECK(p.values()[0] - 0.5 == doctest::Approx(-0.001 / (1.0 + 1e-7)).epsilon(1e-9));
    CHECK(p.values()[0] - 0.5 < -0.000999999);
    CHECK(p.values()[1] == -2.0);
    CHECK(adam.state().step == 1);
  }

  TEST_CASE("adam first step is scale invariant") {
    auto a = Tensor::vector({0.0});
    auto b = Tensor::vector({0.0});
    a.mutable_grad()[0] = 0.3;
    b.mutable_grad()[0] = 30.0;
    Adam adam({{"a", a, ParamKind::kWeight}, {"b", b, ParamKind::kWeight}});
    adam.step();
    CHECK(std::abs(a.values()[0]) == doctest::Approx(std::abs(b.values()[0])).epsilon(1e-6));
  }

  TEST_CASE("adam rejects non-finite gradients atomically") {
    auto a = Tensor::vector({1.0});
    auto b = Tensor::vector({2.0});
    a.mutable_grad()[0] = 1.0;
    b.mutable_grad()[0] = std::nan("");
    Adam adam({{"first", a, ParamKind::kWeight}, {"second", b, ParamKind::kWeight}});
    CHECK_THROWS_WITH_AS(adam.step(), doctest::Contains("second"), NumericError);
    CHECK(a.values()[0] == 1.0);
    CHECK(adam.state().step == 0);
  }

  TEST_CASE("lr schedule") {
    const LrSchedule s;
    CHECK(s.at(1) == 0.001);
    CHECK(s.at(42) == 0.001);
    CHECK(s.at(43) == 0.0005);
    CHECK(s.at(48) == 0.0005);
    CHECK(s.at(49) == 0.00025);
    CHECK(s.at(55) == 0.000125);
    CHECK(s.at(60) == 0.000125);
    for (std::size_t e = 2; e <= 60; ++e) CHECK(s.at(e) <= s.at(e - 1));
    CHECK_THROWS(s.at(0));
  }

  TEST_CASE("metrics hand example") {
    MetricAccumulator acc(1);
    acc.add(Tensor::matrix({{45}, {110}}), Tensor::matrix({{50}, {100}}));
    const auto r = acc.report({1});
    CHECK(*r.horizons[0].mae == 7.5);
    CHECK(*r.horizons[0].mape_pct == doctest::Approx(10.0).epsilon(1e-14));
    CHECK(*r.horizons[0].rmse == doctest::Approx(7.905694150420948).epsilon(1e-14));
    CHECK(horizon_label(3) == "15 min");
    CHECK(horizon_label(12) == "60 min");

    MetricAccumulator perfect(2);
    perfect.add(Tensor::matrix({{1, 2}}), Tensor::matrix({{1, 2}}));
    const auto p = perfect.report({1, 2});
    CHECK(*p.horizons[1].mae == 0.0);
    CHECK(*p.horizons[1].rmse == 0.0);
    CHECK(*p.horizons[1].mape_pct == 0.0);

    MetricAccumulator empty(1);
    empty.add(Tensor::matrix({{3}}), Tensor::matrix({{0}}));
    CHECK(!empty.report({1}).horizons[0].mae.has_value());
    CHECK(!empty.report({1}).mean_mae.has_value());
  }

  TEST_CASE("evaluation matches brute-force metrics") {
    std::mt19937_64 rng(21);
    for (int trial = 0; trial < 3; ++trial) {
      SpeedPanel panel;
      const std::size_t n = 3, steps = 80;
      for (std::size_t i = 0; i < n; ++i) panel.node_ids.push_back(std::to_string(i));
      std::bernoulli_distribution missing(0.1);
      std::uniform_real_distribution<double> speed(5.0, 70.0);
      for (std::size_t t = 0; t < steps; ++t) {
        panel.timestamps.push_back(static_cast<std::int64_t>(300 * t));
        for (std::size_t i = 0; i < n; ++i) panel.values.push_back(missing(rng) ? 0.0 : speed(rng));
      }
      const WindowSpec window{5, 6};
      // Deterministic forecaster: a function of the anchor and node only.
      const auto guess = [&](std::size_t t, std::size_t i, std::size_t k) {
        return 40.0 + std::sin(static_cast<double>(t * 7 + i * 3 + k));
      };
      const Forecaster forecaster = [&](const WindowBatch& b) {
        Tensor out = Tensor::zeros(b.target.shape());
        for (std::size_t a = 0; a < b.anchors.size(); ++a) {
          for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t k = 0; k < 6; ++k) out.at(a * n + i, k) = guess(b.anchors[a], i, k);
          }
        }
        return out;
      };
      const StepRange range{50, 80};
      const auto report = evaluate(forecaster, panel, range, {window, {}, {1, 3, 6}, 7});

      double mean_mae = 0;
      for (std::size_t h = 1; h <= 6; ++h) {
        double ae = 0, ape = 0, se = 0;
        std::size_t count = 0;
        for (std::size_t t = range.begin - 1; t + 6 < range.end; ++t) {
          for (std::size_t i = 0; i < n; ++i) {
            const double y = panel.at(t + h, i);
            if (y == 0.0) continue;
            const double e = guess(t, i, h - 1) - y;
            ae += std::abs(e);
            ape += std::abs(e) / y;
            se += e * e;
            ++count;
          }
        }
        mean_mae += ae / static_cast<double>(count) / 6.0;
        if (h == 1 || h == 3 || h == 6) {
          const auto& m = report.at_horizon(h);
          CHECK(m.count == count);
          CHECK(std::abs(*m.mae - ae / static_cast<double>(count)) < 1e-12);
          CHECK(std::abs(*m.mape_pct - 100.0 * ape / static_cast<double>(count)) < 1e-12);
          CHECK(std::abs(*m.rmse - std::sqrt(se / static_cast<double>(count))) < 1e-12);
        }
      }
      CHECK(std::abs(*report.mean_mae - mean_mae) < 1e-12);
    }
  }

  TEST_CASE("training is deterministic") {
    const auto c = small_config(4);
    const auto panel = synth_panel(4, 600, 3);
    TrainOptions o;
    o.epochs = 2;
    o.batches_per_epoch = 15;
    o.seed = 9;
    const auto a = train(c, panel, o);
    const auto b = train(c, panel, o);
    CHECK(flat(a.final_params) == flat(b.final_params));
    CHECK(a.step_losses == b.step_losses);
    CHECK(a.steps == 30);
    CHECK(a.forward_flops == b.forward_flops);
    o.seed = 10;
    CHECK(flat(train(c, panel, o).final_params) != flat(a.final_params));
  }

  TEST_CASE("best checkpoint and log") {
    const auto c = small_config(4);
    const auto panel = synth_panel(4, 600, 4);
    const auto dir = testutil::scratch_dir("train_ckpt");
    TrainOptions o;
    o.epochs = 3;
    o.batches_per_epoch = 10;
    o.log_path = dir / "log.jsonl";
    o.checkpoint_path = dir / "ck.bin";
    const auto r = train(c, panel, o);
    const auto ck = load_checkpoint(dir / "ck.bin");
    CHECK(ck.epoch == r.best_epoch);
    CHECK(flat(ck.params) == flat(r.best_params));
    const auto splits = split(panel.num_steps(), o.split, {c.history, c.horizon});
    CHECK(*evaluate(ck.params, c, panel, splits.validation).mean_mae == *r.best_validation_mae);
    std::ifstream log(dir / "log.jsonl");
    std::size_t lines = 0;
    for (std::string line; std::getline(log, line);) ++lines;
    CHECK(lines == 3);
  }

  TEST_CASE("non-finite loss aborts and keeps the last checkpoint") {
    const auto c = small_config(4);
    const auto panel = synth_panel(4, 600, 5);
    const auto dir = testutil::scratch_dir("train_abort");
    TrainOptions o;
    o.epochs = 3;
    o.batches_per_epoch = 5;
    o.checkpoint_path = dir / "ck.bin";
    o.on_step = [](std::uint64_t step, const ModelParams& p) {
      if (step == 7) {
        auto w = p.layers[0].blocks[0].fc_weights[0];
        w.data()[0] = std::numeric_limits<double>::infinity();
      }
    };
    CHECK_THROWS_AS(train(c, panel, o), TrainingAborted);
    const auto ck = load_checkpoint(dir / "ck.bin");
    CHECK(ck.epoch == 1);
    for (double v : flat(ck.params)) CHECK(std::isfinite(v));
  }

  TEST_CASE("steps are counted exactly") {
    auto c = small_config(2);
    c.hidden_dim = 4;
    c.layers = 1;
    const auto panel = synth_panel(2, 400, 6);
    TrainOptions o;
    o.epochs = 3;
    o.batches_per_epoch = 7;
    o.batch_size = 1;
    o.validate = false;
    std::uint64_t calls = 0;
    o.on_step = [&](std::uint64_t step, const ModelParams&) { CHECK(step == ++calls); };
    const auto r = train(c, panel, o);
    CHECK(r.steps == 21);
    CHECK(calls == 21);
    CHECK(r.step_losses.size() == 21);
    CHECK(r.epochs.size() == 3);
  }
}
