#include <doctest.h>

#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <set>

#include "priceband/ctsgan.hpp"
#include "toy.hpp"

using namespace priceband;
using namespace priceband::test;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

double stddev(const MatrixXd& m) {
  const double mean = m.mean();
  return std::sqrt((m.array() - mean).square().mean());
}

VectorXd concat(const CtsganModel& m) {
  VectorXd v(m.embedder.size() + m.recovery.size() + m.generator.size() + m.discriminator.size());
  v << m.embedder.flat(), m.recovery.flat(), m.generator.flat(), m.discriminator.flat();
  return v;
}

void assign(CtsganModel& m, const VectorXd& v) {
  Eigen::Index at = 0;
  for (Net* n : {&m.embedder, &m.recovery, &m.generator, &m.discriminator}) {
    n->set_flat(v.segment(at, n->size()));
    at += n->size();
  }
}

VectorXd concat(const objectives::Terms& t) {
  VectorXd v(t.embedder.size() + t.recovery.size() + t.generator.size() + t.discriminator.size());
  v << t.embedder, t.recovery, t.generator, t.discriminator;
  return v;
}

}  // namespace

TEST_CASE("noise sampling") {
  const MatrixXd z = sample_noise({1.0, 1000, 100}, 3);
  CHECK(z.rows() == 1000);
  CHECK(z.cols() == 100);
  CHECK(std::abs(z.mean()) <= 0.02);
  CHECK(stddev(z) >= 0.99);
  CHECK(stddev(z) <= 1.01);

  const MatrixXd wide = sample_noise({2.667, 1000, 100}, 4);
  CHECK(stddev(wide) >= 2.64);
  CHECK(stddev(wide) <= 2.70);

  CHECK(sample_noise({1.0, 48, 3}, 9) == sample_noise({1.0, 48, 3}, 9));
  CHECK(sample_noise({1.0, 48, 3}, 9) != sample_noise({1.0, 48, 3}, 10));
  CHECK_THROWS_WITH_AS(sample_noise({0.5, 48, 3}, 1), doctest::Contains("InvalidSigma"), Error);
}

TEST_CASE("model layout") {
  const auto m = CtsganModel::create(toy_dims(), 1);
  CHECK(m.embedder.spec().input_dim == 1);
  CHECK(m.embedder.spec().output_dim == 3);
  CHECK(m.recovery.spec().input_dim == 3);
  CHECK(m.recovery.spec().output_dim == 1);
  CHECK(m.generator.spec().input_dim == 3 + ConditionVector::kDim + 3);
  CHECK(m.generator.spec().output_dim == 3);
  CHECK(m.discriminator.spec().input_dim == 3 + ConditionVector::kDim);
  CHECK(m.discriminator.spec().output_dim == 1);
  CHECK(m.feedback_offset() == 3 + ConditionVector::kDim);
  CHECK(ModelDims::from_json(m.dims.to_json()) == m.dims);

  ModelDims bad = toy_dims();
  bad.latent_dim = 0;
  CHECK_THROWS_AS(CtsganModel::create(bad, 1), Error);
}

TEST_CASE("four-network gradients") {
  ModelDims dims;
  dims.condition_dim = 5;
  dims.hidden_dim = 3;
  dims.latent_dim = 2;
  const auto model = CtsganModel::create(dims, 7);
  objectives::SequenceBatch batch;
  for (int b = 0; b < 2; ++b) {
    batch.prices.push_back((MatrixXd::Random(6, 1).array() * 0.5 + 0.5).matrix());
    batch.conditions.push_back((VectorXd::Random(5).array() * 0.5 + 0.5).matrix());
    batch.noise.push_back(sample_noise({1.0, 6, 2}, static_cast<std::uint64_t>(b)));
  }
  using Objective = objectives::Terms (*)(const CtsganModel&, const objectives::SequenceBatch&);
  for (Objective obj : {&objectives::reconstruction, &objectives::supervised, &objectives::critic,
                        &objectives::generator_adversarial, &objectives::four_network}) {
    const auto fn = [&](const VectorXd& p) {
      CtsganModel m = model;
      assign(m, p);
      const auto t = obj(m, batch);
      return seqnet::LossAndGradient<double>{t.loss, concat(t)};
    };
    CHECK(seqnet::gradient_check<double>(concat(model), fn, 1e-5) < 1e-4);
  }
}

TEST_CASE("training phases") {
  const auto& data = toy_samples().train;

  SUBCASE("phase order is enforced") {
    auto m = CtsganModel::create(toy_dims(), 2);
    CHECK_THROWS_WITH_AS(train_phase2_supervised(m, data, toy_config(1)), doctest::Contains("PhaseOrderViolation"),
                         Error);
    CHECK_THROWS_AS(train_phase3_joint(m, data, toy_config(1)), Error);
    train_phase1_autoencoder(m, data, toy_config(1));
    CHECK_THROWS_AS(train_phase3_joint(m, data, toy_config(1)), Error);
  }
  SUBCASE("zero iterations leave parameters unchanged") {
    auto m = CtsganModel::create(toy_dims(), 2);
    const VectorXd before = concat(m);
    train_phase1_autoencoder(m, data, toy_config(0));
    CHECK(concat(m) == before);
    CHECK(m.training_log.empty());
  }
  SUBCASE("each phase touches only its networks") {
    auto m = CtsganModel::create(toy_dims(), 2);
    const auto g0 = m.generator.flat(), d0 = m.discriminator.flat(), e0 = m.embedder.flat();
    train_phase1_autoencoder(m, data, toy_config(5));
    CHECK(m.generator.flat() == g0);
    CHECK(m.discriminator.flat() == d0);
    CHECK(m.embedder.flat() != e0);
    const auto e1 = m.embedder.flat(), r1 = m.recovery.flat();
    train_phase2_supervised(m, data, toy_config(5));
    CHECK(m.embedder.flat() == e1);
    CHECK(m.recovery.flat() == r1);
    CHECK(m.discriminator.flat() == d0);
    CHECK(m.generator.flat() != g0);
  }
  SUBCASE("critic weights stay clipped") {
    auto m = CtsganModel::create(toy_dims(), 3);
    m.discriminator.flat().setConstant(0.9);
    auto cfg = toy_config(3);
    train_phase1_autoencoder(m, data, cfg);
    train_phase2_supervised(m, data, cfg);
    int steps = 0;
    train_phase3_joint(m, data, cfg, [&](const TrainingRecord& r) {
      CHECK(r.critic_loss.has_value());
      ++steps;
    });
    CHECK(steps == 3);
    CHECK(m.discriminator.flat().cwiseAbs().maxCoeff() <= 0.5);
  }
  SUBCASE("non-finite inputs stop training") {
    SampleSet broken = data;
    for (auto& s : broken.samples) s.target(3) = std::nan("");
    auto m = CtsganModel::create(toy_dims(), 3);
    CHECK_THROWS_WITH_AS(train_phase1_autoencoder(m, broken, toy_config(5)), doctest::Contains("NonFinite"),
                         Error);
  }
  SUBCASE("constant paths are easy to reconstruct") {
    SampleSet flat = data;
    for (auto& s : flat.samples) s.target.setConstant(0.4);
    auto m = CtsganModel::create(toy_dims(), 4);
    train_phase1_autoencoder(m, flat, toy_config(300));
    CHECK(reconstruction_mse(m, flat) < 1e-3);
  }
}

TEST_CASE("trained toy model") {
  const auto& m = toy_model();
  const auto& data = toy_samples().train;
  CHECK(m.flags.joint);
  CHECK(m.training_log.size() == 450);

  SUBCASE("seeded retraining reproduces the log") {
    const auto again = train_toy(5, 150);
    CHECK(again.training_log == m.training_log);
    CHECK(concat(again) == concat(m));
  }
  SUBCASE("critic sits near the adversarial balance") {
    REQUIRE(m.training_critic);
    REQUIRE(m.holdout_critic);
    CHECK(m.training_critic->accuracy >= 0.3);
    CHECK(m.training_critic->accuracy <= 0.7);
    CHECK(m.holdout_critic->accuracy >= 0.3);
    CHECK(m.holdout_critic->accuracy <= 0.7);
  }
  SUBCASE("scenario generation") {
    const auto& cond = data.samples[5].condition;
    const auto set = generate_scenarios(m, cond, NoiseSpec{}, 500, 17, "d5");
    CHECK(set.size() == 500);
    CHECK(set.scenarios.cols() == kStepsPerDay);
    CHECK(set.scenarios.minCoeff() >= 0.0);
    CHECK(set.scenarios.maxCoeff() <= 1.0);
    CHECK(set.count(Provenance::Normal) == 500);
    std::set<std::vector<double>> distinct;
    for (Eigen::Index r = 0; r < set.size(); ++r) {
      const VectorXd row = set.scenarios.row(r).transpose();
      distinct.insert(std::vector<double>(row.data(), row.data() + row.size()));
    }
    CHECK(distinct.size() >= 499);
    CHECK(generate_scenarios(m, cond, NoiseSpec{}, 0, 17).empty());
    CHECK(generate_scenario_matrix(m, cond.flatten(), NoiseSpec{}, 20, 3) ==
          generate_scenario_matrix(m, cond.flatten(), NoiseSpec{}, 20, 3));
    CHECK_THROWS_AS(generate_scenario_matrix(m, VectorXd::Zero(7), NoiseSpec{}, 2, 3), Error);
  }
  SUBCASE("wider noise never narrows the afternoon spread") {
    const VectorXd cond = data.samples[10].condition.flatten();
    double prev = 0.0;
    for (double sigma : {1.0, 1.333, 1.667, 2.0, 2.667, 3.0}) {
      const MatrixXd s = generate_scenario_matrix(m, cond, NoiseSpec{sigma}, 300, 23);
      const MatrixXd window = s.middleCols(24, 15);
      const VectorXd mean = window.colwise().mean().transpose();
      const double spread =
          ((window.rowwise() - mean.transpose()).array().square().colwise().mean()).sqrt().mean();
      CHECK(spread >= prev);
      prev = spread;
    }
  }
  SUBCASE("untrained models refuse to generate") {
    const auto fresh = CtsganModel::create(toy_dims(), 1);
    CHECK_THROWS_WITH_AS(generate_scenarios(fresh, data.samples[0].condition, NoiseSpec{}, 5, 1),
                         doctest::Contains("UntrainedModel"), Error);
  }
}

TEST_CASE("checkpoints") {
  const auto& m = toy_model();
  const auto dir = std::filesystem::temp_directory_path() / "priceband_test_ctsgan";
  std::filesystem::create_directories(dir);
  const auto path = dir / "model.json";
  save_model(m, path);
  CHECK_FALSE(std::filesystem::exists(dir / "model.json.tmp"));

  const auto back = load_model(path);
  CHECK(back.dims == m.dims);
  CHECK(back.flags == m.flags);
  CHECK(back.training_log == m.training_log);
  CHECK(serialize_model(back) == serialize_model(m));
  const VectorXd cond = toy_samples().train.samples[0].condition.flatten();
  const MatrixXd a = generate_scenario_matrix(m, cond, NoiseSpec{}, 10, 7);
  const MatrixXd b = generate_scenario_matrix(back, cond, NoiseSpec{}, 10, 7);
  CHECK(std::memcmp(a.data(), b.data(), sizeof(double) * a.size()) == 0);

  SUBCASE("truncated file") {
    const std::string text = serialize_model(m);
    std::ofstream(dir / "cut.json") << text.substr(0, text.size() / 2);
    CHECK_THROWS_WITH_AS(load_model(dir / "cut.json"), doctest::Contains("CorruptCheckpoint"), Error);
  }
  SUBCASE("older format version") {
    auto j = model_to_json(m);
    j["format_version"] = 0;
    try {
      model_from_json(j);
      FAIL("expected VersionMismatch");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::VersionMismatch);
      CHECK(std::string(e.what()).find("format_version") != std::string::npos);
    }
  }
  SUBCASE("missing network") {
    auto j = model_to_json(m);
    j["networks"].erase(3);
    CHECK_THROWS_AS(model_from_json(j), Error);
  }
  std::filesystem::remove_all(dir);
}
