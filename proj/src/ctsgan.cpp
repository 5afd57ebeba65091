#include "priceband/ctsgan.hpp"

#include <cmath>
#include <fstream>
#include <random>
#include <sstream>

#include "priceband/parallel.hpp"
#include "priceband/rng.hpp"
#include "priceband/seqnet/checkpoint.hpp"

namespace priceband {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

// ---------------------------------------------------------------------------
// Config plumbing

void ModelDims::validate() const {
  if (condition_dim <= 0 || latent_dim <= 0 || hidden_dim <= 0 || num_layers <= 0 || noise_dim < 0) {
    throw Error(ErrorCode::InvalidDims, "model dims must be positive");
  }
}

nlohmann::json ModelDims::to_json() const {
  return {{"condition_dim", condition_dim}, {"latent_dim", latent_dim}, {"hidden_dim", hidden_dim},
          {"num_layers", num_layers},       {"noise_dim", noise_dim}};
}

ModelDims ModelDims::from_json(const nlohmann::json& j) {
  ModelDims d;
  d.condition_dim = j.at("condition_dim").get<int>();
  d.latent_dim = j.at("latent_dim").get<int>();
  d.hidden_dim = j.at("hidden_dim").get<int>();
  d.num_layers = j.at("num_layers").get<int>();
  d.noise_dim = j.at("noise_dim").get<int>();
  d.validate();
  return d;
}

void TrainingConfig::validate() const {
  if (batch_size <= 0 || iterations_per_phase < 0 || !(learning_rate > 0.0) || !(clip_limit > 0.0) ||
      supervised_weight < 0.0 || embedder_supervised_weight < 0.0) {
    throw Error(ErrorCode::InvalidArgument, "training config values must be positive");
  }
}

nlohmann::json TrainingConfig::to_json() const {
  return {{"batch_size", batch_size},
          {"iterations_per_phase", iterations_per_phase},
          {"learning_rate", learning_rate},
          {"clip_limit", clip_limit},
          {"seed", seed},
          {"supervised_weight", supervised_weight},
          {"embedder_supervised_weight", embedder_supervised_weight}};
}

TrainingConfig TrainingConfig::from_json(const nlohmann::json& j) {
  TrainingConfig c;
  c.batch_size = j.value("batch_size", c.batch_size);
  c.iterations_per_phase = j.value("iterations_per_phase", c.iterations_per_phase);
  c.learning_rate = j.value("learning_rate", c.learning_rate);
  c.clip_limit = j.value("clip_limit", c.clip_limit);
  c.seed = j.value("seed", c.seed);
  c.supervised_weight = j.value("supervised_weight", c.supervised_weight);
  c.embedder_supervised_weight = j.value("embedder_supervised_weight", c.embedder_supervised_weight);
  c.validate();
  return c;
}

nlohmann::json TrainingRecord::to_json() const {
  nlohmann::json j{{"phase", phase}, {"iteration", iteration}, {"loss", loss}};
  if (critic_loss) j["critic_loss"] = *critic_loss;
  return j;
}

TrainingRecord TrainingRecord::from_json(const nlohmann::json& j) {
  TrainingRecord r;
  r.phase = j.at("phase").get<int>();
  r.iteration = j.at("iteration").get<int>();
  r.loss = j.at("loss").get<double>();
  if (j.contains("critic_loss")) r.critic_loss = j["critic_loss"].get<double>();
  return r;
}

nlohmann::json CriticSummary::to_json() const {
  return {{"mean_real_score", mean_real_score}, {"mean_fake_score", mean_fake_score}, {"accuracy", accuracy}};
}

CriticSummary CriticSummary::from_json(const nlohmann::json& j) {
  return {j.at("mean_real_score").get<double>(), j.at("mean_fake_score").get<double>(),
          j.at("accuracy").get<double>()};
}

Eigen::MatrixXd sample_noise(const NoiseSpec& spec, std::uint64_t seed) {
  if (!(spec.sigma >= 1.0) || !std::isfinite(spec.sigma)) {
    throw Error(ErrorCode::InvalidSigma, "noise sigma must be finite and >= 1, got " + std::to_string(spec.sigma));
  }
  if (spec.steps <= 0 || spec.dim <= 0) throw Error(ErrorCode::InvalidDims, "noise shape must be positive");
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> dist(0.0, spec.sigma);
  MatrixXd z(spec.steps, spec.dim);
  for (Index t = 0; t < z.rows(); ++t) {
    for (Index k = 0; k < z.cols(); ++k) z(t, k) = dist(rng);
  }
  return z;
}

CtsganModel CtsganModel::create(const ModelDims& dims, std::uint64_t seed) {
  dims.validate();
  CtsganModel m;
  m.dims = dims;
  const int lat = dims.latent_dim;
  using seqnet::Activation;
  using seqnet::NetworkSpec;
  m.embedder = Net::init(NetworkSpec{1, dims.hidden_dim, dims.num_layers, lat, Activation::Sigmoid},
                         derive_seed(seed, "embedder"));
  m.recovery = Net::init(NetworkSpec{lat, dims.hidden_dim, dims.num_layers, 1, Activation::Sigmoid},
                         derive_seed(seed, "recovery"));
  m.generator = Net::init(NetworkSpec{dims.noise_width() + dims.condition_dim + lat, dims.hidden_dim,
                                      dims.num_layers, lat, Activation::Sigmoid},
                          derive_seed(seed, "generator"));
  m.discriminator = Net::init(NetworkSpec{lat + dims.condition_dim, dims.hidden_dim, dims.num_layers, 1,
                                          Activation::Identity},
                              derive_seed(seed, "discriminator"));
  return m;
}

// ---------------------------------------------------------------------------
// Objectives

namespace objectives {
namespace {

enum Want : unsigned { kE = 1, kR = 2, kG = 4, kD = 8, kAll = 15 };

Terms zero_terms(const CtsganModel& m) {
  return {0.0, VectorXd::Zero(m.embedder.size()), VectorXd::Zero(m.recovery.size()),
          VectorXd::Zero(m.generator.size()), VectorXd::Zero(m.discriminator.size())};
}

void check_batch(const CtsganModel& m, const SequenceBatch& batch, bool needs_noise) {
  if (batch.prices.empty() || batch.prices.size() != batch.conditions.size() ||
      (needs_noise && batch.noise.size() != batch.prices.size())) {
    throw Error(ErrorCode::DimensionMismatch, "batch members have inconsistent counts");
  }
  for (std::size_t b = 0; b < batch.prices.size(); ++b) {
    if (batch.prices[b].cols() != 1 || batch.prices[b].rows() == 0) {
      throw Error(ErrorCode::DimensionMismatch, "price sequences must be T x 1");
    }
    if (batch.conditions[b].size() != m.dims.condition_dim) {
      throw Error(ErrorCode::DimensionMismatch, "condition length " + std::to_string(batch.conditions[b].size()) +
                                                    " != model condition_dim " +
                                                    std::to_string(m.dims.condition_dim));
    }
    if (needs_noise && (batch.noise[b].rows() != batch.prices[b].rows() ||
                        batch.noise[b].cols() != m.dims.noise_width())) {
      throw Error(ErrorCode::DimensionMismatch, "noise must be T x noise_width");
    }
  }
}

// Row t: [noise_t, condition, previous latent]; previous latent of row 0 is 0.
MatrixXd generator_inputs(const CtsganModel& m, const MatrixXd& noise, const VectorXd& condition,
                          const MatrixXd* teacher) {
  const Index steps = noise.rows();
  const int zw = m.dims.noise_width();
  const int cw = m.dims.condition_dim;
  MatrixXd in = MatrixXd::Zero(steps, zw + cw + m.dims.latent_dim);
  in.leftCols(zw) = noise;
  in.middleCols(zw, cw).rowwise() = condition.transpose();
  if (teacher && steps > 1) in.bottomRightCorner(steps - 1, m.dims.latent_dim) = teacher->topRows(steps - 1);
  return in;
}

MatrixXd critic_inputs(const CtsganModel& m, const MatrixXd& latents, const VectorXd& condition) {
  MatrixXd in(latents.rows(), m.dims.latent_dim + m.dims.condition_dim);
  in.leftCols(m.dims.latent_dim) = latents;
  in.rightCols(m.dims.condition_dim).rowwise() = condition.transpose();
  return in;
}

Terms reconstruction_impl(const CtsganModel& m, const SequenceBatch& batch, unsigned want) {
  check_batch(m, batch, false);
  Terms out = zero_terms(m);
  const double inv_b = 1.0 / static_cast<double>(batch.prices.size());
  for (std::size_t b = 0; b < batch.prices.size(); ++b) {
    Net::Cache ce, cr;
    const MatrixXd latents = m.embedder.forward(batch.prices[b], &ce);
    const MatrixXd rebuilt = m.recovery.forward(latents, &cr);
    const MatrixXd diff = rebuilt - batch.prices[b];
    out.loss += diff.squaredNorm() * inv_b;
    if (!(want & (kE | kR))) continue;
    const auto gr = m.recovery.backward(cr, 2.0 * inv_b * diff);
    out.recovery += gr.params;
    if (want & kE) out.embedder += m.embedder.backward(ce, gr.inputs).params;
  }
  return out;
}

Terms supervised_impl(const CtsganModel& m, const SequenceBatch& batch, unsigned want) {
  check_batch(m, batch, false);
  Terms out = zero_terms(m);
  const double inv_b = 1.0 / static_cast<double>(batch.prices.size());
  const int lat = m.dims.latent_dim;
  for (std::size_t b = 0; b < batch.prices.size(); ++b) {
    Net::Cache ce, cg;
    const MatrixXd latents = m.embedder.forward(batch.prices[b], &ce);
    const Index steps = latents.rows();
    const MatrixXd in =
        generator_inputs(m, MatrixXd::Zero(steps, m.dims.noise_width()), batch.conditions[b], &latents);
    const MatrixXd predicted = m.generator.forward(in, &cg);
    const MatrixXd diff = predicted - latents;
    out.loss += diff.squaredNorm() * inv_b;
    if (!(want & (kG | kE))) continue;
    const auto gg = m.generator.backward(cg, 2.0 * inv_b * diff);
    out.generator += gg.params;
    if (want & kE) {
      MatrixXd d_latents = -2.0 * inv_b * diff;
      if (steps > 1) d_latents.topRows(steps - 1) += gg.inputs.bottomRightCorner(steps - 1, lat);
      out.embedder += m.embedder.backward(ce, d_latents).params;
    }
  }
  return out;
}

// sign_real / sign_fake weight the mean critic scores of real and generated
// latents in the objective.
Terms critic_impl(const CtsganModel& m, const SequenceBatch& batch, double sign_real, double sign_fake,
                  unsigned want) {
  check_batch(m, batch, true);
  Terms out = zero_terms(m);
  const double inv_b = 1.0 / static_cast<double>(batch.prices.size());
  const int lat = m.dims.latent_dim;
  for (std::size_t b = 0; b < batch.prices.size(); ++b) {
    const Index steps = batch.prices[b].rows();
    const double w = inv_b;
    if (sign_fake != 0.0) {
      Net::Cache cg, cd;
      const MatrixXd fake = m.generator.forward_feedback(
          generator_inputs(m, batch.noise[b], batch.conditions[b], nullptr), m.feedback_offset(), &cg);
      const MatrixXd scores = m.discriminator.forward(critic_inputs(m, fake, batch.conditions[b]), &cd);
      out.loss += sign_fake * scores.sum() * w;
      if (want & (kD | kG)) {
        const auto gd = m.discriminator.backward(cd, MatrixXd::Constant(steps, 1, sign_fake * w));
        if (want & kD) out.discriminator += gd.params;
        if (want & kG) out.generator += m.generator.backward(cg, gd.inputs.leftCols(lat)).params;
      }
    }
    if (sign_real != 0.0) {
      Net::Cache ce, cd;
      const MatrixXd real = m.embedder.forward(batch.prices[b], &ce);
      const MatrixXd scores = m.discriminator.forward(critic_inputs(m, real, batch.conditions[b]), &cd);
      out.loss += sign_real * scores.sum() * w;
      if (want & (kD | kE)) {
        const auto gd = m.discriminator.backward(cd, MatrixXd::Constant(steps, 1, sign_real * w));
        if (want & kD) out.discriminator += gd.params;
        if (want & kE) out.embedder += m.embedder.backward(ce, gd.inputs.leftCols(lat)).params;
      }
    }
  }
  return out;
}

void accumulate(Terms& into, const Terms& t, double weight) {
  into.loss += weight * t.loss;
  into.embedder += weight * t.embedder;
  into.recovery += weight * t.recovery;
  into.generator += weight * t.generator;
  into.discriminator += weight * t.discriminator;
}

}  // namespace

Terms reconstruction(const CtsganModel& model, const SequenceBatch& batch) {
  return reconstruction_impl(model, batch, kAll);
}

Terms supervised(const CtsganModel& model, const SequenceBatch& batch) {
  return supervised_impl(model, batch, kAll);
}

Terms critic(const CtsganModel& model, const SequenceBatch& batch) {
  return critic_impl(model, batch, -1.0, 1.0, kAll);
}

Terms generator_adversarial(const CtsganModel& model, const SequenceBatch& batch) {
  return critic_impl(model, batch, 0.0, -1.0, kAll);
}

Terms four_network(const CtsganModel& model, const SequenceBatch& batch) {
  Terms out = zero_terms(model);
  accumulate(out, reconstruction(model, batch), 1.0);
  accumulate(out, supervised(model, batch), 1.0);
  accumulate(out, critic(model, batch), 1.0);
  return out;
}

}  // namespace objectives

// ---------------------------------------------------------------------------
// Training

namespace {

using objectives::SequenceBatch;

MatrixXd as_column(const VectorXd& v) { return v; }

class BatchSampler {
 public:
  BatchSampler(const CtsganModel& model, const SampleSet& data, std::uint64_t seed)
      : model_(model), data_(data), rng_(seed), pick_(0, data.size() - 1) {}

  SequenceBatch next(int batch_size) {
    SequenceBatch batch;
    for (int b = 0; b < batch_size; ++b) {
      const auto& s = data_.samples[pick_(rng_)];
      batch.prices.push_back(as_column(s.target));
      batch.conditions.push_back(s.condition.flatten());
      batch.noise.push_back(sample_noise({1.0, static_cast<int>(s.target.size()), model_.dims.noise_width()},
                                         rng_()));
    }
    return batch;
  }

 private:
  const CtsganModel& model_;
  const SampleSet& data_;
  std::mt19937_64 rng_;
  std::uniform_int_distribution<std::size_t> pick_;
};

void check_inputs(const CtsganModel& model, const SampleSet& data, const TrainingConfig& config) {
  config.validate();
  if (data.empty()) throw Error(ErrorCode::EmptyDataset, "no training samples");
  for (const auto& s : data.samples) {
    if (s.condition.flatten().size() != model.dims.condition_dim) {
      throw Error(ErrorCode::DimensionMismatch, "sample condition length does not match model condition_dim");
    }
    if (s.target.size() == 0) throw Error(ErrorCode::DimensionMismatch, "empty target path");
  }
}

void check_finite(double loss, int phase, int iteration) {
  if (!std::isfinite(loss)) {
    throw Error(ErrorCode::DivergedLoss, "phase " + std::to_string(phase) + " loss became non-finite at iteration " +
                                             std::to_string(iteration));
  }
}

void record(CtsganModel& model, const TrainingObserver& observer, TrainingRecord rec) {
  model.training_log.push_back(rec);
  if (observer) observer(rec);
}

seqnet::SgdOptimizer<double> optimizer(const TrainingConfig& c) { return {c.learning_rate, c.clip_limit}; }

}  // namespace

void train_phase1_autoencoder(CtsganModel& model, const SampleSet& data, const TrainingConfig& config,
                              const TrainingObserver& observer) {
  check_inputs(model, data, config);
  BatchSampler sampler(model, data, derive_seed(config.seed, "phase1"));
  const auto opt = optimizer(config);
  for (int it = 0; it < config.iterations_per_phase; ++it) {
    const auto batch = sampler.next(config.batch_size);
    const auto terms = objectives::reconstruction_impl(model, batch, objectives::kE | objectives::kR);
    check_finite(terms.loss, 1, it);
    seqnet::sgd_step(model.embedder, terms.embedder, opt, false);
    seqnet::sgd_step(model.recovery, terms.recovery, opt, false);
    record(model, observer, {1, it, terms.loss, std::nullopt});
  }
  model.flags.autoencoder = true;
}

void train_phase2_supervised(CtsganModel& model, const SampleSet& data, const TrainingConfig& config,
                             const TrainingObserver& observer) {
  if (!model.flags.autoencoder) {
    throw Error(ErrorCode::PhaseOrderViolation, "supervised phase needs a trained embedder (run phase 1 first)");
  }
  check_inputs(model, data, config);
  BatchSampler sampler(model, data, derive_seed(config.seed, "phase2"));
  const auto opt = optimizer(config);
  for (int it = 0; it < config.iterations_per_phase; ++it) {
    const auto batch = sampler.next(config.batch_size);
    const auto terms = objectives::supervised_impl(model, batch, objectives::kG);
    check_finite(terms.loss, 2, it);
    seqnet::sgd_step(model.generator, terms.generator, opt, false);
    record(model, observer, {2, it, terms.loss, std::nullopt});
  }
  model.flags.supervised = true;
}

void train_phase3_joint(CtsganModel& model, const SampleSet& data, const TrainingConfig& config,
                        const TrainingObserver& observer, const SampleSet* holdout) {
  if (!model.flags.autoencoder || !model.flags.supervised) {
    throw Error(ErrorCode::PhaseOrderViolation, "joint phase needs phases 1 and 2 completed");
  }
  check_inputs(model, data, config);
  BatchSampler sampler(model, data, derive_seed(config.seed, "phase3"));
  const auto opt = optimizer(config);
  using namespace objectives;
  for (int it = 0; it < config.iterations_per_phase; ++it) {
    const auto batch = sampler.next(config.batch_size);

    // Generator: adversarial + weighted supervised.
    const auto adv = critic_impl(model, batch, 0.0, -1.0, kG);
    const auto sup = supervised_impl(model, batch, kG);
    const double norm = 1.0 / (1.0 + config.supervised_weight);
    const double gen_loss = norm * (adv.loss + config.supervised_weight * sup.loss);
    check_finite(gen_loss, 3, it);
    seqnet::sgd_step(model.generator, (norm * (adv.generator + config.supervised_weight * sup.generator)).eval(), opt,
                     false);

    // Embedder and recovery: reconstruction + small supervised term.
    const auto rec = reconstruction_impl(model, batch, kE | kR);
    const auto sup_e = supervised_impl(model, batch, kE);
    check_finite(rec.loss + sup_e.loss, 3, it);
    seqnet::sgd_step(model.embedder, (rec.embedder + config.embedder_supervised_weight * sup_e.embedder).eval(), opt,
                     false);
    seqnet::sgd_step(model.recovery, rec.recovery, opt, false);

    // Critic, clipped after every step.
    const auto crit = critic_impl(model, batch, -1.0, 1.0, kD);
    check_finite(crit.loss, 3, it);
    seqnet::sgd_step(model.discriminator, crit.discriminator, opt, true);

    record(model, observer, {3, it, gen_loss, crit.loss});
  }
  model.flags.joint = true;
  model.training_critic = evaluate_critic(model, data, derive_seed(config.seed, "critic-train"));
  if (holdout && !holdout->empty()) {
    model.holdout_critic = evaluate_critic(model, *holdout, derive_seed(config.seed, "critic-holdout"));
  }
}

double reconstruction_mse(const CtsganModel& model, const SampleSet& data) {
  if (data.empty()) throw Error(ErrorCode::EmptyDataset, "no samples");
  double total = 0.0;
  Index count = 0;
  for (const auto& s : data.samples) {
    const MatrixXd x = as_column(s.target);
    const MatrixXd rebuilt = model.recovery.forward(model.embedder.forward(x));
    total += (rebuilt - x).squaredNorm();
    count += x.size();
  }
  return total / static_cast<double>(count);
}

double supervised_mse(const CtsganModel& model, const SampleSet& data) {
  if (data.empty()) throw Error(ErrorCode::EmptyDataset, "no samples");
  objectives::SequenceBatch batch;
  double total = 0.0;
  Index count = 0;
  for (const auto& s : data.samples) {
    batch.prices = {as_column(s.target)};
    batch.conditions = {s.condition.flatten()};
    total += objectives::supervised_impl(model, batch, 0).loss;
    count += s.target.size() * model.dims.latent_dim;
  }
  return total / static_cast<double>(count);
}

CriticSummary evaluate_critic(const CtsganModel& model, const SampleSet& data, std::uint64_t seed) {
  if (data.empty()) throw Error(ErrorCode::EmptyDataset, "no samples");
  std::vector<double> real(data.size()), fake(data.size());
  for (std::size_t i = 0; i < data.size(); ++i) {
    const auto& s = data.samples[i];
    const VectorXd c = s.condition.flatten();
    const MatrixXd noise =
        sample_noise({1.0, static_cast<int>(s.target.size()), model.dims.noise_width()}, derive_seed(seed, i));
    const MatrixXd real_lat = model.embedder.forward(as_column(s.target));
    const MatrixXd fake_lat = model.generator.forward_feedback(objectives::generator_inputs(model, noise, c, nullptr),
                                                               model.feedback_offset());
    real[i] = model.discriminator.forward(objectives::critic_inputs(model, real_lat, c)).mean();
    fake[i] = model.discriminator.forward(objectives::critic_inputs(model, fake_lat, c)).mean();
  }
  CriticSummary out;
  const double n = static_cast<double>(data.size());
  for (std::size_t i = 0; i < data.size(); ++i) {
    out.mean_real_score += real[i] / n;
    out.mean_fake_score += fake[i] / n;
  }
  const double threshold = 0.5 * (out.mean_real_score + out.mean_fake_score);
  const bool real_high = out.mean_real_score >= out.mean_fake_score;
  int correct = 0;
  for (std::size_t i = 0; i < data.size(); ++i) {
    correct += ((real[i] > threshold) == real_high) ? 1 : 0;
    correct += ((fake[i] > threshold) != real_high) ? 1 : 0;
  }
  out.accuracy = correct / (2.0 * n);
  return out;
}

// ---------------------------------------------------------------------------
// Generation

VectorXd generate_path(const CtsganModel& model, const VectorXd& condition, const MatrixXd& noise) {
  if (condition.size() != model.dims.condition_dim) {
    throw Error(ErrorCode::DimensionMismatch, "condition length " + std::to_string(condition.size()) +
                                                  " != model condition_dim " +
                                                  std::to_string(model.dims.condition_dim));
  }
  if (noise.cols() != model.dims.noise_width()) throw Error(ErrorCode::DimensionMismatch, "noise width mismatch");
  const MatrixXd latents = model.generator.forward_feedback(
      objectives::generator_inputs(model, noise, condition, nullptr), model.feedback_offset());
  return model.recovery.forward(latents).col(0);
}

MatrixXd generate_scenario_matrix(const CtsganModel& model, const VectorXd& condition, const NoiseSpec& spec,
                                  int count, std::uint64_t seed) {
  if (!model.flags.autoencoder || !model.flags.supervised || !model.flags.joint) {
    throw Error(ErrorCode::UntrainedModel, "model has not completed all three training phases");
  }
  if (count < 0) throw Error(ErrorCode::InvalidArgument, "scenario count must be non-negative");
  if (condition.size() != model.dims.condition_dim) {
    throw Error(ErrorCode::DimensionMismatch, "condition length " + std::to_string(condition.size()) +
                                                  " != model condition_dim " +
                                                  std::to_string(model.dims.condition_dim));
  }
  NoiseSpec s = spec;
  s.dim = model.dims.noise_width();
  sample_noise(s, seed);  // validates sigma and shape up front
  MatrixXd out(count, s.steps);
  parallel_for(static_cast<std::size_t>(count), [&](std::size_t m) {
    const VectorXd path = generate_path(model, condition, sample_noise(s, derive_seed(seed, m)));
    out.row(static_cast<Index>(m)) = path.cwiseMax(0.0).cwiseMin(1.0).transpose();
  });
  return out;
}

ScenarioSet generate_scenarios(const CtsganModel& model, const ConditionVector& condition, const NoiseSpec& spec,
                               int count, std::uint64_t seed, const std::string& condition_id, Provenance tag) {
  ScenarioSet set;
  set.scenarios = generate_scenario_matrix(model, condition.flatten(), spec, count, seed);
  set.provenance.assign(static_cast<std::size_t>(count), tag);
  set.condition_id = condition_id;
  set.noise_sigma = spec.sigma;
  return set;
}

// ---------------------------------------------------------------------------
// Persistence

nlohmann::json model_to_json(const CtsganModel& model) {
  auto block = [](const char* role, const Net& net) {
    auto j = seqnet::network_to_json(net);
    j["role"] = role;
    return j;
  };
  nlohmann::json log = nlohmann::json::array();
  for (const auto& r : model.training_log) log.push_back(r.to_json());
  nlohmann::json j{{"format_version", seqnet::kCheckpointFormatVersion},
                   {"kind", "ctsgan"},
                   {"dims", model.dims.to_json()},
                   {"networks",
                    {block("embedder", model.embedder), block("recovery", model.recovery),
                     block("generator", model.generator), block("discriminator", model.discriminator)}},
                   {"training_flags",
                    {{"autoencoder", model.flags.autoencoder},
                     {"supervised", model.flags.supervised},
                     {"joint", model.flags.joint}}},
                   {"training_log", log}};
  if (model.training_critic) j["training_critic"] = model.training_critic->to_json();
  if (model.holdout_critic) j["holdout_critic"] = model.holdout_critic->to_json();
  if (model.norms) j["normalization"] = model.norms->to_json();
  return j;
}

CtsganModel model_from_json(const nlohmann::json& j) {
  seqnet::check_format_version(j);
  try {
    if (j.at("kind") != "ctsgan") throw Error(ErrorCode::CorruptCheckpoint, "not a ctsgan checkpoint");
    CtsganModel m;
    m.dims = ModelDims::from_json(j.at("dims"));
    bool seen[4] = {false, false, false, false};
    for (const auto& block : j.at("networks")) {
      const auto role = block.at("role").get<std::string>();
      Net net = seqnet::network_from_json(block);
      if (role == "embedder") { m.embedder = std::move(net); seen[0] = true; }
      else if (role == "recovery") { m.recovery = std::move(net); seen[1] = true; }
      else if (role == "generator") { m.generator = std::move(net); seen[2] = true; }
      else if (role == "discriminator") { m.discriminator = std::move(net); seen[3] = true; }
      else throw Error(ErrorCode::CorruptCheckpoint, "unknown network role '" + role + "'");
    }
    if (!(seen[0] && seen[1] && seen[2] && seen[3])) {
      throw Error(ErrorCode::CorruptCheckpoint, "checkpoint lacks one of the four networks");
    }
    const auto reference = CtsganModel::create(m.dims, 0);
    if (m.embedder.spec() != reference.embedder.spec() || m.recovery.spec() != reference.recovery.spec() ||
        m.generator.spec() != reference.generator.spec() ||
        m.discriminator.spec() != reference.discriminator.spec()) {
      throw Error(ErrorCode::CorruptCheckpoint, "network shapes disagree with the recorded dims");
    }
    const auto& flags = j.at("training_flags");
    m.flags = {flags.at("autoencoder").get<bool>(), flags.at("supervised").get<bool>(), flags.at("joint").get<bool>()};
    for (const auto& r : j.at("training_log")) m.training_log.push_back(TrainingRecord::from_json(r));
    if (j.contains("training_critic")) m.training_critic = CriticSummary::from_json(j["training_critic"]);
    if (j.contains("holdout_critic")) m.holdout_critic = CriticSummary::from_json(j["holdout_critic"]);
    if (j.contains("normalization")) m.norms = ChannelNorms::from_json(j["normalization"]);
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::CorruptCheckpoint, e.what());
  } catch (const Error& e) {
    if (e.code() == ErrorCode::CorruptCheckpoint) throw;
    throw Error(ErrorCode::CorruptCheckpoint, e.what());
  }
}

std::string serialize_model(const CtsganModel& model) { return model_to_json(model).dump(); }

void save_model(const CtsganModel& model, const std::filesystem::path& path) {
  const std::string text = serialize_model(model);
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorCode::Io, "cannot write " + tmp.string());
    out << text;
    if (!out.flush()) throw Error(ErrorCode::Io, "short write to " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

CtsganModel load_model(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::Io, "cannot open checkpoint " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(buf.str());
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(ErrorCode::CorruptCheckpoint, path.string() + ": " + e.what());
  }
  return model_from_json(j);
}

}  // namespace priceband
