#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "priceband/calendar.hpp"
#include "priceband/ingest.hpp"
#include "priceband/scenario.hpp"
#include "priceband/seqnet/network.hpp"
#include "priceband/seqnet/optim.hpp"

namespace priceband {

using Net = seqnet::Network<double>;

struct ModelDims {
  int condition_dim = ConditionVector::kDim;
  int latent_dim = 100;
  int hidden_dim = 100;
  int num_layers = 1;
  /// Width of the per-timestep noise input; 0 means latent_dim.
  int noise_dim = 0;

  int noise_width() const noexcept { return noise_dim > 0 ? noise_dim : latent_dim; }
  void validate() const;

  nlohmann::json to_json() const;
  static ModelDims from_json(const nlohmann::json& j);
  friend bool operator==(const ModelDims&, const ModelDims&) = default;
};

struct TrainingConfig {
  int batch_size = 7;
  int iterations_per_phase = 10000;
  double learning_rate = 0.02;
  double clip_limit = 0.5;
  std::uint64_t seed = 0;
  /// Phase-3 generator objective: supervised_weight * supervised + adversarial.
  double supervised_weight = 10.0;
  /// Phase-3 embedder/recovery objective: reconstruction + this * supervised.
  double embedder_supervised_weight = 0.1;

  void validate() const;
  nlohmann::json to_json() const;
  static TrainingConfig from_json(const nlohmann::json& j);
};

struct TrainingRecord {
  int phase = 0;
  int iteration = 0;
  double loss = 0.0;
  /// Phase 3 only: critic loss of the same iteration.
  std::optional<double> critic_loss;

  nlohmann::json to_json() const;
  static TrainingRecord from_json(const nlohmann::json& j);
  friend bool operator==(const TrainingRecord&, const TrainingRecord&) = default;
};

struct TrainingFlags {
  bool autoencoder = false;
  bool supervised = false;
  bool joint = false;

  friend bool operator==(const TrainingFlags&, const TrainingFlags&) = default;
};

/// Critic behaviour on real vs generated latents.
struct CriticSummary {
  double mean_real_score = 0.0;
  double mean_fake_score = 0.0;
  /// Fraction classified correctly by thresholding at the midpoint of the two
  /// mean scores; 0.5 means the critic cannot separate them.
  double accuracy = 0.0;

  nlohmann::json to_json() const;
  static CriticSummary from_json(const nlohmann::json& j);
};

struct NoiseSpec {
  double sigma = 1.0;
  int steps = kStepsPerDay;
  int dim = 1;
};

/// T x dim i.i.d. N(0, sigma^2) draws. Throws InvalidSigma unless sigma >= 1.
Eigen::MatrixXd sample_noise(const NoiseSpec& spec, std::uint64_t seed);

/// Embedder (price -> latent), recovery (latent -> price), generator
/// (noise, condition, previous latent -> latent) and critic
/// (latent, condition -> score per step).
struct CtsganModel {
  ModelDims dims;
  Net embedder;
  Net recovery;
  Net generator;
  Net discriminator;
  TrainingFlags flags;
  std::vector<TrainingRecord> training_log;
  std::optional<CriticSummary> training_critic;
  std::optional<CriticSummary> holdout_critic;
  std::optional<ChannelNorms> norms;

  static CtsganModel create(const ModelDims& dims, std::uint64_t seed);

  /// Column where the fed-back previous latent starts in generator inputs.
  int feedback_offset() const noexcept { return dims.noise_width() + dims.condition_dim; }
};

/// Called after each recorded iteration; used to stream progress.
using TrainingObserver = std::function<void(const TrainingRecord&)>;

/// Minimizes reconstruction error of price paths through embedder + recovery.
void train_phase1_autoencoder(CtsganModel& model, const SampleSet& data, const TrainingConfig& config,
                              const TrainingObserver& observer = {});
/// Teaches the generator to predict the embedder's next latent from the
/// previous latent and the conditions (teacher forced, zero noise).
void train_phase2_supervised(CtsganModel& model, const SampleSet& data, const TrainingConfig& config,
                             const TrainingObserver& observer = {});
/// Alternating generator, embedder/recovery and clipped-critic updates.
/// `holdout`, when given, is scored by the critic at the end.
void train_phase3_joint(CtsganModel& model, const SampleSet& data, const TrainingConfig& config,
                        const TrainingObserver& observer = {}, const SampleSet* holdout = nullptr);

/// Mean squared reconstruction error per price value over a sample set.
double reconstruction_mse(const CtsganModel& model, const SampleSet& data);
/// Mean squared teacher-forced latent prediction error per latent value.
double supervised_mse(const CtsganModel& model, const SampleSet& data);
CriticSummary evaluate_critic(const CtsganModel& model, const SampleSet& data, std::uint64_t seed);

/// One generated normalized 48-step path: free-running generator then recovery.
Eigen::VectorXd generate_path(const CtsganModel& model, const Eigen::VectorXd& condition,
                              const Eigen::MatrixXd& noise);

/// M x 48 matrix of normalized prices clamped to [0, 1]. Row m uses noise
/// seeded by derive_seed(seed, m). Throws UntrainedModel unless all phases ran.
Eigen::MatrixXd generate_scenario_matrix(const CtsganModel& model, const Eigen::VectorXd& condition,
                                         const NoiseSpec& spec, int count, std::uint64_t seed);

/// generate_scenario_matrix wrapped as a ScenarioSet tagged with `tag`.
ScenarioSet generate_scenarios(const CtsganModel& model, const ConditionVector& condition, const NoiseSpec& spec,
                               int count, std::uint64_t seed, const std::string& condition_id = {},
                               Provenance tag = Provenance::Normal);

nlohmann::json model_to_json(const CtsganModel& model);
CtsganModel model_from_json(const nlohmann::json& j);
std::string serialize_model(const CtsganModel& model);
/// Writes to a sibling temp file and renames, so readers never see a partial file.
void save_model(const CtsganModel& model, const std::filesystem::path& path);
CtsganModel load_model(const std::filesystem::path& path);

/// Loss terms with flat gradients, exposed for gradient verification.
namespace objectives {

struct SequenceBatch {
  std::vector<Eigen::MatrixXd> prices;  // T x 1 each
  std::vector<Eigen::VectorXd> conditions;
  std::vector<Eigen::MatrixXd> noise;  // T x noise_width each
};

struct Terms {
  double loss = 0.0;
  Eigen::VectorXd embedder;
  Eigen::VectorXd recovery;
  Eigen::VectorXd generator;
  Eigen::VectorXd discriminator;
};

/// mean_b sum_t (recovery(embedder(x)) - x)^2
Terms reconstruction(const CtsganModel& model, const SequenceBatch& batch);
/// mean_b sum_t,l (G_tf(t) - E(x)(t))^2 with the embedder's latents both as
/// teacher input and target; gradients flow to generator and embedder.
Terms supervised(const CtsganModel& model, const SequenceBatch& batch);
/// mean_b [critic(fake) - critic(real)]: the critic minimizes this.
Terms critic(const CtsganModel& model, const SequenceBatch& batch);
/// mean_b [-critic(fake)]: the generator's adversarial objective.
Terms generator_adversarial(const CtsganModel& model, const SequenceBatch& batch);
/// reconstruction + supervised + critic: touches every network through every
/// path, for end-to-end gradient checks.
Terms four_network(const CtsganModel& model, const SequenceBatch& batch);

}  // namespace objectives

}  // namespace priceband
