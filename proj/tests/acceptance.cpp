// End-to-end acceptance checks. Prints one PASS/FAIL line per criterion and
// exits non-zero if any fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "priceband/cli.hpp"
#include "priceband/ctsgan.hpp"
#include "priceband/ingest.hpp"
#include "priceband/intervals.hpp"
#include "priceband/metrics.hpp"
#include "priceband/synthetic.hpp"
#include "priceband/volatility.hpp"

using namespace priceband;
using seqnet::Activation;
using seqnet::NetworkSpec;
using Eigen::MatrixXd;
using Eigen::VectorXd;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, double a) {
  char buf[128];
  std::snprintf(buf, sizeof buf, f, a);
  return buf;
}

std::string fmt(const char* f, double a, double b) {
  char buf[160];
  std::snprintf(buf, sizeof buf, f, a, b);
  return buf;
}

std::string fmt(const char* f, double a, double b, double c, double d) {
  char buf[256];
  std::snprintf(buf, sizeof buf, f, a, b, c, d);
  return buf;
}

// ---------------------------------------------------------------------------

Outcome sigma_worked_example() {
  const WeatherVariances v{{0.004, 0.07, 0.02}};
  const auto levels = classify_all(v, VolatilityThresholds::reference_table());
  const double sigma = sigma_from_levels(levels);
  const bool levels_ok = levels[0] == VolatilityLevel::Medium && levels[1] == VolatilityLevel::High &&
                         levels[2] == VolatilityLevel::High;
  return {levels_ok && std::abs(sigma - 2.667) <= 1e-9,
          std::string("levels=") + to_string(levels[0]) + "," + to_string(levels[1]) + "," + to_string(levels[2]) +
              fmt(" sigma=%.12f", sigma)};
}

Outcome ecpas_example() {
  EvaluationRun run{VectorXd::Constant(20, 0.5), VectorXd::Constant(20, 0.4), VectorXd::Constant(20, 0.6), 1};
  run.actuals(4) = 0.65;
  run.actuals(11) = 0.3;
  const double d = ecpas(run);
  return {d == 0.9, fmt("delta=%.17g", d)};
}

Outcome normalization_round_trip() {
  std::mt19937_64 rng(101);
  std::uniform_real_distribution<double> u(0.0, 500.0);
  VectorXd p(10000);
  for (auto& x : p) x = u(rng);
  const MinMaxParams params(kDefaultPriceFloor, kDefaultPriceCap);
  const VectorXd back = denormalize(normalize(p, params), params);
  const double worst = (back - p).cwiseAbs().maxCoeff();
  return {worst < 5e-7, fmt("max error %.3g A$/MWh", worst)};
}

VectorXd concat(const CtsganModel& m) {
  VectorXd v(m.embedder.size() + m.recovery.size() + m.generator.size() + m.discriminator.size());
  v << m.embedder.flat(), m.recovery.flat(), m.generator.flat(), m.discriminator.flat();
  return v;
}

Outcome gradient_correctness() {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  auto random = [&](Eigen::Index r, Eigen::Index c) {
    MatrixXd m(r, c);
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = u(rng);
    return m;
  };
  double worst = 0.0;
  std::string where;
  auto check_net = [&](const std::string& name, Net net, int steps, int feedback) {
    const MatrixXd x = random(steps, net.spec().input_dim);
    const MatrixXd y = random(steps, net.spec().output_dim);
    auto fn = [&](const VectorXd& p) {
      net.set_flat(p);
      Net::Cache cache;
      const MatrixXd out = feedback >= 0 ? net.forward_feedback(x, feedback, &cache) : net.forward(x, &cache);
      const MatrixXd r = out - y;
      return seqnet::LossAndGradient<double>{0.5 * r.squaredNorm(), net.backward(cache, r).params};
    };
    const VectorXd p0 = net.flat();
    const double e = seqnet::gradient_check<double>(p0, fn, 1e-5);
    if (e >= worst) {
      worst = e;
      where = name;
    }
  };

  // The four networks at the desk-scale dims, with the full condition width.
  ModelDims dims;
  dims.hidden_dim = 16;
  dims.latent_dim = 8;
  const auto model = CtsganModel::create(dims, 3);
  check_net("embedder", model.embedder, 8, -1);
  check_net("recovery", model.recovery, 8, -1);
  check_net("generator", model.generator, 4, model.feedback_offset());
  check_net("critic", model.discriminator, 4, -1);
  // Remaining layer configurations.
  check_net("stacked tanh", Net::init(NetworkSpec{3, 5, 2, 2, Activation::Tanh}, 4), 7, -1);
  check_net("identity head", Net::init(NetworkSpec{4, 4, 1, 3, Activation::Identity}, 5), 7, -1);
  check_net("dense only", Net::init(NetworkSpec{6, 0, 0, 2, Activation::Sigmoid}, 6), 5, -1);

  // Joint objectives through all four networks.
  ModelDims tiny;
  tiny.condition_dim = 5;
  tiny.hidden_dim = 3;
  tiny.latent_dim = 2;
  const auto small = CtsganModel::create(tiny, 7);
  objectives::SequenceBatch batch;
  for (int b = 0; b < 2; ++b) {
    batch.prices.push_back(random(6, 1));
    batch.conditions.push_back(random(5, 1));
    batch.noise.push_back(sample_noise({1.0, 6, 2}, static_cast<std::uint64_t>(b)));
  }
  auto terms_flat = [](const objectives::Terms& t) {
    VectorXd v(t.embedder.size() + t.recovery.size() + t.generator.size() + t.discriminator.size());
    v << t.embedder, t.recovery, t.generator, t.discriminator;
    return v;
  };
  const std::pair<const char*, objectives::Terms (*)(const CtsganModel&, const objectives::SequenceBatch&)> objs[] = {
      {"reconstruction", &objectives::reconstruction},
      {"supervised", &objectives::supervised},
      {"critic", &objectives::critic},
      {"adversarial", &objectives::generator_adversarial},
      {"four-network", &objectives::four_network}};
  for (const auto& [name, obj] : objs) {
    auto fn = [&](const VectorXd& p) {
      CtsganModel m = small;
      Eigen::Index at = 0;
      for (Net* n : {&m.embedder, &m.recovery, &m.generator, &m.discriminator}) {
        n->set_flat(p.segment(at, n->size()));
        at += n->size();
      }
      const auto t = obj(m, batch);
      return seqnet::LossAndGradient<double>{t.loss, terms_flat(t)};
    };
    const double e = seqnet::gradient_check<double>(concat(small), fn, 1e-5);
    if (e >= worst) {
      worst = e;
      where = name;
    }
  }
  return {worst < 1e-4, fmt("max relative error %.3g", worst) + " (" + where + ")"};
}

Outcome calibration_oracle() {
  std::mt19937_64 rng(77);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::array<std::vector<double>, 3> v;
  for (auto& f : v) {
    f.resize(10000);
    for (auto& x : f) x = u(rng);
  }
  const auto th = calibrate_thresholds(v);
  double worst = 0.0;
  for (auto f : {WeatherFactor::Temperature, WeatherFactor::Irradiance, WeatherFactor::Wind}) {
    worst = std::max({worst, std::abs(th[f].low_cut - 0.60), std::abs(th[f].med_cut - 0.85),
                      std::abs(th[f].high_cut - 0.95)});
  }
  return {worst <= 0.02, fmt("max cut deviation %.4f", worst)};
}

MatrixXd ar1_paths(int rows, std::mt19937_64& rng) {
  constexpr double phi = 0.7, sd = 0.05;
  std::normal_distribution<double> n(0.0, 1.0);
  MatrixXd m(rows, kStepsPerDay);
  for (int r = 0; r < rows; ++r) {
    double x = sd * n(rng);
    for (int t = 0; t < kStepsPerDay; ++t) {
      if (t > 0) x = phi * x + sd * std::sqrt(1 - phi * phi) * n(rng);
      m(r, t) = std::clamp(0.5 + x, 0.0, 1.0);
    }
  }
  return m;
}

Outcome coverage_oracle() {
  std::mt19937_64 rng(2024);
  ScenarioSet set;
  set.scenarios = ar1_paths(2000, rng);
  set.provenance.assign(2000, Provenance::Normal);
  const auto pi = build_interval(set, 0.9);
  const MatrixXd fresh = ar1_paths(1000, rng);
  double covered = 0.0;
  for (int r = 0; r < fresh.rows(); ++r) covered += ecpas({fresh.row(r).transpose(), pi.lower, pi.upper, r});
  const double e = covered / static_cast<double>(fresh.rows());
  return {std::abs(e - 0.9) <= 0.03, fmt("ECPAS %.4f", e)};
}

Outcome confidence_oracle() {
  constexpr int T = 100, S = 200;
  auto run_once = [](int, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::bernoulli_distribution inside(0.9);
    EvaluationRun r{VectorXd::Constant(T, 0.5), VectorXd::Constant(T, 0.4), VectorXd::Constant(T, 0.6), 0};
    for (int t = 0; t < T; ++t) {
      if (!inside(rng)) r.actuals(t) = 0.9;
    }
    return r;
  };
  const auto rep = repeated_sampling(S, 2718, run_once, {0.9, 0.25});
  double tail = 0.0;
  for (int i = 90; i <= T; ++i) {
    tail += std::exp(std::lgamma(T + 1.0) - std::lgamma(i + 1.0) - std::lgamma(T - i + 1.0) + i * std::log(0.9) +
                     (T - i) * std::log(0.1));
  }
  return {std::abs(rep.phi_coverage - tail) <= 0.05, fmt("phi %.3f vs exact tail %.4f", rep.phi_coverage, tail)};
}

// Criteria 8 and 9 share one desk-scale model.
struct DeskScale {
  SyntheticMarket market = make_synthetic_market({});
  ChannelNorms norms;
  SampleSet train;
  CtsganModel model;
  double rec_before = 0, rec_after = 0, sup_before = 0, sup_after = 0, seconds = 0;
};

DeskScale& desk_scale() {
  static DeskScale d = [] {
    DeskScale s;
    const auto& days = s.market.dataset.days;
    s.norms = fit_channel_norms(std::span(days.data(), 120));
    s.train = build_samples(std::span(days.data() + 59, 61), s.norms);
    ModelDims dims;
    dims.hidden_dim = 16;
    dims.latent_dim = 8;
    s.model = CtsganModel::create(dims, 7);
    s.model.norms = s.norms;
    TrainingConfig cfg;
    cfg.iterations_per_phase = 2000;
    cfg.seed = 3;
    const auto t0 = std::chrono::steady_clock::now();
    s.rec_before = reconstruction_mse(s.model, s.train);
    train_phase1_autoencoder(s.model, s.train, cfg);
    s.rec_after = reconstruction_mse(s.model, s.train);
    s.sup_before = supervised_mse(s.model, s.train);
    train_phase2_supervised(s.model, s.train, cfg);
    s.sup_after = supervised_mse(s.model, s.train);
    train_phase3_joint(s.model, s.train, cfg);
    s.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return s;
  }();
  return d;
}

Outcome training_progress() {
  const auto& d = desk_scale();
  const double rec = d.rec_before / d.rec_after, sup = d.sup_before / d.sup_after;
  return {rec >= 10 && sup >= 5 && d.seconds < 600,
          fmt("%.0f samples; reconstruction %.1fx, supervised %.1fx, %.0f s", static_cast<double>(d.train.size()), rec,
              sup, d.seconds)};
}

Outcome reinforced_widening() {
  auto& d = desk_scale();
  const auto& days = d.market.dataset.days;
  const auto thresholds = calibrate_thresholds(historical_variances(std::span(days.data(), 120), d.norms));
  std::vector<EvaluationDay> eval;
  int reinforced = 0;
  for (std::size_t i = 120; i < 140; ++i) {
    const auto f = WeatherForecast::from_day(days[i]);
    eval.push_back({days[i].date, build_conditions(days[i - 1], f, days[i].date, d.norms),
                    normalized_prices(days[i], d.norms), forecast_variances(f, d.norms)});
    reinforced += sigma_from_levels(classify_all(eval.back().variances, thresholds)) > 1.0;
  }
  HarnessOptions opt;
  opt.window = kAfternoonWindow;
  opt.pipeline.scenarios = 200;
  constexpr int runs = 5;
  const auto with = repeated_sampling_harness(d.model, eval, thresholds, runs, opt, {}, 11);
  const FactorCuts never{1e6, 2e6, 3e6};
  const auto without = repeated_sampling_harness(d.model, eval, VolatilityThresholds({never, never, never}), runs,
                                                 opt, {}, 11);
  auto mean = [](const RepeatedSamplingReport& r, double RunScore::*field) {
    double s = 0.0;
    for (const auto& x : r.runs) s += x.*field;
    return s / static_cast<double>(r.runs.size());
  };
  const double e1 = mean(with, &RunScore::ecpas), e0 = mean(without, &RunScore::ecpas);
  const double w1 = mean(with, &RunScore::eawapi), w0 = mean(without, &RunScore::eawapi);
  const double growth = w1 / w0 - 1.0;
  return {e1 >= e0 && growth <= 0.5,
          fmt("ECPAS %.4f vs %.4f, EAWAPI %.4f vs %.4f", e1, e0, w1, w0) + fmt(" (+%.1f%%), ", growth * 100) +
              std::to_string(reinforced) + " of 20 days reinforced"};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

int cli(const std::vector<std::string>& args, std::string* err) {
  std::vector<const char*> argv{"priceband"};
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, e;
  const int code = cli::run_main(static_cast<int>(argv.size()), argv.data(), out, e);
  *err += e.str();
  return code;
}

Outcome determinism() {
  const fs::path root = fs::temp_directory_path() / "priceband_acceptance";
  fs::remove_all(root);
  fs::create_directories(root);
  {
    const auto market = make_synthetic_market({.days = 140, .seed = 9});
    std::ofstream csv(root / "market.csv");
    write_market_csv(market.dataset.days, csv);
  }
  const nlohmann::json cfg = {{"paths", {{"dataset", "market.csv"}}},
                              {"seed", 2020},
                              {"splits",
                               {{"calibrate", {{"to", "2019-04-30"}}},
                                {"train", {{"from", "2019-03-01"}, {"to", "2019-04-30"}}},
                                {"holdout", {{"from", "2019-05-01"}, {"to", "2019-05-05"}}}}},
                              {"model", {{"latent_dim", 4}, {"hidden_dim", 8}}},
                              {"training", {{"iterations_per_phase", 60}}},
                              {"prediction", {{"scenarios", 200}}},
                              {"evaluation", {{"runs", 4}, {"window", "afternoon"}}}};
  std::ofstream(root / "config.json") << cfg.dump(2);

  std::string err;
  for (const char* run : {"a", "b"}) {
    const std::string out = (root / run).string(), config = (root / "config.json").string();
    for (const auto& args : std::vector<std::vector<std::string>>{
             {"calibrate", "--config", config, "--out", out},
             {"train", "--config", config, "--out", out},
             {"predict", "--config", config, "--out", out, "--date", "2019-05-12"},
             {"evaluate", "--config", config, "--out", out, "--from", "2019-05-10", "--to", "2019-05-19"},
             {"report", "--config", config, "--out", out}}) {
      if (cli(args, &err) != 0) return {false, args[0] + " failed: " + err};
    }
  }
  int files = 0;
  for (const auto& entry : fs::recursive_directory_iterator(root / "a")) {
    if (!entry.is_regular_file()) continue;
    const auto rel = fs::relative(entry.path(), root / "a");
    const fs::path twin = root / "b" / rel;
    if (!fs::exists(twin) || slurp(entry.path()) != slurp(twin)) return {false, rel.string() + " differs"};
    ++files;
  }
  const bool complete = fs::exists(root / "a" / "checkpoint.json") && fs::exists(root / "a" / "interval.csv") &&
                        fs::exists(root / "a" / "evaluation_report.json");
  fs::remove_all(root);
  return {complete && files >= 10, std::to_string(files) + " output files byte-identical"};
}

}  // namespace

int main() {
  const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria = {
      {"sigma worked example", sigma_worked_example},
      {"ECPAS twenty-sample example", ecpas_example},
      {"normalization round trip", normalization_round_trip},
      {"gradient correctness", gradient_correctness},
      {"threshold calibration oracle", calibration_oracle},
      {"coverage oracle", coverage_oracle},
      {"confidence-level oracle", confidence_oracle},
      {"training progress", training_progress},
      {"reinforced widening", reinforced_widening},
      {"determinism", determinism},
  };
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("threw: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::printf("criterion %2zu %-30s %s  %s [%.1f s]\n", i + 1, criteria[i].first, o.pass ? "PASS" : "FAIL",
                o.detail.c_str(), secs);
    std::fflush(stdout);
    failed += !o.pass;
  }
  std::printf("%d of %zu criteria passed\n", static_cast<int>(criteria.size()) - failed, criteria.size());
  return failed == 0 ? 0 : 1;
}
