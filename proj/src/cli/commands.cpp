#include "priceband/cli.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <cstdlib>
#include <fstream>
#include <initializer_list>
#include <map>
#include <sstream>

#include "priceband/rng.hpp"

namespace priceband::cli {

using nlohmann::json;

LogLevel log_level_from_env() {
  const char* raw = std::getenv("PRICEBAND_LOG");
  if (!raw) return LogLevel::Info;
  std::string v(raw);
  std::transform(v.begin(), v.end(), v.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  if (v == "error" || v == "quiet") return LogLevel::Error;
  if (v == "warn" || v == "warning") return LogLevel::Warn;
  if (v == "debug" || v == "trace") return LogLevel::Debug;
  return LogLevel::Info;
}

// ---------------------------------------------------------------------------
// Config

namespace {

void check_keys(const json& j, std::initializer_list<const char*> allowed, const std::string& where) {
  if (!j.is_object()) throw Error(ErrorCode::InvalidArgument, "config: '" + where + "' must be an object");
  for (const auto& [key, _] : j.items()) {
    if (std::none_of(allowed.begin(), allowed.end(), [&](const char* a) { return key == a; })) {
      throw Error(ErrorCode::InvalidArgument, "config: unknown key '" + key + "' in " + where);
    }
  }
}

template <typename T>
void read_if(const json& j, const char* key, T& into) {
  if (j.contains(key)) into = j.at(key).get<T>();
}

DateRange range_from_json(const json& j, const std::string& where) {
  check_keys(j, {"from", "to"}, where);
  DateRange r;
  if (j.contains("from")) r.from = parse_date(j.at("from").get<std::string>());
  if (j.contains("to")) r.to = parse_date(j.at("to").get<std::string>());
  return r;
}

fs::path resolve(const fs::path& base, const std::string& p) {
  const fs::path path(p);
  return path.is_absolute() || base.empty() ? path : base / path;
}

StepWindow window_from_json(const json& j) {
  if (j.is_string()) {
    const auto name = j.get<std::string>();
    if (name == "day") return {0, kStepsPerDay - 1};
    if (name == "afternoon") return kAfternoonWindow;
    throw Error(ErrorCode::InvalidArgument, "config: window must be 'day', 'afternoon' or [first, last]");
  }
  const auto v = j.get<std::vector<int>>();
  if (v.size() != 2) throw Error(ErrorCode::InvalidArgument, "config: window needs [first, last]");
  return {v[0], v[1]};
}

}  // namespace

RunConfig RunConfig::from_json(const json& j, const fs::path& base_dir) {
  check_keys(j, {"paths", "seed", "splits", "normalization", "model", "training", "prediction", "evaluation"},
             "top level");
  RunConfig c;
  try {
    if (j.contains("paths")) {
      const auto& p = j.at("paths");
      check_keys(p, {"dataset", "output_dir", "checkpoint", "thresholds"}, "paths");
      if (p.contains("dataset")) c.dataset = resolve(base_dir, p.at("dataset").get<std::string>());
      if (p.contains("output_dir")) c.output_dir = resolve(base_dir, p.at("output_dir").get<std::string>());
      else c.output_dir = resolve(base_dir, "out");
      if (p.contains("checkpoint")) c.checkpoint = resolve(base_dir, p.at("checkpoint").get<std::string>());
      if (p.contains("thresholds")) c.thresholds = resolve(base_dir, p.at("thresholds").get<std::string>());
    }
    read_if(j, "seed", c.seed);
    if (j.contains("splits")) {
      const auto& s = j.at("splits");
      check_keys(s, {"calibrate", "train", "holdout"}, "splits");
      if (s.contains("calibrate")) c.calibrate_days = range_from_json(s.at("calibrate"), "splits.calibrate");
      if (s.contains("train")) c.train_days = range_from_json(s.at("train"), "splits.train");
      if (s.contains("holdout")) c.holdout_days = range_from_json(s.at("holdout"), "splits.holdout");
    }
    if (j.contains("normalization")) {
      const auto& n = j.at("normalization");
      check_keys(n, {"price_floor", "price_cap", "hdd_base"}, "normalization");
      read_if(n, "price_floor", c.price_floor);
      read_if(n, "price_cap", c.price_cap);
      read_if(n, "hdd_base", c.hdd_base);
    }
    if (j.contains("model")) {
      const auto& m = j.at("model");
      check_keys(m, {"latent_dim", "hidden_dim", "num_layers", "noise_dim"}, "model");
      read_if(m, "latent_dim", c.dims.latent_dim);
      read_if(m, "hidden_dim", c.dims.hidden_dim);
      read_if(m, "num_layers", c.dims.num_layers);
      read_if(m, "noise_dim", c.dims.noise_dim);
    }
    if (j.contains("training")) {
      const auto& t = j.at("training");
      check_keys(t,
                 {"batch_size", "iterations_per_phase", "learning_rate", "clip_limit", "supervised_weight",
                  "embedder_supervised_weight"},
                 "training");
      read_if(t, "batch_size", c.training.batch_size);
      read_if(t, "iterations_per_phase", c.training.iterations_per_phase);
      read_if(t, "learning_rate", c.training.learning_rate);
      read_if(t, "clip_limit", c.training.clip_limit);
      read_if(t, "supervised_weight", c.training.supervised_weight);
      read_if(t, "embedder_supervised_weight", c.training.embedder_supervised_weight);
    }
    if (j.contains("prediction")) {
      const auto& p = j.at("prediction");
      check_keys(p, {"scenarios", "volatile_scenarios", "nominal", "bins", "mode"}, "prediction");
      read_if(p, "scenarios", c.prediction.scenarios);
      read_if(p, "volatile_scenarios", c.prediction.volatile_scenarios);
      read_if(p, "nominal", c.prediction.nominal);
      read_if(p, "bins", c.prediction.bins);
      if (p.contains("mode")) c.prediction.mode = interval_mode_from_string(p.at("mode").get<std::string>());
    }
    if (j.contains("evaluation")) {
      const auto& e = j.at("evaluation");
      check_keys(e, {"runs", "delta_prime", "xi_prime", "window", "from", "to"}, "evaluation");
      read_if(e, "runs", c.runs);
      read_if(e, "delta_prime", c.targets.delta_prime);
      read_if(e, "xi_prime", c.targets.xi_prime);
      if (e.contains("window")) c.evaluation_window = window_from_json(e.at("window"));
      if (e.contains("from")) c.evaluate_days.from = parse_date(e.at("from").get<std::string>());
      if (e.contains("to")) c.evaluate_days.to = parse_date(e.at("to").get<std::string>());
    }
  } catch (const json::exception& e) {
    throw Error(ErrorCode::InvalidArgument, std::string("config: ") + e.what());
  }
  if (c.output_dir.empty()) c.output_dir = resolve(base_dir, "out");
  return c;
}

void RunConfig::validate() const {
  if (dataset.empty()) throw Error(ErrorCode::InvalidArgument, "config: paths.dataset is required");
  if (!fs::exists(dataset)) throw Error(ErrorCode::Io, "dataset not found: " + dataset.string());
  if (!(price_floor < price_cap)) throw Error(ErrorCode::InvalidArgument, "config: price_floor must be < price_cap");
  dims.validate();
  training.validate();
  if (prediction.scenarios < 1) throw Error(ErrorCode::InvalidArgument, "config: prediction.scenarios must be >= 1");
  if (!(prediction.nominal > 0.0 && prediction.nominal < 1.0)) {
    throw Error(ErrorCode::InvalidArgument, "config: prediction.nominal must be in (0, 1)");
  }
  if (prediction.bins < 2) throw Error(ErrorCode::InvalidArgument, "config: prediction.bins must be >= 2");
  if (runs < 1) throw Error(ErrorCode::InvalidArgument, "config: evaluation.runs must be >= 1");
  if (!(targets.delta_prime > 0.0 && targets.delta_prime <= 1.0) || !(targets.xi_prime > 0.0)) {
    throw Error(ErrorCode::InvalidArgument, "config: metric targets out of range");
  }
  const auto w = evaluation_window;
  if (w.first < 0 || w.last >= kStepsPerDay || w.last < w.first) {
    throw Error(ErrorCode::InvalidArgument, "config: evaluation window outside the day");
  }
}

RunConfig load_config(const Invocation& inv) {
  std::ifstream in(inv.config);
  if (!in) throw Error(ErrorCode::Io, "cannot open config " + inv.config.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::InvalidArgument, "config " + inv.config.string() + ": " + e.what());
  }
  RunConfig c = RunConfig::from_json(j, inv.config.parent_path());
  if (inv.seed) c.seed = *inv.seed;
  if (inv.out) c.output_dir = *inv.out;
  if (inv.date) c.date = inv.date;
  if (inv.from) c.evaluate_days.from = inv.from;
  if (inv.to) c.evaluate_days.to = inv.to;
  if (inv.variances) c.variances = inv.variances;
  c.resume = inv.resume;
  if (c.checkpoint.empty()) c.checkpoint = c.output_dir / "checkpoint.json";
  if (c.thresholds.empty()) c.thresholds = c.output_dir / "thresholds.json";
  c.validate();
  return c;
}

// ---------------------------------------------------------------------------
// Shared helpers

namespace {

void write_atomic(const fs::path& path, const std::string& content) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorCode::Io, "cannot write " + tmp.string());
    out << content;
    if (!out) throw Error(ErrorCode::Io, "write failed for " + tmp.string());
  }
  fs::rename(tmp, path);
}

std::string read_file(const fs::path& path, const std::string& artifact) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::MissingArtifact, artifact + " (" + path.string() + ")");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

json read_json(const fs::path& path, const std::string& artifact) {
  try {
    return json::parse(read_file(path, artifact));
  } catch (const json::exception& e) {
    throw Error(ErrorCode::CorruptCheckpoint, artifact + ": " + e.what());
  }
}

std::vector<MarketDay> select_days(const Dataset& ds, const DateRange& range) {
  std::vector<MarketDay> out;
  for (const auto& d : ds.days) {
    if (range.contains(d.date)) out.push_back(d);
  }
  return out;
}

Dataset load(const RunConfig& cfg, Logger& log) {
  Dataset ds = load_dataset(cfg.dataset);
  log.info(cfg.dataset.filename().string() + ": " + ds.report.summary());
  for (const auto& d : ds.report.dropped_dates) log.debug("dropped incomplete day " + d);
  return ds;
}

ChannelNorms training_norms(const RunConfig& cfg, const Dataset& ds) {
  const auto days = select_days(ds, cfg.train_days);
  if (days.empty()) throw Error(ErrorCode::EmptyDataset, "training split holds no complete days");
  return fit_channel_norms(days, cfg.price_floor, cfg.price_cap, cfg.hdd_base);
}

CtsganModel load_trained(const RunConfig& cfg) {
  if (!fs::exists(cfg.checkpoint)) throw Error(ErrorCode::MissingArtifact, "checkpoint " + cfg.checkpoint.string());
  CtsganModel model = load_model(cfg.checkpoint);
  if (!model.norms) throw Error(ErrorCode::CorruptCheckpoint, "checkpoint carries no normalization");
  return model;
}

VolatilityThresholds load_thresholds(const RunConfig& cfg) {
  return VolatilityThresholds::from_json(read_json(cfg.thresholds, "thresholds"));
}

std::string levels_text(const VolatilityLevels& levels) {
  std::string s;
  for (auto f : kWeatherFactors) {
    if (!s.empty()) s += ' ';
    s += std::string(to_string(f)) + "=" + to_string(levels[static_cast<int>(f)]);
  }
  return s;
}

json variances_json(const WeatherVariances& v) {
  json j;
  for (auto f : kWeatherFactors) j[to_string(f)] = v[f];
  return j;
}

json levels_json(const VolatilityLevels& levels) {
  json j;
  for (auto f : kWeatherFactors) j[to_string(f)] = to_string(levels[static_cast<int>(f)]);
  return j;
}

Date previous_day(Date d) { return d - std::chrono::days{1}; }

}  // namespace

// ---------------------------------------------------------------------------
// calibrate

void cmd_calibrate(const RunConfig& cfg, Logger& log, std::ostream& out) {
  const Dataset ds = load(cfg, log);
  const ChannelNorms norms = training_norms(cfg, ds);
  const auto days = select_days(ds, cfg.calibrate_days);
  if (days.size() < 100) {
    throw Error(ErrorCode::InsufficientData,
                "calibration needs at least 100 complete days, got " + std::to_string(days.size()));
  }
  const auto variances = historical_variances(days, norms);
  const VolatilityThresholds thresholds = calibrate_thresholds(variances);

  // Afternoon peak price per day, to report how each factor tracks it.
  std::vector<double> peaks;
  for (const auto& d : days) {
    peaks.push_back(d.price.segment(kAfternoonWindow.first, kAfternoonWindow.size()).maxCoeff());
  }

  json report;
  report["days"] = days.size();
  report["from"] = format_date(days.front().date);
  report["to"] = format_date(days.back().date);
  for (auto f : kWeatherFactors) {
    const auto& v = variances[static_cast<int>(f)];
    const auto w = default_window(f);
    json entry{{"samples", v.size()},
               {"window", {w.first, w.last}},
               {"p60", thresholds[f].low_cut},
               {"p85", thresholds[f].med_cut},
               {"p95", thresholds[f].high_cut}};
    try {
      const auto c = pearson_correlation(v, peaks);
      entry["afternoon_peak_correlation"] = {{"r", c.r}, {"p_value", c.p_value}};
    } catch (const Error& e) {
      log.warn(std::string(to_string(f)) + " correlation skipped: " + e.what());
      entry["afternoon_peak_correlation"] = nullptr;
    }
    report["factors"][to_string(f)] = entry;
  }

  write_atomic(cfg.thresholds, thresholds.to_json().dump(2) + "\n");
  write_atomic(cfg.output_dir / "calibration_report.json", report.dump(2) + "\n");
  out << "calibrated " << days.size() << " days\n";
  out << "factor        low_cut     med_cut     high_cut\n";
  for (auto f : kWeatherFactors) {
    char line[128];
    std::snprintf(line, sizeof line, "%-12s %10.6f  %10.6f  %10.6f\n", to_string(f), thresholds[f].low_cut,
                  thresholds[f].med_cut, thresholds[f].high_cut);
    out << line;
  }
  log.info("wrote " + cfg.thresholds.string());
}

// ---------------------------------------------------------------------------
// train

namespace {

void phase_summary(const CtsganModel& model, int phase, std::ostream& out) {
  std::vector<double> losses;
  for (const auto& r : model.training_log) {
    if (r.phase == phase) losses.push_back(r.loss);
  }
  if (losses.empty()) return;
  const std::size_t k = std::max<std::size_t>(1, std::min<std::size_t>(50, losses.size() / 10));
  auto mean = [](auto first, auto last) {
    double s = 0.0;
    for (auto it = first; it != last; ++it) s += *it;
    return s / static_cast<double>(std::distance(first, last));
  };
  out << "phase " << phase << ": " << losses.size() << " iterations, loss "
      << format_fixed(mean(losses.begin(), losses.begin() + static_cast<long>(k)), 6) << " -> "
      << format_fixed(mean(losses.end() - static_cast<long>(k), losses.end()), 6) << '\n';
}

}  // namespace

void cmd_train(const RunConfig& cfg, Logger& log, std::ostream& out) {
  const Dataset ds = load(cfg, log);
  const ChannelNorms norms = training_norms(cfg, ds);
  const SampleSet train = build_samples(select_days(ds, cfg.train_days), norms);
  if (train.empty()) throw Error(ErrorCode::InsufficientData, "training split has no consecutive day pairs");
  std::optional<SampleSet> holdout;
  if (cfg.holdout_days) holdout = build_samples(select_days(ds, *cfg.holdout_days), norms);
  log.info("training on " + std::to_string(train.size()) + " samples");

  CtsganModel model;
  if (cfg.resume && fs::exists(cfg.checkpoint)) {
    model = load_model(cfg.checkpoint);
    if (!(model.dims == cfg.dims)) {
      throw Error(ErrorCode::DimensionMismatch, "checkpoint dims differ from config; cannot resume");
    }
    log.info("resuming from " + cfg.checkpoint.string());
  } else {
    model = CtsganModel::create(cfg.dims, derive_seed(cfg.seed, "init"));
  }
  model.norms = norms;

  TrainingConfig tc = cfg.training;
  tc.seed = derive_seed(cfg.seed, "train");

  const fs::path log_path = cfg.output_dir / "training_log.jsonl";
  fs::create_directories(cfg.output_dir);
  std::ofstream records(log_path, std::ios::trunc);
  if (!records) throw Error(ErrorCode::Io, "cannot write " + log_path.string());
  for (const auto& r : model.training_log) records << r.to_json().dump() << '\n';
  const int every = std::max(1, tc.iterations_per_phase / 10);
  TrainingObserver observer = [&](const TrainingRecord& r) {
    records << r.to_json().dump() << '\n';
    if ((r.iteration + 1) % every == 0) {
      log.debug("phase " + std::to_string(r.phase) + " iteration " + std::to_string(r.iteration + 1) + " loss " +
                format_double(r.loss));
    }
  };

  if (model.flags.autoencoder) {
    log.info("phase 1 already complete, skipping");
  } else {
    train_phase1_autoencoder(model, train, tc, observer);
    save_model(model, cfg.checkpoint);
    phase_summary(model, 1, out);
  }
  if (model.flags.supervised) {
    log.info("phase 2 already complete, skipping");
  } else {
    train_phase2_supervised(model, train, tc, observer);
    save_model(model, cfg.checkpoint);
    phase_summary(model, 2, out);
  }
  if (model.flags.joint) {
    log.info("phase 3 already complete, skipping");
  } else {
    train_phase3_joint(model, train, tc, observer, holdout ? &*holdout : nullptr);
    save_model(model, cfg.checkpoint);
    phase_summary(model, 3, out);
  }
  records.flush();
  out << "reconstruction_mse=" << format_fixed(reconstruction_mse(model, train), 6)
      << " supervised_mse=" << format_fixed(supervised_mse(model, train), 6) << '\n';
  if (model.training_critic) {
    out << "critic train: real=" << format_fixed(model.training_critic->mean_real_score, 4)
        << " fake=" << format_fixed(model.training_critic->mean_fake_score, 4)
        << " accuracy=" << format_fixed(model.training_critic->accuracy, 3) << '\n';
  }
  if (model.holdout_critic) {
    out << "critic holdout: real=" << format_fixed(model.holdout_critic->mean_real_score, 4)
        << " fake=" << format_fixed(model.holdout_critic->mean_fake_score, 4)
        << " accuracy=" << format_fixed(model.holdout_critic->accuracy, 3) << '\n';
  }
  log.info("wrote " + cfg.checkpoint.string());
}

// ---------------------------------------------------------------------------
// predict

void cmd_predict(const RunConfig& cfg, Logger& log, std::ostream& out) {
  if (!cfg.date) throw Error(ErrorCode::InvalidArgument, "predict needs --date YYYY-MM-DD");
  const Date date = *cfg.date;
  const CtsganModel model = load_trained(cfg);
  const VolatilityThresholds thresholds = load_thresholds(cfg);
  const Dataset ds = load(cfg, log);
  const ChannelNorms& norms = *model.norms;

  const MarketDay* prev = ds.find(previous_day(date));
  if (!prev) throw Error(ErrorCode::InsufficientData, "no observations for " + format_date(previous_day(date)));
  const MarketDay* target = ds.find(date);
  if (!target) throw Error(ErrorCode::InsufficientData, "no weather forecast for " + format_date(date));
  const WeatherForecast forecast = WeatherForecast::from_day(*target);
  const ConditionVector condition = build_conditions(*prev, forecast, date, norms);
  const WeatherVariances variances = cfg.variances ? *cfg.variances : forecast_variances(forecast, norms);

  PipelineOptions opts = cfg.prediction;
  opts.condition_id = format_date(date);
  opts.seed = derive_seed(cfg.seed, "predict:" + opts.condition_id);
  const PipelineResult res = predict_pipeline(model, condition, variances, thresholds, opts);

  json density = res.density.to_json();
  density["date"] = opts.condition_id;
  density["price_range"] = norms.price.to_json();
  json meta{{"date", opts.condition_id},
            {"variances", variances_json(variances)},
            {"levels", levels_json(res.levels)},
            {"sigma", res.sigma},
            {"reinforced", res.reinforced},
            {"scenarios", {{"normal", res.scenarios.count(Provenance::Normal)},
                           {"volatile", res.scenarios.count(Provenance::Volatile)}}},
            {"nominal", opts.nominal},
            {"mode", opts.mode == IntervalMode::Quantile ? "quantile" : "envelope"}};

  write_atomic(cfg.output_dir / "interval.csv", interval_csv(res.interval, norms.price));
  write_atomic(cfg.output_dir / "density.json", density.dump() + "\n");
  write_atomic(cfg.output_dir / "scenarios.csv", scenario_csv(res.scenarios));
  write_atomic(cfg.output_dir / "prediction.json", meta.dump(2) + "\n");

  log.info(levels_text(res.levels));
  out << "date=" << opts.condition_id << " sigma=" << format_fixed(res.sigma, 3)
      << " reinforced=" << (res.reinforced ? "true" : "false") << " scenarios=" << res.scenarios.size() << '\n';
}

// ---------------------------------------------------------------------------
// evaluate

namespace {

struct GroupScore {
  std::vector<double> ecpas;
  std::vector<double> eawapi;
};

json group_json(const GroupScore& g, const MetricTargets& targets) {
  auto mean = [](const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += x;
    return s / static_cast<double>(v.size());
  };
  return {{"mean_ecpas", mean(g.ecpas)},
          {"mean_eawapi", mean(g.eawapi)},
          {"phi_coverage", confidence_level_ecpas(g.ecpas, targets.delta_prime)},
          {"phi_width", confidence_level_eawapi(g.eawapi, targets.xi_prime)}};
}

}  // namespace

void cmd_evaluate(const RunConfig& cfg, Logger& log, std::ostream& out) {
  if (!cfg.evaluate_days.from || !cfg.evaluate_days.to) {
    throw Error(ErrorCode::InvalidArgument, "evaluate needs --from and --to");
  }
  const Date from = *cfg.evaluate_days.from;
  const Date to = *cfg.evaluate_days.to;
  if (to < from) throw Error(ErrorCode::InvalidArgument, "--to is before --from");
  const CtsganModel model = load_trained(cfg);
  const VolatilityThresholds thresholds = load_thresholds(cfg);
  const Dataset ds = load(cfg, log);
  const ChannelNorms& norms = *model.norms;

  std::vector<EvaluationDay> days;
  json per_day = json::array();
  for (Date d = from; d <= to; d += std::chrono::days{1}) {
    const MarketDay* day = ds.find(d);
    if (!day) throw Error(ErrorCode::MissingActuals, "no complete actuals for " + format_date(d));
    const MarketDay* prev = ds.find(previous_day(d));
    if (!prev) {
      throw Error(ErrorCode::MissingActuals,
                  "no observations for " + format_date(previous_day(d)) + ", needed by " + format_date(d));
    }
    const auto forecast = WeatherForecast::from_day(*day);
    EvaluationDay e{d, build_conditions(*prev, forecast, d, norms), normalized_prices(*day, norms),
                    forecast_variances(forecast, norms)};
    const auto levels = classify_all(e.variances, thresholds);
    const double sigma = sigma_from_levels(levels);
    per_day.push_back({{"date", format_date(d)},
                       {"season", to_string(southern_season(d))},
                       {"sigma", sigma},
                       {"reinforced", sigma > 1.0}});
    days.push_back(std::move(e));
  }
  log.info("evaluating " + std::to_string(days.size()) + " days, " + std::to_string(cfg.runs) + " runs");

  HarnessOptions ho{cfg.prediction, cfg.evaluation_window};
  std::vector<EvaluationRun> kept;
  const auto report = repeated_sampling_harness(model, days, thresholds, cfg.runs, ho, cfg.targets,
                                                derive_seed(cfg.seed, "evaluate"), &kept);

  std::vector<double> deltas;
  for (const auto& r : report.runs) deltas.push_back(r.ecpas);
  json curve = json::array();
  for (const auto& [delta, phi] : coverage_confidence_curve(deltas)) {
    curve.push_back({{"delta_prime", delta}, {"phi", phi}});
  }

  // Per-season scores: slice each run's concatenated window steps by day.
  const Eigen::Index width = ho.window.size();
  std::map<std::string, GroupScore> seasons;
  for (const auto& run : kept) {
    std::map<std::string, EvaluationRun> parts;
    for (std::size_t d = 0; d < days.size(); ++d) {
      auto& part = parts[to_string(southern_season(days[d].date))];
      const Eigen::Index at = width * static_cast<Eigen::Index>(d);
      auto append = [&](Eigen::VectorXd& into, const Eigen::VectorXd& from_run) {
        const Eigen::Index n = into.size();
        into.conservativeResize(n + width);
        into.tail(width) = from_run.segment(at, width);
      };
      append(part.actuals, run.actuals);
      append(part.lower, run.lower);
      append(part.upper, run.upper);
    }
    for (const auto& [name, part] : parts) {
      seasons[name].ecpas.push_back(ecpas(part));
      seasons[name].eawapi.push_back(eawapi(part));
    }
  }

  json j = report.to_json();
  j["from"] = format_date(from);
  j["to"] = format_date(to);
  j["window"] = {ho.window.first, ho.window.last};
  j["nominal"] = cfg.prediction.nominal;
  j["phi_curve"] = curve;
  j["days"] = per_day;
  for (const auto& [name, g] : seasons) j["seasons"][name] = group_json(g, cfg.targets);

  std::ostringstream csv;
  csv << "date,timestep,actual,lower,upper,actual_price,lower_price,upper_price\n";
  const auto& first = kept.front();
  for (std::size_t d = 0; d < days.size(); ++d) {
    for (Eigen::Index k = 0; k < width; ++k) {
      const Eigen::Index i = width * static_cast<Eigen::Index>(d) + k;
      csv << format_date(days[d].date) << ',' << ho.window.first + k << ',' << format_double(first.actuals(i)) << ','
          << format_double(first.lower(i)) << ',' << format_double(first.upper(i)) << ','
          << format_double(denormalize(first.actuals(i), norms.price)) << ','
          << format_double(denormalize(first.lower(i), norms.price)) << ','
          << format_double(denormalize(first.upper(i), norms.price)) << '\n';
    }
  }
  write_atomic(cfg.output_dir / "evaluation_report.json", j.dump(2) + "\n");
  write_atomic(cfg.output_dir / "evaluation_intervals.csv", csv.str());

  out << "   s     ECPAS    EAWAPI\n";
  for (const auto& r : report.runs) {
    char line[64];
    std::snprintf(line, sizeof line, "%4d  %8.4f  %8.4f\n", r.s, r.ecpas, r.eawapi);
    out << line;
  }
  out << "phi_coverage(" << format_fixed(cfg.targets.delta_prime, 2) << ")=" << format_fixed(report.phi_coverage, 3)
      << " phi_width(" << format_fixed(cfg.targets.xi_prime, 2) << ")=" << format_fixed(report.phi_width, 3)
      << " achieved_delta_90=" << format_fixed(report.achieved_delta_90, 4)
      << " achieved_xi_90=" << format_fixed(report.achieved_xi_90, 4) << '\n';
  if (seasons.size() > 1) {
    out << "season   mean_ECPAS  mean_EAWAPI\n";
    for (const auto& [name, g] : seasons) {
      const auto gj = group_json(g, cfg.targets);
      char line[96];
      std::snprintf(line, sizeof line, "%-8s %10.4f  %11.4f\n", name.c_str(), gj["mean_ecpas"].get<double>(),
                    gj["mean_eawapi"].get<double>());
      out << line;
    }
  }
}

// ---------------------------------------------------------------------------
// report

void cmd_report(const RunConfig& cfg, Logger& log, std::ostream& out) {
  const json density = read_json(cfg.output_dir / "density.json", "density.json (run predict first)");
  const json evaluation =
      read_json(cfg.output_dir / "evaluation_report.json", "evaluation_report.json (run evaluate first)");
  const std::string intervals =
      read_file(cfg.output_dir / "evaluation_intervals.csv", "evaluation_intervals.csv (run evaluate first)");
  const Dataset ds = load(cfg, log);
  const fs::path dir = cfg.output_dir / "report";

  write_atomic(dir / "spike_histogram.csv", spike_histogram_csv(spike_histogram(ds.prices())));

  json heatmap = density;
  if (density.contains("price_range")) {
    const auto range = MinMaxParams::from_json(density.at("price_range"));
    std::vector<double> edges;
    for (double e : density.at("bin_edges").get<std::vector<double>>()) edges.push_back(denormalize(e, range));
    heatmap["bin_edges_price"] = edges;
  }
  write_atomic(dir / "density_heatmap.json", heatmap.dump() + "\n");

  // Overlay: evaluation intervals with a coverage flag per step.
  std::istringstream in(intervals);
  std::ostringstream overlay;
  std::string line;
  std::getline(in, line);
  overlay << line << ",covered\n";
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::stringstream ls(line);
    for (std::string c; std::getline(ls, c, ',');) cells.push_back(c);
    if (cells.size() < 5) throw Error(ErrorCode::CorruptCheckpoint, "evaluation_intervals.csv: short row");
    const double a = std::stod(cells[2]), lo = std::stod(cells[3]), hi = std::stod(cells[4]);
    overlay << line << ',' << (a >= lo && a <= hi ? 1 : 0) << '\n';
  }
  write_atomic(dir / "interval_overlay.csv", overlay.str());

  std::ostringstream curve;
  curve << "delta_prime,phi\n";
  for (const auto& p : evaluation.at("phi_curve")) {
    curve << format_double(p.at("delta_prime").get<double>()) << ',' << format_double(p.at("phi").get<double>())
          << '\n';
  }
  write_atomic(dir / "confidence_curve.csv", curve.str());
  out << "wrote spike_histogram.csv density_heatmap.json interval_overlay.csv confidence_curve.csv to "
      << dir.string() << '\n';
}

// ---------------------------------------------------------------------------
// Entry points

int dispatch(const Invocation& inv, std::ostream& out, std::ostream& err) {
  Logger log(err, log_level_from_env());
  try {
    const RunConfig cfg = load_config(inv);
    if (inv.command == "calibrate") cmd_calibrate(cfg, log, out);
    else if (inv.command == "train") cmd_train(cfg, log, out);
    else if (inv.command == "predict") cmd_predict(cfg, log, out);
    else if (inv.command == "evaluate") cmd_evaluate(cfg, log, out);
    else if (inv.command == "report") cmd_report(cfg, log, out);
    else throw Error(ErrorCode::InvalidArgument, "unknown command '" + inv.command + "'");
  } catch (const Error& e) {
    log.error(inv.command + ": " + e.what());
    return 1;
  } catch (const fs::filesystem_error& e) {
    log.error(inv.command + ": " + e.what());
    return 1;
  }
  return 0;
}

namespace {

WeatherVariances parse_variances(const std::string& text) {
  WeatherVariances v;
  std::stringstream ss(text);
  std::string cell;
  std::size_t i = 0;
  while (std::getline(ss, cell, ',')) {
    if (i >= 3) break;
    try {
      v.values[i++] = std::stod(cell);
    } catch (const std::exception&) {
      throw Error(ErrorCode::InvalidArgument, "--variances expects three numbers, got '" + text + "'");
    }
  }
  if (i != 3 || std::getline(ss, cell)) {
    throw Error(ErrorCode::InvalidArgument, "--variances expects temperature,irradiance,wind");
  }
  return v;
}

}  // namespace

int run_main(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Scenario-based prediction intervals for half-hourly electricity prices", "priceband"};
  std::string command, config, date, from, to, out_dir, variances;
  std::uint64_t seed = 0;
  bool resume = false;
  app.add_option("command", command, "calibrate | train | predict | evaluate | report")
      ->required()
      ->check(CLI::IsMember({"calibrate", "train", "predict", "evaluate", "report"}));
  app.add_option("--config", config, "JSON run configuration")->required();
  auto* seed_opt = app.add_option("--seed", seed, "master seed (overrides config)");
  app.add_option("--date", date, "target day for predict, YYYY-MM-DD");
  app.add_option("--from", from, "first evaluation day");
  app.add_option("--to", to, "last evaluation day");
  app.add_option("--out", out_dir, "output directory (overrides config)");
  app.add_flag("--resume", resume, "train: skip phases already in the checkpoint");
  app.add_option("--variances", variances, "predict: forecast variances temperature,irradiance,wind");
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err);
  }

  Invocation inv;
  inv.command = command;
  inv.config = config;
  inv.resume = resume;
  try {
    if (seed_opt->count() > 0) inv.seed = seed;
    if (!date.empty()) inv.date = parse_date(date);
    if (!from.empty()) inv.from = parse_date(from);
    if (!to.empty()) inv.to = parse_date(to);
    if (!out_dir.empty()) inv.out = fs::path(out_dir);
    if (!variances.empty()) inv.variances = parse_variances(variances);
  } catch (const Error& e) {
    err << "[error] " << e.what() << '\n';
    return 2;
  }
  return dispatch(inv, out, err);
}

}  // namespace priceband::cli
