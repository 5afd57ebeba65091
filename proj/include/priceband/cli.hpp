#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <ostream>
#include <string>

#include <json.hpp>

#include "priceband/calendar.hpp"
#include "priceband/ctsgan.hpp"
#include "priceband/intervals.hpp"
#include "priceband/metrics.hpp"
#include "priceband/volatility.hpp"

namespace priceband::cli {

namespace fs = std::filesystem;

enum class LogLevel { Error = 0, Warn = 1, Info = 2, Debug = 3 };

/// Reads PRICEBAND_LOG (error, warn, info, debug); unset or unknown means info.
LogLevel log_level_from_env();

class Logger {
 public:
  Logger(std::ostream& sink, LogLevel level) : sink_(sink), level_(level) {}

  bool enabled(LogLevel l) const noexcept { return l <= level_; }
  void error(const std::string& msg) { write(LogLevel::Error, "error", msg); }
  void warn(const std::string& msg) { write(LogLevel::Warn, "warn", msg); }
  void info(const std::string& msg) { write(LogLevel::Info, "info", msg); }
  void debug(const std::string& msg) { write(LogLevel::Debug, "debug", msg); }

 private:
  void write(LogLevel l, const char* tag, const std::string& msg) {
    if (enabled(l)) sink_ << "[" << tag << "] " << msg << '\n';
  }

  std::ostream& sink_;
  LogLevel level_;
};

/// Inclusive date range; unset ends are open.
struct DateRange {
  std::optional<Date> from;
  std::optional<Date> to;

  bool contains(Date d) const noexcept { return (!from || d >= *from) && (!to || d <= *to); }
};

struct RunConfig {
  fs::path dataset;
  fs::path output_dir = "out";
  fs::path checkpoint;  // defaults to <output_dir>/checkpoint.json
  fs::path thresholds;  // defaults to <output_dir>/thresholds.json

  std::uint64_t seed = 0;

  DateRange calibrate_days;
  DateRange train_days;
  std::optional<DateRange> holdout_days;

  double price_floor = kDefaultPriceFloor;
  double price_cap = kDefaultPriceCap;
  double hdd_base = kDefaultHddBase;

  ModelDims dims;
  TrainingConfig training;
  PipelineOptions prediction;
  MetricTargets targets;
  int runs = 10;
  StepWindow evaluation_window{0, kStepsPerDay - 1};

  std::optional<Date> date;
  DateRange evaluate_days;
  bool resume = false;
  std::optional<WeatherVariances> variances;

  /// Relative paths resolve against `base_dir`. Unknown keys are rejected.
  static RunConfig from_json(const nlohmann::json& j, const fs::path& base_dir = {});
  void validate() const;
};

/// Parsed command line; unset fields leave the config file's values alone.
struct Invocation {
  std::string command;
  fs::path config;
  std::optional<std::uint64_t> seed;
  std::optional<Date> date;
  std::optional<Date> from;
  std::optional<Date> to;
  std::optional<fs::path> out;
  bool resume = false;
  std::optional<WeatherVariances> variances;
};

/// Loads the config file and applies the invocation's overrides.
RunConfig load_config(const Invocation& inv);

/// thresholds.json and calibration_report.json.
void cmd_calibrate(const RunConfig& cfg, Logger& log, std::ostream& out);
/// checkpoint (rewritten after every phase) and training_log.jsonl.
void cmd_train(const RunConfig& cfg, Logger& log, std::ostream& out);
/// interval.csv, density.json, scenarios.csv and prediction.json for cfg.date.
void cmd_predict(const RunConfig& cfg, Logger& log, std::ostream& out);
/// evaluation_report.json and evaluation_intervals.csv for cfg.evaluate_days.
void cmd_evaluate(const RunConfig& cfg, Logger& log, std::ostream& out);
/// report/ bundle built from earlier predict and evaluate outputs.
void cmd_report(const RunConfig& cfg, Logger& log, std::ostream& out);

/// Runs one command. Returns 0 on success, 1 on any library error (logged).
int dispatch(const Invocation& inv, std::ostream& out, std::ostream& err);

/// Full command line entry point: argument parsing plus dispatch.
int run_main(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace priceband::cli
