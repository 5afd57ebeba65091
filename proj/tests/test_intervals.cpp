#include <doctest.h>

#include <cmath>
#include <random>
#include <sstream>

#include "priceband/intervals.hpp"
#include "priceband/metrics.hpp"
#include "toy.hpp"

using namespace priceband;
using namespace priceband::test;
using Eigen::MatrixXd;

namespace {

ScenarioSet make_set(const MatrixXd& m, Provenance tag = Provenance::Normal, std::string id = "c") {
  ScenarioSet s;
  s.scenarios = m;
  s.provenance.assign(static_cast<std::size_t>(m.rows()), tag);
  s.condition_id = std::move(id);
  return s;
}

MatrixXd uniform_paths(int rows, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  MatrixXd m(rows, kStepsPerDay);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = u(rng);
  return m;
}

// Stationary Gaussian AR(1) around 0.5, clamped to [0, 1] (clamping is a
// many-sigma event at these parameters).
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

}  // namespace

TEST_CASE("density stacking") {
  SUBCASE("point mass") {
    const auto d = stack_density(make_set(MatrixXd::Constant(7, kStepsPerDay, 0.5)), 10);
    CHECK(d.bin_edges.size() == 11);
    CHECK(d.bin_edges(0) == 0.0);
    CHECK(d.bin_edges(10) == 1.0);
    for (int t = 0; t < kStepsPerDay; ++t) {
      CHECK(d.mass(t, 5) == 1.0);
      CHECK(d.mass.row(t).sum() == 1.0);
    }
  }
  SUBCASE("single scenario is one-hot") {
    const auto d = stack_density(make_set(uniform_paths(1, 3)), 20);
    for (int t = 0; t < kStepsPerDay; ++t) {
      CHECK(d.mass.row(t).maxCoeff() == 1.0);
      CHECK(d.mass.row(t).sum() == 1.0);
    }
  }
  SUBCASE("uniform draws fill every bin evenly") {
    constexpr int n = 100000, bins = 10;
    const auto d = stack_density(make_set(uniform_paths(n, 21)), bins);
    const double tol = 3 * std::sqrt(0.1 * 0.9 / n);
    CHECK((d.mass.array() - 1.0 / bins).abs().maxCoeff() <= tol);
    CHECK((d.mass.rowwise().sum().array() - 1.0).abs().maxCoeff() <= 1e-9);
    CHECK(d.mass.minCoeff() >= 0.0);
  }
  SUBCASE("bin membership") {
    CHECK(DensityGrid::bin_of(0.0, 10) == 0);
    CHECK(DensityGrid::bin_of(0.1, 10) == 1);
    CHECK(DensityGrid::bin_of(0.55, 10) == 5);
    CHECK(DensityGrid::bin_of(1.0, 10) == 9);
  }
  SUBCASE("errors") {
    CHECK_THROWS_WITH_AS(stack_density(make_set(MatrixXd(0, kStepsPerDay))), doctest::Contains("EmptySet"), Error);
    CHECK_THROWS_AS(stack_density(make_set(uniform_paths(3, 1)), 1), Error);
  }
  SUBCASE("json") {
    const auto j = stack_density(make_set(uniform_paths(5, 1)), 4).to_json();
    CHECK(j.at("bin_edges").size() == 5);
    CHECK(j.at("mass").size() == kStepsPerDay);
    CHECK(j.at("mass")[0].size() == 4);
  }
}

TEST_CASE("quantile intervals") {
  SUBCASE("hand-computed order statistics") {
    MatrixXd m(10, kStepsPerDay);
    for (int r = 0; r < 10; ++r) m.row(r).setConstant(0.1 * (r + 1));
    // Shuffle rows so the result does not depend on input order.
    m.row(0).swap(m.row(7));
    m.row(3).swap(m.row(9));
    const auto pi = build_interval(make_set(m), 0.8);
    CHECK(pi.steps() == kStepsPerDay);
    for (int t = 0; t < kStepsPerDay; ++t) {
      CHECK(pi.lower(t) == doctest::Approx(0.19).epsilon(1e-12));
      CHECK(pi.upper(t) == doctest::Approx(0.91).epsilon(1e-12));
    }
  }
  SUBCASE("identical scenarios give zero width") {
    const auto pi = build_interval(make_set(MatrixXd::Constant(20, kStepsPerDay, 0.3)), 0.9);
    CHECK((pi.upper - pi.lower).cwiseAbs().maxCoeff() == 0.0);
    CHECK(pi.lower(0) == 0.3);
  }
  SUBCASE("high nominal approaches the envelope") {
    const auto set = make_set(uniform_paths(5000, 8));
    const auto env = build_interval(set, 0.9, IntervalMode::Envelope);
    double prev = 1.0;
    for (double nominal : {0.9, 0.99, 0.999, 0.9996}) {
      const auto q = build_interval(set, nominal);
      const double gap =
          std::max((q.lower - env.lower).cwiseAbs().maxCoeff(), (q.upper - env.upper).cwiseAbs().maxCoeff());
      CHECK(gap < prev);
      prev = gap;
    }
    CHECK(prev < 2e-3);
    CHECK(env.lower == set.scenarios.colwise().minCoeff().transpose());
    CHECK(env.upper == set.scenarios.colwise().maxCoeff().transpose());
  }
  SUBCASE("nested in the nominal level") {
    const auto set = make_set(uniform_paths(400, 9));
    const double levels[] = {0.5, 0.7, 0.8, 0.9, 0.95};
    for (int i = 0; i + 1 < 5; ++i) {
      const auto a = build_interval(set, levels[i]);
      const auto b = build_interval(set, levels[i + 1]);
      CHECK((b.lower.array() <= a.lower.array()).all());
      CHECK((a.upper.array() <= b.upper.array()).all());
      CHECK((a.lower.array() <= a.upper.array()).all());
    }
  }
  SUBCASE("density mass inside the interval") {
    std::mt19937_64 rng(12);
    const auto set = make_set(ar1_paths(300, rng));
    constexpr int bins = 50;
    const auto d = stack_density(set, bins);
    const auto pi = build_interval(set, 0.9);
    for (int t = 0; t < kStepsPerDay; ++t) {
      // Mass of the piecewise-constant histogram density over [L_t, U_t].
      double inside = 0.0;
      for (int k = 0; k < bins; ++k) {
        const double overlap = std::min(d.bin_edges(k + 1), pi.upper(t)) - std::max(d.bin_edges(k), pi.lower(t));
        if (overlap > 0) inside += d.mass(t, k) * overlap * bins;
      }
      CHECK(inside >= 0.9 - 2.0 / bins - 2.0 / 300);
    }
  }
  SUBCASE("coverage of a known process") {
    std::mt19937_64 rng(2024);
    const auto pi = build_interval(make_set(ar1_paths(2000, rng)), 0.9);
    const MatrixXd fresh = ar1_paths(1000, rng);
    double covered = 0.0;
    for (int r = 0; r < fresh.rows(); ++r) {
      covered += ecpas({fresh.row(r).transpose(), pi.lower, pi.upper, 1});
    }
    CHECK(covered / fresh.rows() == doctest::Approx(0.9).epsilon(0.03 / 0.9));
  }
  SUBCASE("scenario count guard") {
    CHECK(min_scenarios(0.9) == 20);
    CHECK(min_scenarios(0.8) == 10);
    CHECK(min_scenarios(0.5) == 4);
    CHECK_NOTHROW(build_interval(make_set(uniform_paths(20, 1)), 0.9));
    CHECK_THROWS_WITH_AS(build_interval(make_set(uniform_paths(19, 1)), 0.9), doctest::Contains("TooFewScenarios"),
                         Error);
    CHECK_THROWS_AS(build_interval(make_set(uniform_paths(50, 1)), 1.0), Error);
    CHECK_THROWS_AS(build_interval(make_set(MatrixXd(0, kStepsPerDay)), 0.9), Error);
    CHECK(interval_mode_from_string("envelope") == IntervalMode::Envelope);
    CHECK_THROWS_AS(interval_mode_from_string("kde"), Error);
  }
}

TEST_CASE("combining normal and volatile sets") {
  const auto normal = make_set(uniform_paths(500, 1) * 0.5, Provenance::Normal);
  const auto vol = make_set(uniform_paths(500, 2), Provenance::Volatile);

  const auto both = combine_normal_volatile(normal, vol);
  CHECK(both.size() == 1000);
  CHECK(both.count(Provenance::Normal) == 500);
  CHECK(both.count(Provenance::Volatile) == 500);
  CHECK_NOTHROW(both.validate());

  const auto alone = combine_normal_volatile(normal, make_set(MatrixXd(0, kStepsPerDay), Provenance::Volatile));
  CHECK(alone.scenarios == normal.scenarios);
  CHECK(alone.provenance == normal.provenance);

  const auto swapped = combine_normal_volatile(vol, normal);
  const auto a = build_interval(both, 0.9), b = build_interval(swapped, 0.9);
  CHECK(a.lower == b.lower);
  CHECK(a.upper == b.upper);
  CHECK(stack_density(both).mass == stack_density(swapped).mass);

  CHECK_THROWS_WITH_AS(combine_normal_volatile(normal, make_set(uniform_paths(3, 1), Provenance::Volatile, "other")),
                       doctest::Contains("ConditionMismatch"), Error);
}

TEST_CASE("prediction pipeline on a toy model") {
  const auto& model = toy_model();
  const auto& sample = toy_samples().holdout.samples[2];
  const auto table = VolatilityThresholds::reference_table();
  PipelineOptions opt;
  opt.scenarios = 500;
  opt.seed = 77;
  opt.condition_id = "day";

  SUBCASE("calm weather stays on the normal branch") {
    const auto r = predict_pipeline(model, sample.condition, WeatherVariances{{0.001, 0.01, 0.002}}, table, opt);
    CHECK_FALSE(r.reinforced);
    CHECK(r.sigma == 1.0);
    CHECK(r.scenarios.size() == 500);
    CHECK(r.scenarios.count(Provenance::Volatile) == 0);
  }
  SUBCASE("volatile weather triggers reinforcement") {
    opt.scenarios = 1000;
    const auto r = predict_pipeline(model, sample.condition, WeatherVariances{{0.004, 0.07, 0.02}}, table, opt);
    CHECK(r.reinforced);
    CHECK(r.sigma == doctest::Approx(2.667).epsilon(1e-9));
    CHECK(r.scenarios.count(Provenance::Normal) == 1000);
    CHECK(r.scenarios.count(Provenance::Volatile) == 1000);
    CHECK((r.density.mass.rowwise().sum().array() - 1.0).abs().maxCoeff() <= 1e-9);
    CHECK((r.interval.lower.array() <= r.interval.upper.array()).all());
    CHECK(r.interval.lower.minCoeff() >= 0.0);
    CHECK(r.interval.upper.maxCoeff() <= 1.0);

    const auto again = predict_pipeline(model, sample.condition, WeatherVariances{{0.004, 0.07, 0.02}}, table, opt);
    CHECK(again.interval.lower == r.interval.lower);
    CHECK(again.scenarios.scenarios == r.scenarios.scenarios);
  }
  SUBCASE("reinforcement widens the afternoon interval") {
    int widened = 0, total = 0;
    for (const auto& s : toy_samples().holdout.samples) {
      const auto calm = predict_pipeline(model, s.condition, WeatherVariances{{0.0, 0.0, 0.0}}, table, opt);
      const auto hot = predict_pipeline(model, s.condition, WeatherVariances{{0.004, 0.07, 0.02}}, table, opt);
      for (int t = kAfternoonWindow.first; t <= kAfternoonWindow.last; ++t) {
        widened += hot.interval.lower(t) <= calm.interval.lower(t) && hot.interval.upper(t) >= calm.interval.upper(t);
        ++total;
      }
    }
    CHECK(widened >= 0.9 * total);
  }
}

TEST_CASE("output formats") {
  PredictionInterval pi;
  pi.lower = Eigen::VectorXd::Constant(kStepsPerDay, 0.25);
  pi.upper = Eigen::VectorXd::Constant(kStepsPerDay, 0.5);
  const std::string csv = interval_csv(pi, MinMaxParams(0, 500));
  std::istringstream in(csv);
  std::string line;
  std::getline(in, line);
  CHECK(line == "timestep,lower,upper,lower_denorm,upper_denorm");
  std::getline(in, line);
  CHECK(line == "0,0.25,0.5,125,250");
  int rows = 1;
  while (std::getline(in, line)) ++rows;
  CHECK(rows == kStepsPerDay);

  auto set = make_set(MatrixXd::Constant(2, kStepsPerDay, 0.5));
  set.provenance[1] = Provenance::Volatile;
  const std::string sc = scenario_csv(set);
  CHECK(sc.rfind("provenance,t0,t1,", 0) == 0);
  CHECK(sc.find("\nnormal,0.5,") != std::string::npos);
  CHECK(sc.find("\nvolatile,0.5,") != std::string::npos);

  CHECK(format_fixed(2.6666, 3) == "2.667");
  CHECK(format_double(0.1) == "0.1");
  CHECK(std::stod(format_double(1.0 / 3)) == 1.0 / 3);
}
