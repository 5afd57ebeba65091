#include <CLI11.hpp>

#include <fstream>
#include <iostream>

#include "priceband/synthetic.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Writes a toy half-hourly market CSV", "make_synthetic"};
  std::string out_path, start;
  priceband::SyntheticOptions opts;
  app.add_option("--out", out_path, "output CSV path")->required();
  app.add_option("--days", opts.days, "number of days")->check(CLI::PositiveNumber);
  app.add_option("--seed", opts.seed, "generator seed");
  app.add_option("--start", start, "first day, YYYY-MM-DD");
  app.add_option("--volatile-fraction", opts.volatile_fraction, "share of volatile afternoons")
      ->check(CLI::Range(0.0, 1.0));
  CLI11_PARSE(app, argc, argv);
  try {
    if (!start.empty()) opts.start = priceband::parse_date(start);
    const auto market = priceband::make_synthetic_market(opts);
    std::ofstream out(out_path, std::ios::trunc);
    if (!out) {
      std::cerr << "cannot write " << out_path << '\n';
      return 1;
    }
    priceband::write_market_csv(market.dataset.days, out);
    std::size_t volatile_days = 0;
    for (bool v : market.volatile_day) volatile_days += v ? 1 : 0;
    std::cout << market.dataset.days.size() << " days, " << volatile_days << " volatile\n";
  } catch (const priceband::Error& e) {
    std::cerr << e.what() << '\n';
    return 1;
  }
  return 0;
}
