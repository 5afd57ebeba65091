#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

namespace priceband {

enum class Provenance { Normal, Volatile };

const char* to_string(Provenance p) noexcept;

/// M generated normalized price paths (rows) of 48 steps each.
struct ScenarioSet {
  Eigen::MatrixXd scenarios;
  std::vector<Provenance> provenance;  // one tag per row
  std::string condition_id;
  /// Largest noise sigma among the members.
  double noise_sigma = 1.0;

  Eigen::Index size() const noexcept { return scenarios.rows(); }
  bool empty() const noexcept { return scenarios.rows() == 0; }
  Eigen::Index count(Provenance p) const noexcept;

  /// Throws InvalidArgument if an entry leaves [0, 1] or tags do not match rows.
  void validate() const;
};

}  // namespace priceband
