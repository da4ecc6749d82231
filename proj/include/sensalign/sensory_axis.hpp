#pragma once

#include <cstddef>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "sensalign/embedding_store.hpp"
#include "sensalign/stats.hpp"

namespace sensalign {

// Unit vector along mean(SEE) - mean(HEAR).
struct SensoryAxis {
  std::vector<double> direction;
  std::vector<double> mu_see;
  std::vector<double> mu_hear;
  double delta_norm = 0.0;  // ‖mu_see - mu_hear‖

  std::size_t dim() const noexcept { return direction.size(); }
};

std::vector<double> column_means(const EmbeddingMatrix& x);

SensoryAxis fit_axis(const EmbeddingMatrix& see, const EmbeddingMatrix& hear);

// s_i = <x_i, v> for every row of x, in row order.
std::vector<double> project(const EmbeddingMatrix& x, const SensoryAxis& axis);

struct ConditionSummary {
  std::size_t n = 0;
  double mean = 0.0;
  double sd = 0.0;
};

struct SeparationReport {
  SensoryAxis axis;
  double delta_mu = 0.0;  // mean(s_see) - mean(s_hear)
  double cohens_d = 0.0;  // SEE minus HEAR
  double auroc = 0.0;     // SEE is the positive class
  std::map<std::string, std::vector<double>> projections;
  std::map<std::string, ConditionSummary> summaries;
  std::map<std::string, DensityCurve> curves;
};

// Fits the axis on SEE and HEAR only, then projects every condition (SEE, HEAR
// and the extras) onto it. Conditions are keyed "see", "hear" and the extras'
// names.
SeparationReport separation_report(const EmbeddingMatrix& see, const EmbeddingMatrix& hear,
                                   const std::map<std::string, EmbeddingMatrix>& extra = {},
                                   std::size_t grid_points = kDefaultGridPoints);

}  // namespace sensalign
