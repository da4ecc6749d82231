#include "sensalign/sensory_axis.hpp"

#include <cmath>
#include <string>

#include "sensalign/error.hpp"

namespace sensalign {

std::vector<double> column_means(const EmbeddingMatrix& x) {
  if (x.rows() == 0) fail("empty embedding set");
  std::vector<double> mu(x.cols(), 0.0);
  for (std::size_t i = 0; i < x.rows(); ++i) {
    auto r = x.row(i);
    for (std::size_t j = 0; j < x.cols(); ++j) mu[j] += r[j];
  }
  for (auto& m : mu) m /= static_cast<double>(x.rows());
  return mu;
}

SensoryAxis fit_axis(const EmbeddingMatrix& see, const EmbeddingMatrix& hear) {
  if (see.cols() != hear.cols()) {
    fail("dimension mismatch (" + std::to_string(see.cols()) + "≠" +
         std::to_string(hear.cols()) + ")");
  }
  if (see.nonfinite_count() > 0 || hear.nonfinite_count() > 0) fail("non-finite value");

  SensoryAxis axis;
  axis.mu_see = column_means(see);
  axis.mu_hear = column_means(hear);
  axis.direction.resize(see.cols());
  double ss = 0.0;
  for (std::size_t j = 0; j < see.cols(); ++j) {
    axis.direction[j] = axis.mu_see[j] - axis.mu_hear[j];
    ss += axis.direction[j] * axis.direction[j];
  }
  axis.delta_norm = std::sqrt(ss);
  if (!(axis.delta_norm > 0.0)) fail("degenerate axis: SEE and HEAR means coincide");
  for (auto& v : axis.direction) v /= axis.delta_norm;
  return axis;
}

std::vector<double> project(const EmbeddingMatrix& x, const SensoryAxis& axis) {
  if (x.cols() != axis.dim()) {
    fail("dimension mismatch (" + std::to_string(x.cols()) + "≠" + std::to_string(axis.dim()) +
         ")");
  }
  std::vector<double> s(x.rows());
  for (std::size_t i = 0; i < x.rows(); ++i) {
    auto r = x.row(i);
    double dot = 0.0;
    for (std::size_t j = 0; j < r.size(); ++j) dot += static_cast<double>(r[j]) * axis.direction[j];
    s[i] = dot;
  }
  return s;
}

SeparationReport separation_report(const EmbeddingMatrix& see, const EmbeddingMatrix& hear,
                                   const std::map<std::string, EmbeddingMatrix>& extra,
                                   std::size_t grid_points) {
  SeparationReport report;
  report.axis = fit_axis(see, hear);

  report.projections["see"] = project(see, report.axis);
  report.projections["hear"] = project(hear, report.axis);
  for (const auto& [name, x] : extra) {
    if (name == "see" || name == "hear") fail("extra condition may not be named \"" + name + "\"");
    report.projections[name] = project(x, report.axis);
  }

  const auto& s_see = report.projections["see"];
  const auto& s_hear = report.projections["hear"];
  report.delta_mu = mean(s_see) - mean(s_hear);
  report.cohens_d = cohens_d(s_see, s_hear);
  report.auroc = auroc(s_see, s_hear);

  for (const auto& [name, s] : report.projections) {
    ConditionSummary summary;
    summary.n = s.size();
    summary.mean = mean(s);
    summary.sd = s.size() > 1 ? std::sqrt(sample_variance(s)) : 0.0;
    report.summaries[name] = summary;
    report.curves[name] = kde(s, grid_points);
  }
  return report;
}

}  // namespace sensalign
