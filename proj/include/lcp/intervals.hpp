#pragma once

#include <functional>
#include <variant>
#include <vector>

#include "lcp/calibration.hpp"
#include "lcp/learners.hpp"
#include "lcp/score_value.hpp"
#include "lcp/types.hpp"

namespace lcp {

// Closed interval on the response axis; `infinite` marks the whole real line,
// in which case lo/hi hold -inf/+inf.
struct PredictionInterval {
  double lo = 0.0;
  double hi = 0.0;
  bool infinite = false;
};

// Per-grid-point membership.  `undecided` flags points a caller-supplied
// trainer failed on: they are excluded from the set but the failure is kept
// visible rather than swallowed.
struct GridMembership {
  Vector grid;
  std::vector<bool> member;
  std::vector<bool> undecided;
};

// A prediction set plus the effective level behind its threshold.  When the
// level search exhausts its grid, the set from the last level is returned
// with `feasible` false, so callers can tell a modeling failure apart from a
// legitimately infinite answer.  alpha_tilde is 0 for variants that run a
// separate search per grid point.
struct PredictionSet {
  std::variant<PredictionInterval, GridMembership> value;
  double alpha_tilde = 0.0;
  bool feasible = true;
};

// Score V(x, y): either |y - mu(x)| with an attached predictor, which admits
// closed-form interval inversion, or an arbitrary nonnegative callable
// inverted over a y grid.
struct ScoreFunction {
  Predictor mu;                                             // residual form
  std::function<ScoreValue(const Vector&, double)> custom;  // general form
};

ScoreFunction abs_residual_score(Predictor mu);
ScoreFunction custom_score(std::function<ScoreValue(const Vector&, double)> v);
ScoreValue eval_score(const ScoreFunction& f, const Vector& x, double y);

// Localized interval: effective level from the score-free grid search, then
// |y - mu(x_new)| <= threshold inverted in closed form.
PredictionSet lcp_interval(const CalibrationModel& model, const Vector& x_new,
                           const ScoreFunction& score);

// Localized set for arbitrary scores: one search (the certificate does not
// look at y), then a membership test per grid point.
PredictionSet lcp_set_generic(const CalibrationModel& model, const Vector& x_new,
                              const ScoreFunction& score, const Vector& y_grid);

// Pointwise-valid mode: the target level is used directly as the effective
// level, no search.  Requires a localizer whose weights do not depend on the
// sample (constant, box, gaussian, exponential).
PredictionSet local_coverage_interval(const CalibrationModel& model,
                                      const Vector& x_new, const ScoreFunction& score);
ScoreValue local_coverage_threshold(const CalibrationModel& model, const Vector& x_new);

// Plain split conformal: equal-weight quantile of the scores plus a +inf atom.
ScoreValue split_conformal_threshold(const std::vector<ScoreValue>& scores,
                                     double alpha);
PredictionSet split_conformal_interval(const std::vector<ScoreValue>& scores,
                                       double alpha, const Vector& x_new,
                                       const ScoreFunction& score);

// Covariate-shift variant: atoms weighted by importance weights (n entries
// for the scores, the last for the +inf atom).
ScoreValue weighted_conformal_threshold(const std::vector<ScoreValue>& scores,
                                        const Vector& weights, double alpha);
PredictionSet weighted_conformal_interval(const std::vector<ScoreValue>& scores,
                                          const Vector& weights, double alpha,
                                          const Vector& x_new,
                                          const ScoreFunction& score);

// Retrains the score function with each candidate response appended, so the
// guarantee survives data-dependent scores.  Deliberately desk-scale: every
// grid point pays a full retrain plus its own level search, which is the
// price of exactness.  The trainer must be symmetric in its input rows.
using Trainer = std::function<ScoreFunction(const Dataset&)>;

struct DatadepConfig {
  LocalizerSpec localizer = constant_localizer();
  std::vector<double> alpha_grid;  // empty: default grid for the given alpha
};

PredictionSet exact_lcp_set_datadep(const Trainer& trainer, const Dataset& data,
                                    const Vector& x_new, const Vector& y_grid,
                                    double alpha, const DatadepConfig& config = {});

}  // namespace lcp
