#pragma once

#include <random>
#include <vector>

#include "lcp/localizer.hpp"
#include "lcp/score_value.hpp"
#include "lcp/types.hpp"

namespace lcp {

// Calibration data plus the knobs of the effective-level search.  The
// importance weights cover the n calibration points and, in the last slot, the
// test point; they stay at 1 unless the sampling is shifted.
struct CalibrationModel {
  Matrix features;                 // n x p
  std::vector<ScoreValue> scores;  // n
  LocalizerSpec localizer;
  double alpha = 0.9;              // target coverage level
  Vector importance_weights;       // n + 1, strictly positive
  std::vector<double> alpha_grid;  // ascending candidate levels in (0,1]
};

// Levels 1/points, 2/points, ..., 1 with `alpha` spliced in (sorted, deduped).
std::vector<double> default_alpha_grid(double alpha, int points = 200);

CalibrationModel make_calibration_model(Matrix features, std::vector<ScoreValue> scores,
                                        LocalizerSpec localizer, double alpha,
                                        Vector importance_weights = {},
                                        std::vector<double> alpha_grid = {});

// Coverage audit at effective level alpha_tilde with the test score revealed:
// v_star[i] is the alpha_tilde-quantile of row i's localized distribution (the
// candidate score sits in the last atom), and `achieved` is the importance-
// weighted fraction of scores not above their own row threshold.
struct G1Result {
  double achieved = 0.0;
  bool satisfied = false;
  std::vector<ScoreValue> v_star;  // n + 1 row thresholds
};

G1Result eval_g1(double alpha_tilde, const CalibrationModel& model, const Vector& x_new,
                 const ScoreValue& v_new);

// Smallest grid level whose G1 audit reaches model.alpha.
struct G1SearchResult {
  double alpha_tilde = 1.0;
  bool feasible = false;
};

G1SearchResult g1_search_alpha(const CalibrationModel& model, const Vector& x_new,
                               const ScoreValue& v_new);

// Test-score-free surrogate audit.  bar_v_star is the threshold the interval
// would use; rows are re-audited twice, once with the unknown test score
// replaced by bar_v_star (its worst case below the threshold) and once by 0
// (its best case), giving sums s1 and s2.  Coverage at least alpha is certified
// when both reach alpha, or when the threshold is already infinite.
struct G2Witness {
  double alpha_tilde = 0.0;
  ScoreValue bar_v_star;
  std::vector<ScoreValue> v_star_1;  // n, test slot pinned to bar_v_star
  std::vector<ScoreValue> v_star_2;  // n, test slot pinned to 0
  double s1 = 0.0;
  double s2 = 0.0;
  bool satisfied = false;
  bool quantile_is_infinite = false;
};

G2Witness eval_g2(double alpha_tilde, const CalibrationModel& model, const Vector& x_new);

// Ascending scan of model.alpha_grid for the first level that certifies
// coverage (G2 holds or the threshold is infinite).  When no level qualifies
// the result carries the last grid level and feasible = false; the caller
// decides what to emit.
struct AlphaSearchResult {
  double alpha_tilde = 1.0;
  bool feasible = false;
  G2Witness witness;
};

// Production search: an event sweep that audits all grid levels in
// O((n + levels) log n) after an O(n^2) precompute, then re-audits the level
// it lands on with the full evaluator.  Equivalent to the literal scan except
// that a handful of running sums are accumulated in sorted-event order rather
// than sample order, which can only matter when such a sum collides with a
// grid level in the last bit.
AlphaSearchResult grid_search_alpha(const CalibrationModel& model, const Vector& x_new);

// Reference implementation: one full audit per grid level.  Tests pin the
// production search against this; prefer it only for tiny problems.
AlphaSearchResult grid_search_alpha_literal(const CalibrationModel& model,
                                            const Vector& x_new);

// Tight two-point mixture: finds where the G1 sum crosses alpha on a fine
// level grid and randomizes between the bracketing levels so the audited
// coverage hits alpha exactly in expectation.
double randomized_alpha(const CalibrationModel& model, const Vector& x_new,
                        const ScoreValue& v_new, std::mt19937_64& rng,
                        int refine_points = 2000);

}  // namespace lcp
