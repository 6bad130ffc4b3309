#pragma once

#include <cstddef>
#include <limits>
#include <optional>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "lcp/localizer.hpp"
#include "lcp/score_value.hpp"
#include "lcp/types.hpp"

namespace lcp {

// Leave-one-out certified thresholds at the target level: entry i is the
// level-alpha quantile of the locality-weighted distribution that sample i
// induces over the other scores, with i's own locality mass moved to the
// +inf atom (i plays the not-yet-seen test point for itself).
std::vector<ScoreValue> loo_thresholds(const Matrix& x0,
                                       const std::vector<ScoreValue>& v0,
                                       const LocalizerSpec& localizer,
                                       double alpha);

struct TuningCandidate {
  double h = 0.0;
  // Share of leave-one-out thresholds that came out infinite.
  double infinite_fraction = 0.0;
  // The remaining statistics are only computed for eligible candidates and
  // stay NaN otherwise.
  double s = std::numeric_limits<double>::quiet_NaN();          // mean threshold
  double gamma = std::numeric_limits<double>::quiet_NaN();      // under-coverage penalty >= 1
  double sigma = std::numeric_limits<double>::quiet_NaN();      // mean bootstrap sd
  double objective = std::numeric_limits<double>::quiet_NaN();  // gamma * (s + sigma)
  bool eligible = false;
  bool selected = false;
};

struct TuningReport {
  LocalizerKind kind = LocalizerKind::DistanceBox;
  double alpha = 0.9;
  double omega = 0.9;
  int bootstrap_rounds = 20;
  std::vector<TuningCandidate> candidates;
  double h_star = 0.0;
  std::size_t selected_index = 0;
};

struct TuneOptions {
  double omega = 0.9;         // a candidate needs infinite_fraction < 1 - omega
  int bootstrap_rounds = 20;  // stability draws per sample
  std::optional<Index> axis;  // restrict the localizer to one coordinate
};

// Thrown when every candidate bandwidth produces too many infinite
// thresholds (or the common finite subset is empty): widen the grid.
struct NoEligibleBandwidth : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Bandwidth selection over an ascending grid, one localizer kind at a time:
//   1. leave-one-out thresholds per candidate;
//   2. drop candidates whose infinite fraction reaches 1 - omega, and keep
//      the samples finite under every surviving candidate;
//   3. mean threshold s over those samples;
//   4. penalty gamma = max(1, violations / ((1 - alpha) * subset size));
//   5. bootstrap sd of each sample's threshold, averaged into sigma;
//   6. pick the eligible minimizer of gamma * (s + sigma), ties toward the
//      larger (more stable) bandwidth.
// Deterministic given the rng state; bootstrap streams are derived per
// (candidate, sample, draw) so the loops can run in any order.
TuningReport tune_bandwidth(const Matrix& x0, const std::vector<ScoreValue>& v0,
                            LocalizerKind kind, const std::vector<double>& h_grid,
                            double alpha, std::mt19937_64& rng,
                            const TuneOptions& options = {});

// One row per candidate: h, kind, infinite_fraction, s, gamma, sigma,
// objective, eligible, selected.
std::string tuning_report_csv(const TuningReport& report);

// Grid offered when the caller has no opinion: a short span of distance
// scales, or neighbor counts at fixed fractions of the sample size.
std::vector<double> default_bandwidth_grid(LocalizerKind kind, Index m);

}  // namespace lcp
