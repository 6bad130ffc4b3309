#include "lcp/tuning.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <utility>

#include "lcp/csv.hpp"
#include "lcp/rng.hpp"
#include "lcp/weighted_atoms.hpp"

namespace lcp {

namespace {

// Quantile of the distribution a test row induces over calibration scores:
// locality weights of `center` against `ref` (whose last row is the test row
// itself), score atoms in row order, self weight on the +inf atom.
ScoreValue held_out_threshold(const LocalizerSpec& spec, const Vector& center,
                              const Matrix& ref, const std::vector<ScoreValue>& scores,
                              double alpha) {
  const LocalWeightRow row = build_local_weights(spec, center, ref);
  const Index m = ref.rows();
  std::vector<ScoreValue> values;
  std::vector<double> weights;
  values.reserve(static_cast<std::size_t>(m));
  weights.reserve(static_cast<std::size_t>(m));
  for (Index j = 0; j + 1 < m; ++j) {
    values.push_back(scores[static_cast<std::size_t>(j)]);
    weights.push_back(row.weights[j]);
  }
  values.push_back(ScoreValue::infinity());
  weights.push_back(row.weights[m - 1]);
  return weighted_quantile(alpha,
                           WeightedAtomSet(std::move(values), std::move(weights)));
}

double sample_sd(const std::vector<double>& xs) {
  const double n = static_cast<double>(xs.size());
  double mean = 0.0;
  for (double x : xs) mean += x;
  mean /= n;
  double ss = 0.0;
  for (double x : xs) ss += (x - mean) * (x - mean);
  return std::sqrt(ss / (n - 1.0));
}

}  // namespace

std::vector<ScoreValue> loo_thresholds(const Matrix& x0,
                                       const std::vector<ScoreValue>& v0,
                                       const LocalizerSpec& localizer,
                                       double alpha) {
  const Index m = x0.rows();
  if (m < 2) throw std::invalid_argument("loo_thresholds: need at least 2 samples");
  if (static_cast<Index>(v0.size()) != m)
    throw std::invalid_argument("loo_thresholds: feature/score count mismatch");
  if (!(alpha > 0.0 && alpha <= 1.0))
    throw std::invalid_argument("loo_thresholds: alpha must be in (0, 1]");
  for (const auto& v : v0)
    if (v.is_infinite())
      throw std::invalid_argument("loo_thresholds: sample scores must be finite");

  std::vector<ScoreValue> out;
  out.reserve(static_cast<std::size_t>(m));
  for (Index i = 0; i < m; ++i) {
    // Locality row of sample i over the whole set; i's own entry funds the
    // +inf atom, everyone else keeps their score.
    const LocalWeightRow row = build_local_weights(localizer, x0.row(i), x0);
    std::vector<ScoreValue> values;
    std::vector<double> weights;
    values.reserve(static_cast<std::size_t>(m));
    weights.reserve(static_cast<std::size_t>(m));
    for (Index j = 0; j < m; ++j) {
      if (j == i) continue;
      values.push_back(v0[static_cast<std::size_t>(j)]);
      weights.push_back(row.weights[j]);
    }
    values.push_back(ScoreValue::infinity());
    weights.push_back(row.weights[i]);
    out.push_back(weighted_quantile(
        alpha, WeightedAtomSet(std::move(values), std::move(weights))));
  }
  return out;
}

TuningReport tune_bandwidth(const Matrix& x0, const std::vector<ScoreValue>& v0,
                            LocalizerKind kind, const std::vector<double>& h_grid,
                            double alpha, std::mt19937_64& rng,
                            const TuneOptions& options) {
  const Index m = x0.rows();
  if (m < 2) throw std::invalid_argument("tune_bandwidth: need at least 2 samples");
  if (static_cast<Index>(v0.size()) != m)
    throw std::invalid_argument("tune_bandwidth: feature/score count mismatch");
  if (h_grid.empty()) throw std::invalid_argument("tune_bandwidth: empty bandwidth grid");
  if (!std::is_sorted(h_grid.begin(), h_grid.end()) ||
      std::adjacent_find(h_grid.begin(), h_grid.end()) != h_grid.end())
    throw std::invalid_argument("tune_bandwidth: bandwidth grid must be strictly ascending");
  if (!(alpha > 0.0 && alpha < 1.0))
    throw std::invalid_argument("tune_bandwidth: alpha must be in (0, 1)");
  if (!(options.omega > 0.0 && options.omega < 1.0))
    throw std::invalid_argument("tune_bandwidth: omega must be in (0, 1)");
  if (options.bootstrap_rounds < 2)
    throw std::invalid_argument("tune_bandwidth: need at least 2 bootstrap rounds");
  if (kind == LocalizerKind::ShiftKnn)
    throw std::invalid_argument(
        "tune_bandwidth: shift localizers carry a weight function and are not "
        "tunable by this routine");

  TuningReport report;
  report.kind = kind;
  report.alpha = alpha;
  report.omega = options.omega;
  report.bootstrap_rounds = options.bootstrap_rounds;
  report.candidates.resize(h_grid.size());

  auto spec_for = [&](double h) {
    LocalizerSpec spec;
    spec.kind = kind;
    spec.h = h;
    spec.axis = options.axis;
    return spec;
  };

  // Step 1-2: thresholds per candidate, eligibility screen, common subset.
  std::vector<std::vector<ScoreValue>> thresholds(h_grid.size());
  std::vector<char> in_subset(static_cast<std::size_t>(m), 1);
  for (std::size_t l = 0; l < h_grid.size(); ++l) {
    auto& cand = report.candidates[l];
    cand.h = h_grid[l];
    thresholds[l] = loo_thresholds(x0, v0, spec_for(h_grid[l]), alpha);
    Index infinite = 0;
    for (const auto& t : thresholds[l])
      if (t.is_infinite()) ++infinite;
    cand.infinite_fraction = static_cast<double>(infinite) / static_cast<double>(m);
    cand.eligible = cand.infinite_fraction < 1.0 - options.omega;
  }
  for (std::size_t l = 0; l < h_grid.size(); ++l) {
    if (!report.candidates[l].eligible) continue;
    for (Index i = 0; i < m; ++i)
      if (thresholds[l][static_cast<std::size_t>(i)].is_infinite())
        in_subset[static_cast<std::size_t>(i)] = 0;
  }
  const bool any_eligible =
      std::any_of(report.candidates.begin(), report.candidates.end(),
                  [](const TuningCandidate& c) { return c.eligible; });
  if (!any_eligible)
    throw NoEligibleBandwidth(
        "tune_bandwidth: every candidate bandwidth leaves too many samples "
        "with infinite thresholds; widen the bandwidth grid");
  const Index subset_size = static_cast<Index>(
      std::count(in_subset.begin(), in_subset.end(), char(1)));
  if (subset_size == 0)
    throw NoEligibleBandwidth(
        "tune_bandwidth: no sample has a finite threshold under every "
        "eligible candidate; widen the bandwidth grid");

  const std::uint64_t base_seed = rng();

  for (std::size_t l = 0; l < h_grid.size(); ++l) {
    auto& cand = report.candidates[l];
    if (!cand.eligible) continue;
    const LocalizerSpec spec = spec_for(h_grid[l]);

    // Step 3-4: mean threshold and under-coverage penalty on the subset.
    double sum = 0.0;
    Index violations = 0;
    for (Index i = 0; i < m; ++i) {
      if (!in_subset[static_cast<std::size_t>(i)]) continue;
      const ScoreValue& t = thresholds[l][static_cast<std::size_t>(i)];
      sum += t.value();
      if (v0[static_cast<std::size_t>(i)] > t) ++violations;
    }
    cand.s = sum / static_cast<double>(subset_size);
    cand.gamma = std::max(
        1.0, static_cast<double>(violations) /
                 ((1.0 - alpha) * static_cast<double>(subset_size)));

    // Step 5: bootstrap stability.  Each draw rebuilds the threshold for
    // sample i against m-1 resamples; only finite draws enter the sd.
    double sd_sum = 0.0;
    Index sd_count = 0;
    Matrix ref(m, x0.cols());
    std::vector<ScoreValue> boot_scores(static_cast<std::size_t>(m - 1));
    for (Index i = 0; i < m; ++i) {
      std::vector<double> finite_draws;
      for (int b = 0; b < options.bootstrap_rounds; ++b) {
        std::mt19937_64 eng(derive_seed(base_seed, l, static_cast<std::uint64_t>(i),
                                        static_cast<std::uint64_t>(b)));
        std::uniform_int_distribution<Index> pick(0, m - 1);
        for (Index k = 0; k + 1 < m; ++k) {
          const Index j = pick(eng);
          ref.row(k) = x0.row(j);
          boot_scores[static_cast<std::size_t>(k)] = v0[static_cast<std::size_t>(j)];
        }
        ref.row(m - 1) = x0.row(i);
        const ScoreValue q =
            held_out_threshold(spec, x0.row(i), ref, boot_scores, alpha);
        if (!q.is_infinite()) finite_draws.push_back(q.value());
      }
      if (finite_draws.size() >= 2) {
        sd_sum += sample_sd(finite_draws);
        ++sd_count;
      }
    }
    cand.sigma = sd_count > 0 ? sd_sum / static_cast<double>(sd_count) : 0.0;
    cand.objective = cand.gamma * (cand.s + cand.sigma);
  }

  // Step 6: eligible argmin; on a tie the larger h wins (the grid ascends,
  // so <= keeps the later candidate).
  double best = std::numeric_limits<double>::infinity();
  std::size_t best_l = 0;
  for (std::size_t l = 0; l < h_grid.size(); ++l) {
    const auto& cand = report.candidates[l];
    if (cand.eligible && cand.objective <= best) {
      best = cand.objective;
      best_l = l;
    }
  }
  report.candidates[best_l].selected = true;
  report.h_star = h_grid[best_l];
  report.selected_index = best_l;
  return report;
}

std::vector<double> default_bandwidth_grid(LocalizerKind kind, Index m) {
  if (kind == LocalizerKind::Knn) {
    std::vector<double> g;
    for (double frac : {0.1, 0.25, 0.5, 0.75}) {
      const double k = std::max(2.0, std::floor(frac * static_cast<double>(m)));
      if (g.empty() || k > g.back()) g.push_back(k);
    }
    return g;
  }
  return {0.1, 0.5, 1.0, 2.0};
}

std::string tuning_report_csv(const TuningReport& report) {
  std::ostringstream out;
  out << "h,kind,infinite_fraction,s,gamma,sigma,objective,eligible,selected\n";
  for (const auto& c : report.candidates) {
    csv::write_row(out, {csv::format_double(c.h), localizer_kind_name(report.kind),
                         csv::format_double(c.infinite_fraction),
                         csv::format_double(c.s), csv::format_double(c.gamma),
                         csv::format_double(c.sigma), csv::format_double(c.objective),
                         c.eligible ? "1" : "0", c.selected ? "1" : "0"});
  }
  return out.str();
}

}  // namespace lcp
