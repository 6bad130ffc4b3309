#include "lcp/intervals.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>
#include <utility>

#include "lcp/weighted_atoms.hpp"

namespace lcp {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

PredictionInterval invert_residual(double center, const ScoreValue& threshold) {
  if (threshold.is_infinite()) return {-kInf, kInf, true};
  return {center - threshold.value(), center + threshold.value(), false};
}

void require_residual_form(const ScoreFunction& f, const char* who) {
  if (!f.mu)
    throw std::invalid_argument(std::string(who) +
                                ": needs an absolute-residual score");
}

void require_sorted_grid(const Vector& y_grid, const char* who) {
  if (y_grid.size() == 0)
    throw std::invalid_argument(std::string(who) + ": empty y grid");
  for (Index j = 1; j < y_grid.size(); ++j)
    if (!(y_grid[j - 1] <= y_grid[j]))
      throw std::invalid_argument(std::string(who) + ": y grid must be ascending");
}

// Scores plus a +inf atom in the last slot, weighted by `w` (which includes
// the +inf slot's weight).
WeightedAtomSet scores_with_inf(const std::vector<ScoreValue>& scores,
                                const Vector& w) {
  std::vector<Atom> atoms;
  atoms.reserve(scores.size() + 1);
  for (std::size_t i = 0; i < scores.size(); ++i)
    atoms.push_back({scores[i], w[static_cast<Index>(i)]});
  atoms.push_back({ScoreValue::infinity(), w[static_cast<Index>(scores.size())]});
  return WeightedAtomSet(std::move(atoms));
}

}  // namespace

ScoreFunction abs_residual_score(Predictor mu) {
  if (!mu) throw std::invalid_argument("abs_residual_score: null predictor");
  ScoreFunction f;
  f.mu = std::move(mu);
  return f;
}

ScoreFunction custom_score(std::function<ScoreValue(const Vector&, double)> v) {
  if (!v) throw std::invalid_argument("custom_score: null callable");
  ScoreFunction f;
  f.custom = std::move(v);
  return f;
}

ScoreValue eval_score(const ScoreFunction& f, const Vector& x, double y) {
  if (f.mu) return ScoreValue(std::abs(y - f.mu(x)));
  if (f.custom) return f.custom(x, y);
  throw std::invalid_argument("eval_score: empty score function");
}

PredictionSet lcp_interval(const CalibrationModel& model, const Vector& x_new,
                           const ScoreFunction& score) {
  require_residual_form(score, "lcp_interval");
  const AlphaSearchResult search = grid_search_alpha(model, x_new);
  PredictionSet out;
  out.alpha_tilde = search.alpha_tilde;
  out.feasible = search.feasible;
  out.value = invert_residual(score.mu(x_new), search.witness.bar_v_star);
  return out;
}

PredictionSet lcp_set_generic(const CalibrationModel& model, const Vector& x_new,
                              const ScoreFunction& score, const Vector& y_grid) {
  require_sorted_grid(y_grid, "lcp_set_generic");
  const AlphaSearchResult search = grid_search_alpha(model, x_new);
  GridMembership gm;
  gm.grid = y_grid;
  gm.member.assign(static_cast<std::size_t>(y_grid.size()), false);
  gm.undecided.assign(static_cast<std::size_t>(y_grid.size()), false);
  for (Index j = 0; j < y_grid.size(); ++j)
    gm.member[static_cast<std::size_t>(j)] =
        eval_score(score, x_new, y_grid[j]) <= search.witness.bar_v_star;
  PredictionSet out;
  out.value = std::move(gm);
  out.alpha_tilde = search.alpha_tilde;
  out.feasible = search.feasible;
  return out;
}

ScoreValue local_coverage_threshold(const CalibrationModel& model,
                                    const Vector& x_new) {
  if (!is_data_independent(model.localizer))
    throw std::invalid_argument(
        "local-coverage mode needs a data-independent localizer");
  const Index n = model.features.rows();
  if (x_new.size() != model.features.cols())
    throw std::invalid_argument("local_coverage_threshold: feature dimension mismatch");
  Matrix x_all(n + 1, model.features.cols());
  x_all.topRows(n) = model.features;
  x_all.row(n) = x_new.transpose();
  const Vector w = build_local_weights(model.localizer, x_new, x_all).weights;
  return weighted_quantile(model.alpha, scores_with_inf(model.scores, w));
}

PredictionSet local_coverage_interval(const CalibrationModel& model,
                                      const Vector& x_new,
                                      const ScoreFunction& score) {
  require_residual_form(score, "local_coverage_interval");
  const ScoreValue q = local_coverage_threshold(model, x_new);
  PredictionSet out;
  out.alpha_tilde = model.alpha;
  out.value = invert_residual(score.mu(x_new), q);
  return out;
}

ScoreValue split_conformal_threshold(const std::vector<ScoreValue>& scores,
                                     double alpha) {
  if (scores.empty())
    throw std::invalid_argument("split_conformal_threshold: empty scores");
  if (!(alpha > 0.0 && alpha <= 1.0))
    throw std::invalid_argument("split_conformal_threshold: alpha must lie in (0,1]");
  std::vector<ScoreValue> values = scores;
  values.push_back(ScoreValue::infinity());
  return weighted_quantile(alpha, WeightedAtomSet::uniform(std::move(values)));
}

PredictionSet split_conformal_interval(const std::vector<ScoreValue>& scores,
                                       double alpha, const Vector& x_new,
                                       const ScoreFunction& score) {
  require_residual_form(score, "split_conformal_interval");
  PredictionSet out;
  out.alpha_tilde = alpha;
  out.value = invert_residual(score.mu(x_new), split_conformal_threshold(scores, alpha));
  return out;
}

ScoreValue weighted_conformal_threshold(const std::vector<ScoreValue>& scores,
                                        const Vector& weights, double alpha) {
  if (scores.empty())
    throw std::invalid_argument("weighted_conformal_threshold: empty scores");
  if (weights.size() != static_cast<Index>(scores.size()) + 1)
    throw std::invalid_argument(
        "weighted_conformal_threshold: need one weight per score plus the test slot");
  if (!(alpha > 0.0 && alpha <= 1.0))
    throw std::invalid_argument("weighted_conformal_threshold: alpha must lie in (0,1]");
  for (Index i = 0; i < weights.size(); ++i)
    if (!std::isfinite(weights[i]) || weights[i] <= 0.0)
      throw std::invalid_argument("weighted_conformal_threshold: weights must be > 0");
  const Vector p = weights / weights.sum();
  return weighted_quantile(alpha, scores_with_inf(scores, p));
}

PredictionSet weighted_conformal_interval(const std::vector<ScoreValue>& scores,
                                          const Vector& weights, double alpha,
                                          const Vector& x_new,
                                          const ScoreFunction& score) {
  require_residual_form(score, "weighted_conformal_interval");
  PredictionSet out;
  out.alpha_tilde = alpha;
  out.value = invert_residual(score.mu(x_new),
                              weighted_conformal_threshold(scores, weights, alpha));
  return out;
}

PredictionSet exact_lcp_set_datadep(const Trainer& trainer, const Dataset& data,
                                    const Vector& x_new, const Vector& y_grid,
                                    double alpha, const DatadepConfig& config) {
  const Index n = data.size();
  if (n == 0 || n > 50)
    throw std::invalid_argument("exact_lcp_set_datadep: desk-scale only, 1 <= n <= 50");
  if (y_grid.size() > 200)
    throw std::invalid_argument("exact_lcp_set_datadep: y grid capped at 200 points");
  require_sorted_grid(y_grid, "exact_lcp_set_datadep");
  if (!trainer) throw std::invalid_argument("exact_lcp_set_datadep: null trainer");

  GridMembership gm;
  gm.grid = y_grid;
  gm.member.assign(static_cast<std::size_t>(y_grid.size()), false);
  gm.undecided.assign(static_cast<std::size_t>(y_grid.size()), false);

  Dataset augmented;
  augmented.x.resize(n + 1, data.x.cols());
  augmented.x.topRows(n) = data.x;
  augmented.x.row(n) = x_new.transpose();
  augmented.y.resize(n + 1);
  augmented.y.head(n) = data.y;

  for (Index j = 0; j < y_grid.size(); ++j) {
    const double y = y_grid[j];
    augmented.y[n] = y;
    try {
      const ScoreFunction fitted = trainer(augmented);
      std::vector<ScoreValue> scores;
      scores.reserve(static_cast<std::size_t>(n));
      for (Index i = 0; i < n; ++i)
        scores.push_back(eval_score(fitted, data.x.row(i).transpose(), data.y[i]));
      const ScoreValue v_new = eval_score(fitted, x_new, y);

      const CalibrationModel model = make_calibration_model(
          data.x, std::move(scores), config.localizer, alpha, {}, config.alpha_grid);
      const G1SearchResult level = g1_search_alpha(model, x_new, v_new);
      if (!level.feasible) continue;  // no qualifying level: y stays out
      const G1Result audit = eval_g1(level.alpha_tilde, model, x_new, v_new);
      gm.member[static_cast<std::size_t>(j)] =
          v_new <= audit.v_star[static_cast<std::size_t>(n)];
    } catch (const std::exception&) {
      gm.undecided[static_cast<std::size_t>(j)] = true;
    }
  }

  PredictionSet out;
  out.value = std::move(gm);
  out.feasible = true;
  return out;
}

}  // namespace lcp
