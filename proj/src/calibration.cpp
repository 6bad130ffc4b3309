#include "lcp/calibration.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace lcp {

std::vector<double> default_alpha_grid(double alpha, int points) {
  if (!(alpha > 0.0 && alpha < 1.0))
    throw std::invalid_argument("alpha must lie in (0,1)");
  if (points < 1) throw std::invalid_argument("alpha grid needs at least one point");
  std::vector<double> grid;
  grid.reserve(static_cast<std::size_t>(points) + 1);
  for (int k = 1; k <= points; ++k)
    grid.push_back(static_cast<double>(k) / static_cast<double>(points));
  grid.push_back(alpha);
  std::sort(grid.begin(), grid.end());
  grid.erase(std::unique(grid.begin(), grid.end()), grid.end());
  return grid;
}

CalibrationModel make_calibration_model(Matrix features, std::vector<ScoreValue> scores,
                                        LocalizerSpec localizer, double alpha,
                                        Vector importance_weights,
                                        std::vector<double> alpha_grid) {
  const Index n = features.rows();
  if (n == 0 || static_cast<std::size_t>(n) != scores.size())
    throw std::invalid_argument("calibration model: features/scores size mismatch");
  if (!(alpha > 0.0 && alpha < 1.0))
    throw std::invalid_argument("calibration model: alpha must lie in (0,1)");
  if (importance_weights.size() == 0)
    importance_weights = Vector::Ones(n + 1);
  if (importance_weights.size() != n + 1)
    throw std::invalid_argument("calibration model: need n+1 importance weights");
  for (Index i = 0; i <= n; ++i)
    if (!std::isfinite(importance_weights[i]) || importance_weights[i] <= 0.0)
      throw std::invalid_argument("calibration model: importance weights must be > 0");
  if (alpha_grid.empty()) alpha_grid = default_alpha_grid(alpha);
  for (std::size_t k = 0; k < alpha_grid.size(); ++k) {
    const double a = alpha_grid[k];
    if (!(a > 0.0 && a <= 1.0) || (k > 0 && a <= alpha_grid[k - 1]))
      throw std::invalid_argument(
          "calibration model: alpha grid must be ascending within (0,1]");
  }
  return {std::move(features), std::move(scores), std::move(localizer), alpha,
          std::move(importance_weights), std::move(alpha_grid)};
}

namespace {

// Everything the level search reuses across candidate levels: localizer rows
// for every center (calibration points and the test point), importance weights
// normalized, and the calibration scores pre-sorted so each row quantile is a
// single merge walk.
struct Context {
  Index n = 0;
  Matrix P;                         // (n+1) x (n+1), kernel-normalized rows
  Vector u;                         // n+1
  std::vector<ScoreValue> sorted_v; // calibration scores ascending
  Matrix W;                         // (n+1) x n, row weights in score order
  Vector q;                         // test-slot weight per row
  const std::vector<ScoreValue>* scores = nullptr;
  double alpha = 0.0;
};

Context build_context(const CalibrationModel& model, const Vector& x_new) {
  const Index n = model.features.rows();
  if (x_new.size() != model.features.cols())
    throw std::invalid_argument("test feature dimension mismatch");

  Context ctx;
  ctx.n = n;
  ctx.scores = &model.scores;
  ctx.alpha = model.alpha;

  Matrix x_all(n + 1, model.features.cols());
  x_all.topRows(n) = model.features;
  x_all.row(n) = x_new.transpose();

  // Probability vectors are renormalized by their own left-to-right
  // floating-point sum, exactly as the atom-set constructor does, so a
  // threshold computed here is bit-identical to one computed through a
  // WeightedAtomSet built from the same row.
  auto renormalize = [](Vector v) {
    double s = 0.0;
    for (Index k = 0; k < v.size(); ++k) s += v[k];
    v /= s;
    return v;
  };

  ctx.P.resize(n + 1, n + 1);
  for (Index i = 0; i <= n; ++i)
    ctx.P.row(i) =
        renormalize(build_local_weights(model.localizer, x_all.row(i), x_all).weights)
            .transpose();

  ctx.u = renormalize(model.importance_weights / model.importance_weights.sum());

  std::vector<Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Index{0});
  std::stable_sort(order.begin(), order.end(), [&](Index a, Index b) {
    return model.scores[static_cast<std::size_t>(a)] <
           model.scores[static_cast<std::size_t>(b)];
  });
  ctx.sorted_v.resize(static_cast<std::size_t>(n));
  ctx.W.resize(n + 1, n);
  for (Index k = 0; k < n; ++k) {
    ctx.sorted_v[static_cast<std::size_t>(k)] =
        model.scores[static_cast<std::size_t>(order[static_cast<std::size_t>(k)])];
    ctx.W.col(k) = ctx.P.col(order[static_cast<std::size_t>(k)]);
  }
  ctx.q = ctx.P.col(n);
  return ctx;
}

// Q(alpha_tilde) of row i's distribution with the test slot moved to `a`:
// walk the score-sorted atoms with `a` spliced in after its equals (matching a
// stable sort where the test atom comes last), accumulate left to right, and
// test the running mass only where the merged value changes.
ScoreValue row_quantile(const Context& ctx, Index i, const ScoreValue& a,
                        double alpha_tilde) {
  const Index n = ctx.n;
  const auto ipos = static_cast<Index>(
      std::upper_bound(ctx.sorted_v.begin(), ctx.sorted_v.end(), a) -
      ctx.sorted_v.begin());
  const double qw = ctx.q[i];

  auto value_at = [&](Index t) -> const ScoreValue& {
    if (t < ipos) return ctx.sorted_v[static_cast<std::size_t>(t)];
    if (t == ipos) return a;
    return ctx.sorted_v[static_cast<std::size_t>(t - 1)];
  };
  double cum = 0.0;
  for (Index t = 0; t <= n; ++t) {
    cum += t == ipos ? qw : ctx.W(i, t < ipos ? t : t - 1);
    const bool boundary = t == n || value_at(t) < value_at(t + 1);
    if (boundary && cum >= alpha_tilde) return value_at(t);
  }
  return value_at(n);
}

// Running mass of row i strictly below its own calibration score (row i < n)
// or below v itself, with the test slot at `a`.  This is the exact partial sum
// the quantile walk would compare against alpha_tilde, so
//   V_i <= row_quantile(i, a, alpha_tilde)  <=>  mass_below < alpha_tilde.
double mass_below(const Context& ctx, Index i, const ScoreValue& a,
                  const ScoreValue& v) {
  const Index n = ctx.n;
  const auto ipos = static_cast<Index>(
      std::upper_bound(ctx.sorted_v.begin(), ctx.sorted_v.end(), a) -
      ctx.sorted_v.begin());
  auto value_at = [&](Index t) -> const ScoreValue& {
    if (t < ipos) return ctx.sorted_v[static_cast<std::size_t>(t)];
    if (t == ipos) return a;
    return ctx.sorted_v[static_cast<std::size_t>(t - 1)];
  };
  double cum = 0.0;
  for (Index t = 0; t <= n; ++t) {
    if (!(value_at(t) < v)) break;
    cum += t == ipos ? ctx.q[i] : ctx.W(i, t < ipos ? t : t - 1);
  }
  return cum;
}

G1Result eval_g1_ctx(double alpha_tilde, const Context& ctx, const ScoreValue& v_new) {
  const Index n = ctx.n;
  G1Result r;
  r.v_star.resize(static_cast<std::size_t>(n) + 1);
  double achieved = 0.0;
  for (Index i = 0; i <= n; ++i) {
    const ScoreValue vi = i < n ? (*ctx.scores)[static_cast<std::size_t>(i)] : v_new;
    const ScoreValue vs = row_quantile(ctx, i, v_new, alpha_tilde);
    r.v_star[static_cast<std::size_t>(i)] = vs;
    if (vi <= vs) achieved += ctx.u[i];
  }
  r.achieved = achieved;
  r.satisfied = achieved >= ctx.alpha;
  return r;
}

G2Witness eval_g2_ctx(double alpha_tilde, const Context& ctx) {
  const Index n = ctx.n;
  G2Witness w;
  w.alpha_tilde = alpha_tilde;
  w.bar_v_star = row_quantile(ctx, n, ScoreValue::infinity(), alpha_tilde);
  w.quantile_is_infinite = w.bar_v_star.is_infinite();
  w.v_star_1.resize(static_cast<std::size_t>(n));
  w.v_star_2.resize(static_cast<std::size_t>(n));
  const ScoreValue zero(0.0);
  double s1 = 0.0, s2 = 0.0;
  for (Index i = 0; i < n; ++i) {
    const ScoreValue& vi = (*ctx.scores)[static_cast<std::size_t>(i)];
    const ScoreValue q1 = row_quantile(ctx, i, w.bar_v_star, alpha_tilde);
    const ScoreValue q2 = row_quantile(ctx, i, zero, alpha_tilde);
    w.v_star_1[static_cast<std::size_t>(i)] = q1;
    w.v_star_2[static_cast<std::size_t>(i)] = q2;
    if (vi <= q1) s1 += ctx.u[i];
    if (vi <= q2) s2 += ctx.u[i];
  }
  s2 += ctx.u[n];
  w.s1 = s1;
  w.s2 = s2;
  w.satisfied = s1 >= ctx.alpha && s2 >= ctx.alpha;
  return w;
}

// Counts and weight totals over value ranks, so the sweep can ask "how much
// mass sits at thresholds strictly below this level" while rows migrate
// between the two threshold states.
struct Fenwick {
  std::vector<int> cnt;
  std::vector<double> sum;
  explicit Fenwick(int n) : cnt(static_cast<std::size_t>(n) + 1),
                            sum(static_cast<std::size_t>(n) + 1) {}
  void add(int pos, int c, double w) {
    for (++pos; pos < static_cast<int>(cnt.size()); pos += pos & -pos) {
      cnt[static_cast<std::size_t>(pos)] += c;
      sum[static_cast<std::size_t>(pos)] += w;
    }
  }
  // Totals over the first `pos` rank slots.
  std::pair<int, double> prefix(int pos) const {
    int c = 0;
    double s = 0.0;
    for (; pos > 0; pos -= pos & -pos) {
      c += cnt[static_cast<std::size_t>(pos)];
      s += sum[static_cast<std::size_t>(pos)];
    }
    return {c, s};
  }
};

int rank_of(const std::vector<double>& sorted_vals, double v) {
  return static_cast<int>(std::lower_bound(sorted_vals.begin(), sorted_vals.end(), v) -
                          sorted_vals.begin());
}

AlphaSearchResult search_literal_from(const Context& ctx,
                                      const std::vector<double>& grid,
                                      std::size_t start) {
  AlphaSearchResult out;
  for (std::size_t l = start; l < grid.size(); ++l) {
    out.witness = eval_g2_ctx(grid[l], ctx);
    out.alpha_tilde = grid[l];
    if (out.witness.satisfied || out.witness.quantile_is_infinite) {
      out.feasible = true;
      return out;
    }
  }
  if (start >= grid.size()) {  // nothing scanned: report the last level
    out.witness = eval_g2_ctx(grid.back(), ctx);
    out.alpha_tilde = grid.back();
  }
  out.feasible = false;
  return out;
}

// Event-sweep search.  Everything the score-free audit compares against the
// level is monotone in the level, so each row contributes a handful of
// precomputed flip points:
//   - its audit-mass threshold with the test slot at the row's worst case
//     (the running top-row quantile), which steps down once from T = base+q
//     to B = base when the top-row quantile climbs past the row's own score;
//   - its threshold with the test slot at zero (the s2 side);
//   - the top-row group masses, whose exhaustion marks an infinite quantile.
// The sweep walks the grid once, migrating rows between the T and B states,
// and re-audits the level it selects with the full evaluator as a backstop.
AlphaSearchResult grid_search_fast(const Context& ctx, const std::vector<double>& grid) {
  const Index n = ctx.n;
  const double alpha = ctx.alpha;

  // Top-row cumulative mass at each tied-value group boundary; the quantile
  // at a level is the first group whose mass reaches it, infinite when none
  // does.
  std::vector<double> jump_cum;
  {
    double cum = 0.0;
    for (Index k = 0; k < n; ++k) {
      cum += ctx.W(n, k);
      if (k == n - 1 || ctx.sorted_v[static_cast<std::size_t>(k)] <
                            ctx.sorted_v[static_cast<std::size_t>(k + 1)])
        jump_cum.push_back(cum);
    }
  }

  std::vector<double> T(static_cast<std::size_t>(n)), B(static_cast<std::size_t>(n)),
      trans(static_cast<std::size_t>(n)), f2(static_cast<std::size_t>(n));
  const ScoreValue zero(0.0);
  const ScoreValue inf = ScoreValue::infinity();
  for (Index i = 0; i < n; ++i) {
    const ScoreValue& vi = (*ctx.scores)[static_cast<std::size_t>(i)];
    double base = 0.0;
    for (Index k = 0; k < n && ctx.sorted_v[static_cast<std::size_t>(k)] < vi; ++k)
      base += ctx.W(i, k);
    B[static_cast<std::size_t>(i)] = base;
    T[static_cast<std::size_t>(i)] = base + ctx.q[i];
    trans[static_cast<std::size_t>(i)] = mass_below(ctx, n, inf, vi);
    f2[static_cast<std::size_t>(i)] = mass_below(ctx, i, zero, vi);
  }

  // With flat importance weights every partial sum is a left-to-right sum of
  // copies of the same double, so counting rows reproduces the literal audit
  // sums exactly.
  bool uniform = true;
  for (Index i = 1; i <= n; ++i) uniform = uniform && ctx.u[i] == ctx.u[0];
  std::vector<double> ucum(static_cast<std::size_t>(n) + 2, 0.0);
  for (std::size_t k = 1; k < ucum.size(); ++k) ucum[k] = ucum[k - 1] + ctx.u[0];

  std::vector<double> t_vals(T), b_vals(B);
  std::sort(t_vals.begin(), t_vals.end());
  std::sort(b_vals.begin(), b_vals.end());
  Fenwick fa(static_cast<int>(n)), fb(static_cast<int>(n));
  for (Index i = 0; i < n; ++i)
    fa.add(rank_of(t_vals, T[static_cast<std::size_t>(i)]), 1, ctx.u[i]);

  std::vector<Index> by_trans(static_cast<std::size_t>(n));
  std::iota(by_trans.begin(), by_trans.end(), Index{0});
  std::sort(by_trans.begin(), by_trans.end(), [&](Index a, Index b) {
    return trans[static_cast<std::size_t>(a)] < trans[static_cast<std::size_t>(b)];
  });
  std::vector<std::pair<double, double>> f2_sorted(static_cast<std::size_t>(n));
  for (Index i = 0; i < n; ++i)
    f2_sorted[static_cast<std::size_t>(i)] = {f2[static_cast<std::size_t>(i)],
                                              ctx.u[i]};
  std::sort(f2_sorted.begin(), f2_sorted.end(),
            [](const auto& a, const auto& b) { return a.first < b.first; });

  std::size_t p_trans = 0, p_f2 = 0, p_jump = 0;
  int rank_t = 0, rank_b = 0;
  double f2_wsum = 0.0;
  std::ptrdiff_t chosen = -1;
  for (std::size_t l = 0; l < grid.size(); ++l) {
    const double level = grid[l];
    while (p_trans < by_trans.size() &&
           trans[static_cast<std::size_t>(by_trans[p_trans])] < level) {
      const Index r = by_trans[p_trans++];
      fa.add(rank_of(t_vals, T[static_cast<std::size_t>(r)]), -1, -ctx.u[r]);
      fb.add(rank_of(b_vals, B[static_cast<std::size_t>(r)]), 1, ctx.u[r]);
    }
    while (rank_t < static_cast<int>(n) &&
           t_vals[static_cast<std::size_t>(rank_t)] < level)
      ++rank_t;
    while (rank_b < static_cast<int>(n) &&
           b_vals[static_cast<std::size_t>(rank_b)] < level)
      ++rank_b;
    while (p_f2 < f2_sorted.size() && f2_sorted[p_f2].first < level)
      f2_wsum += f2_sorted[p_f2++].second;
    while (p_jump < jump_cum.size() && jump_cum[p_jump] < level) ++p_jump;

    const bool infinite = p_jump == jump_cum.size();
    const auto [ca, sa] = fa.prefix(rank_t);
    const auto [cb, sb] = fb.prefix(rank_b);
    const double s1 = uniform ? ucum[static_cast<std::size_t>(ca + cb)] : sa + sb;
    const double s2 =
        uniform ? ucum[p_f2 + 1] : f2_wsum + ctx.u[n];
    if ((s1 >= alpha && s2 >= alpha) || infinite) {
      chosen = static_cast<std::ptrdiff_t>(l);
      break;
    }
  }

  if (chosen < 0) return search_literal_from(ctx, grid, grid.size());

  // Backstop: the sweep's candidate must pass the full audit; if an
  // order-of-summation edge case ever disagrees, fall forward to the literal
  // scan from the next level.
  AlphaSearchResult out;
  out.witness = eval_g2_ctx(grid[static_cast<std::size_t>(chosen)], ctx);
  out.alpha_tilde = grid[static_cast<std::size_t>(chosen)];
  if (out.witness.satisfied || out.witness.quantile_is_infinite) {
    out.feasible = true;
    return out;
  }
  return search_literal_from(ctx, grid, static_cast<std::size_t>(chosen) + 1);
}

}  // namespace

G1Result eval_g1(double alpha_tilde, const CalibrationModel& model, const Vector& x_new,
                 const ScoreValue& v_new) {
  return eval_g1_ctx(alpha_tilde, build_context(model, x_new), v_new);
}

G1SearchResult g1_search_alpha(const CalibrationModel& model, const Vector& x_new,
                               const ScoreValue& v_new) {
  const Context ctx = build_context(model, x_new);
  const Index n = ctx.n;
  // Each row's audit indicator flips on permanently once alpha_tilde exceeds
  // the row's mass strictly below its own score; precompute those flip points
  // and sweep the grid instead of re-auditing every level.
  std::vector<std::pair<double, double>> flips;  // (flip level, weight)
  flips.reserve(static_cast<std::size_t>(n) + 1);
  for (Index i = 0; i <= n; ++i) {
    const ScoreValue vi = i < n ? (*ctx.scores)[static_cast<std::size_t>(i)] : v_new;
    flips.emplace_back(mass_below(ctx, i, v_new, vi), ctx.u[i]);
  }
  std::sort(flips.begin(), flips.end(),
            [](const auto& a, const auto& b) { return a.first < b.first; });

  std::size_t j = 0;
  double achieved = 0.0;
  for (double level : model.alpha_grid) {
    while (j < flips.size() && flips[j].first < level) achieved += flips[j++].second;
    if (achieved >= model.alpha) return {level, true};
  }
  return {model.alpha_grid.back(), false};
}

G2Witness eval_g2(double alpha_tilde, const CalibrationModel& model,
                  const Vector& x_new) {
  return eval_g2_ctx(alpha_tilde, build_context(model, x_new));
}

AlphaSearchResult grid_search_alpha(const CalibrationModel& model, const Vector& x_new) {
  const Context ctx = build_context(model, x_new);
  return grid_search_fast(ctx, model.alpha_grid);
}

AlphaSearchResult grid_search_alpha_literal(const CalibrationModel& model,
                                            const Vector& x_new) {
  const Context ctx = build_context(model, x_new);
  return search_literal_from(ctx, model.alpha_grid, 0);
}

double randomized_alpha(const CalibrationModel& model, const Vector& x_new,
                        const ScoreValue& v_new, std::mt19937_64& rng,
                        int refine_points) {
  if (refine_points < 2)
    throw std::invalid_argument("randomized_alpha: refinement grid too small");
  const Context ctx = build_context(model, x_new);
  const Index n = ctx.n;
  std::vector<std::pair<double, double>> flips;
  flips.reserve(static_cast<std::size_t>(n) + 1);
  for (Index i = 0; i <= n; ++i) {
    const ScoreValue vi = i < n ? (*ctx.scores)[static_cast<std::size_t>(i)] : v_new;
    flips.emplace_back(mass_below(ctx, i, v_new, vi), ctx.u[i]);
  }
  std::sort(flips.begin(), flips.end(),
            [](const auto& a, const auto& b) { return a.first < b.first; });

  std::size_t j = 0;
  double achieved = 0.0;
  double prev_level = 0.0, prev_achieved = 0.0;
  bool have_prev = false;
  for (int k = 1; k <= refine_points; ++k) {
    const double level = static_cast<double>(k) / static_cast<double>(refine_points);
    while (j < flips.size() && flips[j].first < level) achieved += flips[j++].second;
    if (achieved >= model.alpha) {
      // Crossing located: mix the bracketing levels so the expected audited
      // coverage is exactly alpha.
      if (!have_prev || achieved <= prev_achieved) return level;
      const double p = (model.alpha - prev_achieved) / (achieved - prev_achieved);
      std::uniform_real_distribution<double> unif(0.0, 1.0);
      return unif(rng) < p ? level : prev_level;
    }
    prev_level = level;
    prev_achieved = achieved;
    have_prev = true;
  }
  return 1.0;  // the G1 sum reaches 1 at level 1, so alpha <= 1 always lands here
}

}  // namespace lcp
