#pragma once

// Brute-force reference implementations used to pin expected values in the
// test suites.  These are written straight from the definitions and favour
// clarity over speed; production code must agree with them.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <random>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "lcp/localizer.hpp"
#include "lcp/score_value.hpp"

namespace testor {

using lcp::ScoreValue;
using OracleAtom = std::pair<ScoreValue, double>;  // (value, weight)

// Smallest atom value whose cumulative probability reaches alpha.  Stable sort
// by value, left-to-right accumulation, test only where the value changes so
// tied atoms pool their mass.  Falls back to the maximum when the scan
// exhausts.
inline ScoreValue oracle_quantile(std::vector<OracleAtom> atoms, double alpha) {
  std::stable_sort(atoms.begin(), atoms.end(),
                   [](const OracleAtom& a, const OracleAtom& b) {
                     return a.first < b.first;
                   });
  double cum = 0.0;
  for (std::size_t k = 0; k < atoms.size(); ++k) {
    cum += atoms[k].second;
    const bool boundary = k + 1 == atoms.size() || atoms[k].first < atoms[k + 1].first;
    if (boundary && cum >= alpha) return atoms[k].first;
  }
  return atoms.back().first;
}

inline double oracle_cdf(std::vector<OracleAtom> atoms, const ScoreValue& t) {
  std::stable_sort(atoms.begin(), atoms.end(),
                   [](const OracleAtom& a, const OracleAtom& b) {
                     return a.first < b.first;
                   });
  double cum = 0.0;
  for (const OracleAtom& a : atoms) {
    if (t < a.first) break;
    cum += a.second;
  }
  return cum;
}

inline std::mt19937_64 make_rng(std::uint64_t seed) { return std::mt19937_64(seed); }

// Plug-in mutual information with equal-frequency (rank) bins, written as a
// direct double loop over the contingency table.
inline std::vector<int> oracle_bins(const Eigen::VectorXd& v, int bins) {
  const int m = static_cast<int>(v.size());
  std::vector<int> order(m);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](int a, int b) { return v[a] < v[b]; });
  std::vector<int> bin(m);
  for (int r = 0; r < m; ++r)
    bin[order[r]] = std::min(bins - 1, (r * bins) / m);
  return bin;
}

inline double oracle_mi(const std::vector<int>& a, const std::vector<int>& b, int bins) {
  const double m = static_cast<double>(a.size());
  std::vector<std::vector<double>> cnt(bins, std::vector<double>(bins, 0.0));
  std::vector<double> ra(bins, 0.0), rb(bins, 0.0);
  for (std::size_t i = 0; i < a.size(); ++i) {
    cnt[a[i]][b[i]] += 1;
    ra[a[i]] += 1;
    rb[b[i]] += 1;
  }
  double mi = 0.0;
  for (int r = 0; r < bins; ++r)
    for (int c = 0; c < bins; ++c)
      if (cnt[r][c] > 0)
        mi += cnt[r][c] / m * std::log(cnt[r][c] * m / (ra[r] * rb[c]));
  return mi;
}

inline Eigen::Index oracle_best_axis(const Eigen::MatrixXd& X, const Eigen::VectorXd& V,
                                     int bins) {
  const std::vector<int> vb = oracle_bins(V, bins);
  Eigen::Index best = 0;
  double best_mi = -1.0;
  for (Eigen::Index j = 0; j < X.cols(); ++j) {
    double mi = 0.0;
    const Eigen::VectorXd col = X.col(j);
    if (col.maxCoeff() > col.minCoeff()) mi = oracle_mi(vb, oracle_bins(col, bins), bins);
    if (mi > best_mi) {
      best_mi = mi;
      best = j;
    }
  }
  return best;
}

// Random normalized weight vector; occasionally plants an exact zero.
inline std::vector<double> random_weights(std::mt19937_64& rng, std::size_t n) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<double> w(n);
  double sum = 0.0;
  for (double& x : w) {
    x = u(rng);
    if (u(rng) < 0.05) x = 0.0;
    sum += x;
  }
  if (sum == 0.0) {
    w.assign(n, 1.0 / static_cast<double>(n));
    return w;
  }
  for (double& x : w) x /= sum;
  return w;
}

// ---------------------------------------------------------------------------
// Definitional evaluation of the coverage conditions: build every localized
// row by normalizing raw kernel values, form each row's atom list with the
// test slot last, and take quantiles with oracle_quantile.

// Left-to-right renormalization, the same discipline the library applies to
// every probability vector before quantile walks.
inline Eigen::VectorXd oracle_renormalize(Eigen::VectorXd v) {
  double s = 0.0;
  for (Eigen::Index k = 0; k < v.size(); ++k) s += v[k];
  return v / s;
}

inline std::vector<Eigen::VectorXd> oracle_rows(const lcp::LocalizerSpec& spec,
                                                const Eigen::MatrixXd& X,
                                                const Eigen::VectorXd& x_new) {
  const auto n = X.rows();
  Eigen::MatrixXd A(n + 1, X.cols());
  A.topRows(n) = X;
  A.row(n) = x_new.transpose();
  std::vector<Eigen::VectorXd> rows;
  for (Eigen::Index i = 0; i <= n; ++i) {
    Eigen::VectorXd h(n + 1);
    double s = 0.0;
    for (Eigen::Index j = 0; j <= n; ++j) {
      h[j] = lcp::eval_localizer(spec, A.row(i), A.row(j), A);
      s += h[j];
    }
    rows.push_back(oracle_renormalize(h / s));
  }
  return rows;
}

struct OracleG1 {
  double achieved = 0.0;
  bool satisfied = false;
};

inline OracleG1 oracle_g1(const lcp::LocalizerSpec& spec, const Eigen::MatrixXd& X,
                          const std::vector<ScoreValue>& v, const Eigen::VectorXd& x_new,
                          const ScoreValue& v_new, double alpha, double alpha_tilde,
                          const Eigen::VectorXd& w) {
  const auto n = X.rows();
  const auto rows = oracle_rows(spec, X, x_new);
  const Eigen::VectorXd u = oracle_renormalize(w / w.sum());
  OracleG1 out;
  for (Eigen::Index i = 0; i <= n; ++i) {
    std::vector<OracleAtom> atoms;
    for (Eigen::Index j = 0; j < n; ++j)
      atoms.emplace_back(v[static_cast<std::size_t>(j)], rows[static_cast<std::size_t>(i)][j]);
    atoms.emplace_back(v_new, rows[static_cast<std::size_t>(i)][n]);
    const ScoreValue vs = oracle_quantile(atoms, alpha_tilde);
    const ScoreValue vi = i < n ? v[static_cast<std::size_t>(i)] : v_new;
    if (vi <= vs) out.achieved += u[i];
  }
  out.satisfied = out.achieved >= alpha;
  return out;
}

struct OracleG2 {
  ScoreValue bar_v;
  double s1 = 0.0;
  double s2 = 0.0;
  bool satisfied = false;
  bool infinite = false;
};

inline OracleG2 oracle_g2(const lcp::LocalizerSpec& spec, const Eigen::MatrixXd& X,
                          const std::vector<ScoreValue>& v, const Eigen::VectorXd& x_new,
                          double alpha, double alpha_tilde, const Eigen::VectorXd& w) {
  const auto n = X.rows();
  const auto rows = oracle_rows(spec, X, x_new);
  const Eigen::VectorXd u = oracle_renormalize(w / w.sum());

  std::vector<OracleAtom> top;
  for (Eigen::Index j = 0; j < n; ++j)
    top.emplace_back(v[static_cast<std::size_t>(j)], rows[static_cast<std::size_t>(n)][j]);
  top.emplace_back(ScoreValue::infinity(), rows[static_cast<std::size_t>(n)][n]);
  OracleG2 out;
  out.bar_v = oracle_quantile(top, alpha_tilde);
  out.infinite = out.bar_v.is_infinite();

  for (Eigen::Index i = 0; i < n; ++i) {
    std::vector<OracleAtom> base;
    for (Eigen::Index j = 0; j < n; ++j)
      base.emplace_back(v[static_cast<std::size_t>(j)], rows[static_cast<std::size_t>(i)][j]);
    auto a1 = base, a2 = base;
    a1.emplace_back(out.bar_v, rows[static_cast<std::size_t>(i)][n]);
    a2.emplace_back(ScoreValue(0.0), rows[static_cast<std::size_t>(i)][n]);
    if (v[static_cast<std::size_t>(i)] <= oracle_quantile(a1, alpha_tilde)) out.s1 += u[i];
    if (v[static_cast<std::size_t>(i)] <= oracle_quantile(a2, alpha_tilde)) out.s2 += u[i];
  }
  out.s2 += u[n];
  out.satisfied = out.s1 >= alpha && out.s2 >= alpha;
  return out;
}

struct OracleSearch {
  double alpha_tilde = 1.0;
  bool feasible = false;
  ScoreValue threshold;
};

inline OracleSearch oracle_grid_search(const lcp::LocalizerSpec& spec,
                                       const Eigen::MatrixXd& X,
                                       const std::vector<ScoreValue>& v,
                                       const Eigen::VectorXd& x_new, double alpha,
                                       const std::vector<double>& grid,
                                       const Eigen::VectorXd& w) {
  OracleSearch out;
  for (double level : grid) {
    const OracleG2 g = oracle_g2(spec, X, v, x_new, alpha, level, w);
    out.alpha_tilde = level;
    out.threshold = g.bar_v;
    if (g.satisfied || g.infinite) {
      out.feasible = true;
      return out;
    }
  }
  return out;
}

}  // namespace testor
