#include "lcp/localizer.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <vector>

#include "lcp/weighted_atoms.hpp"

namespace lcp {

namespace {

void require_bandwidth(double h) {
  if (!std::isfinite(h) || h <= 0.0)
    throw std::invalid_argument("localizer bandwidth must be finite and > 0");
}

void require_neighbor_count(double h) {
  if (!std::isfinite(h) || h < 1.0 || h != std::floor(h))
    throw std::invalid_argument("knn bandwidth must be a positive integer");
}

double pair_distance(const LocalizerSpec& spec, const Vector& x1, const Vector& x2) {
  if (x1.size() != x2.size())
    throw std::invalid_argument("eval_localizer: dimension mismatch");
  if (spec.axis) {
    const Index a = *spec.axis;
    if (a < 0 || a >= x1.size())
      throw std::invalid_argument("localizer axis out of range");
    return std::abs(x1[a] - x2[a]);
  }
  return (x1 - x2).norm();
}

// Inclusion radius of the knn kinds: the lower h/|X| quantile of the distances
// from the anchor to every point of X (the anchor itself contributes a zero).
double knn_radius(const LocalizerSpec& spec, const std::vector<double>& dists) {
  const auto n = static_cast<double>(dists.size());
  if (spec.h > n)
    throw std::invalid_argument("knn bandwidth exceeds the number of samples");
  std::vector<ScoreValue> atoms;
  atoms.reserve(dists.size());
  for (double d : dists) atoms.emplace_back(d);
  const ScoreValue q =
      weighted_quantile(spec.h / n, WeightedAtomSet::uniform(std::move(atoms)));
  return q.value();
}

double shift_weight_at(const LocalizerSpec& spec, const Vector& x) {
  const double w = spec.shift_weight(x);
  if (!std::isfinite(w) || w < 0.0)
    throw std::invalid_argument("shift weight function returned an invalid value");
  return w;
}

}  // namespace

LocalizerSpec constant_localizer() { return {LocalizerKind::Constant, 1.0, {}, {}}; }

LocalizerSpec box_localizer(double h, std::optional<Index> axis) {
  require_bandwidth(h);
  return {LocalizerKind::DistanceBox, h, axis, {}};
}

LocalizerSpec knn_localizer(double h, std::optional<Index> axis) {
  require_neighbor_count(h);
  return {LocalizerKind::Knn, h, axis, {}};
}

LocalizerSpec gaussian_localizer(double h, std::optional<Index> axis) {
  require_bandwidth(h);
  return {LocalizerKind::Gaussian, h, axis, {}};
}

LocalizerSpec exponential_localizer(double h, std::optional<Index> axis) {
  require_bandwidth(h);
  return {LocalizerKind::Exponential, h, axis, {}};
}

LocalizerSpec shift_knn_localizer(double h, std::function<double(const Vector&)> w) {
  require_neighbor_count(h);
  if (!w) throw std::invalid_argument("shift localizer needs a weight function");
  return {LocalizerKind::ShiftKnn, h, {}, std::move(w)};
}

bool is_data_independent(const LocalizerSpec& spec) {
  return spec.kind != LocalizerKind::Knn && spec.kind != LocalizerKind::ShiftKnn;
}

double eval_localizer(const LocalizerSpec& spec, const Vector& x1, const Vector& x2,
                      const Matrix& X) {
  switch (spec.kind) {
    case LocalizerKind::Constant:
      return 1.0;
    case LocalizerKind::DistanceBox:
      require_bandwidth(spec.h);
      return pair_distance(spec, x1, x2) / spec.h <= 1.0 ? 1.0 : 0.0;
    case LocalizerKind::Gaussian: {
      require_bandwidth(spec.h);
      const double d = pair_distance(spec, x1, x2);
      return std::exp(-(d * d) / (spec.h * spec.h));
    }
    case LocalizerKind::Exponential:
      require_bandwidth(spec.h);
      return std::exp(-pair_distance(spec, x1, x2) / spec.h);
    case LocalizerKind::Knn: {
      require_neighbor_count(spec.h);
      std::vector<double> dists(static_cast<std::size_t>(X.rows()));
      for (Index i = 0; i < X.rows(); ++i)
        dists[static_cast<std::size_t>(i)] = pair_distance(spec, x1, X.row(i));
      return pair_distance(spec, x1, x2) <= knn_radius(spec, dists) ? 1.0 : 0.0;
    }
    case LocalizerKind::ShiftKnn: {
      require_neighbor_count(spec.h);
      if (!spec.shift_weight)
        throw std::invalid_argument("shift localizer needs a weight function");
      // Deliberately unnormalized: the kept neighbors carry mass proportional
      // to their own importance weight, and the diagonal is w(x1) rather than
      // 1.  Only within-row ratios survive normalization, and scaling by w is
      // what keeps a handful of extreme-weight samples from owning the row.
      const double w1 = shift_weight_at(spec, x1);
      std::vector<double> dists(static_cast<std::size_t>(X.rows()));
      for (Index i = 0; i < X.rows(); ++i)
        dists[static_cast<std::size_t>(i)] =
            std::abs(shift_weight_at(spec, X.row(i)) - w1);
      const double w2 = shift_weight_at(spec, x2);
      if (std::abs(w2 - w1) > knn_radius(spec, dists)) return 0.0;
      return w2;
    }
  }
  throw std::logic_error("eval_localizer: unknown kind");
}

LocalWeightRow build_local_weights(const LocalizerSpec& spec, const Vector& center,
                                   const Matrix& X) {
  if (X.rows() == 0) throw std::invalid_argument("build_local_weights: empty X");
  LocalWeightRow row;
  row.weights.resize(X.rows());

  if (spec.kind == LocalizerKind::Knn || spec.kind == LocalizerKind::ShiftKnn) {
    // Shared anchor: compute the inclusion radius once per row, not per pair.
    const bool shift = spec.kind == LocalizerKind::ShiftKnn;
    if (shift && !spec.shift_weight)
      throw std::invalid_argument("shift localizer needs a weight function");
    require_neighbor_count(spec.h);
    const double wc = shift ? shift_weight_at(spec, center) : 0.0;
    std::vector<double> dists(static_cast<std::size_t>(X.rows()));
    for (Index i = 0; i < X.rows(); ++i) {
      dists[static_cast<std::size_t>(i)] =
          shift ? std::abs(shift_weight_at(spec, X.row(i)) - wc)
                : pair_distance(spec, center, X.row(i));
    }
    const double radius = knn_radius(spec, dists);
    for (Index i = 0; i < X.rows(); ++i) {
      const auto d = dists[static_cast<std::size_t>(i)];
      if (shift)
        row.weights[i] = d <= radius ? shift_weight_at(spec, X.row(i)) : 0.0;
      else
        row.weights[i] = d <= radius ? 1.0 : 0.0;
    }
  } else {
    for (Index i = 0; i < X.rows(); ++i)
      row.weights[i] = eval_localizer(spec, center, X.row(i), X);
  }

  // The shift kind is unnormalized by design (mass proportional to the
  // importance weight); every other kernel must land in [0,1].
  const double cap =
      spec.kind == LocalizerKind::ShiftKnn ? std::numeric_limits<double>::infinity()
                                           : 1.0;
  for (Index i = 0; i < X.rows(); ++i) {
    const double v = row.weights[i];
    if (!std::isfinite(v) || v < 0.0 || v > cap)
      throw std::invalid_argument("localizer produced a value outside [0,1]");
  }
  row.kernel_sum = 0.0;
  for (Index i = 0; i < X.rows(); ++i) row.kernel_sum += row.weights[i];
  if (row.kernel_sum <= 0.0)
    throw std::invalid_argument("local weight row sums to zero; is the center in X?");
  row.weights /= row.kernel_sum;
  return row;
}

namespace {

// Equal-frequency binning by rank; ties resolve by position, deterministically.
std::vector<int> rank_bins(const Vector& v, int bins) {
  const auto m = static_cast<std::size_t>(v.size());
  std::vector<std::size_t> order(m);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return v[static_cast<Index>(a)] < v[static_cast<Index>(b)]; });
  std::vector<int> bin(m);
  for (std::size_t r = 0; r < m; ++r) {
    auto b = static_cast<int>((r * static_cast<std::size_t>(bins)) / m);
    bin[order[r]] = std::min(b, bins - 1);
  }
  return bin;
}

double plugin_mi(const std::vector<int>& a, const std::vector<int>& b, int bins) {
  const auto m = static_cast<double>(a.size());
  std::vector<double> joint(static_cast<std::size_t>(bins) * bins, 0.0);
  std::vector<double> pa(bins, 0.0), pb(bins, 0.0);
  for (std::size_t i = 0; i < a.size(); ++i) {
    joint[static_cast<std::size_t>(a[i]) * bins + b[i]] += 1.0;
    pa[a[i]] += 1.0;
    pb[b[i]] += 1.0;
  }
  double mi = 0.0;
  for (int r = 0; r < bins; ++r)
    for (int c = 0; c < bins; ++c) {
      const double j = joint[static_cast<std::size_t>(r) * bins + c];
      if (j == 0.0) continue;  // 0 log 0 = 0
      mi += (j / m) * std::log(j * m / (pa[r] * pb[c]));
    }
  return mi;
}

}  // namespace

Index select_projection_axis(const Matrix& X0, const Vector& V0, int bins) {
  if (X0.rows() != V0.size() || X0.rows() == 0)
    throw std::invalid_argument("select_projection_axis: shape mismatch");
  if (bins < 2) throw std::invalid_argument("select_projection_axis: bins must be >= 2");
  const std::vector<int> vbin = rank_bins(V0, bins);
  Index best = 0;
  double best_mi = -1.0;
  for (Index j = 0; j < X0.cols(); ++j) {
    const Vector col = X0.col(j);
    double mi = 0.0;
    if (col.maxCoeff() > col.minCoeff())  // constant columns carry no signal
      mi = plugin_mi(vbin, rank_bins(col, bins), bins);
    if (mi > best_mi) {
      best_mi = mi;
      best = j;
    }
  }
  return best;
}

LocalizerSpec parse_localizer_spec(const std::string& text) {
  std::vector<std::string> parts;
  std::size_t start = 0;
  while (start <= text.size()) {
    const std::size_t colon = text.find(':', start);
    parts.push_back(text.substr(start, colon - start));
    if (colon == std::string::npos) break;
    start = colon + 1;
  }
  const std::string& kind = parts[0];
  if (kind == "shift" || kind == "shift_knn")
    throw std::invalid_argument(
        "shift localizer needs a weight function and cannot be built from config; "
        "use importance-weight columns instead");

  auto number = [&](std::size_t i, const char* what) {
    if (parts.size() <= i || parts[i].empty())
      throw std::invalid_argument(std::string("localizer spec missing ") + what +
                                  ": " + text);
    std::size_t pos = 0;
    double v = 0;
    try {
      v = std::stod(parts[i], &pos);
    } catch (const std::exception&) {
      throw std::invalid_argument("bad localizer spec: " + text);
    }
    if (pos != parts[i].size())
      throw std::invalid_argument("bad localizer spec: " + text);
    return v;
  };
  std::optional<Index> axis;
  if (parts.size() >= 3) axis = static_cast<Index>(number(2, "axis"));
  if (parts.size() > 3) throw std::invalid_argument("bad localizer spec: " + text);

  if (kind == "constant") return constant_localizer();
  if (kind == "box") return box_localizer(number(1, "bandwidth"), axis);
  if (kind == "knn") return knn_localizer(number(1, "bandwidth"), axis);
  if (kind == "gauss" || kind == "gaussian")
    return gaussian_localizer(number(1, "bandwidth"), axis);
  if (kind == "exp" || kind == "exponential")
    return exponential_localizer(number(1, "bandwidth"), axis);
  throw std::invalid_argument("unknown localizer kind: " + kind);
}

std::string localizer_kind_name(LocalizerKind kind) {
  switch (kind) {
    case LocalizerKind::Constant: return "constant";
    case LocalizerKind::DistanceBox: return "box";
    case LocalizerKind::Knn: return "knn";
    case LocalizerKind::Gaussian: return "gauss";
    case LocalizerKind::Exponential: return "exp";
    case LocalizerKind::ShiftKnn: return "shift_knn";
  }
  return "?";
}

std::string format_localizer_spec(const LocalizerSpec& spec) {
  if (spec.kind == LocalizerKind::Constant) return "constant";
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%s:%g", localizer_kind_name(spec.kind).c_str(),
                spec.h);
  std::string out(buf);
  if (spec.axis) out += ":" + std::to_string(*spec.axis);
  return out;
}

}  // namespace lcp
