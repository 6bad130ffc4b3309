#pragma once

#include <functional>
#include <optional>
#include <string>

#include "lcp/types.hpp"

namespace lcp {

// Kernel families for the locality weighting H(x1, x2, X).  All kinds except
// `ShiftKnn` map into [0,1] with H(x, x, X) = 1; `ShiftKnn` is unnormalized
// (each kept neighbor contributes its own importance weight, diagonal
// included), which is harmless because only within-row ratios survive the
// row normalization.  `DistanceBox`, `Gaussian` and `Exponential` depend only
// on x2 - x1; `Knn` and `ShiftKnn` also read the full feature set X to pick
// their inclusion radius, so they are data-dependent.
enum class LocalizerKind { Constant, DistanceBox, Knn, Gaussian, Exponential, ShiftKnn };

struct LocalizerSpec {
  LocalizerKind kind = LocalizerKind::Constant;
  double h = 1.0;  // bandwidth; neighbor count for the knn kinds
  // Restrict the kernel to a single feature coordinate (useful after axis
  // selection on high-dimensional data).
  std::optional<Index> axis;
  // Density-ratio handle required by ShiftKnn.
  std::function<double(const Vector&)> shift_weight;
};

LocalizerSpec constant_localizer();
LocalizerSpec box_localizer(double h, std::optional<Index> axis = {});
LocalizerSpec knn_localizer(double h, std::optional<Index> axis = {});
LocalizerSpec gaussian_localizer(double h, std::optional<Index> axis = {});
LocalizerSpec exponential_localizer(double h, std::optional<Index> axis = {});
LocalizerSpec shift_knn_localizer(double h, std::function<double(const Vector&)> w);

// True when the kernel ignores the sample cloud X (needed by procedures that
// are only valid for data-independent localizers).
bool is_data_independent(const LocalizerSpec& spec);

// Kernel value for one pair.  X must hold all n+1 feature rows when the kind
// is Knn or ShiftKnn; other kinds never read it.
double eval_localizer(const LocalizerSpec& spec, const Vector& x1, const Vector& x2,
                      const Matrix& X);

// One normalized row of the locality matrix: weights[j] = H(center, X_j, X) /
// sum_k H(center, X_k, X).
struct LocalWeightRow {
  Vector weights;
  double kernel_sum = 0.0;  // unnormalized row mass
};

LocalWeightRow build_local_weights(const LocalizerSpec& spec, const Vector& center,
                                   const Matrix& X);

// Pick the feature coordinate most informative about the scores: argmax of the
// plug-in mutual information between the binned scores and each binned column
// (equal-frequency bins).  Ties break toward the smallest index; a constant
// column scores zero.
Index select_projection_axis(const Matrix& X0, const Vector& V0, int bins = 10);

// Compact config/CLI form "kind" or "kind:h" or "kind:h:axis", e.g. "box:1.5".
LocalizerSpec parse_localizer_spec(const std::string& text);
std::string format_localizer_spec(const LocalizerSpec& spec);

// Short stable kind name ("box", "knn", ...) as used in config strings and
// report columns.
std::string localizer_kind_name(LocalizerKind kind);

}  // namespace lcp
