#pragma once

#include <vector>

#include "lcp/score_value.hpp"

namespace lcp {

struct Atom {
  ScoreValue value;
  double weight = 0.0;
};

// A finite probability distribution over scores, possibly with mass at +inf.
// Weights must be nonnegative and sum to 1 within 1e-9; they are renormalized
// on construction because callers typically produce them by elementwise
// division and the rounding drift would otherwise compound downstream.
// Atom order is the insertion order; operations that need sorted values build
// their own view.
class WeightedAtomSet {
 public:
  explicit WeightedAtomSet(std::vector<Atom> atoms);
  WeightedAtomSet(std::vector<ScoreValue> values, std::vector<double> weights);

  // Equal weights 1/N on the given values.
  static WeightedAtomSet uniform(std::vector<ScoreValue> values);

  std::size_t size() const { return atoms_.size(); }
  const Atom& atom(std::size_t i) const { return atoms_.at(i); }
  const std::vector<Atom>& atoms() const { return atoms_; }

 private:
  std::vector<Atom> atoms_;
};

// Lower empirical quantile: the smallest atom value t with P{T <= t} >= alpha.
// Exact comparisons, no interpolation.  alpha = 0 returns the minimum atom
// value; alpha = 1 the maximum.  Ties among equal values merge their mass
// before the cumulative test.
ScoreValue weighted_quantile(double alpha, const WeightedAtomSet& dist);

// P{T <= t} under the distribution.
double cdf_at(const WeightedAtomSet& dist, const ScoreValue& t);

// Copy of the distribution with atom `index` moved to a new value, weight
// unchanged.
WeightedAtomSet substitute_atom(const WeightedAtomSet& dist, std::size_t index,
                                const ScoreValue& new_value);

}  // namespace lcp
