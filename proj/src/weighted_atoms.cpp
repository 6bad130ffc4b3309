#include "lcp/weighted_atoms.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>

namespace lcp {

WeightedAtomSet::WeightedAtomSet(std::vector<Atom> atoms) : atoms_(std::move(atoms)) {
  if (atoms_.empty())
    throw std::invalid_argument("WeightedAtomSet: empty atom list");
  double sum = 0.0;
  for (const Atom& a : atoms_) {
    if (!std::isfinite(a.weight) || a.weight < 0.0)
      throw std::invalid_argument("WeightedAtomSet: weights must be finite and >= 0");
    sum += a.weight;
  }
  if (std::abs(sum - 1.0) > 1e-9)
    throw std::invalid_argument("WeightedAtomSet: weights sum to " +
                                std::to_string(sum) + ", expected 1");
  for (Atom& a : atoms_) a.weight /= sum;
}

WeightedAtomSet::WeightedAtomSet(std::vector<ScoreValue> values,
                                 std::vector<double> weights)
    : WeightedAtomSet([&] {
        if (values.size() != weights.size())
          throw std::invalid_argument("WeightedAtomSet: size mismatch");
        std::vector<Atom> atoms(values.size());
        for (std::size_t i = 0; i < values.size(); ++i)
          atoms[i] = {values[i], weights[i]};
        return atoms;
      }()) {}

WeightedAtomSet WeightedAtomSet::uniform(std::vector<ScoreValue> values) {
  const double w = 1.0 / static_cast<double>(values.size());
  std::vector<Atom> atoms(values.size());
  for (std::size_t i = 0; i < values.size(); ++i) atoms[i] = {values[i], w};
  return WeightedAtomSet(std::move(atoms));
}

namespace {

// Stable value-sorted view; ties keep insertion order.
std::vector<std::size_t> sorted_order(const WeightedAtomSet& dist) {
  std::vector<std::size_t> idx(dist.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
    return dist.atom(a).value < dist.atom(b).value;
  });
  return idx;
}

}  // namespace

ScoreValue weighted_quantile(double alpha, const WeightedAtomSet& dist) {
  if (!(alpha >= 0.0 && alpha <= 1.0))
    throw std::invalid_argument("weighted_quantile: alpha must lie in [0,1]");
  const std::vector<std::size_t> idx = sorted_order(dist);
  // Walk atoms in value order, accumulating left to right; the cumulative test
  // fires only where the next value differs, which merges tied atoms.  If the
  // scan exhausts (alpha = 1, or rounding left the total a hair under alpha),
  // the answer is the maximum atom.
  double cum = 0.0;
  for (std::size_t k = 0; k < idx.size(); ++k) {
    cum += dist.atom(idx[k]).weight;
    const bool group_end =
        k + 1 == idx.size() || dist.atom(idx[k]).value < dist.atom(idx[k + 1]).value;
    if (group_end && cum >= alpha) return dist.atom(idx[k]).value;
  }
  return dist.atom(idx.back()).value;
}

double cdf_at(const WeightedAtomSet& dist, const ScoreValue& t) {
  // Same accumulation order as the quantile scan, so the two sides of the
  // adjunction Q(alpha) <= t  <=>  cdf(t) >= alpha compare identical partial
  // sums.
  const std::vector<std::size_t> idx = sorted_order(dist);
  double cum = 0.0;
  for (std::size_t k : idx) {
    if (t < dist.atom(k).value) break;
    cum += dist.atom(k).weight;
  }
  return cum;
}

WeightedAtomSet substitute_atom(const WeightedAtomSet& dist, std::size_t index,
                                const ScoreValue& new_value) {
  if (index >= dist.size())
    throw std::invalid_argument("substitute_atom: index out of range");
  std::vector<Atom> atoms = dist.atoms();
  atoms[index].value = new_value;
  // Weights are untouched and were already normalized.
  return WeightedAtomSet(std::move(atoms));
}

}  // namespace lcp
