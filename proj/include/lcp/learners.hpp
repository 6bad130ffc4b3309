#pragma once

#include <functional>

#include "lcp/types.hpp"

namespace lcp {

using Predictor = std::function<double(const Vector&)>;
using Learner = std::function<Predictor(const Dataset&)>;

// mu(x) = mean(y), ignoring the features.
Learner constant_mean_learner();

// Ordinary least squares with an intercept column.
Learner least_squares_learner();

// Ridge with an unpenalized intercept; lambda > 0.
Learner ridge_learner(double lambda);

// Out-of-fold absolute residuals |y_i - mu^{-fold(i)}(x_i)| with round-robin
// fold assignment i mod folds.  A learner failure aborts with the fold index
// in the message.
Vector cv_scores(const Dataset& data, int folds, const Learner& learner);

}  // namespace lcp
