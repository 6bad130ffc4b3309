#include "lcp/learners.hpp"

#include <cmath>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

namespace lcp {

namespace {

Matrix with_intercept(const Matrix& x) {
  Matrix d(x.rows(), x.cols() + 1);
  d.col(0).setOnes();
  d.rightCols(x.cols()) = x;
  return d;
}

Predictor linear_predictor(Vector beta) {
  return [beta = std::move(beta)](const Vector& x) {
    if (x.size() + 1 != beta.size())
      throw std::invalid_argument("linear predictor: feature dimension mismatch");
    double out = beta[0];
    for (Index j = 0; j < x.size(); ++j) out += beta[j + 1] * x[j];
    return out;
  };
}

void require_nonempty(const Dataset& d, const char* who) {
  if (d.size() == 0) throw std::invalid_argument(std::string(who) + ": empty data");
}

}  // namespace

Learner constant_mean_learner() {
  return [](const Dataset& d) {
    require_nonempty(d, "constant-mean learner");
    const double m = d.y.mean();
    return Predictor([m](const Vector&) { return m; });
  };
}

Learner least_squares_learner() {
  return [](const Dataset& d) {
    require_nonempty(d, "least-squares learner");
    const Matrix design = with_intercept(d.x);
    Vector beta = design.colPivHouseholderQr().solve(d.y);
    if (!beta.allFinite())
      throw std::runtime_error("least-squares learner: singular fit");
    return linear_predictor(std::move(beta));
  };
}

Learner ridge_learner(double lambda) {
  if (!(lambda > 0.0) || !std::isfinite(lambda))
    throw std::invalid_argument("ridge learner: lambda must be positive");
  return [lambda](const Dataset& d) {
    require_nonempty(d, "ridge learner");
    const Matrix design = with_intercept(d.x);
    Matrix gram = design.transpose() * design;
    for (Index j = 1; j < gram.rows(); ++j) gram(j, j) += lambda;
    Vector beta = gram.ldlt().solve(design.transpose() * d.y);
    if (!beta.allFinite()) throw std::runtime_error("ridge learner: singular fit");
    return linear_predictor(std::move(beta));
  };
}

Vector cv_scores(const Dataset& data, int folds, const Learner& learner) {
  const Index m = data.size();
  if (folds < 2 || static_cast<Index>(folds) > m)
    throw std::invalid_argument("cv_scores: folds must lie in [2, n]");
  Vector out(m);
  for (int f = 0; f < folds; ++f) {
    std::vector<Index> train, held;
    for (Index i = 0; i < m; ++i)
      (static_cast<int>(i % folds) == f ? held : train).push_back(i);

    Dataset tr;
    tr.x.resize(static_cast<Index>(train.size()), data.x.cols());
    tr.y.resize(static_cast<Index>(train.size()));
    for (std::size_t k = 0; k < train.size(); ++k) {
      tr.x.row(static_cast<Index>(k)) = data.x.row(train[k]);
      tr.y[static_cast<Index>(k)] = data.y[train[k]];
    }

    Predictor mu;
    try {
      mu = learner(tr);
    } catch (const std::exception& e) {
      throw std::runtime_error("cv_scores: learner failed on fold " +
                               std::to_string(f) + ": " + e.what());
    }
    for (Index i : held) out[i] = std::abs(data.y[i] - mu(data.x.row(i).transpose()));
  }
  return out;
}

}  // namespace lcp
