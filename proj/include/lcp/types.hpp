#pragma once

#include <Eigen/Dense>

namespace lcp {

using Scalar = double;
using Index = Eigen::Index;
using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

// A regression sample set: one feature row per observation.
struct Dataset {
  Matrix x;  // n x p
  Vector y;  // n
  Index size() const { return y.size(); }
};

}  // namespace lcp
