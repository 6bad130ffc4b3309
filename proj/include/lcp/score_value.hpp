#pragma once

#include <cmath>
#include <compare>
#include <limits>
#include <stdexcept>
#include <string>

namespace lcp {

// A nonconformity score: a nonnegative finite real, or the +infinity atom that
// calibration distributions place on the unseen test score.  The infinite case
// is a tagged state rather than an IEEE value so it can never leak into
// arithmetic or get mangled by serialization.
class ScoreValue {
 public:
  ScoreValue() : v_(0.0), inf_(false) {}

  explicit ScoreValue(double v) : v_(v), inf_(false) {
    if (!std::isfinite(v) || v < 0.0)
      throw std::invalid_argument("ScoreValue: finite value must be >= 0, got " +
                                  std::to_string(v));
  }

  static ScoreValue infinity() {
    ScoreValue s;
    s.inf_ = true;
    s.v_ = std::numeric_limits<double>::quiet_NaN();
    return s;
  }

  bool is_infinite() const { return inf_; }

  // Finite payload; calling this on the infinite atom is a logic error.
  double value() const {
    if (inf_) throw std::logic_error("ScoreValue: value() on infinite score");
    return v_;
  }

  // Lossy view used for interval arithmetic and CSV output: +inf maps to the
  // IEEE infinity.
  double as_double() const {
    return inf_ ? std::numeric_limits<double>::infinity() : v_;
  }

  friend bool operator==(const ScoreValue& a, const ScoreValue& b) {
    if (a.inf_ || b.inf_) return a.inf_ && b.inf_;
    return a.v_ == b.v_;
  }

  friend std::strong_ordering operator<=>(const ScoreValue& a, const ScoreValue& b) {
    if (a.inf_ && b.inf_) return std::strong_ordering::equal;
    if (a.inf_) return std::strong_ordering::greater;
    if (b.inf_) return std::strong_ordering::less;
    if (a.v_ < b.v_) return std::strong_ordering::less;
    if (a.v_ > b.v_) return std::strong_ordering::greater;
    return std::strong_ordering::equal;
  }

 private:
  double v_;
  bool inf_;
};

}  // namespace lcp
