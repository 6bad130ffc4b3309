#pragma once

#include <cstdint>
#include <functional>
#include <limits>
#include <random>
#include <string>
#include <vector>

#include "lcp/intervals.hpp"
#include "lcp/localizer.hpp"
#include "lcp/types.hpp"

namespace lcp {

// One synthetic repetition: a calibration set plus a single test pair.
struct SimDraw {
  Dataset calib;
  Vector x_test;
  double y_test = 0.0;
};

// X ~ N(0,1), Y = X + eps; `noise` selects the conditional scale of eps:
// 'a' constant 1, 'b' 1/(2|x|+1), 'c' |x|/(|x|+1).
SimDraw gen_example1(Index n, char noise, std::mt19937_64& rng);

// Three-point design whose response scatter vanishes at x = 0: X = +-1 with
// probability (1-alpha)/(2-alpha) each, otherwise 0, and Y = X + U[-2|X|, 2|X|].
// A fixed-level local quantile under-covers here; the level search does not.
SimDraw gen_counterexample2(Index n, double alpha, std::mt19937_64& rng);

// Calibration features N(0,1), test feature N(3,1), Y = X + N(0,1).
SimDraw gen_covariate_shift(Index n, std::mt19937_64& rng);
// Density ratio of the test to the calibration feature law: exp(3x - 4.5).
double covariate_shift_weight(const Vector& x);

// Y = x_1 + x_2 + x_3 + eps with X_ij ~ U[-3,3] and p >= 3 features; case 'a'
// has unit noise, case 'b' scale 0.5 when |x_p| <= 1 and 2 otherwise.
SimDraw gen_highdim(Index n, Index p, char noise_case, std::mt19937_64& rng);

// A draw routine bundled with the design's fixed pieces: the identifier
// echoed into result rows, the experiment's score function, and the
// importance-weight function when the design ships one.
struct GeneratorSpec {
  std::string id;
  std::function<SimDraw(Index, std::mt19937_64&)> draw;
  ScoreFunction score;
  std::function<double(const Vector&)> shift_weight;  // null unless shifted
};

// "example1a".."example1c" | "counterexample2[:alpha]" | "covshift" |
// "highdim:a:p" | "highdim:b:p"
GeneratorSpec make_generator(const std::string& id);

// How a repetition turns a draw into one prediction interval.
struct MethodSpec {
  enum class Kind {
    Split,          // pooled conformal: "cb"
    Lcp,            // searched level: "lcb-<localizer>" or "lcb-auto:<kind>"
    NaiveLcp,       // level pinned at alpha: "naive-<localizer>"
    WeightedSplit,  // shift-weighted pooled conformal: "wcb"
    ShiftLcp,       // searched level with shift weights: "slcb:<neighbors>"
  };
  Kind kind = Kind::Split;
  std::string id;
  LocalizerSpec localizer;  // meaningful for the localized kinds
  bool auto_tuned = false;  // bandwidth resolved on a separate tuning draw
};

MethodSpec parse_method(const std::string& text);

struct ExperimentConfig {
  std::string generator = "example1a";
  Index n = 500;
  int repetitions = 1000;
  std::vector<double> alphas{0.95};
  std::vector<std::string> methods{"cb"};
  std::uint64_t seed = 0;
  int alpha_grid_points = 200;  // level-search resolution
};

struct CoverageRow {
  std::string method;
  double alpha = 0.0;
  std::string generator;
  // Bandwidth behind the row (tuned value for auto methods); NaN for the
  // pooled methods, which have none.
  double h = std::numeric_limits<double>::quiet_NaN();
  double coverage = 0.0;
  double se = 0.0;          // binomial standard error of the coverage
  double mean_width = 0.0;  // over finite intervals; +inf when none finite
  double inf_frac = 0.0;
};

struct CoverageTable {
  std::vector<CoverageRow> rows;
};

// One row per (method, alpha).  Every repetition draws one calibration set
// and one test pair, shared by all methods and levels; repetitions use
// derived seeds so the table is reproducible and order-independent.
CoverageTable run_coverage_experiment(const ExperimentConfig& config);

// Columns: method, alpha, generator, h, coverage, se, mean_width, inf_frac.
std::string coverage_table_csv(const CoverageTable& table);

}  // namespace lcp
