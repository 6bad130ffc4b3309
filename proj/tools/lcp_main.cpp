// Batch front end with three subcommands:
//
//   lcp simulate   coverage experiments on the built-in generators
//   lcp predict    intervals for a test CSV calibrated on another CSV
//   lcp tune       bandwidth-selection report for a calibration CSV
//
// Each subcommand is a pure function of (config file, flags, seed) to output
// bytes.  Flags override config-file entries; the LCP_SEED environment
// variable fills --seed only when neither is given.  Exit codes: 0 success,
// 2 usage error, 3 data error, 4 infeasibility (no eligible bandwidth, or no
// feasible level on any test row).

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <iostream>
#include <limits>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "lcp/calibration.hpp"
#include "lcp/csv.hpp"
#include "lcp/intervals.hpp"
#include "lcp/learners.hpp"
#include "lcp/localizer.hpp"
#include "lcp/simbench.hpp"
#include "lcp/tuning.hpp"
#include "lcp/types.hpp"

namespace {

using lcp::Index;
using lcp::Matrix;
using lcp::ScoreValue;
using lcp::Vector;

constexpr int kExitUsage = 2;
constexpr int kExitData = 3;
constexpr int kExitInfeasible = 4;

// Problems with the user's files (unreadable, malformed, inconsistent
// schema), as opposed to problems with their flags.
struct DataError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// ---------------------------------------------------------------------------
// input

lcp::csv::Table read_table_checked(const std::string& path) {
  try {
    return lcp::csv::read_table_file(path);
  } catch (const std::exception& e) {
    throw DataError(e.what());
  }
}

int require_column(const std::string& path, const lcp::csv::Table& t,
                   const std::string& name, const char* what) {
  const int c = t.column(name);
  if (c < 0)
    throw DataError(path + ": no " + what + " column '" + name + "'");
  return c;
}

// Numeric cell with a row-addressed diagnostic; data rows count from 1.
double cell_value(const std::string& path, const lcp::csv::Table& t,
                  std::size_t r, int c) {
  try {
    return lcp::csv::parse_double(t.rows[r][static_cast<std::size_t>(c)]);
  } catch (const std::exception& e) {
    throw DataError(path + ", data row " + std::to_string(r + 1) + ", column '" +
                    t.header[static_cast<std::size_t>(c)] + "': " + e.what());
  }
}

double finite_cell(const std::string& path, const lcp::csv::Table& t,
                   std::size_t r, int c, const char* what) {
  const double v = cell_value(path, t, r, c);
  if (!std::isfinite(v))
    throw DataError(path + ", data row " + std::to_string(r + 1) + ", column '" +
                    t.header[static_cast<std::size_t>(c)] + "': " + what +
                    " must be finite");
  return v;
}

double weight_cell(const std::string& path, const lcp::csv::Table& t,
                   std::size_t r, int c) {
  const double w = cell_value(path, t, r, c);
  if (!(std::isfinite(w) && w > 0.0))
    throw DataError(path + ", data row " + std::to_string(r + 1) + ", column '" +
                    t.header[static_cast<std::size_t>(c)] +
                    "': importance weight must be a positive finite number");
  return w;
}

lcp::Learner make_learner(const std::string& spec) {
  if (spec == "mean") return lcp::constant_mean_learner();
  if (spec == "ls") return lcp::least_squares_learner();
  if (spec.rfind("ridge:", 0) == 0) {
    double lambda = 0.0;
    try {
      lambda = lcp::csv::parse_double(spec.substr(6));
    } catch (const std::exception&) {
      throw std::invalid_argument("bad predictor '" + spec + "'");
    }
    return lcp::ridge_learner(lambda);
  }
  throw std::invalid_argument("unknown predictor '" + spec +
                              "' (want mean, ls or ridge:lambda)");
}

lcp::LocalizerKind kind_from_name(const std::string& name) {
  using lcp::LocalizerKind;
  for (LocalizerKind k : {LocalizerKind::Constant, LocalizerKind::DistanceBox,
                          LocalizerKind::Knn, LocalizerKind::Gaussian,
                          LocalizerKind::Exponential, LocalizerKind::ShiftKnn})
    if (lcp::localizer_kind_name(k) == name) return k;
  throw std::invalid_argument("unknown localizer kind '" + name + "'");
}

// Calibration file, fully digested: every column not claimed by the score /
// response / weight flags is a feature, in file order.  In predictor mode the
// scores are out-of-fold absolute residuals (round-robin folds) and `mu` is
// the same learner refit on the whole file.
struct CalibrationData {
  Matrix x;
  std::vector<std::string> feature_names;
  std::vector<ScoreValue> scores;
  lcp::Predictor mu;  // empty in score-column mode
  Vector weights;     // size 0 when no weight column was named
};

CalibrationData load_calibration(const std::string& path, const std::string& score_col,
                                 const std::string& y_col, const std::string& predictor,
                                 const std::string& weight_col) {
  const auto t = read_table_checked(path);
  const bool fit = !predictor.empty();
  const int special = require_column(path, t, fit ? y_col : score_col,
                                     fit ? "response" : "score");
  const int wcol =
      weight_col.empty() ? -1 : require_column(path, t, weight_col, "weight");

  CalibrationData out;
  std::vector<int> feat;
  for (std::size_t j = 0; j < t.header.size(); ++j) {
    const int c = static_cast<int>(j);
    if (c == special || c == wcol) continue;
    feat.push_back(c);
    out.feature_names.push_back(t.header[j]);
  }
  if (feat.empty()) throw DataError(path + ": no feature columns left");
  const Index n = static_cast<Index>(t.rows.size());
  if (n == 0) throw DataError(path + ": no data rows");

  out.x.resize(n, static_cast<Index>(feat.size()));
  Vector special_vals(n);
  if (wcol >= 0) out.weights.resize(n);
  for (Index i = 0; i < n; ++i) {
    const auto r = static_cast<std::size_t>(i);
    for (std::size_t k = 0; k < feat.size(); ++k)
      out.x(i, static_cast<Index>(k)) = finite_cell(path, t, r, feat[k], "feature");
    special_vals[i] = cell_value(path, t, r, special);
    if (wcol >= 0) out.weights[i] = weight_cell(path, t, r, wcol);
  }

  if (fit) {
    for (Index i = 0; i < n; ++i)
      if (!std::isfinite(special_vals[i]))
        throw DataError(path + ", data row " + std::to_string(i + 1) +
                        ": response must be finite");
    if (n < 2) throw DataError(path + ": need at least 2 rows to fit a predictor");
    const lcp::Dataset data{out.x, special_vals};
    const lcp::Learner learner = make_learner(predictor);
    const int folds = static_cast<int>(std::min<Index>(5, n));
    Vector res;
    try {
      res = lcp::cv_scores(data, folds, learner);
      out.mu = learner(data);
    } catch (const std::exception& e) {
      throw DataError(path + ": predictor fit failed: " + e.what());
    }
    for (Index i = 0; i < n; ++i) {
      if (!std::isfinite(res[i]))
        throw DataError(path + ": predictor produced a non-finite residual on data row " +
                        std::to_string(i + 1));
      out.scores.push_back(ScoreValue(res[i]));
    }
  } else {
    for (Index i = 0; i < n; ++i) {
      const double v = special_vals[i];
      if (std::isinf(v) && v > 0.0) {
        out.scores.push_back(ScoreValue::infinity());
        continue;
      }
      if (!(std::isfinite(v) && v >= 0.0))
        throw DataError(path + ", data row " + std::to_string(i + 1) +
                        ": score must be nonnegative (or inf)");
      out.scores.push_back(ScoreValue(v));
    }
  }
  return out;
}

// Test file: must offer every calibration feature column by name (extras are
// ignored), plus the weight column when one was named.
struct TestData {
  Matrix x;
  Vector weights;  // size 0 when no weight column was named
};

TestData load_test(const std::string& path, const std::vector<std::string>& feature_names,
                   const std::string& weight_col) {
  const auto t = read_table_checked(path);
  std::vector<int> feat;
  for (const auto& name : feature_names)
    feat.push_back(require_column(path, t, name, "feature"));
  const int wcol =
      weight_col.empty() ? -1 : require_column(path, t, weight_col, "weight");

  TestData out;
  const Index n = static_cast<Index>(t.rows.size());
  out.x.resize(n, static_cast<Index>(feat.size()));
  if (wcol >= 0) out.weights.resize(n);
  for (Index i = 0; i < n; ++i) {
    const auto r = static_cast<std::size_t>(i);
    for (std::size_t k = 0; k < feat.size(); ++k)
      out.x(i, static_cast<Index>(k)) = finite_cell(path, t, r, feat[k], "feature");
    if (wcol >= 0) out.weights[i] = weight_cell(path, t, r, wcol);
  }
  return out;
}

// ---------------------------------------------------------------------------
// output

void write_output(const std::string& path, const std::string& text) {
  if (path == "-") {
    std::cout << text;
    return;
  }
  std::ofstream f(path);
  if (!f) throw DataError("cannot write '" + path + "'");
  f << text;
  f.flush();
  if (!f) throw DataError("write failed for '" + path + "'");
}

// ---------------------------------------------------------------------------
// simulate

struct SimArgs {
  std::string gen = "example1a";
  Index n = 500;
  int reps = 1000;
  std::vector<double> alphas{0.95};
  std::vector<std::string> methods{"cb"};
  std::uint64_t seed = 0;
  int grid_points = 200;
  std::string out_path = "-";
};

int cmd_simulate(const SimArgs& a) {
  lcp::ExperimentConfig cfg;
  cfg.generator = a.gen;
  cfg.n = a.n;
  cfg.repetitions = a.reps;
  cfg.alphas = a.alphas;
  cfg.methods = a.methods;
  cfg.seed = a.seed;
  cfg.alpha_grid_points = a.grid_points;
  write_output(a.out_path, lcp::coverage_table_csv(lcp::run_coverage_experiment(cfg)));
  return 0;
}

// ---------------------------------------------------------------------------
// predict

struct PredictArgs {
  std::string calib_path;
  std::string test_path;
  std::string out_path = "-";
  std::string localizer = "constant";
  std::string score_col = "score";
  std::string y_col = "y";
  std::string predictor;
  std::string weight_col;
  double alpha = 0.9;
  int grid_points = 200;
  std::uint64_t seed = 0;
};

// "auto" / "auto:kind" runs bandwidth selection on the calibration data over
// the fallback grid; anything else is taken as a literal localizer spec.
lcp::LocalizerSpec resolve_localizer(const std::string& text,
                                     const CalibrationData& calib, double alpha,
                                     std::uint64_t seed) {
  if (text != "auto" && text.rfind("auto:", 0) != 0)
    return lcp::parse_localizer_spec(text);
  const std::string kind_name = text == "auto" ? "box" : text.substr(5);
  const lcp::LocalizerKind kind = kind_from_name(kind_name);
  std::mt19937_64 rng(seed);
  const lcp::TuningReport report = lcp::tune_bandwidth(
      calib.x, calib.scores, kind,
      lcp::default_bandwidth_grid(kind, calib.x.rows()), alpha, rng);
  lcp::LocalizerSpec spec;
  spec.kind = kind;
  spec.h = report.h_star;
  return spec;
}

int cmd_predict(const PredictArgs& a) {
  const CalibrationData calib = load_calibration(a.calib_path, a.score_col, a.y_col,
                                                 a.predictor, a.weight_col);
  const TestData test = load_test(a.test_path, calib.feature_names, a.weight_col);
  const lcp::LocalizerSpec localizer =
      resolve_localizer(a.localizer, calib, a.alpha, a.seed);

  const Index n = calib.x.rows();
  Vector u;  // empty keeps the model's all-ones default
  if (calib.weights.size() > 0) {
    u.resize(n + 1);
    u.head(n) = calib.weights;
    u[n] = 1.0;  // placeholder; replaced with each test row's weight below
  }
  lcp::CalibrationModel model =
      lcp::make_calibration_model(calib.x, calib.scores, localizer, a.alpha, u,
                                  lcp::default_alpha_grid(a.alpha, a.grid_points));

  const double nan = std::numeric_limits<double>::quiet_NaN();
  const double inf = std::numeric_limits<double>::infinity();
  std::ostringstream out;
  lcp::csv::write_row(out, {"row", "alpha_tilde", "q", "lo", "hi", "is_infinite"});
  Index feasible_rows = 0;
  for (Index r = 0; r < test.x.rows(); ++r) {
    if (test.weights.size() > 0) model.importance_weights[n] = test.weights[r];
    const Vector x = test.x.row(r).transpose();
    const lcp::AlphaSearchResult search = lcp::grid_search_alpha(model, x);
    if (search.feasible) ++feasible_rows;
    const ScoreValue q = search.witness.bar_v_star;
    double lo = nan, hi = nan;
    if (calib.mu) {
      if (q.is_infinite()) {
        lo = -inf;
        hi = inf;
      } else {
        const double center = calib.mu(x);
        lo = center - q.value();
        hi = center + q.value();
      }
    }
    lcp::csv::write_row(out, {std::to_string(r),
                              lcp::csv::format_double(search.alpha_tilde),
                              lcp::csv::format_double(q.as_double()),
                              lcp::csv::format_double(lo), lcp::csv::format_double(hi),
                              q.is_infinite() ? "1" : "0"});
  }
  write_output(a.out_path, out.str());
  if (test.x.rows() > 0 && feasible_rows == 0) {
    std::cerr << "lcp predict: no feasible level on any test row\n";
    return kExitInfeasible;
  }
  return 0;
}

// ---------------------------------------------------------------------------
// tune

struct TuneArgs {
  std::string calib_path;
  std::string out_path = "-";
  std::string kind_name = "box";
  std::vector<double> h_grid;
  std::string score_col = "score";
  std::string y_col = "y";
  std::string predictor;
  std::string weight_col;
  double alpha = 0.9;
  double omega = 0.9;
  int bootstrap = 20;
  int axis = -1;
  std::uint64_t seed = 0;
};

int cmd_tune(const TuneArgs& a) {
  const CalibrationData calib = load_calibration(a.calib_path, a.score_col, a.y_col,
                                                 a.predictor, a.weight_col);
  const lcp::LocalizerKind kind = kind_from_name(a.kind_name);
  const std::vector<double> grid =
      a.h_grid.empty() ? lcp::default_bandwidth_grid(kind, calib.x.rows()) : a.h_grid;
  lcp::TuneOptions opt;
  opt.omega = a.omega;
  opt.bootstrap_rounds = a.bootstrap;
  if (a.axis >= 0) opt.axis = a.axis;
  std::mt19937_64 rng(a.seed);
  const lcp::TuningReport report =
      lcp::tune_bandwidth(calib.x, calib.scores, kind, grid, a.alpha, rng, opt);
  write_output(a.out_path, lcp::tuning_report_csv(report));
  std::cout << "selected h* = " << lcp::csv::format_double(report.h_star) << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Localized conformal prediction toolkit"};
  app.require_subcommand(1);
  // One INI file can configure any subcommand: option names as keys inside a
  // [simulate] / [predict] / [tune] section.  Command-line flags win over the
  // file; the file wins over LCP_SEED.
  app.set_config("--config", "",
                 "INI file with [simulate]/[predict]/[tune] sections whose keys "
                 "are the long option names");

  SimArgs sim;
  PredictArgs pred;
  TuneArgs tun;

  CLI::App* s = app.add_subcommand(
      "simulate", "Run coverage experiments on the built-in generators");
  s->fallthrough();
  s->add_option("--gen", sim.gen,
                "Generator id: example1a|example1b|example1c|counterexample2[:alpha]|"
                "covshift|highdim:CASE:p")
      ->capture_default_str();
  s->add_option("--n", sim.n, "Calibration sample size")->capture_default_str();
  s->add_option("--reps", sim.reps, "Monte Carlo repetitions")->capture_default_str();
  s->add_option("--alpha", sim.alphas, "Target coverage levels (comma separated)")
      ->delimiter(',')
      ->capture_default_str();
  s->add_option("--method", sim.methods,
                "Methods (comma separated): cb|wcb|naive-KIND:h|lcb-KIND:h|"
                "lcb-auto:KIND|slcb:h")
      ->delimiter(',')
      ->capture_default_str();
  s->add_option("--grid-points", sim.grid_points, "Effective-level grid resolution")
      ->capture_default_str();
  s->add_option("--seed", sim.seed, "Base seed")
      ->envname("LCP_SEED")
      ->capture_default_str();
  s->add_option("--out", sim.out_path, "Output CSV path, - for stdout")
      ->capture_default_str();

  CLI::App* p = app.add_subcommand(
      "predict", "Calibrate on one CSV and emit intervals for another");
  p->fallthrough();
  p->add_option("--calib", pred.calib_path, "Calibration CSV")->required();
  p->add_option("--test", pred.test_path, "Test CSV (same feature columns)")
      ->required();
  p->add_option("--alpha", pred.alpha, "Target coverage level")->capture_default_str();
  p->add_option("--localizer", pred.localizer,
                "Localizer spec kind[:h[:axis]], or auto[:kind] to tune on the "
                "calibration data")
      ->capture_default_str();
  p->add_option("--score-col", pred.score_col, "Score column name")
      ->capture_default_str();
  p->add_option("--y-col", pred.y_col, "Response column name (predictor mode)")
      ->capture_default_str();
  p->add_option("--predictor", pred.predictor,
                "Fit mu on the calibration file: mean|ls|ridge:lambda; scores "
                "become out-of-fold absolute residuals");
  p->add_option("--weight-col", pred.weight_col,
                "Importance-weight column (must exist in both files)");
  p->add_option("--grid-points", pred.grid_points, "Effective-level grid resolution")
      ->capture_default_str();
  p->add_option("--seed", pred.seed, "Seed for auto bandwidth selection")
      ->envname("LCP_SEED")
      ->capture_default_str();
  p->add_option("--out", pred.out_path, "Output CSV path, - for stdout")
      ->capture_default_str();

  CLI::App* t = app.add_subcommand(
      "tune", "Bandwidth-selection report for a calibration CSV");
  t->fallthrough();
  t->add_option("--calib", tun.calib_path, "Calibration CSV")->required();
  t->add_option("--localizer", tun.kind_name,
                "Localizer kind: constant|box|knn|gauss|exp")
      ->capture_default_str();
  t->add_option("--h-grid", tun.h_grid,
                "Candidate bandwidths, ascending (comma separated); defaults to a "
                "kind-dependent fallback grid")
      ->delimiter(',');
  t->add_option("--alpha", tun.alpha, "Level the thresholds are certified at")
      ->capture_default_str();
  t->add_option("--omega", tun.omega,
                "Eligibility: infinite-threshold fraction must stay below 1-omega")
      ->capture_default_str();
  t->add_option("--bootstrap", tun.bootstrap, "Stability draws per sample")
      ->capture_default_str();
  t->add_option("--axis", tun.axis, "Restrict the localizer to one feature index");
  t->add_option("--score-col", tun.score_col, "Score column name")
      ->capture_default_str();
  t->add_option("--y-col", tun.y_col, "Response column name (predictor mode)")
      ->capture_default_str();
  t->add_option("--predictor", tun.predictor,
                "Fit mu on the calibration file: mean|ls|ridge:lambda");
  t->add_option("--weight-col", tun.weight_col,
                "Column to exclude from the features (weights are unused here)");
  t->add_option("--seed", tun.seed, "Seed for the bootstrap draws")
      ->envname("LCP_SEED")
      ->capture_default_str();
  t->add_option("--out", tun.out_path, "Report CSV path, - for stdout")
      ->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  try {
    if (s->parsed()) return cmd_simulate(sim);
    if (p->parsed()) return cmd_predict(pred);
    if (t->parsed()) return cmd_tune(tun);
  } catch (const lcp::NoEligibleBandwidth& e) {
    std::cerr << "lcp: " << e.what() << "\n";
    return kExitInfeasible;
  } catch (const DataError& e) {
    std::cerr << "lcp: " << e.what() << "\n";
    return kExitData;
  } catch (const std::invalid_argument& e) {
    std::cerr << "lcp: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "lcp: unexpected error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
