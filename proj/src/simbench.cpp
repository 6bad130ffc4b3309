#include "lcp/simbench.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

#include "lcp/calibration.hpp"
#include "lcp/csv.hpp"
#include "lcp/rng.hpp"
#include "lcp/tuning.hpp"

namespace lcp {

namespace {

// Seed-stream tags so the main repetition stream, the tuning draw and the
// tuning bootstrap never collide.
constexpr std::uint64_t kRepStream = 1;
constexpr std::uint64_t kTuneDraw = 2;
constexpr std::uint64_t kTuneRng = 3;

ScoreFunction identity_residual() {
  return abs_residual_score([](const Vector& x) { return x[0]; });
}

}  // namespace

SimDraw gen_example1(Index n, char noise, std::mt19937_64& rng) {
  if (n < 1) throw std::invalid_argument("gen_example1: n must be positive");
  if (noise != 'a' && noise != 'b' && noise != 'c')
    throw std::invalid_argument("gen_example1: noise must be 'a', 'b' or 'c'");
  const auto scale = [noise](double x) {
    const double ax = std::abs(x);
    if (noise == 'a') return 1.0;
    if (noise == 'b') return 1.0 / (2.0 * ax + 1.0);
    return ax / (ax + 1.0);
  };
  std::normal_distribution<double> normal(0.0, 1.0);
  SimDraw d;
  d.calib.x.resize(n, 1);
  d.calib.y.resize(n);
  for (Index i = 0; i < n; ++i) {
    const double x = normal(rng);
    d.calib.x(i, 0) = x;
    d.calib.y[i] = x + scale(x) * normal(rng);
  }
  const double tx = normal(rng);
  d.x_test = Vector::Constant(1, tx);
  d.y_test = tx + scale(tx) * normal(rng);
  return d;
}

SimDraw gen_counterexample2(Index n, double alpha, std::mt19937_64& rng) {
  if (n < 1) throw std::invalid_argument("gen_counterexample2: n must be positive");
  if (!(alpha > 0.0 && alpha < 1.0))
    throw std::invalid_argument("gen_counterexample2: alpha must be in (0,1)");
  const double p_side = (1.0 - alpha) / (2.0 - alpha);  // mass on each of +-1
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  std::uniform_real_distribution<double> noise;
  using NoiseParam = std::uniform_real_distribution<double>::param_type;
  const auto draw_pair = [&](double& x_out, double& y_out) {
    const double u = unif(rng);
    const double x = u < p_side ? -1.0 : (u < 2.0 * p_side ? 1.0 : 0.0);
    // The noise draw happens for every sample (a degenerate [0,0] at x = 0)
    // so the stream position does not depend on the drawn x.
    const double eps = noise(rng, NoiseParam(-2.0 * std::abs(x), 2.0 * std::abs(x)));
    x_out = x;
    y_out = x + eps;
  };
  SimDraw d;
  d.calib.x.resize(n, 1);
  d.calib.y.resize(n);
  for (Index i = 0; i < n; ++i) draw_pair(d.calib.x(i, 0), d.calib.y[i]);
  double tx = 0.0;
  d.x_test = Vector::Zero(1);
  draw_pair(tx, d.y_test);
  d.x_test[0] = tx;
  return d;
}

SimDraw gen_covariate_shift(Index n, std::mt19937_64& rng) {
  if (n < 1) throw std::invalid_argument("gen_covariate_shift: n must be positive");
  std::normal_distribution<double> normal(0.0, 1.0);
  SimDraw d;
  d.calib.x.resize(n, 1);
  d.calib.y.resize(n);
  for (Index i = 0; i < n; ++i) {
    const double x = normal(rng);
    d.calib.x(i, 0) = x;
    d.calib.y[i] = x + normal(rng);
  }
  const double tx = 3.0 + normal(rng);
  d.x_test = Vector::Constant(1, tx);
  d.y_test = tx + normal(rng);
  return d;
}

double covariate_shift_weight(const Vector& x) {
  // N(3,1) and N(0,1) densities share the quadratic term, so the ratio is
  // exp(3x - 9/2).
  return std::exp(3.0 * x[0] - 4.5);
}

SimDraw gen_highdim(Index n, Index p, char noise_case, std::mt19937_64& rng) {
  if (n < 1) throw std::invalid_argument("gen_highdim: n must be positive");
  if (p < 3) throw std::invalid_argument("gen_highdim: need at least 3 features");
  if (noise_case != 'a' && noise_case != 'b')
    throw std::invalid_argument("gen_highdim: case must be 'a' or 'b'");
  std::uniform_real_distribution<double> ux(-3.0, 3.0);
  std::normal_distribution<double> normal(0.0, 1.0);
  const auto scale = [noise_case](double x_last) {
    if (noise_case == 'a') return 1.0;
    return std::abs(x_last) <= 1.0 ? 0.5 : 2.0;
  };
  SimDraw d;
  d.calib.x.resize(n, p);
  d.calib.y.resize(n);
  const auto draw_row = [&](Vector& row, double& y) {
    for (Index j = 0; j < p; ++j) row[j] = ux(rng);
    y = row[0] + row[1] + row[2] + scale(row[p - 1]) * normal(rng);
  };
  Vector row(p);
  for (Index i = 0; i < n; ++i) {
    draw_row(row, d.calib.y[i]);
    d.calib.x.row(i) = row;
  }
  d.x_test.resize(p);
  draw_row(d.x_test, d.y_test);
  return d;
}

GeneratorSpec make_generator(const std::string& id) {
  GeneratorSpec gen;
  gen.id = id;
  if (id == "example1a" || id == "example1b" || id == "example1c") {
    const char noise = id.back();
    gen.draw = [noise](Index n, std::mt19937_64& rng) {
      return gen_example1(n, noise, rng);
    };
    gen.score = identity_residual();
    return gen;
  }
  if (id.rfind("counterexample2", 0) == 0) {
    double alpha = 0.8;
    if (id.size() > 15) {
      if (id[15] != ':')
        throw std::invalid_argument("unknown generator: " + id);
      alpha = std::stod(id.substr(16));
    }
    gen.draw = [alpha](Index n, std::mt19937_64& rng) {
      return gen_counterexample2(n, alpha, rng);
    };
    gen.score = identity_residual();
    return gen;
  }
  if (id == "covshift") {
    gen.draw = [](Index n, std::mt19937_64& rng) {
      return gen_covariate_shift(n, rng);
    };
    gen.score = identity_residual();
    gen.shift_weight = covariate_shift_weight;
    return gen;
  }
  if (id.rfind("highdim:", 0) == 0) {
    const std::size_t second = id.find(':', 8);
    if (second == std::string::npos || second != 9)
      throw std::invalid_argument("unknown generator: " + id);
    const char noise_case = id[8];
    const Index p = static_cast<Index>(std::stol(id.substr(second + 1)));
    if (noise_case != 'a' && noise_case != 'b')
      throw std::invalid_argument("unknown generator: " + id);
    gen.draw = [noise_case, p](Index n, std::mt19937_64& rng) {
      return gen_highdim(n, p, noise_case, rng);
    };
    gen.score = abs_residual_score(
        [](const Vector& x) { return x[0] + x[1] + x[2]; });
    return gen;
  }
  throw std::invalid_argument("unknown generator: " + id);
}

MethodSpec parse_method(const std::string& text) {
  MethodSpec m;
  m.id = text;
  if (text == "cb") {
    m.kind = MethodSpec::Kind::Split;
    return m;
  }
  if (text == "wcb") {
    m.kind = MethodSpec::Kind::WeightedSplit;
    return m;
  }
  if (text.rfind("lcb-auto:", 0) == 0) {
    m.kind = MethodSpec::Kind::Lcp;
    m.auto_tuned = true;
    // Parse the kind with a placeholder bandwidth; tuning replaces it.
    m.localizer = parse_localizer_spec(text.substr(9) + ":2");
    return m;
  }
  if (text.rfind("lcb-", 0) == 0) {
    m.kind = MethodSpec::Kind::Lcp;
    m.localizer = parse_localizer_spec(text.substr(4));
    return m;
  }
  if (text.rfind("naive-", 0) == 0) {
    m.kind = MethodSpec::Kind::NaiveLcp;
    m.localizer = parse_localizer_spec(text.substr(6));
    return m;
  }
  if (text.rfind("slcb:", 0) == 0) {
    m.kind = MethodSpec::Kind::ShiftLcp;
    m.localizer.kind = LocalizerKind::ShiftKnn;
    m.localizer.h = std::stod(text.substr(5));
    return m;
  }
  throw std::invalid_argument("unknown method: " + text);
}

namespace {

// The concrete interval one method produces for one drawn repetition.
PredictionInterval evaluate_method(const MethodSpec& method,
                                   const LocalizerSpec& localizer,
                                   const GeneratorSpec& gen, const SimDraw& draw,
                                   const std::vector<ScoreValue>& scores,
                                   double alpha, int grid_points) {
  const auto interval = [](const PredictionSet& set) {
    return std::get<PredictionInterval>(set.value);
  };
  switch (method.kind) {
    case MethodSpec::Kind::Split:
      return interval(split_conformal_interval(scores, alpha, draw.x_test, gen.score));
    case MethodSpec::Kind::WeightedSplit: {
      if (!gen.shift_weight)
        throw std::invalid_argument("method wcb needs a generator with shift weights");
      const Index n = draw.calib.size();
      Vector w(n + 1);
      for (Index i = 0; i < n; ++i) w[i] = gen.shift_weight(draw.calib.x.row(i));
      w[n] = gen.shift_weight(draw.x_test);
      return interval(
          weighted_conformal_interval(scores, w, alpha, draw.x_test, gen.score));
    }
    case MethodSpec::Kind::NaiveLcp: {
      const auto model = make_calibration_model(draw.calib.x, scores, localizer, alpha);
      return interval(local_coverage_interval(model, draw.x_test, gen.score));
    }
    case MethodSpec::Kind::Lcp: {
      const auto model =
          make_calibration_model(draw.calib.x, scores, localizer, alpha, {},
                                 default_alpha_grid(alpha, grid_points));
      return interval(lcp_interval(model, draw.x_test, gen.score));
    }
    case MethodSpec::Kind::ShiftLcp: {
      if (!gen.shift_weight)
        throw std::invalid_argument("method slcb needs a generator with shift weights");
      LocalizerSpec spec = localizer;
      spec.shift_weight = gen.shift_weight;
      const Index n = draw.calib.size();
      Vector w(n + 1);
      for (Index i = 0; i < n; ++i) w[i] = gen.shift_weight(draw.calib.x.row(i));
      w[n] = gen.shift_weight(draw.x_test);
      const auto model =
          make_calibration_model(draw.calib.x, scores, spec, alpha, w,
                                 default_alpha_grid(alpha, grid_points));
      return interval(lcp_interval(model, draw.x_test, gen.score));
    }
  }
  throw std::logic_error("unreachable method kind");
}

}  // namespace

CoverageTable run_coverage_experiment(const ExperimentConfig& config) {
  if (config.repetitions < 1)
    throw std::invalid_argument("experiment: repetitions must be >= 1");
  if (config.alphas.empty() || config.methods.empty())
    throw std::invalid_argument("experiment: need at least one alpha and one method");
  for (double a : config.alphas)
    if (!(a > 0.0 && a < 1.0))
      throw std::invalid_argument("experiment: alpha must be in (0,1)");
  if (config.alpha_grid_points < 2)
    throw std::invalid_argument("experiment: alpha grid needs at least 2 points");

  const GeneratorSpec gen = make_generator(config.generator);
  std::vector<MethodSpec> methods;
  for (const auto& text : config.methods) methods.push_back(parse_method(text));

  // Resolve auto bandwidths per (method, alpha) on one shared independent
  // tuning draw, as the narrative "chosen using another generated data set"
  // prescribes; the repetition stream never sees these draws.
  const std::size_t n_alpha = config.alphas.size();
  std::vector<std::vector<LocalizerSpec>> resolved(
      methods.size(), std::vector<LocalizerSpec>(n_alpha));
  for (std::size_t mi = 0; mi < methods.size(); ++mi) {
    for (std::size_t ai = 0; ai < n_alpha; ++ai) {
      resolved[mi][ai] = methods[mi].localizer;
      if (!methods[mi].auto_tuned) continue;
      std::mt19937_64 draw_rng(derive_seed(config.seed, kTuneDraw));
      const SimDraw d0 = gen.draw(config.n, draw_rng);
      std::vector<ScoreValue> v0;
      for (Index i = 0; i < d0.calib.size(); ++i)
        v0.push_back(eval_score(gen.score, d0.calib.x.row(i), d0.calib.y[i]));
      std::mt19937_64 tune_rng(derive_seed(config.seed, kTuneRng, mi, ai));
      const auto report = tune_bandwidth(
          d0.calib.x, v0, methods[mi].localizer.kind,
          default_bandwidth_grid(methods[mi].localizer.kind, d0.calib.size()),
          config.alphas[ai], tune_rng);
      resolved[mi][ai].h = report.h_star;
    }
  }

  struct Accumulator {
    long covered = 0;
    long finite = 0;
    double width_sum = 0.0;
    long infinite = 0;
    long failures = 0;
  };
  std::vector<std::vector<Accumulator>> acc(methods.size(),
                                            std::vector<Accumulator>(n_alpha));

  for (int rep = 0; rep < config.repetitions; ++rep) {
    std::mt19937_64 rng(
        derive_seed(config.seed, kRepStream, static_cast<std::uint64_t>(rep)));
    const SimDraw draw = gen.draw(config.n, rng);
    std::vector<ScoreValue> scores;
    scores.reserve(static_cast<std::size_t>(draw.calib.size()));
    for (Index i = 0; i < draw.calib.size(); ++i)
      scores.push_back(eval_score(gen.score, draw.calib.x.row(i), draw.calib.y[i]));

    for (std::size_t mi = 0; mi < methods.size(); ++mi) {
      for (std::size_t ai = 0; ai < n_alpha; ++ai) {
        auto& a = acc[mi][ai];
        try {
          const PredictionInterval iv =
              evaluate_method(methods[mi], resolved[mi][ai], gen, draw, scores,
                              config.alphas[ai], config.alpha_grid_points);
          if (iv.infinite) {
            ++a.infinite;
            ++a.covered;
          } else {
            if (iv.lo <= draw.y_test && draw.y_test <= iv.hi) ++a.covered;
            a.width_sum += iv.hi - iv.lo;
            ++a.finite;
          }
        } catch (const std::exception&) {
          ++a.failures;
        }
      }
    }
  }

  CoverageTable table;
  for (std::size_t mi = 0; mi < methods.size(); ++mi) {
    const bool pooled = methods[mi].kind == MethodSpec::Kind::Split ||
                        methods[mi].kind == MethodSpec::Kind::WeightedSplit;
    for (std::size_t ai = 0; ai < n_alpha; ++ai) {
      const auto& a = acc[mi][ai];
      CoverageRow row;
      row.method = methods[mi].id;
      row.alpha = config.alphas[ai];
      row.generator = config.generator;
      if (!pooled) row.h = resolved[mi][ai].h;
      const long done = config.repetitions - a.failures;
      if (done > 0) {
        row.coverage = static_cast<double>(a.covered) / static_cast<double>(done);
        row.se = std::sqrt(row.coverage * (1.0 - row.coverage) /
                           static_cast<double>(done));
        row.inf_frac = static_cast<double>(a.infinite) / static_cast<double>(done);
        row.mean_width = a.finite > 0
                             ? a.width_sum / static_cast<double>(a.finite)
                             : std::numeric_limits<double>::infinity();
      } else {
        row.coverage = row.se = row.inf_frac = row.mean_width =
            std::numeric_limits<double>::quiet_NaN();
      }
      table.rows.push_back(std::move(row));
    }
  }
  return table;
}

std::string coverage_table_csv(const CoverageTable& table) {
  std::ostringstream out;
  out << "method,alpha,generator,h,coverage,se,mean_width,inf_frac\n";
  for (const auto& r : table.rows) {
    csv::write_row(out,
                   {r.method, csv::format_double(r.alpha), r.generator,
                    csv::format_double(r.h), csv::format_double(r.coverage),
                    csv::format_double(r.se), csv::format_double(r.mean_width),
                    csv::format_double(r.inf_frac)});
  }
  return out.str();
}

}  // namespace lcp
