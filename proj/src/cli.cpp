#include "kolmo/cli.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>

#include "kolmo/chain.hpp"
#include "kolmo/control.hpp"
#include "kolmo/errors.hpp"
#include "kolmo/gramian.hpp"
#include "kolmo/kernel.hpp"
#include "kolmo/mc.hpp"

namespace kolmo::cli {

using nlohmann::json;

namespace {

class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// ---- model document ----

const json& member(const json& obj, const char* key) {
  if (!obj.is_object() || !obj.contains(key)) {
    throw ParseError(std::string("model: missing field '") + key + "'");
  }
  return obj.at(key);
}

double number(const json& v, const char* what) {
  if (!v.is_number()) throw ParseError(std::string("model: '") + what + "' must be a number");
  return v.get<double>();
}

double number_or(const json& obj, const char* key, double fallback) {
  return obj.contains(key) ? number(obj.at(key), key) : fallback;
}

Matrix parse_matrix(const json& v, const char* what) {
  if (!v.is_array() || v.empty()) throw ParseError(std::string("model: '") + what + "' must be a matrix");
  const auto rows = static_cast<Eigen::Index>(v.size());
  if (!v[0].is_array()) throw ParseError(std::string("model: '") + what + "' must be a list of rows");
  const auto cols = static_cast<Eigen::Index>(v[0].size());
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i) {
    const json& row = v[static_cast<std::size_t>(i)];
    if (!row.is_array() || static_cast<Eigen::Index>(row.size()) != cols) {
      throw ParseError(std::string("model: '") + what + "' has ragged rows");
    }
    for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = number(row[static_cast<std::size_t>(j)], what);
  }
  return m;
}

Vector parse_vector(const json& v, const char* what) {
  if (!v.is_array()) throw ParseError(std::string("model: '") + what + "' must be a list");
  Vector out(static_cast<Eigen::Index>(v.size()));
  for (std::size_t i = 0; i < v.size(); ++i) out(static_cast<Eigen::Index>(i)) = number(v[i], what);
  return out;
}

ScalarProfile parse_profile(const json& p) {
  if (!p.is_object()) throw ParseError("model: profile must be an object");
  const json& type = member(p, "type");
  if (!type.is_string()) throw ParseError("model: profile type must be a string");
  const auto kind = type.get<std::string>();
  if (kind == "constant") return ScalarProfile(ConstantProfile{number(member(p, "value"), "value")});
  if (kind == "time_sinusoid") {
    return ScalarProfile(TimeSinusoid{number_or(p, "mean", 1.0), number_or(p, "amplitude", 0.0),
                                      number_or(p, "frequency", 1.0), number_or(p, "phase", 0.0)});
  }
  if (kind == "space_sinusoid") {
    return ScalarProfile(SpaceSinusoid{number_or(p, "mean", 1.0), number_or(p, "amplitude", 0.0),
                                       number_or(p, "frequency", 1.0), number_or(p, "phase", 0.0),
                                       static_cast<int>(number_or(p, "coordinate", 0.0))});
  }
  if (kind == "tabulated") {
    const Vector values = parse_vector(member(p, "values"), "values");
    return ScalarProfile(TabulatedProfile{static_cast<int>(number_or(p, "axis", -1.0)),
                                          number_or(p, "origin", 0.0), number_or(p, "step", 1.0),
                                          std::vector<double>(values.begin(), values.end())});
  }
  throw ParseError("model: unknown profile type '" + kind + "'");
}

ScalarProfile profile_or_constant(const json& field) {
  return field.contains("profile") ? parse_profile(field.at("profile")) : ScalarProfile::constant(1.0);
}

VectorField parse_vector_field(const json& coefficients, const char* key, int m0) {
  VectorField field{ScalarProfile::constant(0.0), Vector::Zero(m0)};
  if (!coefficients.contains(key)) return field;
  const json& f = coefficients.at(key);
  field.profile = profile_or_constant(f);
  field.base = parse_vector(member(f, "vector"), key);
  if (field.base.size() != m0) {
    throw ValidationError("dimension_mismatch", std::string(key) + " must have m0 entries");
  }
  return field;
}

OperatorSpec parse_model_json(const json& doc) {
  const json& blocks_json = member(doc, "blocks");
  if (!blocks_json.is_array()) throw ParseError("model: 'blocks' must be a list");
  std::vector<int> blocks;
  for (const auto& v : blocks_json) {
    if (!v.is_number_integer()) throw ParseError("model: 'blocks' entries must be integers");
    blocks.push_back(v.get<int>());
  }
  const Matrix b = parse_matrix(member(doc, "B"), "B");
  SystemMatrix system = validate_structure(b, blocks);
  if (kalman_rank(system) != system.d()) {
    throw ValidationError("kalman_rank", "the pair (B, sigma) is not controllable");
  }
  const int m0 = system.m0();
  const json empty = json::object();
  const json& coefficients = doc.contains("coefficients") ? doc.at("coefficients") : empty;
  if (!coefficients.is_object()) throw ParseError("model: 'coefficients' must be an object");

  DiffusionField a{ScalarProfile::constant(1.0), 0.5 * Matrix::Identity(m0, m0)};
  if (coefficients.contains("a")) {
    const json& f = coefficients.at("a");
    a.profile = profile_or_constant(f);
    a.base = parse_matrix(member(f, "matrix"), "a.matrix");
    if (a.base.rows() != m0 || a.base.cols() != m0) {
      throw ValidationError("dimension_mismatch", "a must be m0 x m0");
    }
  }
  ScalarProfile c = ScalarProfile::constant(0.0);
  if (coefficients.contains("c")) c = profile_or_constant(coefficients.at("c"));

  OperatorSpec spec{std::move(system),
                    std::move(a),
                    parse_vector_field(coefficients, "a_low", m0),
                    parse_vector_field(coefficients, "b_low", m0),
                    std::move(c),
                    number(member(doc, "mu"), "mu"),
                    number_or(doc, "M", 1.0)};
  validate_operator(spec);
  return spec;
}

// ---- flag values ----

std::vector<double> parse_numbers(const std::string& text, const char* flag) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      std::size_t used = 0;
      out.push_back(std::stod(item, &used));
      if (item.find_first_not_of(" \t", used) != std::string::npos) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw UsageError(std::string(flag) + ": cannot parse '" + item + "' as a number");
    }
  }
  if (out.empty()) throw UsageError(std::string(flag) + ": expected a comma-separated list");
  return out;
}

SpaceTimePoint parse_point(const std::string& text, int d, const char* flag) {
  const auto values = parse_numbers(text, flag);
  if (static_cast<int>(values.size()) != d + 1) {
    throw UsageError(std::string(flag) + ": expected t followed by " + std::to_string(d) +
                     " coordinates");
  }
  return {values[0], Eigen::Map<const Vector>(values.data() + 1, d)};
}

// ---- outputs ----

class CsvWriter {
 public:
  CsvWriter(const std::string& path, const std::vector<std::string>& header) : file_(path) {
    if (!file_) throw std::runtime_error("cannot open " + path + " for writing");
    file_ << std::setprecision(17);
    for (std::size_t i = 0; i < header.size(); ++i) file_ << (i ? "," : "") << header[i];
    file_ << '\n';
  }

  CsvWriter& operator<<(double v) {
    if (!std::isfinite(v)) throw NumericalError("non-finite value in CSV output");
    sep();
    file_ << v;
    return *this;
  }
  CsvWriter& operator<<(long v) {
    sep();
    file_ << v;
    return *this;
  }
  CsvWriter& operator<<(const std::string& s) {
    sep();
    file_ << s;
    return *this;
  }
  CsvWriter& operator<<(const Vector& v) {
    for (Eigen::Index i = 0; i < v.size(); ++i) *this << v(i);
    return *this;
  }
  void end_row() {
    file_ << '\n';
    first_ = true;
  }

 private:
  void sep() {
    if (!first_) file_ << ',';
    first_ = false;
  }
  std::ofstream file_;
  bool first_ = true;
};

std::vector<std::string> indexed(const std::string& stem, int n) {
  std::vector<std::string> out;
  for (int i = 0; i < n; ++i) out.push_back(stem + std::to_string(i));
  return out;
}

template <class... Lists>
std::vector<std::string> columns(Lists&&... lists) {
  std::vector<std::string> out;
  (out.insert(out.end(), lists.begin(), lists.end()), ...);
  return out;
}

json to_json(const Vector& v) { return std::vector<double>(v.begin(), v.end()); }

json to_json(const Matrix& m) {
  json rows = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) rows.push_back(to_json(Vector(m.row(i).transpose())));
  return rows;
}

void write_json(const std::string& path, const json& doc) {
  std::ofstream file(path);
  if (!file) throw std::runtime_error("cannot open " + path + " for writing");
  file << doc.dump(2) << '\n';
}

struct Context {
  std::string subcommand;
  std::string model_path;
  std::string prefix;
  json parameters = json::object();
  std::optional<std::uint64_t> seed;
  std::vector<std::string> outputs;

  std::string path(const std::string& suffix) {
    const std::string p = prefix + suffix;
    outputs.push_back(p);
    return p;
  }
};

// ---- subcommands ----

json run_validate(const OperatorSpec& spec, Context&) {
  const EllipticityBounds ell =
      ellipticity_check(spec, default_sample_points(spec), default_directions(spec.m0()));
  const auto& st = spec.system.structure();
  return {{"d", st.d()},
          {"nu", st.nu()},
          {"blocks", st.sizes()},
          {"Q", homogeneous_dimension(st)},
          {"kalman_rank", kalman_rank(spec.system)},
          {"star_free", spec.system.star_free()},
          {"mu", spec.mu},
          {"mu_low", ell.mu_low},
          {"mu_high", ell.mu_high},
          {"min_eigenvalue_a", ell.min_eigenvalue},
          {"max_eigenvalue_a", ell.max_eigenvalue},
          {"M", spec.M_bound},
          {"lower_order_sup", lower_order_sup(spec, default_sample_points(spec))},
          {"time_only_gaussian", spec.time_only_gaussian()},
          {"valid", true}};
}

json run_gramian(const OperatorSpec& spec, Context& ctx, const std::string& taus_text) {
  const auto taus = parse_numbers(taus_text, "--tau");
  const int d = spec.d();
  std::vector<std::string> entries;
  for (int i = 0; i < d; ++i) {
    for (int j = 0; j < d; ++j) entries.push_back("c_" + std::to_string(i) + "_" + std::to_string(j));
  }
  CsvWriter csv(ctx.path(".csv"), columns(std::vector<std::string>{"tau"}, entries,
                                          std::vector<std::string>{"logdet", "det_ratio"}));
  json rows = json::array();
  for (double tau : taus) {
    const Gramian g = gramian(spec.system, tau);
    const Gramian g0 = gramian_homogeneous(spec.system, tau);
    const double ratio = std::exp(g.logdet() - g0.logdet());
    csv << tau;
    for (int i = 0; i < d; ++i) {
      for (int j = 0; j < d; ++j) csv << g.C()(i, j);
    }
    csv << g.logdet() << ratio;
    csv.end_row();
    rows.push_back({{"tau", tau}, {"logdet", g.logdet()}, {"det_ratio", ratio}});
  }
  return {{"rows", rows}};
}

std::vector<Vector> arrival_grid(const SystemMatrix& system, const Vector& y, double horizon,
                                 const std::string& grid_text) {
  if (grid_text.empty()) return {y};
  const auto g = parse_numbers(grid_text, "--grid");
  if (g.size() != 2 || g[0] < 1 || g[0] != std::floor(g[0]) || !(g[1] >= 0.0)) {
    throw UsageError("--grid: expected N,R with integer N >= 1 and R >= 0");
  }
  const int n = static_cast<int>(g[0]);
  const double radius = g[1];
  const Vector scale = dilation_diagonal(system.structure(), std::sqrt(horizon));
  auto node = [&](int k) { return n == 1 ? 0.0 : -radius + 2.0 * radius * k / (n - 1); };
  std::vector<Vector> out;
  if (system.d() == 1) {
    for (int k = 0; k < n; ++k) out.push_back(y + scale.cwiseProduct(Vector::Constant(1, node(k))));
    return out;
  }
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      Vector u = Vector::Zero(system.d());
      u(0) = node(i);
      u(1) = node(j);
      out.push_back(y + scale.cwiseProduct(u));
    }
  }
  return out;
}

json run_kernel(const OperatorSpec& spec, Context& ctx, double lambda, const std::string& from,
                const std::string& to, const std::string& grid_text) {
  const int d = spec.d();
  const SpaceTimePoint src = parse_point(from, d, "--from");
  const SpaceTimePoint dst = parse_point(to, d, "--to");
  if (!(dst.t > src.t)) throw UsageError("kernel: need T > t");
  const GaussianKernel kernel(spec.system, lambda);
  const double horizon = dst.t - src.t;
  const auto ys = arrival_grid(spec.system, dst.x, horizon, grid_text);
  const bool forms = horizon <= 1.0;

  json summary{{"lambda", lambda}, {"points", ys.size()}, {"horizon", horizon}};
  double c_a = 0.0;
  double c_d = 0.0;
  if (forms) {
    std::vector<KernelArgs> args;
    for (const auto& y : ys) args.push_back({src.t, src.x, dst.t, y});
    c_a = fit_aronson_constant(kernel, args);
    c_d = fit_lower_constant(kernel, args);
    summary["c_A"] = c_a;
    summary["c_D"] = c_d;
  }
  std::vector<std::string> tail{"gamma", "log_gamma"};
  if (forms) {
    tail.push_back("lower_form");
    tail.push_back("upper_form");
  }
  CsvWriter csv(ctx.path(".csv"), columns(indexed("y", d), tail));
  for (const auto& y : ys) {
    const double log_g = eval_log_kernel(kernel, src.t, src.x, dst.t, y);
    csv << y << std::exp(log_g) << log_g;
    if (forms) {
      csv << lower_bound_form(c_d, spec.system, src.t, src.x, dst.t, y)
          << aronson_upper_form(c_a, spec.system, src.t, src.x, dst.t, y);
    }
    csv.end_row();
  }
  return summary;
}

ControlProblem problem_from(const OperatorSpec& spec, const std::string& from, const std::string& to) {
  const SpaceTimePoint src = parse_point(from, spec.d(), "--from");
  const SpaceTimePoint dst = parse_point(to, spec.d(), "--to");
  if (!(dst.t > src.t)) throw UsageError("need T > t");
  return {spec.system, src.t, dst.t, src.x, dst.x};
}

json run_control(const OperatorSpec& spec, Context& ctx, const std::string& from,
                 const std::string& to, int points) {
  if (points < 2) throw UsageError("--points must be >= 2");
  const ControlProblem problem = problem_from(spec, from, to);
  const OptimalControl ctrl = optimal_control(problem);
  CsvWriter csv(ctx.path(".csv"), columns(std::vector<std::string>{"s"}, indexed("gamma", spec.d()),
                                          std::vector<std::string>{"control_rate", "accumulated_cost"}));
  for (int k = 0; k < points; ++k) {
    const double s = k + 1 == points ? problem.T
                                     : problem.t + problem.horizon() * k / (points - 1);
    csv << s << trajectory(ctrl, s) << control_rate(ctrl, s) << partial_cost(ctrl, problem.t, s);
    csv.end_row();
  }
  return {{"cost", ctrl.cost},
          {"w", to_json(ctrl.w)},
          {"endpoint_error", (trajectory(ctrl, problem.T) - problem.y).norm()},
          {"points", points}};
}

json run_chain(const OperatorSpec& spec, Context& ctx, const std::string& from,
               const std::string& to, double beta, double r, double c_harnack, double tau,
               std::optional<double> kappa) {
  const ControlProblem problem = problem_from(spec, from, to);
  const HarnackConfig config = HarnackConfig::make(spec.system, beta, r, c_harnack, tau, kappa);
  const HarnackChain chain = build_chain(problem, config);
  const bool verified = verify_chain(chain, config, spec.system);
  const ChainBound bound = chain_bound_exponent(chain);
  const HarnackFactor factor = global_harnack_factor(problem, config);

  CsvWriter csv(ctx.path(".csv"), columns(std::vector<std::string>{"j", "t"}, indexed("gamma", spec.d()),
                                          std::vector<std::string>{"step_cost", "clause"}));
  for (std::size_t j = 0; j < chain.times.size(); ++j) {
    csv << static_cast<long>(j) << chain.times[j] << chain.points[j];
    if (j == 0) {
      csv << 0.0 << std::string("start");
    } else {
      csv << chain.steps[j - 1].cost << to_string(chain.steps[j - 1].clause);
    }
    csv.end_row();
  }
  return {{"V", chain.V},
          {"epsilon", config.epsilon},
          {"J", chain.J()},
          {"exponent", bound.exponent},
          {"J_within_bound", bound.within_bound},
          {"verified", verified},
          {"log_constructive_factor", factor.log_constructive},
          {"statement_c", factor.c},
          {"log_statement_factor", factor.log_statement},
          {"config",
           {{"beta", config.beta},
            {"r", config.r},
            {"C", config.C_harnack},
            {"tau", config.tau},
            {"kappa", config.kappa},
            {"epsilon", config.epsilon}}}};
}

SimConfig sim_config(long paths, int steps, std::uint64_t seed, int threads) {
  SimConfig config;
  config.n_paths = paths;
  config.n_steps = steps;
  config.seed = seed;
  config.threads = threads;
  try {
    config.validate();
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }
  return config;
}

json config_json(const SimConfig& c) {
  return {{"n_paths", c.n_paths}, {"n_steps", c.n_steps}, {"seed", c.seed}, {"scheme", c.scheme}};
}

double parse_end_time(const std::string& to, int d) {
  const auto values = parse_numbers(to, "--to");
  if (values.size() != 1 && static_cast<int>(values.size()) != d + 1) {
    throw UsageError("--to: expected T or T followed by the coordinates");
  }
  return values[0];
}

json run_simulate(const OperatorSpec& spec, Context& ctx, const std::string& from,
                  const std::string& to, const SimConfig& config, double bandwidth,
                  bool dump_endpoints) {
  const int d = spec.d();
  const SpaceTimePoint src = parse_point(from, d, "--from");
  const double T = parse_end_time(to, d);
  if (!(T > src.t)) throw UsageError("simulate: need T > t");
  const SimulationResult sim = simulate_paths(spec, src.t, src.x, T, config);

  const Vector mean = sim.endpoints.colwise().mean().transpose();
  const Matrix centered = sim.endpoints.rowwise() - mean.transpose();
  const Matrix cov = centered.transpose() * centered / std::max(1.0, static_cast<double>(sim.endpoints.rows() - 1));

  const auto grid = default_bound_grid(spec.system, src.x, T - src.t);
  CsvWriter csv(ctx.path(".csv"), columns(indexed("y", d),
                                          std::vector<std::string>{"gamma_est", "stderr", "n_hits"}));
  for (const auto& y : grid) {
    const DensityEstimate est = estimate_density(sim, y, bandwidth, spec.system.structure());
    csv << y << est.value << est.std_error << est.n_hits;
    csv.end_row();
  }
  if (dump_endpoints) {
    CsvWriter ends(ctx.path(".endpoints.csv"),
                   sim.weighted() ? columns(indexed("x", d), std::vector<std::string>{"log_weight"})
                                  : indexed("x", d));
    for (Eigen::Index p = 0; p < sim.endpoints.rows(); ++p) {
      ends << Vector(sim.endpoints.row(p).transpose());
      if (sim.weighted()) ends << sim.log_weights(p);
      ends.end_row();
    }
  }
  json summary{{"mean", to_json(mean)},
               {"covariance", to_json(cov)},
               {"weighted", sim.weighted()},
               {"bandwidth", bandwidth},
               {"config", config_json(config)}};
  if (spec.time_only_gaussian()) {
    const GaussianKernel exact = GaussianKernel::from_operator(spec);
    const Transition tr = exact.transition(src.t, T);
    summary["exact_mean"] = to_json(Vector(tr.flow * src.x));
    summary["exact_covariance"] = to_json(tr.covariance->C());
  }
  return summary;
}

json run_verify_bounds(const OperatorSpec& spec, Context& ctx, const std::string& from,
                       const std::string& to, std::optional<double> lambda_minus,
                       std::optional<double> lambda_plus, const SimConfig& config,
                       double bandwidth) {
  const int d = spec.d();
  const SpaceTimePoint src = parse_point(from, d, "--from");
  const double T = parse_end_time(to, d);
  if (!(T > src.t)) throw UsageError("verify-bounds: need T > t");
  const EllipticityBounds ell =
      ellipticity_check(spec, default_sample_points(spec), default_directions(spec.m0()));
  const double lm = lambda_minus.value_or(2.0 * ell.min_eigenvalue);
  const double lp = lambda_plus.value_or(2.0 * ell.max_eigenvalue);
  const auto grid = default_bound_grid(spec.system, src.x, T - src.t);
  BoundOptions options;
  options.bandwidth = bandwidth;
  const BoundReport report = verify_bounds(spec, src.t, src.x, T, grid, lm, lp, config, options);

  CsvWriter csv(ctx.path(".csv"),
                columns(indexed("y", d),
                        std::vector<std::string>{"gamma_est", "stderr", "gamma_lambda_minus",
                                                 "gamma_lambda_plus", "ratio_minus", "ratio_plus"}));
  json flagged = json::array();
  for (std::size_t k = 0; k < report.points.size(); ++k) {
    csv << report.points[k] << report.gamma[k] << report.std_error[k] << report.gamma_minus[k]
        << report.gamma_plus[k] << report.ratio_minus[k] << report.ratio_plus[k];
    csv.end_row();
    if (report.zero_hits[k]) flagged.push_back(k);
  }
  json diagonal = json::array();
  for (const auto& e : report.diagonal) {
    diagonal.push_back({{"horizon", e.horizon}, {"gamma", e.gamma}, {"stderr", e.std_error}, {"c", e.c}});
  }
  json summary{{"exact", report.exact},
               {"lambda_minus", lm},
               {"lambda_plus", lp},
               {"C_minus", report.C_minus},
               {"C_plus", report.C_plus},
               {"C_minus_low", report.C_minus_low},
               {"C_plus_high", report.C_plus_high},
               {"zero_hit_points", flagged},
               {"diagonal", diagonal},
               {"diagonal_c", report.diagonal_c},
               {"diagonal_spread", report.diagonal_spread},
               {"config", config_json(config)}};
  if (report.psd_checked) {
    summary["psd_lower_margin"] = report.psd_lower_margin;
    summary["psd_upper_margin"] = report.psd_upper_margin;
    summary["psd_ok"] = report.psd_ok;
  }
  return summary;
}

json run_equivalence(const OperatorSpec& spec, Context& ctx, const std::string& taus_text,
                     int directions, std::uint64_t direction_seed) {
  if (directions < 1) throw UsageError("--directions must be >= 1");
  const auto taus = parse_numbers(taus_text, "--tau");
  const EquivalenceReport rep = equivalence_constants(
      spec.system, taus, sample_unit_directions(spec.d(), directions, direction_seed));
  CsvWriter csv(ctx.path(".csv"), {"tau", "det_ratio", "k_min", "k_max"});
  for (std::size_t i = 0; i < rep.tau_grid.size(); ++i) {
    csv << rep.tau_grid[i] << rep.det_ratio[i] << rep.k_min_per_tau[i] << rep.k_max_per_tau[i];
    csv.end_row();
  }
  return {{"k1", rep.k1},
          {"k2", rep.k2},
          {"k5", rep.k5},
          {"k6", rep.k6},
          {"det_slope", rep.det_slope},
          {"direction_count", rep.direction_count},
          {"direction_seed", direction_seed}};
}

std::string default_taus() {
  std::ostringstream s;
  s << std::setprecision(17);
  for (int k = 10; k >= 1; --k) s << std::ldexp(1.0, -k) << ',';
  s << 1.0;
  return s.str();
}

}  // namespace

OperatorSpec parse_model(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::exception& e) {
    throw ParseError(std::string("model: ") + e.what());
  }
  try {
    return parse_model_json(doc);
  } catch (const json::exception& e) {
    throw ParseError(std::string("model: ") + e.what());
  }
}

OperatorSpec load_model(const std::string& path) {
  std::ifstream file(path);
  if (!file) throw ParseError("cannot read model file " + path);
  std::stringstream buffer;
  buffer << file.rdbuf();
  return parse_model(buffer.str());
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Kolmogorov operators: Gramians, kernels, controls, Harnack chains, Monte Carlo"};
  app.require_subcommand(1);
  app.set_version_flag("--version", kVersion);

  std::string model;
  std::string prefix;
  int threads = 0;
  std::string from, to, grid, taus = "0.001,0.01,0.1,0.5,1";
  std::string equivalence_taus = default_taus();
  double lambda = 1.0;
  int points = 64;
  double beta = 0.5, r = 0.25, c_harnack = 10.0, tau = 1.0;
  std::optional<double> kappa, lambda_minus, lambda_plus;
  long paths = 100000;
  int steps = 100;
  std::uint64_t seed = 0;
  double bandwidth = 0.1;
  bool dump_endpoints = false;
  int directions = 256;
  std::uint64_t direction_seed = 0;

  auto common = [&](CLI::App* sub) {
    sub->add_option("--model", model, "model JSON document")->required();
    sub->add_option("--out", prefix, "output prefix (default: subcommand name)");
    sub->add_option("--threads", threads, "worker threads (default: KOLMO_THREADS or hardware)");
  };
  auto* validate = app.add_subcommand("validate", "check a model against the structural assumptions");
  common(validate);
  auto* gramian_cmd = app.add_subcommand("gramian", "controllability Gramians C(tau)");
  common(gramian_cmd);
  gramian_cmd->add_option("--tau", taus, "comma-separated horizons");
  auto* kernel_cmd = app.add_subcommand("kernel", "Gaussian kernel and bound forms");
  common(kernel_cmd);
  kernel_cmd->add_option("--lambda", lambda, "diffusion rate");
  kernel_cmd->add_option("--from", from, "t,x1,...,xd")->required();
  kernel_cmd->add_option("--to", to, "T,y1,...,yd")->required();
  kernel_cmd->add_option("--grid", grid, "N,R: N points per axis over dilated offsets in [-R,R]");
  auto* control_cmd = app.add_subcommand("control", "minimum-energy control trajectory");
  common(control_cmd);
  control_cmd->add_option("--from", from, "t,x1,...,xd")->required();
  control_cmd->add_option("--to", to, "T,y1,...,yd")->required();
  control_cmd->add_option("--points", points, "trajectory samples");
  auto* chain_cmd = app.add_subcommand("chain", "Harnack chain along the optimal trajectory");
  common(chain_cmd);
  chain_cmd->add_option("--from", from, "t,x1,...,xd")->required();
  chain_cmd->add_option("--to", to, "T,y1,...,yd")->required();
  chain_cmd->add_option("--beta", beta, "time offset of the upper cylinder");
  chain_cmd->add_option("--r", r, "cylinder radius");
  chain_cmd->add_option("--C", c_harnack, "local Harnack constant");
  chain_cmd->add_option("--tau", tau, "time window");
  chain_cmd->add_option("--kappa", kappa, "cone constant (default: estimated)");
  auto* simulate_cmd = app.add_subcommand("simulate", "Monte Carlo endpoints and density estimates");
  common(simulate_cmd);
  simulate_cmd->add_option("--from", from, "t,x1,...,xd")->required();
  simulate_cmd->add_option("--to", to, "T")->required();
  simulate_cmd->add_option("--seed", seed, "RNG seed")->required();
  simulate_cmd->add_option("--paths", paths, "number of paths");
  simulate_cmd->add_option("--steps", steps, "time steps per path");
  simulate_cmd->add_option("--bandwidth", bandwidth, "density box width in dilated units");
  simulate_cmd->add_flag("--endpoints", dump_endpoints, "also write PREFIX.endpoints.csv");
  auto* bounds_cmd = app.add_subcommand("verify-bounds", "two-sided Gaussian bound check");
  common(bounds_cmd);
  bounds_cmd->add_option("--from", from, "t,x1,...,xd")->required();
  bounds_cmd->add_option("--to", to, "T")->required();
  bounds_cmd->add_option("--seed", seed, "RNG seed")->required();
  bounds_cmd->add_option("--lambda-minus", lambda_minus, "lower comparison rate");
  bounds_cmd->add_option("--lambda-plus", lambda_plus, "upper comparison rate");
  bounds_cmd->add_option("--paths", paths, "number of paths");
  bounds_cmd->add_option("--steps", steps, "time steps per path");
  bounds_cmd->add_option("--bandwidth", bandwidth, "density box width in dilated units");
  auto* equivalence_cmd = app.add_subcommand("equivalence", "C versus C0 equivalence constants");
  common(equivalence_cmd);
  equivalence_cmd->add_option("--tau", equivalence_taus, "comma-separated horizons in (0,1]");
  equivalence_cmd->add_option("--directions", directions, "sampled unit directions");
  equivalence_cmd->add_option("--direction-seed", direction_seed, "seed for the directions");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kOk : kUsage;
  }

  CLI::App* sub = app.get_subcommands().front();
  Context ctx;
  ctx.subcommand = sub->get_name();
  ctx.model_path = model;
  ctx.prefix = prefix.empty() ? ctx.subcommand : prefix;
  for (const CLI::Option* opt : sub->get_options()) {
    if (opt->get_name() == "--help" || opt->count() == 0) continue;
    const auto& values = opt->results();
    ctx.parameters[opt->get_name()] = values.size() == 1 ? json(values.front()) : json(values);
  }

  try {
    const OperatorSpec spec = load_model(model);
    const std::filesystem::path parent = std::filesystem::path(ctx.prefix).parent_path();
    if (!parent.empty()) std::filesystem::create_directories(parent);

    json summary;
    if (sub == validate) {
      summary = run_validate(spec, ctx);
    } else if (sub == gramian_cmd) {
      summary = run_gramian(spec, ctx, taus);
    } else if (sub == kernel_cmd) {
      summary = run_kernel(spec, ctx, lambda, from, to, grid);
    } else if (sub == control_cmd) {
      summary = run_control(spec, ctx, from, to, points);
    } else if (sub == chain_cmd) {
      summary = run_chain(spec, ctx, from, to, beta, r, c_harnack, tau, kappa);
    } else if (sub == simulate_cmd) {
      ctx.seed = seed;
      summary = run_simulate(spec, ctx, from, to, sim_config(paths, steps, seed, threads), bandwidth,
                             dump_endpoints);
    } else if (sub == bounds_cmd) {
      ctx.seed = seed;
      summary = run_verify_bounds(spec, ctx, from, to, lambda_minus, lambda_plus,
                                  sim_config(paths, steps, seed, threads), bandwidth);
    } else {
      summary = run_equivalence(spec, ctx, equivalence_taus, directions, direction_seed);
    }
    write_json(ctx.path(".summary.json"), summary);
    const std::string manifest_path = ctx.path(".manifest.json");
    write_json(manifest_path, {{"subcommand", ctx.subcommand},
                               {"model", ctx.model_path},
                               {"parameters", ctx.parameters},
                               {"seed", ctx.seed ? json(*ctx.seed) : json(nullptr)},
                               {"outputs", ctx.outputs},
                               {"version", kVersion}});
    for (const auto& p : ctx.outputs) out << p << '\n';
    return kOk;
  } catch (const ParseError& e) {
    err << "parse error: " << e.what() << '\n';
    return kParseFailure;
  } catch (const ValidationError& e) {
    err << "validation error [" << e.clause() << "]: " << e.what() << '\n';
    return kValidationFailure;
  } catch (const NumericalError& e) {
    err << "numerical failure: " << e.what() << '\n';
    return kNumericalFailure;
  } catch (const UsageError& e) {
    err << "usage: " << e.what() << '\n';
    return kUsage;
  } catch (const std::invalid_argument& e) {
    err << "usage: " << e.what() << '\n';
    return kUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kNumericalFailure;
  }
}

int run(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return run(args, std::cout, std::cerr);
}

}  // namespace kolmo::cli
