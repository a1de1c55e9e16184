#include "kolmo/chain.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

#include "kolmo/errors.hpp"

namespace kolmo {

namespace {

constexpr double kTimeTolerance = 1e-12;

}  // namespace

HarnackConfig HarnackConfig::make(const SystemMatrix& system, double beta, double r,
                                  double C_harnack, double tau, std::optional<double> kappa) {
  HarnackConfig config;
  config.beta = beta;
  config.r = r;
  config.C_harnack = C_harnack;
  config.tau = tau;
  config.kappa = kappa ? *kappa : kappa_estimate(system).cone;
  config.epsilon = (r / config.kappa) * (r / config.kappa);
  config.validate();
  return config;
}

bool cylinders_disjoint(double beta, double r) {
  // Q⁺_r(0,0) = [0, r²) × D(r)B₁ and Q⁺_r(β,0) = [β, β + r²) × D(r)B₁.
  return r > 0.0 && r < 1.0 && beta >= r * r && beta + r * r <= 1.0;
}

void HarnackConfig::validate() const {
  if (!(C_harnack >= 1.0)) throw ValidationError("harnack_constant", "Harnack constant C must be >= 1");
  if (!(beta > 0.0 && beta < 1.0)) throw ValidationError("beta", "beta must lie in (0, 1)");
  if (!(r > 0.0 && r < 1.0)) throw ValidationError("r", "r must lie in (0, 1)");
  if (!(tau > 0.0 && tau <= 1.0)) throw ValidationError("tau", "tau must lie in (0, 1]");
  if (!(kappa > 0.0) || !std::isfinite(kappa)) throw ValidationError("kappa", "kappa must be positive");
  const double expected = (r / kappa) * (r / kappa);
  if (!(std::abs(epsilon - expected) <= 1e-14 * expected)) {
    throw ValidationError("epsilon", "epsilon must equal (r/kappa)^2");
  }
  if (!cylinders_disjoint(beta, r)) {
    throw ValidationError("cylinder_disjointness",
                          "cylinders Q_r(0,0) and Q_r(beta,0) must be disjoint subsets of Q_1");
  }
}

std::string to_string(StepClause clause) {
  switch (clause) {
    case StepClause::TimeBudget: return "time-budget";
    case StepClause::CostBudget: return "cost-budget";
    case StepClause::Terminal: return "terminal";
  }
  return "unknown";
}

HarnackChain build_chain(const ControlProblem& problem, const HarnackConfig& config) {
  config.validate();
  problem.validate();
  if (problem.horizon() > config.tau) {
    throw std::invalid_argument("build_chain: need T - t <= tau");
  }
  const OptimalControl ctrl = optimal_control(problem);
  const Matrix& b = problem.system.B();
  const int m0 = problem.system.m0();
  const double T = problem.T;
  // Cost still to be spent after time s: wᵀC(T − s)w.
  auto remaining = [&](double s) {
    return std::max(0.0, ctrl.w.dot(controllability_gramian(b, m0, T - s) * ctrl.w));
  };

  HarnackChain chain;
  chain.config = config;
  chain.V = ctrl.cost;
  chain.exponent = 1.0 / config.beta + ctrl.cost / config.epsilon;
  chain.times.push_back(problem.t);
  chain.points.push_back(problem.x);

  const double step_budget = config.tau * config.beta;
  const double eps = config.epsilon;
  double tj = problem.t;
  double rem_j = remaining(tj);
  while (tj < T) {
    ChainStep step;
    step.t_start = tj;
    const bool reaches_end = tj + step_budget >= T - kTimeTolerance;
    if (reaches_end && rem_j <= eps * (1.0 + 1e-12)) {
      step.t_end = T;
      step.clause = StepClause::Terminal;
    } else {
      const double limit = reaches_end ? T : tj + step_budget;
      const double rem_limit = remaining(limit);
      if (rem_j - rem_limit < eps) {
        step.t_end = limit;
        step.clause = limit == T ? StepClause::Terminal : StepClause::TimeBudget;
      } else {
        // Newton on the spent cost, whose derivative is |v̄|², kept inside a
        // bisection bracket; ends at rounding level or adjacent doubles.
        double lo = tj;
        double hi = limit;
        double s = 0.5 * (lo + hi);
        while (true) {
          const double excess = rem_j - remaining(s) - eps;
          if (excess >= 0.0) {
            hi = s;
          } else {
            lo = s;
            if (-excess <= 4.0 * std::numeric_limits<double>::epsilon() * rem_j) break;
          }
          const double rate = control_rate(ctrl, s);
          double next = rate > 0.0 ? s - excess / rate : 0.5 * (lo + hi);
          if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
          if (next <= lo || next >= hi) break;
          s = next;
        }
        // lo never exceeds the budget.
        step.t_end = lo;
        step.clause = StepClause::CostBudget;
      }
    }
    const double rem_next = step.t_end == T ? 0.0 : remaining(step.t_end);
    step.cost = std::max(0.0, rem_j - rem_next);
    chain.steps.push_back(step);
    chain.times.push_back(step.t_end);
    chain.points.push_back(trajectory(ctrl, step.t_end));
    tj = step.t_end;
    rem_j = rem_next;
  }
  return chain;
}

bool verify_chain(const HarnackChain& chain, const HarnackConfig& config,
                  const SystemMatrix& system) {
  if (chain.times.size() != chain.points.size() || chain.times.size() < 2) return false;
  const double step_budget = config.tau * config.beta;
  for (std::size_t j = 0; j + 1 < chain.times.size(); ++j) {
    if (chain.times[j + 1] - chain.times[j] > step_budget + kTimeTolerance) return false;
    const ConeSpec cone{config.beta, config.r, std::sqrt(config.tau),
                        SpaceTimePoint{chain.times[j], chain.points[j]}};
    if (!cone_membership(cone, SpaceTimePoint{chain.times[j + 1], chain.points[j + 1]}, system)) {
      return false;
    }
  }
  return true;
}

ChainBound chain_bound_exponent(const HarnackChain& chain) {
  ChainBound out;
  out.exponent = 1.0 / chain.config.beta + chain.V / chain.config.epsilon;
  out.J = chain.J();
  out.within_bound = out.J <= static_cast<int>(std::ceil(out.exponent)) + 1;
  return out;
}

HarnackFactor global_harnack_factor(const ControlProblem& problem, const HarnackConfig& config) {
  config.validate();
  problem.validate();
  if (problem.horizon() > config.tau) {
    throw std::invalid_argument("global_harnack_factor: need T - t <= tau");
  }
  HarnackFactor out;
  out.V = optimal_cost(problem);
  out.exponent = 1.0 / config.beta + out.V / config.epsilon;
  const double log_c = std::log(config.C_harnack);
  out.log_constructive = out.exponent * log_c;
  out.constructive = std::exp(out.log_constructive);
  out.c = std::max(std::pow(config.C_harnack, 1.0 / config.beta), log_c / config.epsilon);
  out.log_statement = std::log(out.c) + out.c * out.V;
  out.statement = std::exp(out.log_statement);
  return out;
}

}  // namespace kolmo
