#pragma once

#include <optional>
#include <string>
#include <vector>

#include "kolmo/control.hpp"

namespace kolmo {

/// Constants of the local Harnack inequality plus the chain parameters.
/// The defaults are illustrative; the inequality only asserts existence.
struct HarnackConfig {
  double C_harnack = 10.0;
  double beta = 0.5;
  double r = 0.25;
  double tau = 1.0;
  double kappa = 1.0;
  double epsilon = 0.0625;  ///< (r/κ)²

  /// Config with ε = (r/κ)²; κ defaults to kappa_estimate(system).cone.
  static HarnackConfig make(const SystemMatrix& system, double beta = 0.5, double r = 0.25,
                            double C_harnack = 10.0, double tau = 1.0,
                            std::optional<double> kappa = std::nullopt);

  /// Throws ValidationError ("harnack_constant", "beta", "r", "tau", "kappa",
  /// "epsilon", "cylinder_disjointness").
  void validate() const;
};

/// Q⁺_r(0,0) and Q⁺_r(β,0) are disjoint and contained in Q⁺₁.
bool cylinders_disjoint(double beta, double r);

enum class StepClause { TimeBudget, CostBudget, Terminal };

std::string to_string(StepClause clause);

struct ChainStep {
  double t_start = 0.0;
  double t_end = 0.0;
  double cost = 0.0;
  StepClause clause = StepClause::Terminal;
};

struct HarnackChain {
  std::vector<double> times;
  std::vector<Vector> points;
  std::vector<ChainStep> steps;
  double V = 0.0;
  double exponent = 0.0;  ///< 1/β + V/ε
  HarnackConfig config;

  int J() const { return static_cast<int>(steps.size()); }
};

/// t_{j+1} = min(t_j + τβ, inf{s : ∫_{t_j}^s |v̄|² ≥ ε}) along the optimal
/// trajectory. Requires 0 < T − t ≤ τ.
HarnackChain build_chain(const ControlProblem& problem, const HarnackConfig& config);

/// Every step satisfies t_{j+1} − t_j ≤ τβ and (t_{j+1}, γ(t_{j+1})) lies in
/// P_{β, r, √τ}(t_j, γ(t_j)).
bool verify_chain(const HarnackChain& chain, const HarnackConfig& config,
                  const SystemMatrix& system);

struct ChainBound {
  double exponent = 0.0;
  int J = 0;
  bool within_bound = false;  ///< J ≤ ⌈exponent⌉ + 1
};

ChainBound chain_bound_exponent(const HarnackChain& chain);

struct HarnackFactor {
  double V = 0.0;
  double exponent = 0.0;
  double log_constructive = 0.0;  ///< exponent · ln C
  double constructive = 0.0;      ///< C^exponent
  double c = 0.0;                 ///< max(C^{1/β}, ln C / ε)
  double log_statement = 0.0;     ///< ln c + cV
  double statement = 0.0;         ///< c e^{cV}
};

HarnackFactor global_harnack_factor(const ControlProblem& problem, const HarnackConfig& config);

}  // namespace kolmo
