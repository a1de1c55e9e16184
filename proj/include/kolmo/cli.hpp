#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "kolmo/operator.hpp"

namespace kolmo::cli {

inline constexpr const char* kVersion = "0.1.0";

/// Exit codes of `run`.
enum ExitCode : int {
  kOk = 0,
  kNumericalFailure = 1,
  kParseFailure = 2,
  kValidationFailure = 3,
  kUsage = 64,
};

/// Model document:
///   {"blocks": [m0, ...], "B": [[...], ...],
///    "coefficients": {"a": {"profile": P, "matrix": [[...]]},
///                     "a_low": {"profile": P, "vector": [...]},
///                     "b_low": {"profile": P, "vector": [...]},
///                     "c": {"profile": P}},
///    "mu": μ, "M": M}
/// with P one of {"type": "constant", "value"}, {"type": "time_sinusoid",
/// "mean", "amplitude", "frequency", "phase"}, {"type": "space_sinusoid", ...,
/// "coordinate"}, {"type": "tabulated", "axis", "origin", "step", "values"}.
/// Missing coefficients default to a = ½I and zero lower-order terms.
/// Throws ParseError on malformed documents and ValidationError when the
/// model violates a structural or coefficient assumption.
OperatorSpec parse_model(const std::string& text);
OperatorSpec load_model(const std::string& path);

/// Runs one subcommand. `args` excludes the program name.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);
int run(int argc, char** argv);

}  // namespace kolmo::cli
