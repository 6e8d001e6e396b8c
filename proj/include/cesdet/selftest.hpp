#pragma once

#include <string>
#include <vector>

namespace cesdet {

struct IdentityCheck {
  std::string name;
  double max_relative_error = 0.0;
  double tolerance = 0.0;
  bool passed = false;
};

/// Fast identity suite on built-in fixtures:
///   kelly == mglrt (M1 = 1), amf == wald with S0/M0 (M1 = 1),
///   Wald via P-hat == explicit Wald, square == Sylvester MGLRT form.
/// `perturbation` scales the reference side of every identity by
/// (1 + perturbation); used to confirm the suite can fail.
std::vector<IdentityCheck> run_selftest(double perturbation = 0.0);

}  // namespace cesdet
