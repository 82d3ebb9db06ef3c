#pragma once

#include "types.hpp"

#include <string>
#include <vector>

namespace plastifit
{

// Worst-case relative error of one analytic derivative block against finite
// differences, maximized over all sampled states. Residual-type blocks store
// an absolute algebraic residual instead.
struct BlockCheck
{
  std::string name;
  double worstError = 0.0;
};

struct DerivativeCheckReport
{
  std::vector<BlockCheck> blocks;

  double worst() const;
  double block(const std::string &name) const;
  bool allBelow(double tol) const;
};

// Validates every analytic derivative against five-point central differences
// on random well-conditioned states: tet energy gradients and Hessian blocks
// in positions and plastic parameters, the stress and its derivative, the
// cofactor derivative, and both orders of the rotation/stretch derivatives of
// the polar decomposition. Each block is checked at several step sizes and
// the best agreement is kept, so the numbers reflect formula correctness
// rather than step-size luck.
DerivativeCheckReport runDerivativeChecks(unsigned seed, int trials);

}  // namespace plastifit
