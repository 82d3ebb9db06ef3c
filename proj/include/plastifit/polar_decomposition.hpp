#pragma once

#include "types.hpp"

#include <array>

namespace plastifit
{

// F = R S with R a proper rotation and S symmetric positive definite.
// Requires det F > 0.
struct PolarDecomposition
{
  Mat3 R;
  Mat3 S;
};

PolarDecomposition polarDecompose(const Mat3 &F);

// Analytic derivatives of the polar factors. dRdF and dSdF hold vec(dR/dF_i)
// and vec(dS/dF_i) in column i; d2RdF2[i](ab, j) = d^2 R_ab / dF_i dF_j.
// S derivatives solve the Sylvester system dS S + S dS = d(F^T F).
struct PolarDerivatives
{
  Mat3 R;
  Mat3 S;
  Mat3 Sinv;
  Mat9 dRdF;
  Mat9 dSdF;
  bool secondOrder = false;
  std::array<Mat9, 9> d2RdF2;
};

PolarDerivatives polarDerivatives(const Mat3 &F, int order = 1);

}  // namespace plastifit
