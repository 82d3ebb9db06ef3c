#pragma once

#include "types.hpp"

#include <array>

namespace plastifit
{

// Elastic constants. The stored mu/lambda are the model parameters of the
// stable neo-Hookean density; they are reparameterized from the linear Lame
// constants so that small-strain behavior matches (E, nu) exactly.
struct MaterialParams
{
  double youngModulus = 1e5;   // Pa
  double poissonRatio = 0.45;  // in (-1, 0.5)

  double mu = 0.0;      // model mu = (4/3) mu_linear
  double lambda = 0.0;  // model lambda = lambda_linear + (5/6) mu_linear
  double alpha = 0.0;   // volume offset; P(I) = 0 requires alpha = 1 + 3 mu / (4 lambda)
  double psiOffset = 0.0;  // subtracted so psi(I) = 0

  static MaterialParams fromYoungPoisson(double young, double poisson);
};

// Per-tet energy derivatives. grad/hess blocks follow the layouts
// x: 12 (4 vertices * xyz), s: 6 (symmetric plastic strain parameters).
struct EnergyDerivatives
{
  double value = 0.0;
  Vec12 gradX = Vec12::Zero();
  Vec6 gradS = Vec6::Zero();
  Mat12 hessXX = Mat12::Zero();
  Mat12x6 hessXS = Mat12x6::Zero();
  Eigen::Matrix<double, 6, 6> hessSS = Eigen::Matrix<double, 6, 6>::Zero();
  int order = 1;
};

// Plastic strain field, 6 parameters per tet, tet-major storage.
struct PlasticField
{
  VecX s;

  static PlasticField identity(int numTets);
  int numTets() const { return int(s.size()) / 6; }
  Vec6 tet(int t) const { return s.segment<6>(6 * t); }
  void setTet(int t, const Vec6 &v) { s.segment<6>(6 * t) = v; }
};

// s = (s1..s6) -> symmetric 3x3 [[s1,s2,s3],[s2,s4,s5],[s3,s5,s6]]. Exactly linear.
Mat3 fpFromS(const Vec6 &s);
Vec6 sFromFp(const Mat3 &Fp);

// vec(Fp) = Y * s for the column-major vec used throughout.
const Mat9x6 &fpParameterMap();

// Eigenvalues of fpFromS(s) below the floor are raised to it.
// Returns true when anything was clamped.
bool clampSpd(Vec6 &s, double floorValue);
bool clampSpdField(PlasticField &field, double floorValue);

// Stable neo-Hookean density, normalized so psi(I) = 0; valid for any F
// including inverted configurations.
double snhEnergyDensity(const MaterialParams &mat, const Mat3 &F);
Mat3 snhPK1(const MaterialParams &mat, const Mat3 &F);
Mat9 snhPK1Derivative(const MaterialParams &mat, const Mat3 &F);

// E = V(Fp) * psi(F Fp^{-1}), V(Fp) = det(Fp) * V0. The general-Fp overload
// exists because plastic strain enters the energy only through this formula;
// rotations of Fp leave it unchanged.
double tetEnergyGeneral(const MaterialParams &mat, const Mat3 &F, const Mat3 &Fp, double V0);
double tetEnergy(const MaterialParams &mat, const Mat3 &F, const Vec6 &s, double V0);

// Full derivative set at (xTet, s). order 1 fills value/gradX/gradS,
// order 2 additionally the three Hessian blocks.
EnergyDerivatives tetDerivatives(const MaterialParams &mat, const std::array<Vec3, 4> &xTet,
                                 const Mat3 &restShapeInverse, const Vec6 &s, double V0,
                                 int order = 2);

Mat3 cofactor(const Mat3 &F);
// d vec(cof F) / d vec(F), also the second derivative of det(F).
Mat9 cofactorDerivative(const Mat3 &F);

}  // namespace plastifit
