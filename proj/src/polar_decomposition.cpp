#include "plastifit/polar_decomposition.hpp"

#include <Eigen/Eigenvalues>

#include <cmath>

namespace plastifit
{

namespace
{

Mat9 kroneckerSum(const Mat3 &A, const Mat3 &B)
{
  Mat9 K = Mat9::Zero();
  for (int i = 0; i < 3; i++)
    for (int j = 0; j < 3; j++) {
      K.block<3, 3>(3 * i, 3 * j) = A(i, j) * Mat3::Identity();
      if (i == j)
        K.block<3, 3>(3 * i, 3 * j) += B;
    }
  return K;
}

Mat3 basisMatrix(int i)
{
  Mat3 E = Mat3::Zero();
  E(i % 3, i / 3) = 1.0;
  return E;
}

}  // namespace

PolarDecomposition polarDecompose(const Mat3 &F)
{
  const double detF = F.determinant();
  if (!(detF > 0.0))
    throw NumericalError("polar decomposition requires det F > 0, got " + std::to_string(detF) +
                         "; the configuration is reflected or degenerate");
  Eigen::SelfAdjointEigenSolver<Mat3> eig(F.transpose() * F);
  Vec3 singular = eig.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  if (singular.minCoeff() <= 1e-12 * singular.maxCoeff())
    throw NumericalError("polar decomposition is ill-defined: singular value ratio below 1e-12");
  PolarDecomposition out;
  out.S = eig.eigenvectors() * singular.asDiagonal() * eig.eigenvectors().transpose();
  out.R = F * (eig.eigenvectors() * singular.cwiseInverse().asDiagonal() *
               eig.eigenvectors().transpose());
  return out;
}

PolarDerivatives polarDerivatives(const Mat3 &F, int order)
{
  PolarDerivatives out;
  PolarDecomposition polar = polarDecompose(F);
  out.R = polar.R;
  out.S = polar.S;
  out.Sinv = polar.S.inverse();
  out.secondOrder = (order >= 2);

  // dS solves the Sylvester system dS S + S dS = dF^T F + F^T dF.
  const Mat9 M = kroneckerSum(polar.S, polar.S);
  const Eigen::FullPivLU<Mat9> Mlu(M);
  if (!Mlu.isInvertible())
    throw NumericalError("Sylvester operator S (+) S is singular");

  std::array<Mat3, 9> dS, dR;
  for (int i = 0; i < 9; i++) {
    const Mat3 Ei = basisMatrix(i);
    const Mat3 dA = Ei.transpose() * F + F.transpose() * Ei;
    dS[size_t(i)] = unvec9(Mlu.solve(vec9(dA)));
    dR[size_t(i)] = (Ei - polar.R * dS[size_t(i)]) * out.Sinv;
    out.dSdF.col(i) = vec9(dS[size_t(i)]);
    out.dRdF.col(i) = vec9(dR[size_t(i)]);
  }

  if (!out.secondOrder)
    return out;

  for (int i = 0; i < 9; i++) {
    const Mat3 Ei = basisMatrix(i);
    for (int j = 0; j < 9; j++) {
      const Mat3 Ej = basisMatrix(j);
      const Mat3 d2A = Ei.transpose() * Ej + Ej.transpose() * Ei;
      const Mat3 C = d2A - dS[size_t(i)] * dS[size_t(j)] - dS[size_t(j)] * dS[size_t(i)];
      const Mat3 d2S = unvec9(Mlu.solve(vec9(C)));
      const Mat3 d2R = (-polar.R * d2S - dR[size_t(i)] * dS[size_t(j)] -
                        dR[size_t(j)] * dS[size_t(i)]) *
                       out.Sinv;
      out.d2RdF2[size_t(i)].col(j) = vec9(d2R);
    }
  }
  return out;
}

}  // namespace plastifit
