#include "plastifit/material.hpp"

#include <cmath>

namespace plastifit
{

namespace
{

Mat9 kron3(const Mat3 &A, const Mat3 &B)
{
  Mat9 K;
  for (int i = 0; i < 3; i++)
    for (int j = 0; j < 3; j++)
      K.block<3, 3>(3 * i, 3 * j) = A(i, j) * B;
  return K;
}

// Scatters a 3x3 "shape matrix" derivative into the 12 vertex coordinates:
// column j of Ds is x_{j+1} - x_0.
Vec12 scatterShapeMatrix(const Mat3 &M)
{
  Vec12 out;
  out.segment<3>(0) = -(M.col(0) + M.col(1) + M.col(2));
  out.segment<3>(3) = M.col(0);
  out.segment<3>(6) = M.col(1);
  out.segment<3>(9) = M.col(2);
  return out;
}

}  // namespace

MaterialParams MaterialParams::fromYoungPoisson(double young, double poisson)
{
  if (!(young > 0.0))
    throw ValidationError("Young's modulus must be positive, got " + std::to_string(young));
  if (!(poisson > -1.0 && poisson < 0.5))
    throw ValidationError("Poisson's ratio must lie in (-1, 0.5), got " + std::to_string(poisson));
  MaterialParams mat;
  mat.youngModulus = young;
  mat.poissonRatio = poisson;
  const double muLinear = young / (2.0 * (1.0 + poisson));
  const double lambdaLinear = young * poisson / ((1.0 + poisson) * (1.0 - 2.0 * poisson));
  mat.mu = (4.0 / 3.0) * muLinear;
  mat.lambda = lambdaLinear + (5.0 / 6.0) * muLinear;
  mat.alpha = 1.0 + 3.0 * mat.mu / (4.0 * mat.lambda);
  mat.psiOffset = 0.5 * mat.lambda * (1.0 - mat.alpha) * (1.0 - mat.alpha) -
                  0.5 * mat.mu * std::log(4.0);
  return mat;
}

PlasticField PlasticField::identity(int numTets)
{
  PlasticField f;
  f.s = VecX::Zero(6 * numTets);
  for (int t = 0; t < numTets; t++) {
    f.s[6 * t + 0] = 1.0;
    f.s[6 * t + 3] = 1.0;
    f.s[6 * t + 5] = 1.0;
  }
  return f;
}

Mat3 fpFromS(const Vec6 &s)
{
  Mat3 Fp;
  Fp << s[0], s[1], s[2], s[1], s[3], s[4], s[2], s[4], s[5];
  return Fp;
}

Vec6 sFromFp(const Mat3 &Fp)
{
  Vec6 s;
  s << Fp(0, 0), Fp(0, 1), Fp(0, 2), Fp(1, 1), Fp(1, 2), Fp(2, 2);
  return s;
}

const Mat9x6 &fpParameterMap()
{
  static const Mat9x6 Y = [] {
    Mat9x6 y = Mat9x6::Zero();
    // vec(Fp) = (s1, s2, s3, s2, s4, s5, s3, s5, s6)
    y(0, 0) = 1.0;
    y(1, 1) = 1.0;
    y(2, 2) = 1.0;
    y(3, 1) = 1.0;
    y(4, 3) = 1.0;
    y(5, 4) = 1.0;
    y(6, 2) = 1.0;
    y(7, 4) = 1.0;
    y(8, 5) = 1.0;
    return y;
  }();
  return Y;
}

bool clampSpd(Vec6 &s, double floorValue)
{
  Eigen::SelfAdjointEigenSolver<Mat3> eig(fpFromS(s));
  if (eig.eigenvalues().minCoeff() >= floorValue)
    return false;
  Vec3 lam = eig.eigenvalues().cwiseMax(floorValue);
  Mat3 Fp = eig.eigenvectors() * lam.asDiagonal() * eig.eigenvectors().transpose();
  s = sFromFp(Fp);
  return true;
}

bool clampSpdField(PlasticField &field, double floorValue)
{
  bool any = false;
  for (int t = 0; t < field.numTets(); t++) {
    Vec6 s = field.tet(t);
    if (clampSpd(s, floorValue)) {
      field.setTet(t, s);
      any = true;
    }
  }
  return any;
}

double snhEnergyDensity(const MaterialParams &mat, const Mat3 &F)
{
  const double Ic = F.squaredNorm();
  const double J = F.determinant();
  return 0.5 * mat.mu * (Ic - 3.0) + 0.5 * mat.lambda * (J - mat.alpha) * (J - mat.alpha) -
         0.5 * mat.mu * std::log(Ic + 1.0) - mat.psiOffset;
}

Mat3 snhPK1(const MaterialParams &mat, const Mat3 &F)
{
  const double Ic = F.squaredNorm();
  const double J = F.determinant();
  return mat.mu * (1.0 - 1.0 / (Ic + 1.0)) * F + mat.lambda * (J - mat.alpha) * cofactor(F);
}

Mat9 snhPK1Derivative(const MaterialParams &mat, const Mat3 &F)
{
  const double Ic = F.squaredNorm();
  const double J = F.determinant();
  const Vec9 f = vec9(F);
  const Vec9 c = vec9(cofactor(F));
  Mat9 dPdF = mat.mu * (1.0 - 1.0 / (Ic + 1.0)) * Mat9::Identity();
  dPdF += (2.0 * mat.mu / ((Ic + 1.0) * (Ic + 1.0))) * (f * f.transpose());
  dPdF += mat.lambda * (c * c.transpose());
  dPdF += mat.lambda * (J - mat.alpha) * cofactorDerivative(F);
  return dPdF;
}

double tetEnergyGeneral(const MaterialParams &mat, const Mat3 &F, const Mat3 &Fp, double V0)
{
  const double detFp = Fp.determinant();
  if (!(detFp > 0.0))
    throw NumericalError("plastic deformation gradient has non-positive determinant " +
                         std::to_string(detFp));
  return detFp * V0 * snhEnergyDensity(mat, F * Fp.inverse());
}

double tetEnergy(const MaterialParams &mat, const Mat3 &F, const Vec6 &s, double V0)
{
  return tetEnergyGeneral(mat, F, fpFromS(s), V0);
}

EnergyDerivatives tetDerivatives(const MaterialParams &mat, const std::array<Vec3, 4> &xTet,
                                 const Mat3 &restShapeInverse, const Vec6 &s, double V0, int order)
{
  EnergyDerivatives out;
  out.order = order;

  const Mat3 Fp = fpFromS(s);
  const double detFp = Fp.determinant();
  if (!(detFp > 0.0))
    throw NumericalError("plastic deformation gradient has non-positive determinant " +
                         std::to_string(detFp) + "; apply the SPD clamp first");
  const Mat3 FpInv = Fp.inverse();

  Mat3 Ds;
  Ds.col(0) = xTet[1] - xTet[0];
  Ds.col(1) = xTet[2] - xTet[0];
  Ds.col(2) = xTet[3] - xTet[0];
  const Mat3 Be = restShapeInverse * FpInv;  // Fe = Ds * Be
  const Mat3 Fe = Ds * Be;
  const double V = detFp * V0;

  const double psi = snhEnergyDensity(mat, Fe);
  const Mat3 P = snhPK1(mat, Fe);
  const Vec9 vecP = vec9(P);

  out.value = V * psi;

  // d vec(Fe) / d x, one column per vertex coordinate.
  Mat9x12 D;
  for (int vtx = 0; vtx < 4; vtx++) {
    for (int c = 0; c < 3; c++) {
      Mat3 dDs = Mat3::Zero();
      if (vtx == 0)
        dDs.row(c) = Vec3(-1.0, -1.0, -1.0).transpose();
      else
        dDs(c, vtx - 1) = 1.0;
      D.col(3 * vtx + c) = vec9(Mat3(dDs * Be));
    }
  }
  out.gradX = V * (D.transpose() * vecP);

  // d vec(Fe) / d vec(Fp) = -(Fp^{-T} kron Fe), from dFe = -Fe dFp Fp^{-1}.
  const Mat9 dFedFp = -kron3(FpInv.transpose(), Fe);
  const Vec9 dpsidFp = dFedFp.transpose() * vecP;
  const Vec9 cofFpVec = vec9(cofactor(Fp));
  const Mat9x6 &Y = fpParameterMap();

  out.gradS = Y.transpose() * (V * dpsidFp + V0 * psi * cofFpVec);

  if (order < 2)
    return out;

  const Mat9 dPdF = snhPK1Derivative(mat, Fe);

  out.hessXX = V * (D.transpose() * dPdF * D);

  // x-Fp block: volume term + chained stress term + the mixed d2Fe/dx dFp term.
  Mat12x9 hessXP = (D.transpose() * vecP) * (V0 * cofFpVec.transpose());
  hessXP += V * (D.transpose() * (dPdF * dFedFp));
  const Mat3 PFpInvT = P * FpInv.transpose();
  for (int j = 0; j < 9; j++) {
    const int rj = j % 3, cj = j / 3;
    // dBe_j = -Be E_j FpInv, so P dBe_j^T = -(P FpInv^T) e_cj (Be e_rj)^T.
    Mat3 M = -PFpInvT.col(cj) * Be.col(rj).transpose();
    hessXP.col(j) += V * scatterShapeMatrix(M);
  }
  out.hessXS = hessXP * Y;

  // Fp-Fp block.
  Mat9 hessPP = V0 * psi * cofactorDerivative(Fp);             // volume Hessian
  hessPP += V * (dFedFp.transpose() * dPdF * dFedFp);          // chained stress
  hessPP += V0 * (cofFpVec * dpsidFp.transpose() + dpsidFp * cofFpVec.transpose());
  const Mat3 A = FpInv * P.transpose() * Fe;  // P : d2Fe/dFp_i dFp_j contraction
  for (int i = 0; i < 9; i++) {
    const int ri = i % 3, ci = i / 3;
    for (int j = 0; j < 9; j++) {
      const int rj = j % 3, cj = j / 3;
      hessPP(i, j) += V * (A(ci, rj) * FpInv(cj, ri) + A(cj, ri) * FpInv(ci, rj));
    }
  }
  out.hessSS = Y.transpose() * hessPP * Y;
  return out;
}

Mat3 cofactor(const Mat3 &F)
{
  Mat3 c;
  c.col(0) = F.col(1).cross(F.col(2));
  c.col(1) = F.col(2).cross(F.col(0));
  c.col(2) = F.col(0).cross(F.col(1));
  return c;
}

Mat9 cofactorDerivative(const Mat3 &F)
{
  const Mat3 h0 = crossProductMatrix(F.col(0));
  const Mat3 h1 = crossProductMatrix(F.col(1));
  const Mat3 h2 = crossProductMatrix(F.col(2));
  Mat9 H = Mat9::Zero();
  H.block<3, 3>(0, 3) = -h2;
  H.block<3, 3>(0, 6) = h1;
  H.block<3, 3>(3, 0) = h2;
  H.block<3, 3>(3, 6) = -h0;
  H.block<3, 3>(6, 0) = -h1;
  H.block<3, 3>(6, 3) = h0;
  return H;
}

}  // namespace plastifit
