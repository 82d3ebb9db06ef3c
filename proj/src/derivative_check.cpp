#include "plastifit/derivative_check.hpp"

#include "plastifit/material.hpp"
#include "plastifit/polar_decomposition.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <functional>
#include <random>

namespace plastifit
{

namespace
{

// f'(0) from five samples, O(h^4) truncation.
double centralDiff5(const std::function<double(double)> &f, double h)
{
  return (f(-2.0 * h) - 8.0 * f(-h) + 8.0 * f(h) - f(2.0 * h)) / (12.0 * h);
}

double relError(double analyticNorm, double fdNorm, double diffNorm)
{
  return diffNorm / std::max({analyticNorm, fdNorm, 1e-8});
}

struct TetState
{
  MaterialParams mat;
  std::array<Vec3, 4> rest;
  std::array<Vec3, 4> x;
  Mat3 restShapeInverse;
  double V0 = 0.0;
  Vec6 s;
};

Mat3 randomRotation(std::mt19937 &rng)
{
  std::normal_distribution<double> gauss(0.0, 1.0);
  Eigen::Quaterniond q(gauss(rng), gauss(rng), gauss(rng), gauss(rng));
  q.normalize();
  return q.toRotationMatrix();
}

Vec6 randomSpdStrain(std::mt19937 &rng, double lo, double hi)
{
  std::uniform_real_distribution<double> eig(lo, hi);
  Mat3 q = randomRotation(rng);
  Vec3 d(eig(rng), eig(rng), eig(rng));
  Mat3 fp = q * d.asDiagonal() * q.transpose();
  return sFromFp(fp);
}

TetState randomTetState(std::mt19937 &rng)
{
  const double edge = 0.1;
  std::uniform_real_distribution<double> jitter(-0.02 * edge, 0.02 * edge);
  std::uniform_real_distribution<double> disp(-0.3 * edge, 0.3 * edge);
  std::uniform_real_distribution<double> poisson(0.2, 0.48);

  TetState st;
  st.mat = MaterialParams::fromYoungPoisson(1e5, poisson(rng));
  for (;;) {
    st.rest[0] = Vec3(0, 0, 0);
    st.rest[1] = Vec3(edge, 0, 0);
    st.rest[2] = Vec3(0, edge, 0);
    st.rest[3] = Vec3(0, 0, edge);
    for (auto &p : st.rest)
      p += Vec3(jitter(rng), jitter(rng), jitter(rng));
    Mat3 dm;
    for (int c = 0; c < 3; c++)
      dm.col(c) = st.rest[size_t(c + 1)] - st.rest[0];
    double det = dm.determinant();
    if (std::abs(det) < 1e-4 * edge * edge * edge)
      continue;
    if (det < 0.0)
      std::swap(st.rest[2], st.rest[3]);
    for (int c = 0; c < 3; c++)
      dm.col(c) = st.rest[size_t(c + 1)] - st.rest[0];
    st.restShapeInverse = dm.inverse();
    st.V0 = dm.determinant() / 6.0;
    break;
  }
  for (int c = 0; c < 4; c++)
    st.x[size_t(c)] = st.rest[size_t(c)] + Vec3(disp(rng), disp(rng), disp(rng));
  st.s = randomSpdStrain(rng, 0.6, 1.6);
  return st;
}

Mat3 deformationGradientOf(const TetState &st, const std::array<Vec3, 4> &x)
{
  Mat3 ds;
  for (int c = 0; c < 3; c++)
    ds.col(c) = x[size_t(c + 1)] - x[0];
  return ds * st.restShapeInverse;
}

Mat3 randomInvertibleF(std::mt19937 &rng)
{
  std::uniform_real_distribution<double> entry(-1.0, 1.0);
  for (;;) {
    Mat3 f;
    for (int i = 0; i < 9; i++)
      f(i % 3, i / 3) = entry(rng);
    if (f.determinant() > 0.2)
      return f;
  }
}

// Best agreement over a few step sizes; h scales with the coordinate size.
template <typename Fd>
double bestOverSteps(double scale, Fd &&fdError)
{
  double best = std::numeric_limits<double>::infinity();
  for (double h : {1e-2 * scale, 1e-3 * scale, 1e-4 * scale})
    best = std::min(best, fdError(h));
  return best;
}

}  // namespace

double DerivativeCheckReport::worst() const
{
  double w = 0.0;
  for (const auto &b : blocks)
    w = std::max(w, b.worstError);
  return w;
}

double DerivativeCheckReport::block(const std::string &name) const
{
  for (const auto &b : blocks)
    if (b.name == name)
      return b.worstError;
  throw ValidationError("no derivative block named " + name);
}

bool DerivativeCheckReport::allBelow(double tol) const
{
  for (const auto &b : blocks)
    if (!(b.worstError <= tol))
      return false;
  return true;
}

DerivativeCheckReport runDerivativeChecks(unsigned seed, int trials)
{
  if (trials < 1)
    throw ValidationError("trials must be >= 1");
  std::mt19937 rng(seed);

  double gradXErr = 0.0, gradSErr = 0.0;
  double hessXXErr = 0.0, hessXSErr = 0.0, hessSSErr = 0.0;
  double pk1Err = 0.0, dPdFErr = 0.0, cofErr = 0.0;

  for (int trial = 0; trial < trials; trial++) {
    TetState st = randomTetState(rng);
    EnergyDerivatives d = tetDerivatives(st.mat, st.x, st.restShapeInverse, st.s, st.V0, 2);

    auto energyAt = [&](const std::array<Vec3, 4> &x, const Vec6 &s) {
      return tetEnergy(st.mat, deformationGradientOf(st, x), s, st.V0);
    };
    auto gradAt = [&](const std::array<Vec3, 4> &x, const Vec6 &s) {
      return tetDerivatives(st.mat, x, st.restShapeInverse, s, st.V0, 1);
    };

    gradXErr = std::max(gradXErr, bestOverSteps(0.1, [&](double h) {
      Vec12 fd;
      for (int i = 0; i < 12; i++) {
        fd[i] = centralDiff5(
            [&](double t) {
              auto x = st.x;
              x[size_t(i / 3)][i % 3] += t;
              return energyAt(x, st.s);
            },
            h);
      }
      return relError(d.gradX.norm(), fd.norm(), (d.gradX - fd).norm());
    }));

    gradSErr = std::max(gradSErr, bestOverSteps(1.0, [&](double h) {
      Vec6 fd;
      for (int i = 0; i < 6; i++) {
        fd[i] = centralDiff5(
            [&](double t) {
              Vec6 s = st.s;
              s[i] += t;
              return energyAt(st.x, s);
            },
            h);
      }
      return relError(d.gradS.norm(), fd.norm(), (d.gradS - fd).norm());
    }));

    hessXXErr = std::max(hessXXErr, bestOverSteps(0.1, [&](double h) {
      Mat12 fd;
      for (int j = 0; j < 12; j++) {
        auto sample = [&](double t) {
          auto x = st.x;
          x[size_t(j / 3)][j % 3] += t;
          return gradAt(x, st.s).gradX;
        };
        fd.col(j) =
            (sample(-2.0 * h) - 8.0 * sample(-h) + 8.0 * sample(h) - sample(2.0 * h)) / (12.0 * h);
      }
      return relError(d.hessXX.norm(), fd.norm(), (d.hessXX - fd).norm());
    }));

    hessXSErr = std::max(hessXSErr, bestOverSteps(1.0, [&](double h) {
      Mat12x6 fd;
      for (int j = 0; j < 6; j++) {
        auto sample = [&](double t) {
          Vec6 s = st.s;
          s[j] += t;
          return gradAt(st.x, s).gradX;
        };
        fd.col(j) =
            (sample(-2.0 * h) - 8.0 * sample(-h) + 8.0 * sample(h) - sample(2.0 * h)) / (12.0 * h);
      }
      return relError(d.hessXS.norm(), fd.norm(), (d.hessXS - fd).norm());
    }));

    hessSSErr = std::max(hessSSErr, bestOverSteps(1.0, [&](double h) {
      Eigen::Matrix<double, 6, 6> fd;
      for (int j = 0; j < 6; j++) {
        auto sample = [&](double t) {
          Vec6 s = st.s;
          s[j] += t;
          return gradAt(st.x, s).gradS;
        };
        fd.col(j) =
            (sample(-2.0 * h) - 8.0 * sample(-h) + 8.0 * sample(h) - sample(2.0 * h)) / (12.0 * h);
      }
      return relError(d.hessSS.norm(), fd.norm(), (d.hessSS - fd).norm());
    }));

    Mat3 F = deformationGradientOf(st, st.x);
    Mat3 P = snhPK1(st.mat, F);
    pk1Err = std::max(pk1Err, bestOverSteps(1.0, [&](double h) {
      Mat3 fd;
      for (int i = 0; i < 9; i++) {
        fd(i % 3, i / 3) = centralDiff5(
            [&](double t) {
              Mat3 Ft = F;
              Ft(i % 3, i / 3) += t;
              return snhEnergyDensity(st.mat, Ft);
            },
            h);
      }
      return relError(P.norm(), fd.norm(), (P - fd).norm());
    }));

    Mat9 dPdF = snhPK1Derivative(st.mat, F);
    dPdFErr = std::max(dPdFErr, bestOverSteps(1.0, [&](double h) {
      Mat9 fd;
      for (int j = 0; j < 9; j++) {
        auto sample = [&](double t) {
          Mat3 Ft = F;
          Ft(j % 3, j / 3) += t;
          return vec9(snhPK1(st.mat, Ft));
        };
        fd.col(j) =
            (sample(-2.0 * h) - 8.0 * sample(-h) + 8.0 * sample(h) - sample(2.0 * h)) / (12.0 * h);
      }
      return relError(dPdF.norm(), fd.norm(), (dPdF - fd).norm());
    }));

    Mat9 dCof = cofactorDerivative(F);
    cofErr = std::max(cofErr, bestOverSteps(1.0, [&](double h) {
      Mat9 fd;
      for (int j = 0; j < 9; j++) {
        auto sample = [&](double t) {
          Mat3 Ft = F;
          Ft(j % 3, j / 3) += t;
          return vec9(cofactor(Ft));
        };
        fd.col(j) =
            (sample(-2.0 * h) - 8.0 * sample(-h) + 8.0 * sample(h) - sample(2.0 * h)) / (12.0 * h);
      }
      return relError(dCof.norm(), fd.norm(), (dCof - fd).norm());
    }));
  }

  double dRdFErr = 0.0, dSdFErr = 0.0, d2RdF2Err = 0.0, sylvesterRes = 0.0;
  for (int trial = 0; trial < trials; trial++) {
    Mat3 F = randomInvertibleF(rng);
    PolarDerivatives pd = polarDerivatives(F, 2);

    dRdFErr = std::max(dRdFErr, bestOverSteps(1.0, [&](double h) {
      Mat9 fd;
      for (int j = 0; j < 9; j++) {
        auto sample = [&](double t) {
          Mat3 Ft = F;
          Ft(j % 3, j / 3) += t;
          return vec9(polarDecompose(Ft).R);
        };
        fd.col(j) =
            (sample(-2.0 * h) - 8.0 * sample(-h) + 8.0 * sample(h) - sample(2.0 * h)) / (12.0 * h);
      }
      return relError(pd.dRdF.norm(), fd.norm(), (pd.dRdF - fd).norm());
    }));

    dSdFErr = std::max(dSdFErr, bestOverSteps(1.0, [&](double h) {
      Mat9 fd;
      for (int j = 0; j < 9; j++) {
        auto sample = [&](double t) {
          Mat3 Ft = F;
          Ft(j % 3, j / 3) += t;
          return vec9(polarDecompose(Ft).S);
        };
        fd.col(j) =
            (sample(-2.0 * h) - 8.0 * sample(-h) + 8.0 * sample(h) - sample(2.0 * h)) / (12.0 * h);
      }
      return relError(pd.dSdF.norm(), fd.norm(), (pd.dSdF - fd).norm());
    }));

    // dS S + S dS must reproduce the differential of F^T F exactly.
    for (int i = 0; i < 9; i++) {
      Mat3 dS = unvec9(pd.dSdF.col(i));
      Mat3 Ei = Mat3::Zero();
      Ei(i % 3, i / 3) = 1.0;
      Mat3 res = dS * pd.S + pd.S * dS - (Ei.transpose() * F + F.transpose() * Ei);
      sylvesterRes = std::max(sylvesterRes, res.norm());
    }

    d2RdF2Err = std::max(d2RdF2Err, bestOverSteps(1.0, [&](double h) {
      double analyticNorm = 0.0, fdNorm = 0.0, diffNorm = 0.0;
      for (int j = 0; j < 9; j++) {
        auto sample = [&](double t) {
          Mat3 Ft = F;
          Ft(j % 3, j / 3) += t;
          return polarDerivatives(Ft, 1).dRdF;
        };
        Mat9 fdJ =
            (sample(-2.0 * h) - 8.0 * sample(-h) + 8.0 * sample(h) - sample(2.0 * h)) / (12.0 * h);
        for (int i = 0; i < 9; i++) {
          Eigen::Matrix<double, 9, 1> a = pd.d2RdF2[size_t(i)].col(j);
          Eigen::Matrix<double, 9, 1> f = fdJ.col(i);
          analyticNorm += a.squaredNorm();
          fdNorm += f.squaredNorm();
          diffNorm += (a - f).squaredNorm();
        }
      }
      return relError(std::sqrt(analyticNorm), std::sqrt(fdNorm), std::sqrt(diffNorm));
    }));
  }

  DerivativeCheckReport report;
  report.blocks = {{"energy/gradX", gradXErr},
                   {"energy/gradS", gradSErr},
                   {"energy/hessXX", hessXXErr},
                   {"energy/hessXS", hessXSErr},
                   {"energy/hessSS", hessSSErr},
                   {"density/pk1", pk1Err},
                   {"density/dPdF", dPdFErr},
                   {"cofactor/derivative", cofErr},
                   {"polar/dRdF", dRdFErr},
                   {"polar/dSdF", dSdFErr},
                   {"polar/d2RdF2", d2RdF2Err},
                   {"polar/sylvester", sylvesterRes}};
  return report;
}

}  // namespace plastifit
