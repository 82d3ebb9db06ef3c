#include "plastifit/strain_laplacian.hpp"

#include <cmath>

namespace plastifit
{

StrainLaplacian StrainLaplacian::build(const TetMesh &mesh)
{
  const int m = mesh.numTets();
  StrainLaplacian lap;
  lap.weights_ << 1.0, std::sqrt(2.0), std::sqrt(2.0), 1.0, std::sqrt(2.0), 1.0;

  std::vector<Triplet> triplets;
  triplets.reserve(size_t(m) * 5);
  for (int t = 0; t < m; t++) {
    int degree = 0;
    for (int f = 0; f < 4; f++) {
      int nbr = mesh.tetNeighbors()[size_t(t)][size_t(f)];
      if (nbr >= 0) {
        degree++;
        triplets.emplace_back(t, nbr, -1.0);
      }
    }
    triplets.emplace_back(t, t, double(degree));
  }
  lap.scalar_.resize(m, m);
  lap.scalar_.setFromTriplets(triplets.begin(), triplets.end());

  const double inv = 1.0 / std::sqrt(double(m));
  lap.nullspace_.resize(6);
  for (int c = 0; c < 6; c++) {
    VecX psi = VecX::Zero(6 * m);
    for (int t = 0; t < m; t++)
      psi[6 * t + c] = inv;
    lap.nullspace_[size_t(c)] = std::move(psi);
  }
  return lap;
}

VecX StrainLaplacian::apply(const VecX &s) const
{
  const int m = numTets();
  if (s.size() != 6 * m)
    throw ValidationError("field size " + std::to_string(s.size()) + " does not match 6m = " +
                          std::to_string(6 * m));
  VecX out(6 * m);
  VecX comp(m), lcomp(m);
  for (int c = 0; c < 6; c++) {
    for (int t = 0; t < m; t++)
      comp[t] = s[6 * t + c];
    lcomp = scalar_ * comp;
    for (int t = 0; t < m; t++)
      out[6 * t + c] = weights_[c] * lcomp[t];
  }
  return out;
}

double StrainLaplacian::smoothnessEnergy(const VecX &s) const
{
  return 0.5 * apply(s).squaredNorm();
}

SpMat StrainLaplacian::squared(double weight) const
{
  SpMat scalarSq = SpMat(scalar_ * scalar_);
  const int m = numTets();
  std::vector<Triplet> triplets;
  triplets.reserve(size_t(scalarSq.nonZeros()) * 6);
  for (int col = 0; col < scalarSq.outerSize(); col++) {
    for (SpMat::InnerIterator it(scalarSq, col); it; ++it) {
      for (int c = 0; c < 6; c++) {
        double w = weight * weights_[c] * weights_[c] * it.value();
        triplets.emplace_back(int(it.row()) * 6 + c, col * 6 + c, w);
      }
    }
  }
  SpMat out(6 * m, 6 * m);
  out.setFromTriplets(triplets.begin(), triplets.end());
  return out;
}

}  // namespace plastifit
