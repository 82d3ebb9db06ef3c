#pragma once

#include "tet_mesh.hpp"
#include "types.hpp"

#include <vector>

namespace plastifit
{

// Smoothness operator for the plastic strain field. The scalar part is the
// combinatorial Laplacian of the tet face-adjacency graph (diagonal = number
// of neighbors, -1 per neighbor). Off-diagonal strain components carry weight
// sqrt(2) so that |L s|^2 measures the Frobenius norm of the matrix-valued
// field consistently. The operator annihilates exactly the 6 per-component
// constant fields on a face-connected mesh.
class StrainLaplacian
{
public:
  static StrainLaplacian build(const TetMesh &mesh);

  int numTets() const { return int(scalar_.rows()); }
  const SpMat &scalarLaplacian() const { return scalar_; }
  const Vec6 &componentWeights() const { return weights_; }
  // 6 orthonormal vectors spanning the nullspace: constant in one component.
  const std::vector<VecX> &nullspaceVectors() const { return nullspace_; }

  // L s for a tet-major 6m field.
  VecX apply(const VecX &s) const;
  // (1/2) |L s|^2
  double smoothnessEnergy(const VecX &s) const;
  // weight * L^T L as one sparse 6m x 6m matrix.
  SpMat squared(double weight = 1.0) const;

private:
  SpMat scalar_;
  Vec6 weights_;
  std::vector<VecX> nullspace_;
};

}  // namespace plastifit
