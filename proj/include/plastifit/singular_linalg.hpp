#pragma once

#include "types.hpp"

#include <Eigen/SparseLU>

#include <memory>
#include <vector>

namespace plastifit
{

// Symmetric positive semidefinite sparse matrix with an explicitly known
// nullspace basis. The basis is orthonormalized and verified at construction
// (|A psi| <= verifyTol * |A|). Solves go through one reusable sparse LU
// factorization of the bordered system [[A, Psi], [Psi^T, 0]]: its x block is
// the unique nullspace-orthogonal solution of A x = (b projected onto the
// range), and its multipliers are exactly the nullspace coefficients of b.
class KnownNullspaceMatrix
{
public:
  KnownNullspaceMatrix(SpMat A, std::vector<VecX> nullspaceBasis, double verifyTol = 1e-8);

  const SpMat &matrix() const { return A_; }
  const std::vector<VecX> &nullspace() const { return nullspace_; }
  int dimension() const { return int(A_.rows()); }
  int nullity() const { return int(nullspace_.size()); }

  // Unique solution of A x = b with x orthogonal to the nullspace. Throws
  // NumericalError when b has a nullspace component larger than
  // consistencyTol * |b| (b outside the range), reporting the projection norm.
  VecX solveSingular(const VecX &b, double consistencyTol = 1e-8) const;

  // As solveSingular, but silently drops the nullspace component of b.
  // Valid whenever the caller knows the downstream contraction annihilates it.
  VecX solveProjected(const VecX &b) const;

  // Solves (A + sum_i alpha_i psi_i psi_i^T) y = h; every alpha_i must be
  // nonzero. The rank correction makes the matrix invertible.
  VecX solveRankCorrected(const VecX &alphas, const VecX &h) const;

  // Column-wise solveRankCorrected in one factorization sweep; the blocked
  // triangular solves make this much cheaper than solving column by column.
  MatX solveRankCorrectedMulti(const VecX &alphas, const MatX &H) const;

  // Applies A + sum_i alpha_i psi_i psi_i^T (for residual checks).
  VecX applyRankCorrected(const VecX &alphas, const VecX &v) const;

private:
  struct AugmentedSolution
  {
    VecX x;
    VecX lambda;
  };
  AugmentedSolution solveAugmented(const VecX &b) const;

  SpMat A_;
  std::vector<VecX> nullspace_;
  Eigen::SparseLU<SpMat> augmented_;
};

// Solver for H = B + Zhat^T Zhat with B = A - sum_i psi_i psi_i^T, where A is
// a KnownNullspaceMatrix (the squared strain Laplacian in the intended use)
// and Zhat stacks the dense constraint rows plus the 6 nullspace rows. B is
// factored once through the bordered system; each solve then costs two
// B-solves plus one small dense capacitance solve.
class WoodburyOperator
{
public:
  static WoodburyOperator build(const KnownNullspaceMatrix &base, MatX zhat);

  // Solves H y = h.
  VecX solve(const VecX &h) const;

  VecX applyH(const VecX &v) const;
  const MatX &capacitance() const { return capacitance_; }
  int numRows() const { return int(zhat_.rows()); }

private:
  const KnownNullspaceMatrix *base_ = nullptr;
  MatX zhat_;
  MatX baseInvZhatT_;  // B^{-1} Zhat^T, cached from the build
  MatX capacitance_;   // I + Zhat B^{-1} Zhat^T
  Eigen::LDLT<MatX> capacitanceFactorization_;
  VecX baseAlphas_;

  VecX solveBase(const VecX &h) const;
};

}  // namespace plastifit
