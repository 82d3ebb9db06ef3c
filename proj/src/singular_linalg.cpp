#include "plastifit/singular_linalg.hpp"

#include <cmath>

namespace plastifit
{

namespace
{

double infinityNorm(const SpMat &A)
{
  VecX rowSums = VecX::Zero(A.rows());
  for (int col = 0; col < A.outerSize(); col++)
    for (SpMat::InnerIterator it(A, col); it; ++it)
      rowSums[it.row()] += std::abs(it.value());
  return rowSums.size() > 0 ? rowSums.maxCoeff() : 0.0;
}

}  // namespace

KnownNullspaceMatrix::KnownNullspaceMatrix(SpMat A, std::vector<VecX> nullspaceBasis,
                                           double verifyTol)
    : A_(std::move(A))
{
  if (A_.rows() != A_.cols())
    throw ValidationError("matrix must be square");
  const int p = int(A_.rows());
  if (nullspaceBasis.empty())
    throw ValidationError("nullspace basis must not be empty");

  // Modified Gram-Schmidt; rejects a numerically dependent basis.
  for (size_t i = 0; i < nullspaceBasis.size(); i++) {
    VecX v = nullspaceBasis[i];
    if (v.size() != p)
      throw ValidationError("nullspace vector " + std::to_string(i) + " has size " +
                            std::to_string(v.size()) + ", expected " + std::to_string(p));
    const double originalNorm = v.norm();
    for (const VecX &u : nullspace_)
      v -= u.dot(v) * u;
    if (v.norm() <= 1e-10 * (originalNorm > 0.0 ? originalNorm : 1.0))
      throw ValidationError("nullspace vector " + std::to_string(i) +
                            " is linearly dependent on the previous ones");
    nullspace_.push_back(v / v.norm());
  }

  const double normA = infinityNorm(A_);
  for (size_t i = 0; i < nullspace_.size(); i++) {
    const double residual = (A_ * nullspace_[i]).norm();
    if (residual > verifyTol * (normA > 0.0 ? normA : 1.0))
      throw ValidationError("claimed nullspace vector " + std::to_string(i) +
                            " fails |A psi| = " + std::to_string(residual) + " > " +
                            std::to_string(verifyTol) + " * |A| = " +
                            std::to_string(verifyTol * normA));
  }

  const int k = nullity();
  std::vector<Triplet> triplets;
  triplets.reserve(size_t(A_.nonZeros()) + size_t(2 * p * k));
  for (int col = 0; col < A_.outerSize(); col++)
    for (SpMat::InnerIterator it(A_, col); it; ++it)
      triplets.emplace_back(int(it.row()), col, it.value());
  for (int i = 0; i < k; i++)
    for (int row = 0; row < p; row++) {
      const double v = nullspace_[size_t(i)][row];
      if (v != 0.0) {
        triplets.emplace_back(row, p + i, v);
        triplets.emplace_back(p + i, row, v);
      }
    }
  SpMat augmented(p + k, p + k);
  augmented.setFromTriplets(triplets.begin(), triplets.end());
  augmented.makeCompressed();
  augmented_.compute(augmented);
  if (augmented_.info() != Eigen::Success)
    throw NumericalError(
        "bordered system factorization failed; the matrix likely has nullspace "
        "directions beyond the declared basis");
}

KnownNullspaceMatrix::AugmentedSolution KnownNullspaceMatrix::solveAugmented(const VecX &b) const
{
  const int p = dimension(), k = nullity();
  VecX rhs = VecX::Zero(p + k);
  rhs.head(p) = b;
  VecX sol = augmented_.solve(rhs);
  return {sol.head(p), sol.tail(k)};
}

VecX KnownNullspaceMatrix::solveSingular(const VecX &b, double consistencyTol) const
{
  if (b.size() != dimension())
    throw ValidationError("right-hand side size mismatch");
  auto [x, lambda] = solveAugmented(b);
  // lambda_i = psi_i . b: the component of b outside the range.
  const double projection = lambda.norm();
  const double scale = b.norm();
  if (projection > consistencyTol * (scale > 0.0 ? scale : 1.0))
    throw NumericalError("right-hand side is not in the range of the singular matrix: "
                         "nullspace projection norm " + std::to_string(projection) +
                         " exceeds " + std::to_string(consistencyTol) + " * |b| = " +
                         std::to_string(consistencyTol * scale));
  return x;
}

VecX KnownNullspaceMatrix::solveProjected(const VecX &b) const
{
  if (b.size() != dimension())
    throw ValidationError("right-hand side size mismatch");
  return solveAugmented(b).x;
}

VecX KnownNullspaceMatrix::solveRankCorrected(const VecX &alphas, const VecX &h) const
{
  if (int(alphas.size()) != nullity())
    throw ValidationError("need one alpha per nullspace vector");
  if (h.size() != dimension())
    throw ValidationError("right-hand side size mismatch");
  for (int i = 0; i < nullity(); i++)
    if (alphas[i] == 0.0)
      throw ValidationError("alpha " + std::to_string(i) + " must be nonzero");
  auto [x, lambda] = solveAugmented(h);
  VecX y = x;
  for (int i = 0; i < nullity(); i++)
    y += (lambda[i] / alphas[i]) * nullspace_[size_t(i)];
  return y;
}

MatX KnownNullspaceMatrix::solveRankCorrectedMulti(const VecX &alphas, const MatX &H) const
{
  if (int(alphas.size()) != nullity())
    throw ValidationError("need one alpha per nullspace vector");
  if (H.rows() != dimension())
    throw ValidationError("right-hand side size mismatch");
  for (int i = 0; i < nullity(); i++)
    if (alphas[i] == 0.0)
      throw ValidationError("alpha " + std::to_string(i) + " must be nonzero");
  const int p = dimension(), k = nullity();
  MatX rhs = MatX::Zero(p + k, H.cols());
  rhs.topRows(p) = H;
  MatX sol = augmented_.solve(rhs);
  MatX y = sol.topRows(p);
  for (int i = 0; i < k; i++)
    y.noalias() += nullspace_[size_t(i)] * (sol.row(p + i) / alphas[i]);
  return y;
}

VecX KnownNullspaceMatrix::applyRankCorrected(const VecX &alphas, const VecX &v) const
{
  VecX out = A_ * v;
  for (int i = 0; i < nullity(); i++)
    out += alphas[i] * nullspace_[size_t(i)].dot(v) * nullspace_[size_t(i)];
  return out;
}

WoodburyOperator WoodburyOperator::build(const KnownNullspaceMatrix &base, MatX zhat)
{
  if (zhat.cols() != base.dimension())
    throw ValidationError("Zhat column count " + std::to_string(zhat.cols()) +
                          " does not match system dimension " +
                          std::to_string(base.dimension()));
  WoodburyOperator op;
  op.base_ = &base;
  op.zhat_ = std::move(zhat);
  op.baseAlphas_ = VecX::Constant(base.nullity(), -1.0);

  const int rows = int(op.zhat_.rows());
  op.baseInvZhatT_ = base.solveRankCorrectedMulti(op.baseAlphas_, op.zhat_.transpose());

  op.capacitance_ = MatX::Identity(rows, rows) + op.zhat_ * op.baseInvZhatT_;
  op.capacitanceFactorization_.compute(op.capacitance_);
  if (op.capacitanceFactorization_.info() != Eigen::Success)
    throw NumericalError("capacitance factorization failed; H = B + Zhat^T Zhat is not "
                         "positive definite on this data");
  return op;
}

VecX WoodburyOperator::solveBase(const VecX &h) const
{
  return base_->solveRankCorrected(baseAlphas_, h);
}

VecX WoodburyOperator::solve(const VecX &h) const
{
  VecX y = solveBase(h);
  VecX u = capacitanceFactorization_.solve(zhat_ * y);
  y -= baseInvZhatT_ * u;
  return y;
}

VecX WoodburyOperator::applyH(const VecX &v) const
{
  VecX out = base_->applyRankCorrected(baseAlphas_, v);
  out += zhat_.transpose() * (zhat_ * v);
  return out;
}

}  // namespace plastifit
