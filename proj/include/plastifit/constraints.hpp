#pragma once

#include "material.hpp"
#include "tet_mesh.hpp"
#include "types.hpp"

#include <vector>

namespace plastifit
{

// One quadratic marker term (c/2) |A x + b|^2. A selects the embedded point
// through its barycentric weights and b = -target, so the residual is
// (point position) - target. weight is the full coefficient c (class weight
// alpha or beta already folded in by the assembler).
struct ConstraintRow
{
  MaterialPoint point;
  Vec3 target = Vec3::Zero();
  double weight = 1.0;
};

// User-level marker specification; weights here are per-marker multipliers
// on top of the class weights alpha / beta.
struct Landmark
{
  MaterialPoint point;
  Vec3 target = Vec3::Zero();
  double weight = 1.0;
};

struct IcpMarker
{
  Vec3 target = Vec3::Zero();
  double weight = 1.0;
};

struct ConstraintSet
{
  std::vector<Landmark> attachments;
  std::vector<Landmark> landmarks;
  std::vector<IcpMarker> icpMarkers;
};

Vec3 constraintResidual(const TetMesh &mesh, const ConstraintRow &row, const VecX &x);

double constraintEnergy(const TetMesh &mesh, const std::vector<ConstraintRow> &rows,
                        const VecX &x);

void addConstraintGradient(const TetMesh &mesh, const std::vector<ConstraintRow> &rows,
                           const VecX &x, VecX &grad);

// Hessian of the quadratic terms, independent of x.
void addConstraintHessianTriplets(const TetMesh &mesh, const std::vector<ConstraintRow> &rows,
                                  std::vector<Triplet> &triplets);

// Dense right-hand-side block [sqrt(c_k) A_k^T e_d] with one column per
// (row k, coordinate d); feeds the multi-RHS solves of the Gauss-Newton step.
MatX constraintRhsMatrix(const TetMesh &mesh, const std::vector<ConstraintRow> &rows,
                         int numVertices);

// Scaled residual stack r~ with r~_k = sqrt(c_k) (A_k x + b_k).
VecX constraintScaledResiduals(const TetMesh &mesh, const std::vector<ConstraintRow> &rows,
                               const VecX &x);

// Attachment and landmark rows with class weights folded in.
std::vector<ConstraintRow> attachmentRows(const TetMesh &mesh, const ConstraintSet &set,
                                          double beta);
std::vector<ConstraintRow> landmarkRows(const TetMesh &mesh, const ConstraintSet &set,
                                        double alpha);
// ICP rows freeze the current closest-point correspondences at x.
std::vector<ConstraintRow> icpRows(const TetMesh &mesh, const ConstraintSet &set, const VecX &x,
                                   double alpha);

}  // namespace plastifit
