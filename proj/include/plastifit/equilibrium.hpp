#pragma once

#include "constraints.hpp"
#include "material.hpp"
#include "polar_decomposition.hpp"
#include "tet_mesh.hpp"
#include "types.hpp"

#include <vector>

namespace plastifit
{

// Gauge targets of the unattached stabilization: centroid displacement t and
// rotation R of the marker-set shape matching.
struct RigidTargets
{
  Mat3 R = Mat3::Identity();
  Vec3 t = Vec3::Zero();
};

struct EquilibriumState
{
  VecX x;
  RigidTargets targets;
  bool converged = false;
  double forceResidual = 0.0;       // |f_net| (elastic + attachments)
  double constraintResidual = 0.0;  // unattached: centroid + rotation violation
  int newtonIterations = 0;
};

struct EquilibriumOptions
{
  // <= 0 selects the stress-scale default: 1e-10 * E * diag^2 with
  // attachments, else 1e-12 * E * diag^2.
  double forceTol = 0.0;
  int maxNewtonIterations = 200;
  double constraintTol = 1e-8;
  int maxOuterIterations = 40;  // augmented Lagrangian rounds
};

// Elastic totals over the mesh at (field, x).
struct ElasticAssembly
{
  double energy = 0.0;
  VecX grad;     // 3n
  SpMat hessXX;  // 3n x 3n, order >= 2
  SpMat hessXS;  // 3n x 6m, only when requested
};

ElasticAssembly assembleElastic(const TetMesh &mesh, const MaterialParams &mat,
                                const PlasticField &field, const VecX &x, int order,
                                bool withHessXS = false);

// Minimizes elastic energy plus the attachment springs by damped Newton.
EquilibriumState staticSolveAttached(const TetMesh &mesh, const MaterialParams &mat,
                                     const PlasticField &field,
                                     const std::vector<ConstraintRow> &attachments,
                                     const VecX &x0, const EquilibriumOptions &opts = {});

// Unattached equilibrium: elastic forces vanish while the marker centroid and
// the shape-matching rotation are pinned to the targets. Constraints are
// enforced by an augmented Lagrangian; because they only fix the rigid gauge,
// the converged multipliers are zero and the elastic residual itself drops to
// forceTol.
EquilibriumState staticSolveUnattached(const TetMesh &mesh, const MaterialParams &mat,
                                       const PlasticField &field,
                                       const std::vector<MaterialPoint> &markerSet,
                                       const RigidTargets &targets, const VecX &x0,
                                       const EquilibriumOptions &opts = {});

// Orthonormalized rigid modes at x: 3 translations and 3 linearized rotations.
// They span the stiffness matrix nullspace exactly at unattached equilibria.
std::vector<VecX> stiffnessNullspace(const VecX &x);

// Shape-matching state of a marker set: centroid displacement and the polar
// rotation of the weighted covariance with the rest configuration.
RigidTargets shapeMatchingState(const TetMesh &mesh, const std::vector<MaterialPoint> &markerSet,
                                const VecX &x);

// Best rigid motion q -> R p + t aligning weighted point pairs (p_i, q_i).
void rigidAlign(const std::vector<Vec3> &from, const std::vector<Vec3> &to,
                const std::vector<double> &weights, Mat3 &R, Vec3 &t);

}  // namespace plastifit
