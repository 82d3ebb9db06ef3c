#pragma once

#include "constraints.hpp"
#include "equilibrium.hpp"
#include "material.hpp"
#include "mesh_factory.hpp"
#include "optimizer.hpp"
#include "tet_mesh.hpp"

#include <functional>
#include <string>

namespace plastifit
{

// Ground-truth fixture: a prescribed smooth plastic strain field, its forward
// equilibrium, and markers sampled exactly from the deformed surface.
struct SyntheticCase
{
  TetMesh mesh;
  MaterialParams material;
  PlasticField truthField;
  VecX truthX;
  ConstraintSet markers;
  RigidTargets truthTargets;
  double noiseSigma = 0.0;
  bool attached = true;
};

// Maps a rest position to the 6 strain parameters; must yield SPD strains.
using StrainRecipe = std::function<Vec6(const Vec3 &)>;

struct SyntheticOptions
{
  int numLandmarks = 12;
  int numIcpMarkers = 24;
  double noiseSigma = 0.0;  // meters, added to closest-point targets
  bool attached = true;
  unsigned seed = 7;
  double attachmentWeight = 1e8;  // matches the default fit class weight
  double forceTol = 0.0;          // <= 0: 1e-8 * E * diag^2
};

// Evaluates the recipe at tet centroids, solves the forward equilibrium
// (attached: one face pinned to rest by attachments; unattached: gauge fixed
// by marker shape matching), and samples disjoint landmark / closest-point
// marker sets from surface vertices of the deformed state.
SyntheticCase makeSynthetic(const TetMesh &mesh, const MaterialParams &mat,
                            const StrainRecipe &recipe, const SyntheticOptions &opts);

struct RecoveryScore
{
  double meanMarkerError = 0.0;  // meters, landmarks + closest-point markers
  double maxMarkerError = 0.0;
  double meanFieldError = 0.0;  // relative, rotation gauge removed
  double maxFieldError = 0.0;
  FitResult fit;
};

// Runs the full fit on the case's markers and scores against the truth. The
// field metric compares symmetric polar factors per tet, which removes the
// rotation gauge of the plastic strain.
RecoveryScore recoverAndScore(const SyntheticCase &c, const SolveConfig &config);

// Brute-force strain update on small fixtures (6m <= 500): the equilibrium
// sensitivity is formed as an explicit dense matrix and the step is solved
// twice, by normal equations and by stacked least squares. The two must agree
// to machine-level accuracy; both serve as oracles for the fast path.
struct ReferenceStep
{
  VecX normalEquations;
  VecX stackedLeastSquares;
};

ReferenceStep denseReferenceStep(const TetMesh &mesh, const MaterialParams &mat,
                                 const PlasticField &field, const VecX &x,
                                 const std::vector<ConstraintRow> &attachments,
                                 const std::vector<ConstraintRow> &markerRows,
                                 double smoothnessWeight, bool unattached);

// Named strain recipes.
Vec6 identityStrain(const Vec3 &restPosition);
StrainRecipe constantStrain(const Vec6 &s);
// Smooth longitudinal stretch gradient with mild shear, SPD by construction;
// xRange maps rest x-coordinates to [0,1].
StrainRecipe stretchGradientStrain(double minX, double maxX, double peakStretch);

// Canned cases for the command line and the test suite:
// "beam" (attached, stretch gradient), "cube" (unattached, constant
// anisotropic), "blob" (unattached, smooth trig field).
SyntheticCase makePresetCase(const std::string &name, unsigned seed = 7);

}  // namespace plastifit
