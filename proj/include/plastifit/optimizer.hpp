#pragma once

#include "constraints.hpp"
#include "equilibrium.hpp"
#include "singular_linalg.hpp"
#include "strain_laplacian.hpp"

#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace plastifit
{

struct SolveConfig
{
  double alpha = 1e9;  // landmark / ICP class weight
  double beta = 1e8;   // attachment class weight
  double smoothnessWeight = 1.0;
  double spdFloor = 0.01;
  int maxOuterIterations = 20;  // per stage
  double etaMin = 0.01;
  double etaMax = 1.5;
  double brentTol = 1e-3;
  double icpStopMm = 1.0;
  bool unattached = false;
  EquilibriumOptions equilibrium;
};

enum class TerminationReason
{
  MaxIterations,
  IcpErrorBelowThreshold,
  StepSizeBelowMin,
};

const char *terminationReasonName(TerminationReason reason);

enum class Stage
{
  Attachments = 0,
  Landmarks = 1,
  Icp = 2,
};

const char *stageName(Stage stage);

struct IterationRecord
{
  Stage stage = Stage::Attachments;
  int iteration = 0;  // within the stage
  double objective = 0.0;
  double smoothness = 0.0;
  double markerTerm = 0.0;
  double eta = 0.0;
  bool clamped = false;
  double meanIcpErrorMm = 0.0;  // over ICP markers; 0 when none
  double maxIcpErrorMm = 0.0;
  double forceResidual = 0.0;
  double wallTimeMs = 0.0;
};

struct StageSummary
{
  Stage stage = Stage::Attachments;
  bool ran = false;
  std::string skipReason;
  TerminationReason termination = TerminationReason::MaxIterations;
  int iterations = 0;
};

struct SolveReport
{
  std::vector<IterationRecord> iterations;
  std::vector<StageSummary> stages;
  double initialObjective = 0.0;
  double finalObjective = 0.0;
  double initialMeanIcpErrorMm = 0.0;
  double initialMaxIcpErrorMm = 0.0;
  double finalMeanIcpErrorMm = 0.0;
  double finalMaxIcpErrorMm = 0.0;
  std::vector<std::string> warnings;
};

struct FitResult
{
  PlasticField field;
  VecX x;
  RigidTargets targets;
  SolveReport report;
};

// One Gauss-Newton direction at the equilibrium x of (field, attachments).
// attachments enter both the net force and the objective; markerRows enter
// the objective only. base holds the weighted squared Laplacian with its
// nullspace and is reused across iterations.
struct GaussNewtonDiagnostics
{
  MatX Z;         // scaled rows times the equilibrium Jacobian
  VecX residuals; // scaled marker residuals
  VecX gradient;  // L^2 s + Z^T r
};

VecX gaussNewtonDirection(const TetMesh &mesh, const MaterialParams &mat,
                          const PlasticField &field, const VecX &x,
                          const std::vector<ConstraintRow> &attachments,
                          const std::vector<ConstraintRow> &markerRows,
                          const KnownNullspaceMatrix &base, bool unattached,
                          GaussNewtonDiagnostics *diagnostics = nullptr);

struct LineSearchResult
{
  double eta = 0.0;
  double objective = 0.0;
  int evaluations = 0;
};

// Brent minimization of phi over [0, etaMax]; phi(0) is passed precomputed.
// Returns the best evaluated point (eta = 0 when no decrease was found).
LineSearchResult brentLineSearch(const std::function<double(double)> &phi, double phi0,
                                 double etaMax, double tol);

// Constant-field initial guess: a single 6-parameter strain fitted by the
// same Gauss-Newton machinery, plus (for unattached inputs) the rigid
// targets estimated by shape matching.
struct InitialGuess
{
  PlasticField field;
  VecX x;
  RigidTargets targets;
  bool converged = true;
};

InitialGuess initialGuess(const TetMesh &mesh, const MaterialParams &mat,
                          const ConstraintSet &set, const SolveConfig &config);

FitResult fit(const TetMesh &mesh, const MaterialParams &mat, const ConstraintSet &set,
              const SolveConfig &config);

}  // namespace plastifit
