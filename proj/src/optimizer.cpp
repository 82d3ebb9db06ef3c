#include "plastifit/optimizer.hpp"

#include <Eigen/SparseCholesky>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <limits>

namespace plastifit
{

namespace
{

using Clock = std::chrono::steady_clock;

double elapsedMs(Clock::time_point since)
{
  return std::chrono::duration<double, std::milli>(Clock::now() - since).count();
}

// Factors K_tot = elastic stiffness + attachment springs and solves the dense
// multi-RHS block. Near-singular factorizations retry with a diagonal shift.
MatX solveStiffnessAttached(const SpMat &hessXX, const TetMesh &mesh,
                            const std::vector<ConstraintRow> &attachments, const MatX &rhs)
{
  const int dim = int(hessXX.rows());
  std::vector<Triplet> triplets;
  triplets.reserve(size_t(hessXX.nonZeros()) + attachments.size() * 48);
  for (int col = 0; col < hessXX.outerSize(); col++)
    for (SpMat::InnerIterator it(hessXX, col); it; ++it)
      triplets.emplace_back(int(it.row()), col, it.value());
  addConstraintHessianTriplets(mesh, attachments, triplets);
  SpMat K(dim, dim);
  K.setFromTriplets(triplets.begin(), triplets.end());

  double diagScale = 0.0;
  for (int i = 0; i < dim; i++)
    diagScale = std::max(diagScale, std::abs(K.coeff(i, i)));
  if (diagScale == 0.0)
    diagScale = 1.0;

  Eigen::SimplicialLDLT<SpMat> ldlt;
  double tau = 0.0;
  for (int attempt = 0; attempt < 40; attempt++) {
    SpMat Kreg = K;
    if (tau > 0.0) {
      SpMat I(dim, dim);
      I.setIdentity();
      Kreg = K + tau * I;
    }
    ldlt.compute(Kreg);
    if (ldlt.info() == Eigen::Success) {
      MatX W = ldlt.solve(rhs);
      if (W.allFinite())
        return W;
    }
    tau = (tau == 0.0) ? 1e-12 * diagScale : 10.0 * tau;
  }
  throw NumericalError("stiffness solve failed even with heavy regularization");
}

MatX solveStiffnessUnattached(const SpMat &hessXX, const VecX &x, const MatX &rhs)
{
  // The elastic stiffness is singular on the rigid modes; the sensitivity
  // right-hand sides are solved in the range because the downstream
  // contraction with the mixed Hessian annihilates the rigid components.
  // The rotation vectors live in the nullspace only at equilibrium, and the
  // inner solve may have stopped anywhere within its force tolerance, so the
  // verification here only screens out far-from-equilibrium misuse.
  KnownNullspaceMatrix K(hessXX, stiffnessNullspace(x), 1e-4);
  MatX W(rhs.rows(), rhs.cols());
  for (int c = 0; c < rhs.cols(); c++)
    W.col(c) = K.solveProjected(rhs.col(c));
  return W;
}

}  // namespace

const char *terminationReasonName(TerminationReason reason)
{
  switch (reason) {
  case TerminationReason::MaxIterations:
    return "MaxIterations";
  case TerminationReason::IcpErrorBelowThreshold:
    return "IcpErrorBelowThreshold";
  case TerminationReason::StepSizeBelowMin:
    return "StepSizeBelowMin";
  }
  return "Unknown";
}

const char *stageName(Stage stage)
{
  switch (stage) {
  case Stage::Attachments:
    return "attachments";
  case Stage::Landmarks:
    return "landmarks";
  case Stage::Icp:
    return "icp";
  }
  return "unknown";
}

VecX gaussNewtonDirection(const TetMesh &mesh, const MaterialParams &mat,
                          const PlasticField &field, const VecX &x,
                          const std::vector<ConstraintRow> &attachments,
                          const std::vector<ConstraintRow> &markerRows,
                          const KnownNullspaceMatrix &base, bool unattached,
                          GaussNewtonDiagnostics *diagnostics)
{
  if (markerRows.empty())
    throw ValidationError("the strain update needs at least one marker row");
  const int n = mesh.numVertices();
  const int sdim = 6 * mesh.numTets();

  ElasticAssembly assembly = assembleElastic(mesh, mat, field, x, 2, true);
  MatX rhs = constraintRhsMatrix(mesh, markerRows, n);
  MatX W = unattached ? solveStiffnessUnattached(assembly.hessXX, x, rhs)
                      : solveStiffnessAttached(assembly.hessXX, mesh, attachments, rhs);

  // Row 3k+d of Z is sqrt(c_k) times row d of A_k J, J = -K^{-1} C.
  MatX Z = -(assembly.hessXS.transpose() * W).transpose();
  VecX residuals = constraintScaledResiduals(mesh, markerRows, x);
  VecX gradient = base.matrix() * field.s + Z.transpose() * residuals;

  MatX zhat(Z.rows() + base.nullity(), sdim);
  zhat.topRows(Z.rows()) = Z;
  for (int i = 0; i < base.nullity(); i++)
    zhat.row(Z.rows() + i) = base.nullspace()[size_t(i)].transpose();
  WoodburyOperator hessian = WoodburyOperator::build(base, std::move(zhat));

  VecX delta = -hessian.solve(gradient);
  if (diagnostics) {
    diagnostics->Z = std::move(Z);
    diagnostics->residuals = std::move(residuals);
    diagnostics->gradient = std::move(gradient);
  }
  return delta;
}

LineSearchResult brentLineSearch(const std::function<double(double)> &phi, double phi0,
                                 double etaMax, double tol)
{
  LineSearchResult best;
  best.eta = 0.0;
  best.objective = phi0;

  auto evaluate = [&](double eta) {
    double value = phi(eta);
    best.evaluations++;
    if (value < best.objective) {
      best.objective = value;
      best.eta = eta;
    }
    return value;
  };

  double x, fx;  // interior point seeding the Brent loop
  const double probe = std::min(1.0, 0.5 * etaMax + 0.25);
  double fprobe = evaluate(probe);
  if (fprobe < phi0) {
    x = probe;
    fx = fprobe;
    if (etaMax > probe + 1e-12) {
      double fend = evaluate(etaMax);
      if (fend < fx) {
        x = etaMax;
        fx = fend;
      }
    }
  } else {
    // Shrink toward 0 until something decreases.
    double eta = 0.5 * probe;
    bool found = false;
    while (eta >= 1e-3) {
      double f = evaluate(eta);
      if (f < phi0) {
        x = eta;
        fx = f;
        found = true;
        break;
      }
      eta *= 0.5;
    }
    if (!found)
      return best;  // eta = 0: no decrease along this direction
  }

  // Brent minimization on [0, etaMax] seeded at x.
  double a = 0.0, b = etaMax;
  double w = x, v = x, fw = fx, fv = fx;
  double d = 0.0, e = 0.0;
  const double goldenStep = 0.5 * (3.0 - std::sqrt(5.0));
  for (int iter = 0; iter < 12; iter++) {
    const double m = 0.5 * (a + b);
    const double tol1 = tol * std::abs(x) + 1e-10;
    const double tol2 = 2.0 * tol1;
    if (std::abs(x - m) <= tol2 - 0.5 * (b - a))
      break;
    double p = 0.0, q = 0.0, r = 0.0;
    if (std::abs(e) > tol1) {
      r = (x - w) * (fx - fv);
      q = (x - v) * (fx - fw);
      p = (x - v) * q - (x - w) * r;
      q = 2.0 * (q - r);
      if (q > 0.0)
        p = -p;
      else
        q = -q;
      r = e;
      e = d;
    }
    if (std::abs(p) < std::abs(0.5 * q * r) && p > q * (a - x) && p < q * (b - x)) {
      d = p / q;
      double u = x + d;
      if (u - a < tol2 || b - u < tol2)
        d = (m > x) ? tol1 : -tol1;
    } else {
      e = (x < m) ? b - x : a - x;
      d = goldenStep * e;
    }
    const double u = x + ((std::abs(d) >= tol1) ? d : (d > 0.0 ? tol1 : -tol1));
    const double fu = evaluate(u);
    if (fu <= fx) {
      if (u < x)
        b = x;
      else
        a = x;
      v = w;
      fv = fw;
      w = x;
      fw = fx;
      x = u;
      fx = fu;
    } else {
      if (u < x)
        a = u;
      else
        b = u;
      if (fu <= fw || w == x) {
        v = w;
        fv = fw;
        w = u;
        fw = fu;
      } else if (fu <= fv || v == x || v == w) {
        v = u;
        fv = fu;
      }
    }
  }
  return best;
}

namespace
{

// Shared state of one fit invocation.
struct FitContext
{
  const TetMesh &mesh;
  const MaterialParams &mat;
  const ConstraintSet &set;
  const SolveConfig &config;
  std::vector<ConstraintRow> attachments;
  std::vector<ConstraintRow> landmarks;
  std::vector<MaterialPoint> gaugePoints;  // unattached only
};

std::vector<MaterialPoint> unattachedGaugePoints(const TetMesh &mesh, const ConstraintSet &set)
{
  std::vector<MaterialPoint> points;
  if (set.landmarks.size() >= 3) {
    for (const Landmark &lm : set.landmarks)
      points.push_back(lm.point);
    return points;
  }
  if (set.icpMarkers.size() < 3)
    throw ValidationError("an unattached fit needs at least 3 landmarks or 3 surface markers "
                          "to determine the rigid placement");
  const VecX rest = mesh.restPositionsVector();
  for (const IcpMarker &marker : set.icpMarkers)
    points.push_back(mesh.materialPointFromSurfacePoint(
        mesh.closestSurfacePoint(rest, marker.target)));
  return points;
}

double markerEnergyTrue(const FitContext &ctx, Stage stage, const VecX &x)
{
  double energy = constraintEnergy(ctx.mesh, ctx.attachments, x);
  if (int(stage) >= int(Stage::Landmarks))
    energy += constraintEnergy(ctx.mesh, ctx.landmarks, x);
  if (stage == Stage::Icp) {
    for (const IcpMarker &marker : ctx.set.icpMarkers) {
      const double dist = ctx.mesh.closestSurfacePoint(x, marker.target).distance;
      energy += 0.5 * ctx.config.alpha * marker.weight * dist * dist;
    }
  }
  return energy;
}

void icpErrorStats(const FitContext &ctx, const VecX &x, double &meanMm, double &maxMm)
{
  meanMm = 0.0;
  maxMm = 0.0;
  if (ctx.set.icpMarkers.empty())
    return;
  for (const IcpMarker &marker : ctx.set.icpMarkers) {
    const double mm = 1000.0 * ctx.mesh.closestSurfacePoint(x, marker.target).distance;
    meanMm += mm;
    maxMm = std::max(maxMm, mm);
  }
  meanMm /= double(ctx.set.icpMarkers.size());
}

struct EquilibriumResult
{
  VecX x;
  bool converged = false;
  double forceResidual = 0.0;
};

EquilibriumResult solveEquilibrium(const FitContext &ctx, const PlasticField &field,
                                   const RigidTargets &targets, const VecX &x0)
{
  EquilibriumResult out;
  if (ctx.config.unattached) {
    EquilibriumState st = staticSolveUnattached(ctx.mesh, ctx.mat, field, ctx.gaugePoints,
                                                targets, x0, ctx.config.equilibrium);
    out.x = std::move(st.x);
    out.converged = st.converged;
    out.forceResidual = st.forceResidual;
  } else {
    EquilibriumState st = staticSolveAttached(ctx.mesh, ctx.mat, field, ctx.attachments, x0,
                                              ctx.config.equilibrium);
    out.x = std::move(st.x);
    out.converged = st.converged;
    out.forceResidual = st.forceResidual;
  }
  return out;
}

// Rigidly re-aligns the floating mesh onto the marker data and refreshes the
// gauge targets; x is already an equilibrium and stays one under rigid motion.
void realignGauge(const FitContext &ctx, Stage stage, VecX &x, RigidTargets &targets)
{
  std::vector<Vec3> from, to;
  std::vector<double> weights;
  if (int(stage) >= int(Stage::Landmarks)) {
    for (const Landmark &lm : ctx.set.landmarks) {
      from.push_back(ctx.mesh.materialPointPosition(x, lm.point));
      to.push_back(lm.target);
      weights.push_back(lm.weight);
    }
  }
  if (stage == Stage::Icp) {
    for (const IcpMarker &marker : ctx.set.icpMarkers) {
      from.push_back(ctx.mesh.closestSurfacePoint(x, marker.target).position);
      to.push_back(marker.target);
      weights.push_back(marker.weight);
    }
  }
  if (from.size() < 3)
    return;
  Mat3 R;
  Vec3 t;
  rigidAlign(from, to, weights, R, t);
  const int n = int(x.size()) / 3;
  for (int i = 0; i < n; i++)
    x.segment<3>(3 * i) = R * Vec3(x.segment<3>(3 * i)) + t;
  targets = shapeMatchingState(ctx.mesh, ctx.gaugePoints, x);
}

VecX collapsedDirection(const FitContext &ctx, const PlasticField &field, const VecX &x,
                        const std::vector<ConstraintRow> &rows)
{
  ElasticAssembly assembly = assembleElastic(ctx.mesh, ctx.mat, field, x, 2, true);
  MatX rhs = constraintRhsMatrix(ctx.mesh, rows, ctx.mesh.numVertices());
  MatX W = ctx.config.unattached
               ? solveStiffnessUnattached(assembly.hessXX, x, rhs)
               : solveStiffnessAttached(assembly.hessXX, ctx.mesh, ctx.attachments, rhs);

  // Collapse the mixed Hessian onto a single shared 6-parameter strain.
  MatX Cg = MatX::Zero(3 * ctx.mesh.numVertices(), 6);
  for (int col = 0; col < assembly.hessXS.outerSize(); col++)
    for (SpMat::InnerIterator it(assembly.hessXS, col); it; ++it)
      Cg(it.row(), col % 6) += it.value();

  MatX Zg = -(W.transpose() * Cg);
  VecX residuals = constraintScaledResiduals(ctx.mesh, rows, x);
  Vec6 gradient = Zg.transpose() * residuals;
  Eigen::Matrix<double, 6, 6> H = Zg.transpose() * Zg;
  const double ridge = std::max(1e-12 * H.trace() / 6.0, 1e-300);
  H += ridge * Eigen::Matrix<double, 6, 6>::Identity();
  return -H.ldlt().solve(gradient);
}

}  // namespace

InitialGuess initialGuess(const TetMesh &mesh, const MaterialParams &mat,
                          const ConstraintSet &set, const SolveConfig &config)
{
  FitContext ctx{mesh, mat, set, config, attachmentRows(mesh, set, config.beta),
                 landmarkRows(mesh, set, config.alpha), {}};

  InitialGuess out;
  out.field = PlasticField::identity(mesh.numTets());
  const VecX rest = mesh.restPositionsVector();

  if (config.unattached) {
    ctx.gaugePoints = unattachedGaugePoints(mesh, set);
    std::vector<Vec3> from, to;
    std::vector<double> weights;
    if (set.landmarks.size() >= 3) {
      for (const Landmark &lm : set.landmarks) {
        from.push_back(mesh.materialPointPosition(rest, lm.point));
        to.push_back(lm.target);
        weights.push_back(lm.weight);
      }
    } else {
      for (const IcpMarker &marker : set.icpMarkers) {
        from.push_back(mesh.closestSurfacePoint(rest, marker.target).position);
        to.push_back(marker.target);
        weights.push_back(marker.weight);
      }
    }
    Mat3 R;
    Vec3 t;
    rigidAlign(from, to, weights, R, t);
    VecX x0(rest.size());
    for (int i = 0; i < mesh.numVertices(); i++)
      x0.segment<3>(3 * i) = R * Vec3(rest.segment<3>(3 * i)) + t;
    out.targets = shapeMatchingState(mesh, ctx.gaugePoints, x0);
    out.x = std::move(x0);
  } else {
    if (ctx.attachments.empty())
      throw ValidationError("an attached fit needs attachments; "
                            "request the unattached mode otherwise");
    out.x = rest;
  }
  {
    EquilibriumResult eq = solveEquilibrium(ctx, out.field, out.targets, out.x);
    out.x = std::move(eq.x);
    out.converged = eq.converged;
  }

  // Constant-strain fit: one shared 6-parameter strain by collapsed
  // Gauss-Newton. Smoothness vanishes identically for constant fields.
  Vec6 sc = sFromFp(Mat3::Identity());
  for (int iter = 0; iter < 10; iter++) {
    std::vector<ConstraintRow> rows = ctx.attachments;
    rows.insert(rows.end(), ctx.landmarks.begin(), ctx.landmarks.end());
    {
      std::vector<ConstraintRow> icp = icpRows(mesh, set, out.x, config.alpha);
      rows.insert(rows.end(), icp.begin(), icp.end());
    }
    if (rows.empty())
      break;

    const double phi0 = markerEnergyTrue(ctx, Stage::Icp, out.x);
    VecX delta6 = collapsedDirection(ctx, out.field, out.x, rows);

    struct Best
    {
      Vec6 s;
      VecX x;
      double value = std::numeric_limits<double>::infinity();
    } best;
    auto phi = [&](double eta) {
      Vec6 strial = sc + eta * Vec6(delta6);
      clampSpd(strial, config.spdFloor);
      PlasticField trial = out.field;
      for (int t = 0; t < mesh.numTets(); t++)
        trial.setTet(t, strial);
      try {
        EquilibriumResult eq = solveEquilibrium(ctx, trial, out.targets, out.x);
        const double value = markerEnergyTrue(ctx, Stage::Icp, eq.x);
        if (value < best.value) {
          best.s = strial;
          best.x = std::move(eq.x);
          best.value = value;
        }
        return value;
      } catch (const NumericalError &) {
        return std::numeric_limits<double>::infinity();
      }
    };
    LineSearchResult ls = brentLineSearch(phi, phi0, config.etaMax, config.brentTol);
    if (ls.eta < config.etaMin || best.value >= phi0)
      break;
    sc = best.s;
    for (int t = 0; t < mesh.numTets(); t++)
      out.field.setTet(t, sc);
    out.x = std::move(best.x);
    if (config.unattached)
      out.targets = shapeMatchingState(mesh, ctx.gaugePoints, out.x);
    if (phi0 - best.value < 1e-3 * std::max(phi0, 1e-300))
      break;
  }
  return out;
}

FitResult fit(const TetMesh &mesh, const MaterialParams &mat, const ConstraintSet &set,
              const SolveConfig &config)
{
  if (config.alpha <= 0.0 || config.beta <= 0.0 || config.smoothnessWeight <= 0.0)
    throw ValidationError("class weights and the smoothness weight must be positive");
  if (config.spdFloor <= 0.0)
    throw ValidationError("the strain eigenvalue floor must be positive");
  if (config.unattached && !set.attachments.empty())
    throw ValidationError("attachments are incompatible with the unattached mode");
  if (!config.unattached && set.attachments.empty())
    throw ValidationError("an attached fit needs attachments; "
                          "request the unattached mode otherwise");
  if (set.attachments.empty() && set.landmarks.empty() && set.icpMarkers.empty())
    throw ValidationError("the fit needs at least one marker");

  FitContext ctx{mesh, mat, set, config, attachmentRows(mesh, set, config.beta),
                 landmarkRows(mesh, set, config.alpha), {}};
  if (config.unattached)
    ctx.gaugePoints = unattachedGaugePoints(mesh, set);

  StrainLaplacian laplacian = StrainLaplacian::build(mesh);
  KnownNullspaceMatrix base(laplacian.squared(config.smoothnessWeight),
                            laplacian.nullspaceVectors());

  InitialGuess guess = initialGuess(mesh, mat, set, config);
  FitResult result;
  result.field = std::move(guess.field);
  result.x = std::move(guess.x);
  result.targets = guess.targets;
  if (!guess.converged)
    result.report.warnings.push_back("the initial equilibrium did not fully converge");

  auto fullObjective = [&](const PlasticField &field, const VecX &x) {
    return config.smoothnessWeight * laplacian.smoothnessEnergy(field.s) +
           markerEnergyTrue(ctx, Stage::Icp, x);
  };
  result.report.initialObjective = fullObjective(result.field, result.x);
  icpErrorStats(ctx, result.x, result.report.initialMeanIcpErrorMm,
                result.report.initialMaxIcpErrorMm);

  int clampedIterations = 0;
  for (Stage stage : {Stage::Attachments, Stage::Landmarks, Stage::Icp}) {
    StageSummary summary;
    summary.stage = stage;
    if (stage == Stage::Attachments && ctx.attachments.empty()) {
      summary.skipReason = "no attachments";
      result.report.stages.push_back(summary);
      continue;
    }
    if (stage == Stage::Landmarks && ctx.landmarks.empty()) {
      summary.skipReason = "no landmarks";
      result.report.stages.push_back(summary);
      continue;
    }
    if (stage == Stage::Icp && set.icpMarkers.empty()) {
      summary.skipReason = "no surface markers";
      result.report.stages.push_back(summary);
      continue;
    }
    summary.ran = true;
    summary.termination = TerminationReason::MaxIterations;

    for (int iter = 0; iter < config.maxOuterIterations; iter++) {
      const Clock::time_point t0 = Clock::now();
      summary.iterations = iter + 1;

      EquilibriumResult eq = solveEquilibrium(ctx, result.field, result.targets, result.x);
      result.x = std::move(eq.x);
      if (!eq.converged)
        result.report.warnings.push_back(std::string("equilibrium stalled in the ") +
                                         stageName(stage) + " stage");
      if (config.unattached)
        realignGauge(ctx, stage, result.x, result.targets);

      std::vector<ConstraintRow> rows = ctx.attachments;
      if (int(stage) >= int(Stage::Landmarks))
        rows.insert(rows.end(), ctx.landmarks.begin(), ctx.landmarks.end());
      if (stage == Stage::Icp) {
        std::vector<ConstraintRow> icp = icpRows(mesh, set, result.x, config.alpha);
        rows.insert(rows.end(), icp.begin(), icp.end());
      }

      const double smoothness =
          config.smoothnessWeight * laplacian.smoothnessEnergy(result.field.s);
      const double phi0 = smoothness + markerEnergyTrue(ctx, stage, result.x);
      if (std::getenv("PLASTIFIT_TRACE"))
        std::fprintf(stderr, "  stage %s iter %d: phi0 %.10g (smooth %.4g)\n", stageName(stage),
                     iter, phi0, smoothness);
      VecX delta = gaussNewtonDirection(mesh, mat, result.field, result.x,
                                        config.unattached ? std::vector<ConstraintRow>{}
                                                          : ctx.attachments,
                                        rows, base, config.unattached);

      struct Best
      {
        PlasticField field;
        VecX x;
        double value = std::numeric_limits<double>::infinity();
        double forceResidual = 0.0;
        bool clamped = false;
      } best;
      auto phi = [&](double eta) {
        PlasticField trial = result.field;
        trial.s += eta * delta;
        const bool clamped = clampSpdField(trial, config.spdFloor);
        try {
          EquilibriumResult eqTrial = solveEquilibrium(ctx, trial, result.targets, result.x);
          const double value =
              config.smoothnessWeight * laplacian.smoothnessEnergy(trial.s) +
              markerEnergyTrue(ctx, stage, eqTrial.x);
          if (std::getenv("PLASTIFIT_TRACE"))
            std::fprintf(stderr, "    probe eta %.4g -> %.10g%s\n", eta, value,
                         clamped ? " (clamped)" : "");
          if (value < best.value) {
            best.field = std::move(trial);
            best.x = std::move(eqTrial.x);
            best.value = value;
            best.forceResidual = eqTrial.forceResidual;
            best.clamped = clamped;
          }
          return value;
        } catch (const NumericalError &) {
          if (std::getenv("PLASTIFIT_TRACE"))
            std::fprintf(stderr, "    probe eta %.4g -> numerical failure\n", eta);
          return std::numeric_limits<double>::infinity();
        }
      };
      LineSearchResult ls = brentLineSearch(phi, phi0, config.etaMax, config.brentTol);

      // Decreases below the line search resolution are indistinguishable from
      // equilibrium solver noise; chasing them would random-walk the field.
      if (ls.eta < config.etaMin || !(phi0 - best.value >= 1e-6 * (1.0 + phi0))) {
        summary.termination = TerminationReason::StepSizeBelowMin;
        break;
      }
      result.field = std::move(best.field);
      result.x = std::move(best.x);
      if (best.clamped)
        clampedIterations++;

      IterationRecord record;
      record.stage = stage;
      record.iteration = iter;
      record.smoothness =
          config.smoothnessWeight * laplacian.smoothnessEnergy(result.field.s);
      record.markerTerm = markerEnergyTrue(ctx, stage, result.x);
      record.objective = record.smoothness + record.markerTerm;
      record.eta = ls.eta;
      record.clamped = best.clamped;
      record.forceResidual = best.forceResidual;
      icpErrorStats(ctx, result.x, record.meanIcpErrorMm, record.maxIcpErrorMm);
      record.wallTimeMs = elapsedMs(t0);
      result.report.iterations.push_back(record);

      if (stage == Stage::Icp && record.meanIcpErrorMm <= config.icpStopMm) {
        summary.termination = TerminationReason::IcpErrorBelowThreshold;
        break;
      }
    }
    result.report.stages.push_back(summary);
  }

  if (clampedIterations > 0)
    result.report.warnings.push_back("the strain eigenvalue floor engaged in " +
                                     std::to_string(clampedIterations) + " accepted iterations");

  result.report.finalObjective = fullObjective(result.field, result.x);
  icpErrorStats(ctx, result.x, result.report.finalMeanIcpErrorMm,
                result.report.finalMaxIcpErrorMm);
  return result;
}

}  // namespace plastifit
