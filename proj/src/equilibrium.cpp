#include "plastifit/equilibrium.hpp"

#include <Eigen/SparseCholesky>

#include <algorithm>
#include <cmath>
#include <limits>

namespace plastifit
{

namespace
{

constexpr double kArmijoSlope = 1e-4;

double defaultForceTol(const TetMesh &mesh, const MaterialParams &mat,
                       const std::vector<ConstraintRow> *attachments)
{
  // Anchored to the elastic force scale E * diag^2, never to attachment
  // weights: a residual of f leaves positions off by roughly f / (E * h), and
  // the outer fit compares marker energies at sub-micrometer resolution, so a
  // loose inner solve quantizes its line search. Attached solves carry stiff
  // springs whose cancellation noise sets a higher floor than the free case.
  const double diag = mesh.boundingBoxDiagonal();
  const double scale = mat.youngModulus * diag * diag;
  return (attachments && !attachments->empty()) ? 1e-10 * scale : 1e-12 * scale;
}

double elasticEnergyOnly(const TetMesh &mesh, const MaterialParams &mat,
                         const PlasticField &field, const VecX &x)
{
  double energy = 0.0;
  for (int t = 0; t < mesh.numTets(); t++)
    energy += tetEnergy(mat, mesh.deformationGradient(x, t), field.tet(t), mesh.restVolume(t));
  return energy;
}

// Damped Newton on a smooth objective. evaluate(x, &grad, &hessianTriplets)
// returns the value; gradient/Hessian pointers may be null for cheap calls.
// Steps that fail to decrease trigger Tikhonov-regularized retries.
struct NewtonOutcome
{
  bool converged = false;
  double gradNorm = 0.0;
  int iterations = 0;
};

template <typename Evaluate>
NewtonOutcome dampedNewton(const Evaluate &evaluate, VecX &x, double gradTol, int maxIterations)
{
  const int dim = int(x.size());
  NewtonOutcome outcome;
  Eigen::SimplicialLDLT<SpMat> ldlt;

  double value = 0.0;
  VecX grad(dim);
  std::vector<Triplet> triplets;
  for (int iter = 0; iter < maxIterations; iter++) {
    triplets.clear();
    value = evaluate(x, &grad, &triplets);
    outcome.gradNorm = grad.norm();
    outcome.iterations = iter;
    if (!std::isfinite(value))
      throw NumericalError("non-finite objective in static solve");
    if (outcome.gradNorm <= gradTol) {
      outcome.converged = true;
      return outcome;
    }

    SpMat H(dim, dim);
    H.setFromTriplets(triplets.begin(), triplets.end());
    double diagScale = 0.0;
    for (int i = 0; i < dim; i++)
      diagScale = std::max(diagScale, std::abs(H.coeff(i, i)));
    if (diagScale == 0.0)
      diagScale = 1.0;

    VecX direction;
    double tau = 0.0;
    for (int attempt = 0; attempt < 60; attempt++) {
      SpMat Hreg = H;
      if (tau > 0.0) {
        SpMat I(dim, dim);
        I.setIdentity();
        Hreg = H + tau * I;
      }
      ldlt.compute(Hreg);
      if (ldlt.info() == Eigen::Success) {
        direction = ldlt.solve(-grad);
        if (direction.dot(grad) < 0.0)
          break;
      }
      direction.resize(0);
      tau = (tau == 0.0) ? 1e-10 * diagScale : 10.0 * tau;
      if (tau > 1e10 * diagScale)
        throw NumericalError("static solve cannot produce a descent direction; "
                             "the Hessian is numerically indefinite beyond repair");
    }
    if (direction.size() == 0)
      throw NumericalError("static solve failed to factor the Hessian");

    const double slope = direction.dot(grad);
    double step = 1.0;
    bool accepted = false;
    for (int ls = 0; ls < 40; ls++) {
      VecX trial = x + step * direction;
      double trialValue = evaluate(trial, nullptr, nullptr);
      if (std::isfinite(trialValue) && trialValue <= value + kArmijoSlope * step * slope) {
        x = trial;
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    if (!accepted)
      return outcome;  // stalled below line-search resolution
  }
  triplets.clear();
  evaluate(x, &grad, nullptr);
  outcome.gradNorm = grad.norm();
  outcome.converged = outcome.gradNorm <= gradTol;
  outcome.iterations = maxIterations;
  return outcome;
}

}  // namespace

ElasticAssembly assembleElastic(const TetMesh &mesh, const MaterialParams &mat,
                                const PlasticField &field, const VecX &x, int order,
                                bool withHessXS)
{
  const int n = mesh.numVertices();
  const int m = mesh.numTets();
  if (x.size() != 3 * n)
    throw ValidationError("position vector size mismatch");
  if (field.numTets() != m)
    throw ValidationError("plastic field tet count mismatch");

  ElasticAssembly out;
  out.grad = VecX::Zero(3 * n);
  std::vector<Triplet> hxx, hxs;
  if (order >= 2)
    hxx.reserve(size_t(m) * 144);
  if (withHessXS)
    hxs.reserve(size_t(m) * 72);

  for (int t = 0; t < m; t++) {
    auto tv = mesh.tetVertices(t);
    std::array<Vec3, 4> xt;
    for (int c = 0; c < 4; c++)
      xt[size_t(c)] = mesh.position(x, tv[size_t(c)]);
    EnergyDerivatives d = tetDerivatives(mat, xt, mesh.restShapeInverse(t), field.tet(t),
                                         mesh.restVolume(t), order);
    out.energy += d.value;
    for (int a = 0; a < 4; a++)
      out.grad.segment<3>(3 * tv[size_t(a)]) += d.gradX.segment<3>(3 * a);
    if (order >= 2) {
      for (int a = 0; a < 4; a++)
        for (int b = 0; b < 4; b++)
          for (int r = 0; r < 3; r++)
            for (int c = 0; c < 3; c++)
              hxx.emplace_back(3 * tv[size_t(a)] + r, 3 * tv[size_t(b)] + c,
                               d.hessXX(3 * a + r, 3 * b + c));
    }
    if (withHessXS) {
      for (int a = 0; a < 4; a++)
        for (int r = 0; r < 3; r++)
          for (int c = 0; c < 6; c++)
            hxs.emplace_back(3 * tv[size_t(a)] + r, 6 * t + c, d.hessXS(3 * a + r, c));
    }
  }
  if (order >= 2) {
    out.hessXX.resize(3 * n, 3 * n);
    out.hessXX.setFromTriplets(hxx.begin(), hxx.end());
  }
  if (withHessXS) {
    out.hessXS.resize(3 * n, 6 * m);
    out.hessXS.setFromTriplets(hxs.begin(), hxs.end());
  }
  return out;
}

EquilibriumState staticSolveAttached(const TetMesh &mesh, const MaterialParams &mat,
                                     const PlasticField &field,
                                     const std::vector<ConstraintRow> &attachments,
                                     const VecX &x0, const EquilibriumOptions &opts)
{
  if (attachments.empty())
    throw ValidationError("attached solve needs at least one attachment; "
                          "use the unattached solve otherwise");
  const double tol =
      opts.forceTol > 0.0 ? opts.forceTol : defaultForceTol(mesh, mat, &attachments);

  EquilibriumState state;
  state.x = x0;

  auto evaluate = [&](const VecX &x, VecX *grad, std::vector<Triplet> *hess) {
    if (!grad && !hess)
      return elasticEnergyOnly(mesh, mat, field, x) + constraintEnergy(mesh, attachments, x);
    ElasticAssembly assembly = assembleElastic(mesh, mat, field, x, hess ? 2 : 1);
    double value = assembly.energy + constraintEnergy(mesh, attachments, x);
    if (grad) {
      *grad = assembly.grad;
      addConstraintGradient(mesh, attachments, x, *grad);
    }
    if (hess) {
      hess->reserve(size_t(assembly.hessXX.nonZeros()) + attachments.size() * 48);
      for (int col = 0; col < assembly.hessXX.outerSize(); col++)
        for (SpMat::InnerIterator it(assembly.hessXX, col); it; ++it)
          hess->emplace_back(int(it.row()), col, it.value());
      addConstraintHessianTriplets(mesh, attachments, *hess);
    }
    return value;
  };

  NewtonOutcome outcome = dampedNewton(evaluate, state.x, tol, opts.maxNewtonIterations);
  state.converged = outcome.converged;
  state.forceResidual = outcome.gradNorm;
  state.newtonIterations = outcome.iterations;
  return state;
}

std::vector<VecX> stiffnessNullspace(const VecX &x)
{
  const int n = int(x.size()) / 3;
  std::vector<VecX> basis;
  basis.reserve(6);
  for (int d = 0; d < 3; d++) {
    VecX v = VecX::Zero(3 * n);
    for (int i = 0; i < n; i++)
      v[3 * i + d] = 1.0;
    basis.push_back(std::move(v));
  }
  for (int d = 0; d < 3; d++) {
    Vec3 axis = Vec3::Unit(d);
    VecX v(3 * n);
    for (int i = 0; i < n; i++)
      v.segment<3>(3 * i) = axis.cross(Vec3(x.segment<3>(3 * i)));
    basis.push_back(std::move(v));
  }
  for (size_t i = 0; i < basis.size(); i++) {
    for (size_t j = 0; j < i; j++)
      basis[i] -= basis[j].dot(basis[i]) * basis[j];
    const double norm = basis[i].norm();
    if (norm <= 1e-12)
      throw NumericalError("rigid modes are degenerate (collapsed configuration)");
    basis[i] /= norm;
  }
  return basis;
}

RigidTargets shapeMatchingState(const TetMesh &mesh, const std::vector<MaterialPoint> &markerSet,
                                const VecX &x)
{
  if (markerSet.size() < 3)
    throw ValidationError("shape matching needs at least 3 markers");
  const double w = 1.0 / double(markerSet.size());
  const VecX X = mesh.restPositionsVector();

  Vec3 restCentroid = Vec3::Zero();
  for (const MaterialPoint &p : markerSet)
    restCentroid += w * mesh.materialPointPosition(X, p);

  RigidTargets state;
  state.t = Vec3::Zero();
  for (const MaterialPoint &p : markerSet)
    state.t += w * mesh.materialPointPosition(x, p);
  state.t -= restCentroid;

  Mat3 cov = Mat3::Zero();
  for (const MaterialPoint &p : markerSet) {
    const Vec3 q = mesh.materialPointPosition(X, p) - restCentroid;
    cov += w * (mesh.materialPointPosition(x, p) - state.t) * q.transpose();
  }
  state.R = polarDecompose(cov).R;
  return state;
}

void rigidAlign(const std::vector<Vec3> &from, const std::vector<Vec3> &to,
                const std::vector<double> &weights, Mat3 &R, Vec3 &t)
{
  if (from.size() != to.size() || from.size() != weights.size() || from.size() < 3)
    throw ValidationError("rigid alignment needs >= 3 weighted point pairs");
  double wsum = 0.0;
  Vec3 cf = Vec3::Zero(), ct = Vec3::Zero();
  for (size_t i = 0; i < from.size(); i++) {
    wsum += weights[i];
    cf += weights[i] * from[i];
    ct += weights[i] * to[i];
  }
  cf /= wsum;
  ct /= wsum;
  Mat3 cov = Mat3::Zero();
  for (size_t i = 0; i < from.size(); i++)
    cov += weights[i] * (to[i] - ct) * (from[i] - cf).transpose();
  R = polarDecompose(cov).R;
  t = ct - R * cf;
}

EquilibriumState staticSolveUnattached(const TetMesh &mesh, const MaterialParams &mat,
                                       const PlasticField &field,
                                       const std::vector<MaterialPoint> &markerSet,
                                       const RigidTargets &targets, const VecX &x0,
                                       const EquilibriumOptions &opts)
{
  if (markerSet.size() < 3)
    throw ValidationError("unattached solve needs at least 3 markers to fix the gauge");
  const double diag = mesh.boundingBoxDiagonal();
  const double forceTol =
      opts.forceTol > 0.0 ? opts.forceTol : defaultForceTol(mesh, mat, nullptr);
  const double w = 1.0 / double(markerSet.size());

  const VecX Xrest = mesh.restPositionsVector();
  Vec3 restCentroid = Vec3::Zero();
  for (const MaterialPoint &p : markerSet)
    restCentroid += w * mesh.materialPointPosition(Xrest, p);
  std::vector<Vec3> Q(markerSet.size());
  Mat3 spread = Mat3::Zero();
  for (size_t j = 0; j < markerSet.size(); j++) {
    Q[j] = mesh.materialPointPosition(Xrest, markerSet[j]) - restCentroid;
    spread += Q[j] * Q[j].transpose();
  }
  {
    Eigen::SelfAdjointEigenSolver<Mat3> eig(spread);
    // Colinear markers leave the rotation about their axis unconstrained.
    if (eig.eigenvalues()[1] <= 1e-12 * std::max(eig.eigenvalues()[2], 1e-300))
      throw ValidationError("markers are colinear; the rotation gauge is not determined");
  }

  auto centroidViolation = [&](const VecX &x) {
    Vec3 c = -restCentroid - targets.t;
    for (const MaterialPoint &p : markerSet)
      c += w * mesh.materialPointPosition(x, p);
    return c;
  };
  auto covariance = [&](const VecX &x) {
    Mat3 A = Mat3::Zero();
    for (size_t j = 0; j < markerSet.size(); j++)
      A += w * (mesh.materialPointPosition(x, markerSet[j]) - targets.t) * Q[j].transpose();
    return A;
  };

  Vec3 mu1 = Vec3::Zero();
  Mat3 M2 = Mat3::Zero();
  double rho1 = 10.0 * mat.youngModulus * diag * double(markerSet.size());
  double rho2 = 10.0 * mat.youngModulus * diag * diag * diag *
                double(markerSet.size()) * double(markerSet.size());

  EquilibriumState state;
  state.x = x0;

  // One evaluation of the augmented Lagrangian, with optional derivatives.
  auto evaluate = [&](const VecX &x, VecX *grad, std::vector<Triplet> *hess) -> double {
    Mat3 Acov = covariance(x);
    if (Acov.determinant() <= 0.0) {
      if (!grad && !hess)
        return std::numeric_limits<double>::infinity();
      throw NumericalError("marker covariance became reflected during the unattached solve");
    }
    const Vec3 c1 = centroidViolation(x);

    if (!grad && !hess) {
      const Mat3 c2 = polarDecompose(Acov).R - targets.R;
      return elasticEnergyOnly(mesh, mat, field, x) + mu1.dot(c1) +
             0.5 * rho1 * c1.squaredNorm() + (M2.array() * c2.array()).sum() +
             0.5 * rho2 * c2.squaredNorm();
    }

    PolarDerivatives polar = polarDerivatives(Acov, hess ? 2 : 1);
    const Mat3 c2 = polar.R - targets.R;
    double value = 0.0;
    {
      ElasticAssembly assembly = assembleElastic(mesh, mat, field, x, hess ? 2 : 1);
      value = assembly.energy;
      if (grad)
        *grad = assembly.grad;
      if (hess) {
        hess->reserve(size_t(assembly.hessXX.nonZeros()) +
                      markerSet.size() * markerSet.size() * 144 + 64);
        for (int col = 0; col < assembly.hessXX.outerSize(); col++)
          for (SpMat::InnerIterator it(assembly.hessXX, col); it; ++it)
            hess->emplace_back(int(it.row()), col, it.value());
      }
    }
    value += mu1.dot(c1) + 0.5 * rho1 * c1.squaredNorm() + (M2.array() * c2.array()).sum() +
             0.5 * rho2 * c2.squaredNorm();

    const Vec3 lam1 = mu1 + rho1 * c1;
    const Mat3 Lambda = M2 + rho2 * c2;
    const Vec9 vecLambda = vec9(Lambda);
    // Pull the 9-dim payloads back through vec(Acov) = W2 x + const.
    const Mat3 Y3 = unvec9(Vec9(polar.dRdF.transpose() * vecLambda));

    if (grad) {
      for (size_t j = 0; j < markerSet.size(); j++) {
        const MaterialPoint &p = markerSet[j];
        const Vec3 payload = w * (lam1 + Y3 * Q[j]);
        auto tv = mesh.tetVertices(p.tet);
        for (int c = 0; c < 4; c++)
          grad->segment<3>(3 * tv[size_t(c)]) += p.barycentric[c] * payload;
      }
    }

    if (hess) {
      // T9 = rho2 dR^T dR + sum_ab Lambda_ab d2R_ab; then W2^T T9 W2,
      // plus rho1 on the centroid rows.
      Mat9 T9 = rho2 * (polar.dRdF.transpose() * polar.dRdF);
      for (int i = 0; i < 9; i++)
        T9.row(i) += (polar.d2RdF2[size_t(i)].transpose() * vecLambda).transpose();

      for (size_t j = 0; j < markerSet.size(); j++) {
        for (size_t k = 0; k < markerSet.size(); k++) {
          // T9 is indexed (a + 3b, c + 3d); block(a,c) contracts over b,d.
          Mat3 block = Mat3::Zero();
          for (int b = 0; b < 3; b++)
            for (int d = 0; d < 3; d++)
              block += Q[j][b] * Q[k][d] * T9.block<3, 3>(3 * b, 3 * d);
          block += rho1 * Mat3::Identity();
          block *= w * w;
          auto tvj = mesh.tetVertices(markerSet[j].tet);
          auto tvk = mesh.tetVertices(markerSet[k].tet);
          for (int cj = 0; cj < 4; cj++)
            for (int ck = 0; ck < 4; ck++) {
              const double bw =
                  markerSet[j].barycentric[cj] * markerSet[k].barycentric[ck];
              if (bw == 0.0)
                continue;
              for (int r = 0; r < 3; r++)
                for (int c = 0; c < 3; c++)
                  hess->emplace_back(3 * tvj[size_t(cj)] + r, 3 * tvk[size_t(ck)] + c,
                                     bw * block(r, c));
            }
        }
      }
    }
    return value;
  };

  // The gauge constraints are satisfiable with vanishing multipliers (rigid
  // motions cost no elastic energy), so the penalized problem already has the
  // constrained solution as its minimizer and each inner solve can go
  // straight to the target tolerance; the outer loop only escalates the
  // penalty when the constraints fail to vanish.
  double bestViolation = std::numeric_limits<double>::infinity();
  for (int outer = 0; outer < opts.maxOuterIterations; outer++) {
    NewtonOutcome outcome =
        dampedNewton(evaluate, state.x, forceTol * 0.5, opts.maxNewtonIterations);
    state.newtonIterations += outcome.iterations;

    const Vec3 c1 = centroidViolation(state.x);
    const Mat3 c2 = polarDecompose(covariance(state.x)).R - targets.R;
    const double violation =
        std::max(c1.norm() / (1.0 + diag), c2.norm());
    ElasticAssembly elastic = assembleElastic(mesh, mat, field, state.x, 1);
    state.forceResidual = elastic.grad.norm();
    state.constraintResidual = violation;
    state.targets = targets;

    if (violation <= opts.constraintTol && state.forceResidual <= forceTol) {
      state.converged = true;
      return state;
    }
    if (violation > 0.25 * bestViolation && rho1 < 1e14 * mat.youngModulus) {
      rho1 *= 10.0;
      rho2 *= 10.0;
    }
    bestViolation = std::min(bestViolation, violation);
    mu1 += rho1 * c1;
    M2 += rho2 * c2;
  }
  state.converged = false;
  return state;
}

}  // namespace plastifit
