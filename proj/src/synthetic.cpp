#include "plastifit/synthetic.hpp"

#include "plastifit/polar_decomposition.hpp"
#include "plastifit/strain_laplacian.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <set>

namespace plastifit
{

namespace
{

Vec3 tetCentroid(const TetMesh &mesh, int t)
{
  auto tv = mesh.tetVertices(t);
  Vec3 c = Vec3::Zero();
  for (int i = 0; i < 4; i++)
    c += 0.25 * mesh.restPosition(tv[size_t(i)]);
  return c;
}

// A material point sitting exactly at a mesh vertex.
MaterialPoint vertexMaterialPoint(const TetMesh &mesh, int vertex)
{
  for (int t = 0; t < mesh.numTets(); t++) {
    auto tv = mesh.tetVertices(t);
    for (int c = 0; c < 4; c++) {
      if (tv[size_t(c)] == vertex) {
        MaterialPoint p;
        p.tet = t;
        p.barycentric = Vec4::Zero();
        p.barycentric[c] = 1.0;
        return p;
      }
    }
  }
  throw ValidationError("vertex is not referenced by any tet");
}

std::vector<int> sortedSurfaceVertices(const TetMesh &mesh)
{
  std::set<int> unique(mesh.surfaceTriangles().begin(), mesh.surfaceTriangles().end());
  return std::vector<int>(unique.begin(), unique.end());
}

std::vector<int> pinnedFaceVertices(const TetMesh &mesh)
{
  const double minX = mesh.boundingBoxMin()[0];
  const double tol = 1e-9 * std::max(mesh.boundingBoxDiagonal(), 1.0);
  std::vector<int> pinned;
  for (int v = 0; v < mesh.numVertices(); v++)
    if (mesh.restPosition(v)[0] <= minX + tol)
      pinned.push_back(v);
  if (pinned.size() < 3)
    throw ValidationError("the pinned face holds fewer than 3 vertices");
  return pinned;
}

}  // namespace

SyntheticCase makeSynthetic(const TetMesh &mesh, const MaterialParams &mat,
                            const StrainRecipe &recipe, const SyntheticOptions &opts)
{
  if (opts.numLandmarks < 0 || opts.numIcpMarkers < 0)
    throw ValidationError("marker counts must be nonnegative");

  SyntheticCase out;
  out.mesh = mesh;
  out.material = mat;
  out.noiseSigma = opts.noiseSigma;
  out.attached = opts.attached;

  out.truthField.s.resize(6 * mesh.numTets());
  for (int t = 0; t < mesh.numTets(); t++) {
    Vec6 s = recipe(tetCentroid(mesh, t));
    Vec6 checked = s;
    if (clampSpd(checked, 1e-6))
      throw ValidationError("the strain recipe is not positive definite at tet " +
                            std::to_string(t));
    out.truthField.setTet(t, s);
  }

  EquilibriumOptions eqOpts;
  eqOpts.forceTol = opts.forceTol > 0.0
                        ? opts.forceTol
                        : 1e-8 * mat.youngModulus * mesh.boundingBoxDiagonal() *
                              mesh.boundingBoxDiagonal();

  const VecX rest = mesh.restPositionsVector();
  std::vector<int> surface = sortedSurfaceVertices(mesh);
  if (int(surface.size()) < opts.numLandmarks + opts.numIcpMarkers)
    throw ValidationError("not enough surface vertices for the requested marker counts");
  std::mt19937 rng(opts.seed);
  std::shuffle(surface.begin(), surface.end(), rng);

  std::vector<int> landmarkVertices(surface.begin(), surface.begin() + opts.numLandmarks);
  std::vector<int> icpVertices(surface.begin() + opts.numLandmarks,
                               surface.begin() + opts.numLandmarks + opts.numIcpMarkers);

  if (opts.attached) {
    for (int v : pinnedFaceVertices(mesh)) {
      Landmark pin;
      pin.point = vertexMaterialPoint(mesh, v);
      pin.target = mesh.restPosition(v);
      pin.weight = opts.attachmentWeight / SolveConfig{}.beta;  // class weight applies on top
      out.markers.attachments.push_back(pin);
    }
    std::vector<ConstraintRow> rows;
    for (const Landmark &pin : out.markers.attachments) {
      ConstraintRow row;
      row.point = pin.point;
      row.target = pin.target;
      row.weight = opts.attachmentWeight;
      rows.push_back(row);
    }
    EquilibriumState st =
        staticSolveAttached(mesh, mat, out.truthField, rows, rest, eqOpts);
    if (!st.converged)
      throw NumericalError("the forward equilibrium did not converge");
    out.truthX = std::move(st.x);
  } else {
    std::vector<MaterialPoint> gauge;
    for (int v : landmarkVertices)
      gauge.push_back(vertexMaterialPoint(mesh, v));
    if (gauge.size() < 3)
      throw ValidationError("an unattached case needs at least 3 landmarks");
    RigidTargets targets;  // identity gauge: stay near the rest placement
    targets = shapeMatchingState(mesh, gauge, rest);
    EquilibriumState st =
        staticSolveUnattached(mesh, mat, out.truthField, gauge, targets, rest, eqOpts);
    if (!st.converged)
      throw NumericalError("the forward equilibrium did not converge");
    out.truthX = std::move(st.x);
    out.truthTargets = st.targets;
  }

  for (int v : landmarkVertices) {
    Landmark lm;
    lm.point = vertexMaterialPoint(mesh, v);
    lm.target = mesh.position(out.truthX, v);
    out.markers.landmarks.push_back(lm);
  }
  std::normal_distribution<double> noise(0.0, opts.noiseSigma);
  for (int v : icpVertices) {
    IcpMarker marker;
    marker.target = mesh.position(out.truthX, v);
    if (opts.noiseSigma > 0.0)
      for (int d = 0; d < 3; d++)
        marker.target[d] += noise(rng);
    out.markers.icpMarkers.push_back(marker);
  }
  return out;
}

RecoveryScore recoverAndScore(const SyntheticCase &c, const SolveConfig &config)
{
  RecoveryScore score;
  score.fit = fit(c.mesh, c.material, c.markers, config);

  int count = 0;
  for (const Landmark &lm : c.markers.landmarks) {
    const double err =
        (c.mesh.materialPointPosition(score.fit.x, lm.point) - lm.target).norm();
    score.meanMarkerError += err;
    score.maxMarkerError = std::max(score.maxMarkerError, err);
    count++;
  }
  for (const IcpMarker &marker : c.markers.icpMarkers) {
    const double err = c.mesh.closestSurfacePoint(score.fit.x, marker.target).distance;
    score.meanMarkerError += err;
    score.maxMarkerError = std::max(score.maxMarkerError, err);
    count++;
  }
  if (count > 0)
    score.meanMarkerError /= double(count);

  for (int t = 0; t < c.mesh.numTets(); t++) {
    const Mat3 Sfit = polarDecompose(fpFromS(score.fit.field.tet(t))).S;
    const Mat3 Struth = polarDecompose(fpFromS(c.truthField.tet(t))).S;
    const double rel = (Sfit - Struth).norm() / Struth.norm();
    score.meanFieldError += rel;
    score.maxFieldError = std::max(score.maxFieldError, rel);
  }
  score.meanFieldError /= double(c.mesh.numTets());
  return score;
}

ReferenceStep denseReferenceStep(const TetMesh &mesh, const MaterialParams &mat,
                                 const PlasticField &field, const VecX &x,
                                 const std::vector<ConstraintRow> &attachments,
                                 const std::vector<ConstraintRow> &markerRows,
                                 double smoothnessWeight, bool unattached)
{
  const int sdim = 6 * mesh.numTets();
  const int n = mesh.numVertices();
  if (sdim > 500)
    throw ValidationError("the dense reference path is restricted to 6m <= 500");
  if (markerRows.empty())
    throw ValidationError("the reference step needs marker rows");

  ElasticAssembly assembly = assembleElastic(mesh, mat, field, x, 2, true);
  MatX K = MatX(assembly.hessXX);
  if (!unattached) {
    std::vector<Triplet> triplets;
    addConstraintHessianTriplets(mesh, attachments, triplets);
    for (const Triplet &t : triplets)
      K(t.row(), t.col()) += t.value();
  }

  // J = -K^{-1} C; the unattached stiffness is rank deficient by the rigid
  // modes, so its action is inverted through the pseudo-inverse.
  MatX C = MatX(assembly.hessXS);
  MatX J(3 * n, sdim);
  if (unattached) {
    Eigen::CompleteOrthogonalDecomposition<MatX> cod(K);
    J = -cod.solve(C);
  } else {
    J = -K.fullPivLu().solve(C);
  }

  MatX Z(3 * int(markerRows.size()), sdim);
  VecX residuals(3 * int(markerRows.size()));
  for (size_t k = 0; k < markerRows.size(); k++) {
    const ConstraintRow &row = markerRows[k];
    const double scale = std::sqrt(row.weight);
    auto tv = mesh.tetVertices(row.point.tet);
    MatX rowsK = MatX::Zero(3, sdim);
    for (int c = 0; c < 4; c++)
      rowsK += row.point.barycentric[c] * J.middleRows(3 * tv[size_t(c)], 3);
    Z.middleRows(3 * int(k), 3) = scale * rowsK;
    residuals.segment<3>(3 * int(k)) =
        scale * constraintResidual(mesh, row, x);
  }

  StrainLaplacian laplacian = StrainLaplacian::build(mesh);
  MatX Lw = MatX::Zero(sdim, sdim);
  {
    const SpMat &Ls = laplacian.scalarLaplacian();
    for (int col = 0; col < Ls.outerSize(); col++)
      for (SpMat::InnerIterator it(Ls, col); it; ++it)
        for (int c = 0; c < 6; c++)
          Lw(6 * int(it.row()) + c, 6 * col + c) =
              laplacian.componentWeights()[c] * it.value();
  }

  VecX gradient = smoothnessWeight * (Lw.transpose() * (Lw * field.s)) +
                  Z.transpose() * residuals;

  ReferenceStep out;
  {
    MatX H = smoothnessWeight * (Lw.transpose() * Lw) + Z.transpose() * Z;
    out.normalEquations = -H.fullPivLu().solve(gradient);
  }
  {
    const double sqrtW = std::sqrt(smoothnessWeight);
    MatX stacked(sdim + Z.rows(), sdim);
    stacked.topRows(sdim) = sqrtW * Lw;
    stacked.bottomRows(Z.rows()) = Z;
    VecX rhs(sdim + Z.rows());
    rhs.head(sdim) = -sqrtW * (Lw * field.s);
    rhs.tail(Z.rows()) = -residuals;
    out.stackedLeastSquares = stacked.colPivHouseholderQr().solve(rhs);
  }
  return out;
}

Vec6 identityStrain(const Vec3 &)
{
  return sFromFp(Mat3::Identity());
}

StrainRecipe constantStrain(const Vec6 &s)
{
  return [s](const Vec3 &) { return s; };
}

StrainRecipe stretchGradientStrain(double minX, double maxX, double peakStretch)
{
  if (maxX <= minX)
    throw ValidationError("the stretch gradient needs maxX > minX");
  return [=](const Vec3 &p) {
    const double xi = std::clamp((p[0] - minX) / (maxX - minX), 0.0, 1.0);
    const double bump = 4.0 * xi * (1.0 - xi);  // 0 at the ends, 1 mid-span
    Vec6 s;
    s << 1.0 + (peakStretch - 1.0) * bump, 0.05 * std::sin(2.0 * M_PI * xi), 0.0, 1.0, 0.0,
        1.0;
    return s;
  };
}

SyntheticCase makePresetCase(const std::string &name, unsigned seed)
{
  const MaterialParams mat = MaterialParams::fromYoungPoisson(1e5, 0.45);
  SyntheticOptions opts;
  opts.seed = seed;

  if (name == "beam") {
    TetMesh mesh = makeBoxMesh(8, 2, 2, 0.025, 0.025, 0.025);
    opts.attached = true;
    opts.numLandmarks = 12;
    opts.numIcpMarkers = 24;
    return makeSynthetic(mesh, mat, stretchGradientStrain(0.0, 0.2, 1.4), opts);
  }
  if (name == "cube") {
    TetMesh mesh = makeBoxMesh(3, 3, 3, 0.1 / 3.0, 0.1 / 3.0, 0.1 / 3.0);
    opts.attached = false;
    opts.numLandmarks = 8;
    opts.numIcpMarkers = 12;
    Vec6 s;
    s << 2.0, 0.0, 0.0, 1.0, 0.0, 1.0;
    return makeSynthetic(mesh, mat, constantStrain(s), opts);
  }
  if (name == "blob") {
    TetMesh mesh = makeEllipsoidBlob(6, 0.06, 0.05, 0.04);
    opts.attached = false;
    opts.numLandmarks = 10;
    opts.numIcpMarkers = 30;
    const Vec3 lo = mesh.boundingBoxMin(), hi = mesh.boundingBoxMax();
    StrainRecipe recipe = [=](const Vec3 &p) {
      const double u = (p[0] - lo[0]) / std::max(hi[0] - lo[0], 1e-12);
      const double v = (p[1] - lo[1]) / std::max(hi[1] - lo[1], 1e-12);
      Vec6 s;
      s << 1.0 + 0.25 * std::sin(M_PI * u), 0.04 * std::cos(M_PI * v), 0.0,
          1.0 + 0.15 * std::cos(M_PI * v), 0.0, 1.0;
      return s;
    };
    return makeSynthetic(mesh, mat, recipe, opts);
  }
  throw ValidationError("unknown preset '" + name + "'; expected beam, cube, or blob");
}

}  // namespace plastifit
