#include "doctest.h"

#include "plastifit/constraints.hpp"
#include "plastifit/mesh_factory.hpp"

#include <random>

using namespace plastifit;

namespace
{

VecX randomDeform(const TetMesh &mesh, std::mt19937 &rng, double scale)
{
  std::normal_distribution<double> nd(0.0, 1.0);
  VecX x = mesh.restPositionsVector();
  for (int i = 0; i < x.size(); i++)
    x[i] += scale * nd(rng);
  return x;
}

std::vector<ConstraintRow> sampleRows(const TetMesh &mesh, std::mt19937 &rng, int count)
{
  std::uniform_real_distribution<double> ud(0.02, 0.18);
  std::vector<Vec3> pts;
  for (int i = 0; i < count; i++)
    pts.emplace_back(ud(rng), ud(rng), ud(rng));
  auto embedded = mesh.embedPoints(pts);
  std::vector<ConstraintRow> rows;
  std::normal_distribution<double> nd(0.0, 0.05);
  for (int i = 0; i < count; i++) {
    ConstraintRow row;
    row.point = embedded[size_t(i)];
    row.target = pts[size_t(i)] + Vec3(nd(rng), nd(rng), nd(rng));
    row.weight = 10.0 + 100.0 * (i % 3);
    rows.push_back(row);
  }
  return rows;
}

}  // namespace

TEST_CASE("residual is embedded position minus target")
{
  TetMesh mesh = makeBoxMesh(2, 2, 2, 0.1, 0.1, 0.1);
  std::mt19937 rng(3);
  auto rows = sampleRows(mesh, rng, 5);
  VecX x = randomDeform(mesh, rng, 0.01);
  for (const ConstraintRow &row : rows) {
    Vec3 r = constraintResidual(mesh, row, x);
    CHECK((r - (mesh.materialPointPosition(x, row.point) - row.target)).norm() < 1e-14);
  }
}

TEST_CASE("energy, gradient, and hessian are a consistent quadratic")
{
  TetMesh mesh = makeBoxMesh(2, 2, 2, 0.1, 0.1, 0.1);
  std::mt19937 rng(11);
  auto rows = sampleRows(mesh, rng, 8);
  VecX x = randomDeform(mesh, rng, 0.02);
  const int n = 3 * mesh.numVertices();

  // energy definition
  double expected = 0.0;
  for (const ConstraintRow &row : rows)
    expected += 0.5 * row.weight * constraintResidual(mesh, row, x).squaredNorm();
  CHECK(constraintEnergy(mesh, rows, x) == doctest::Approx(expected).epsilon(1e-13));

  // gradient vs finite differences
  VecX grad = VecX::Zero(n);
  addConstraintGradient(mesh, rows, x, grad);
  const double h = 1e-6;
  std::uniform_int_distribution<int> pick(0, n - 1);
  for (int trial = 0; trial < 20; trial++) {
    int i = pick(rng);
    VecX xp = x, xm = x;
    xp[i] += h;
    xm[i] -= h;
    double fd = (constraintEnergy(mesh, rows, xp) - constraintEnergy(mesh, rows, xm)) / (2.0 * h);
    CHECK(grad[i] == doctest::Approx(fd).epsilon(1e-6));
  }

  // quadratic identity: E(x) = E0 + g0.dx + 0.5 dx.H.dx exactly
  std::vector<Triplet> triplets;
  addConstraintHessianTriplets(mesh, rows, triplets);
  SpMat H(n, n);
  H.setFromTriplets(triplets.begin(), triplets.end());
  VecX x0 = mesh.restPositionsVector();
  VecX g0 = VecX::Zero(n);
  addConstraintGradient(mesh, rows, x0, g0);
  VecX dx = x - x0;
  double quad = constraintEnergy(mesh, rows, x0) + g0.dot(dx) + 0.5 * dx.dot(H * dx);
  CHECK(constraintEnergy(mesh, rows, x) == doctest::Approx(quad).epsilon(1e-12));
}

TEST_CASE("scaled residual stack and rhs matrix reproduce gradient and hessian")
{
  TetMesh mesh = makeBoxMesh(2, 2, 2, 0.1, 0.1, 0.1);
  std::mt19937 rng(29);
  auto rows = sampleRows(mesh, rng, 6);
  VecX x = randomDeform(mesh, rng, 0.02);
  const int n = 3 * mesh.numVertices();

  MatX Zt = constraintRhsMatrix(mesh, rows, mesh.numVertices());  // n x 3k
  VecX r = constraintScaledResiduals(mesh, rows, x);              // 3k
  REQUIRE(Zt.rows() == n);
  REQUIRE(Zt.cols() == r.size());
  REQUIRE(r.size() == 3 * int(rows.size()));

  // sum_k c_k A_k^T (A_k x + b_k) = Z^T r~
  VecX grad = VecX::Zero(n);
  addConstraintGradient(mesh, rows, x, grad);
  CHECK((Zt * r - grad).norm() < 1e-11 * (1.0 + grad.norm()));

  // sum_k c_k A_k^T A_k = Z^T Z
  std::vector<Triplet> triplets;
  addConstraintHessianTriplets(mesh, rows, triplets);
  SpMat H(n, n);
  H.setFromTriplets(triplets.begin(), triplets.end());
  CHECK((MatX(H) - Zt * Zt.transpose()).norm() < 1e-11 * Zt.squaredNorm());

  // the energy is half the squared scaled residual stack
  CHECK(constraintEnergy(mesh, rows, x) == doctest::Approx(0.5 * r.squaredNorm()).epsilon(1e-12));
}

TEST_CASE("class weights and per-marker weights multiply")
{
  TetMesh mesh = makeBoxMesh(2, 2, 2, 0.1, 0.1, 0.1);
  ConstraintSet set;
  Landmark lm;
  lm.point = mesh.embedPoints({Vec3(0.05, 0.05, 0.05)})[0];
  lm.target = Vec3(0.06, 0.05, 0.05);
  lm.weight = 3.0;
  set.landmarks.push_back(lm);
  lm.weight = 1.0;
  set.attachments.push_back(lm);

  auto lmRows = landmarkRows(mesh, set, 1e9);
  REQUIRE(lmRows.size() == 1);
  CHECK(lmRows[0].weight == 3e9);
  CHECK((lmRows[0].target - lm.target).norm() == 0.0);

  auto atRows = attachmentRows(mesh, set, 1e8);
  REQUIRE(atRows.size() == 1);
  CHECK(atRows[0].weight == 1e8);
}

TEST_CASE("icp rows freeze closest point correspondences at the given state")
{
  TetMesh mesh = makeFiveTetCube(1.0);
  VecX x = mesh.restPositionsVector();

  ConstraintSet set;
  IcpMarker marker;
  marker.target = Vec3(0.5, 0.5, 1.4);  // above the top face
  marker.weight = 2.0;
  set.icpMarkers.push_back(marker);

  auto rows = icpRows(mesh, set, x, 1e9);
  REQUIRE(rows.size() == 1);
  CHECK(rows[0].weight == 2e9);

  // the frozen point is the surface point nearest the target
  Vec3 at = mesh.materialPointPosition(x, rows[0].point);
  CHECK((at - Vec3(0.5, 0.5, 1.0)).norm() < 1e-12);
  CHECK((rows[0].target - marker.target).norm() == 0.0);

  // residual at the freeze state is the signed closest-point offset
  CHECK((constraintResidual(mesh, rows[0], x) - Vec3(0, 0, -0.4)).norm() < 1e-12);

  // correspondences do not drift when x moves afterwards
  VecX shifted = x;
  for (int v = 0; v < mesh.numVertices(); v++)
    shifted[3 * v + 0] += 0.2;
  Vec3 atShifted = mesh.materialPointPosition(shifted, rows[0].point);
  CHECK((atShifted - Vec3(0.7, 0.5, 1.0)).norm() < 1e-12);
}
