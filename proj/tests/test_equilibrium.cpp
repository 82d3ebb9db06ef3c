#include "doctest.h"

#include "plastifit/equilibrium.hpp"
#include "plastifit/mesh_factory.hpp"
#include "plastifit/synthetic.hpp"

#include <random>

using namespace plastifit;

namespace
{

PlasticField fieldFromRecipe(const TetMesh &mesh, const StrainRecipe &recipe)
{
  PlasticField field = PlasticField::identity(mesh.numTets());
  for (int t = 0; t < mesh.numTets(); t++) {
    auto tv = mesh.tetVertices(t);
    Vec3 centroid = Vec3::Zero();
    for (int c = 0; c < 4; c++)
      centroid += 0.25 * mesh.restPosition(tv[size_t(c)]);
    field.setTet(t, recipe(centroid));
  }
  return field;
}

std::vector<ConstraintRow> pinFaceAtRest(const TetMesh &mesh, double weight)
{
  std::vector<ConstraintRow> rows;
  for (int v = 0; v < mesh.numVertices(); v++) {
    if (mesh.restPosition(v)[0] > 1e-12)
      continue;
    ConstraintRow row;
    row.point.tet = -1;
    for (int t = 0; t < mesh.numTets() && row.point.tet < 0; t++) {
      auto tv = mesh.tetVertices(t);
      for (int c = 0; c < 4; c++)
        if (tv[size_t(c)] == v) {
          row.point.tet = t;
          row.point.barycentric = Vec4::Zero();
          row.point.barycentric[c] = 1.0;
          break;
        }
    }
    REQUIRE(row.point.tet >= 0);
    row.target = mesh.restPosition(v);
    row.weight = weight;
    rows.push_back(row);
  }
  REQUIRE(rows.size() >= 3);
  return rows;
}

double frobenius(const SpMat &K)
{
  double acc = 0.0;
  for (int col = 0; col < K.outerSize(); col++)
    for (SpMat::InnerIterator it(K, col); it; ++it)
      acc += it.value() * it.value();
  return std::sqrt(acc);
}

}  // namespace

TEST_CASE("elastic assembly matches per tet energies and finite differences")
{
  TetMesh mesh = makeFiveTetCube(0.3);
  MaterialParams mat = MaterialParams::fromYoungPoisson(1e5, 0.45);
  PlasticField field = fieldFromRecipe(mesh, constantStrain([] {
                                         Vec6 s;
                                         s << 1.1, 0.03, 0.0, 0.95, 0.02, 1.05;
                                         return s;
                                       }()));
  std::mt19937 rng(8);
  std::normal_distribution<double> nd(0.0, 0.01);
  VecX x = mesh.restPositionsVector();
  for (int i = 0; i < x.size(); i++)
    x[i] += nd(rng);

  ElasticAssembly asmb = assembleElastic(mesh, mat, field, x, 2, true);

  double total = 0.0;
  for (int t = 0; t < mesh.numTets(); t++)
    total += tetEnergy(mat, mesh.deformationGradient(x, t), field.tet(t), mesh.restVolume(t));
  CHECK(asmb.energy == doctest::Approx(total).epsilon(1e-12));

  CHECK((MatX(asmb.hessXX) - MatX(asmb.hessXX).transpose()).norm() <
        1e-9 * frobenius(asmb.hessXX));

  const double h = 1e-7;
  std::uniform_int_distribution<int> pick(0, int(x.size()) - 1);
  for (int trial = 0; trial < 12; trial++) {
    int i = pick(rng);
    VecX xp = x, xm = x;
    xp[i] += h;
    xm[i] -= h;
    double fd = (assembleElastic(mesh, mat, field, xp, 0).energy -
                 assembleElastic(mesh, mat, field, xm, 0).energy) /
                (2.0 * h);
    CHECK(asmb.grad[i] == doctest::Approx(fd).epsilon(5e-5));
    VecX gcol = (assembleElastic(mesh, mat, field, xp, 1).grad -
                 assembleElastic(mesh, mat, field, xm, 1).grad) /
                (2.0 * h);
    CHECK((VecX(MatX(asmb.hessXX).col(i)) - gcol).norm() < 5e-5 * (1.0 + gcol.norm()));
  }

  // mixed block against finite differences in the strain parameters
  std::uniform_int_distribution<int> pickS(0, 6 * mesh.numTets() - 1);
  for (int trial = 0; trial < 8; trial++) {
    int j = pickS(rng);
    PlasticField fp = field, fm = field;
    fp.s[j] += h;
    fm.s[j] -= h;
    VecX gcol = (assembleElastic(mesh, mat, fp, x, 1).grad -
                 assembleElastic(mesh, mat, fm, x, 1).grad) /
                (2.0 * h);
    CHECK((VecX(MatX(asmb.hessXS).col(j)) - gcol).norm() < 5e-5 * (1.0 + gcol.norm()));
  }
}

TEST_CASE("attached equilibrium at rest with identity plasticity stays at rest")
{
  TetMesh mesh = makeBoxMesh(2, 2, 2, 0.1, 0.1, 0.1);
  MaterialParams mat = MaterialParams::fromYoungPoisson(1e5, 0.45);
  PlasticField field = PlasticField::identity(mesh.numTets());
  auto attachments = pinFaceAtRest(mesh, 1e8);

  EquilibriumState state =
      staticSolveAttached(mesh, mat, field, attachments, mesh.restPositionsVector());
  CHECK(state.converged);
  CHECK((state.x - mesh.restPositionsVector()).norm() < 1e-10);
  CHECK(state.newtonIterations <= 1);
}

TEST_CASE("attached equilibrium balances elastic and attachment forces")
{
  TetMesh mesh = makeBoxMesh(4, 2, 2, 0.05, 0.05, 0.05);
  MaterialParams mat = MaterialParams::fromYoungPoisson(1e5, 0.45);
  PlasticField field = fieldFromRecipe(mesh, stretchGradientStrain(0.0, 0.2, 1.3));
  auto attachments = pinFaceAtRest(mesh, 1e8);

  EquilibriumState state =
      staticSolveAttached(mesh, mat, field, attachments, mesh.restPositionsVector());
  CHECK(state.converged);

  const double diag = mesh.boundingBoxDiagonal();
  const double defaultTol = 1e-10 * mat.youngModulus * diag * diag;
  CHECK(state.forceResidual <= defaultTol);

  // the reported residual is the true net force norm
  ElasticAssembly asmb = assembleElastic(mesh, mat, field, state.x, 1);
  VecX g = asmb.grad;
  addConstraintGradient(mesh, attachments, state.x, g);
  CHECK(g.norm() == doctest::Approx(state.forceResidual).epsilon(1e-10));

  // the plastic stretch actually moved the free end outward
  CHECK(mesh.boundingBoxMax()[0] < state.x.reshaped(3, mesh.numVertices()).row(0).maxCoeff());
}

TEST_CASE("rigid modes are orthonormal and span translations exactly")
{
  TetMesh mesh = makeFiveTetCube(0.4);
  std::mt19937 rng(21);
  std::normal_distribution<double> nd(0.0, 0.05);
  VecX x = mesh.restPositionsVector();
  for (int i = 0; i < x.size(); i++)
    x[i] += nd(rng);

  auto modes = stiffnessNullspace(x);
  REQUIRE(modes.size() == 6);
  for (size_t i = 0; i < 6; i++)
    for (size_t j = 0; j < 6; j++)
      CHECK(std::abs(modes[i].dot(modes[j]) - (i == j ? 1.0 : 0.0)) < 1e-12);

  // any uniform translation lies in the span of the first block
  VecX shift = VecX::Zero(x.size());
  for (int v = 0; v < mesh.numVertices(); v++)
    shift.segment<3>(3 * v) = Vec3(0.3, -0.2, 0.1);
  VecX residual = shift;
  for (const VecX &mode : modes)
    residual -= mode.dot(shift) * mode;
  CHECK(residual.norm() < 1e-12 * shift.norm());
}

TEST_CASE("unattached equilibrium relaxes elastic forces and pins the gauge")
{
  TetMesh mesh = makeBoxMesh(3, 2, 2, 0.08, 0.08, 0.08);
  MaterialParams mat = MaterialParams::fromYoungPoisson(1e5, 0.45);
  PlasticField field = fieldFromRecipe(mesh, stretchGradientStrain(0.0, 0.24, 1.25));

  std::vector<Vec3> markerPts;
  for (int v = 0; v < mesh.numVertices(); v += 5)
    markerPts.push_back(mesh.restPosition(v));
  auto markers = mesh.embedPoints(markerPts);
  RigidTargets targets;

  EquilibriumState state = staticSolveUnattached(mesh, mat, field, markers, targets,
                                                 mesh.restPositionsVector());
  CHECK(state.converged);

  const double diag = mesh.boundingBoxDiagonal();
  CHECK(state.forceResidual <= 1e-12 * mat.youngModulus * diag * diag);
  CHECK(state.constraintResidual <= 1e-8);

  // pure elastic gradient vanishes: the gauge constraints carry no force
  ElasticAssembly asmb = assembleElastic(mesh, mat, field, state.x, 1);
  CHECK(asmb.grad.norm() <= 1e-12 * mat.youngModulus * diag * diag);

  // shape matching of the solution reproduces the requested gauge
  RigidTargets actual = shapeMatchingState(mesh, markers, state.x);
  CHECK((actual.R - targets.R).norm() < 1e-6);
  CHECK((actual.t - targets.t).norm() < 1e-6 * diag);

  // stiffness nullspace at the equilibrium: all six rigid modes annihilated
  ElasticAssembly withHess = assembleElastic(mesh, mat, field, state.x, 2);
  const double normK = frobenius(withHess.hessXX);
  auto modes = stiffnessNullspace(state.x);
  for (const VecX &psi : modes)
    CHECK((withHess.hessXX * psi).norm() <= 1e-7 * normK);

  // away from equilibrium the rotational modes are no longer annihilated
  std::mt19937 rng(5);
  std::normal_distribution<double> nd(0.0, 0.01 * diag);
  VecX xPert = state.x;
  for (int i = 0; i < xPert.size(); i++)
    xPert[i] += nd(rng);
  ElasticAssembly pert = assembleElastic(mesh, mat, field, xPert, 2);
  const double normKPert = frobenius(pert.hessXX);
  auto pertModes = stiffnessNullspace(xPert);
  for (size_t i = 3; i < 6; i++)
    CHECK((pert.hessXX * pertModes[i]).norm() > 1e-3 * normKPert);
  // translations stay exact nullvectors at any state
  for (size_t i = 0; i < 3; i++)
    CHECK((pert.hessXX * pertModes[i]).norm() <= 1e-9 * normKPert);
}

TEST_CASE("rigid alignment recovers a known motion from weighted pairs")
{
  std::mt19937 rng(17);
  std::normal_distribution<double> nd(0.0, 1.0);
  Mat3 R = Eigen::AngleAxisd(0.9, Vec3(0.2, 1.0, -0.4).normalized()).toRotationMatrix();
  Vec3 t(0.3, -0.1, 0.25);

  std::vector<Vec3> from, to;
  std::vector<double> weights;
  for (int i = 0; i < 12; i++) {
    Vec3 p(nd(rng), nd(rng), nd(rng));
    from.push_back(p);
    to.push_back(R * p + t);
    weights.push_back(0.5 + (i % 4));
  }
  Mat3 Rout;
  Vec3 tout;
  rigidAlign(from, to, weights, Rout, tout);
  CHECK((Rout - R).norm() < 1e-12);
  CHECK((tout - t).norm() < 1e-12);
}

TEST_CASE("shape matching reports the rigid motion of the marker set")
{
  TetMesh mesh = makeBoxMesh(2, 2, 2, 0.1, 0.1, 0.1);
  std::vector<Vec3> pts = {Vec3(0.05, 0.05, 0.05), Vec3(0.15, 0.1, 0.05), Vec3(0.1, 0.15, 0.15),
                           Vec3(0.05, 0.1, 0.15)};
  auto markers = mesh.embedPoints(pts);

  Mat3 Q = Eigen::AngleAxisd(0.4, Vec3(1, 0.2, 0.1).normalized()).toRotationMatrix();
  Vec3 shift(0.02, -0.03, 0.05);
  VecX x(3 * mesh.numVertices());
  for (int v = 0; v < mesh.numVertices(); v++)
    x.segment<3>(3 * v) = Q * mesh.restPosition(v) + shift;

  RigidTargets state = shapeMatchingState(mesh, markers, x);
  CHECK((state.R - Q).norm() < 1e-10);

  Vec3 centroid = Vec3::Zero();
  for (const Vec3 &p : pts)
    centroid += p / double(pts.size());
  Vec3 expected = Q * centroid + shift - centroid;
  CHECK((state.t - expected).norm() < 1e-10);
}
