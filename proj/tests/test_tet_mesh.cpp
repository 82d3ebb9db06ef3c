#include "doctest.h"

#include "plastifit/mesh_factory.hpp"
#include "plastifit/tet_mesh.hpp"

#include <cstdio>
#include <filesystem>

using namespace plastifit;

namespace
{

std::vector<double> singleTetVertices()
{
  return {0, 0, 0, 1, 0, 0, 0, 1, 0, 0, 0, 1};
}

VecX affineDeform(const TetMesh &mesh, const Mat3 &A, const Vec3 &b)
{
  VecX x(3 * mesh.numVertices());
  for (int v = 0; v < mesh.numVertices(); v++)
    x.segment<3>(3 * v) = A * mesh.restPosition(v) + b;
  return x;
}

std::string tempPath(const std::string &name)
{
  return (std::filesystem::temp_directory_path() / name).string();
}

}  // namespace

TEST_CASE("inverted tets are reoriented to positive volume")
{
  // w before v2: negative orientation on input.
  TetMesh mesh = TetMesh::build(singleTetVertices(), {0, 1, 3, 2});
  CHECK(mesh.numTets() == 1);
  CHECK(mesh.restVolume(0) == doctest::Approx(1.0 / 6.0).epsilon(1e-14));
  Mat3 F = mesh.deformationGradient(mesh.restPositionsVector(), 0);
  CHECK((F - Mat3::Identity()).norm() < 1e-13);
}

TEST_CASE("degenerate and malformed meshes are rejected")
{
  CHECK_THROWS_AS(TetMesh::build({0, 0, 0}, {0, 1, 2, 3}), ValidationError);
  CHECK_THROWS_AS(TetMesh::build(singleTetVertices(), {0, 1, 2}), ValidationError);
  CHECK_THROWS_AS(TetMesh::build(singleTetVertices(), {0, 1, 2, 4}), ValidationError);

  // coplanar 4th vertex: zero volume
  CHECK_THROWS_AS(TetMesh::build({0, 0, 0, 1, 0, 0, 0, 1, 0, 1, 1, 0}, {0, 1, 2, 3}),
                  ValidationError);

  // unreferenced vertex
  std::vector<double> verts = singleTetVertices();
  verts.insert(verts.end(), {5, 5, 5});
  CHECK_THROWS_AS(TetMesh::build(verts, {0, 1, 2, 3}), ValidationError);

  // two tets sharing no face: disconnected
  std::vector<double> two = singleTetVertices();
  two.insert(two.end(), {10, 0, 0, 11, 0, 0, 10, 1, 0, 10, 0, 1});
  CHECK_THROWS_AS(TetMesh::build(two, {0, 1, 2, 3, 4, 5, 6, 7}), ValidationError);
}

TEST_CASE("five tet cube geometry")
{
  TetMesh mesh = makeFiveTetCube(1.0);
  CHECK(mesh.numVertices() == 8);
  CHECK(mesh.numTets() == 5);
  CHECK(mesh.numSurfaceTriangles() == 12);
  CHECK(mesh.totalRestVolume() == doctest::Approx(1.0).epsilon(1e-13));
  CHECK(mesh.boundingBoxDiagonal() == doctest::Approx(std::sqrt(3.0)).epsilon(1e-13));

  VecX rest = mesh.restPositionsVector();
  CHECK(mesh.surfaceEnclosedVolume(rest) == doctest::Approx(1.0).epsilon(1e-13));

  // neighbor table is symmetric and boundary faces match surface triangles
  int boundaryFaces = 0;
  const auto &neighbors = mesh.tetNeighbors();
  for (int t = 0; t < mesh.numTets(); t++) {
    for (int f = 0; f < 4; f++) {
      int other = neighbors[size_t(t)][size_t(f)];
      if (other < 0) {
        boundaryFaces++;
        continue;
      }
      bool reciprocal = false;
      for (int g = 0; g < 4; g++)
        reciprocal = reciprocal || neighbors[size_t(other)][size_t(g)] == t;
      CHECK(reciprocal);
    }
  }
  CHECK(boundaryFaces == mesh.numSurfaceTriangles());

  // the center tet touches all four corner tets
  int maxNeighborCount = 0;
  for (int t = 0; t < mesh.numTets(); t++) {
    int count = 0;
    for (int f = 0; f < 4; f++)
      count += neighbors[size_t(t)][size_t(f)] >= 0;
    maxNeighborCount = std::max(maxNeighborCount, count);
  }
  CHECK(maxNeighborCount == 4);

  // outward orientation: each surface triangle normal points away from the center
  Vec3 center(0.5, 0.5, 0.5);
  const auto &tris = mesh.surfaceTriangles();
  for (int tri = 0; tri < mesh.numSurfaceTriangles(); tri++) {
    Vec3 a = mesh.restPosition(tris[size_t(3 * tri)]);
    Vec3 b = mesh.restPosition(tris[size_t(3 * tri + 1)]);
    Vec3 c = mesh.restPosition(tris[size_t(3 * tri + 2)]);
    Vec3 n = (b - a).cross(c - a);
    CHECK(n.dot((a + b + c) / 3.0 - center) > 0.0);
  }
}

TEST_CASE("box mesh is conforming and fills the box")
{
  TetMesh mesh = makeBoxMesh(3, 2, 2, 0.1, 0.2, 0.15);
  CHECK(mesh.numTets() == 3 * 2 * 2 * 6);
  CHECK(mesh.totalRestVolume() == doctest::Approx(0.3 * 0.4 * 0.3).epsilon(1e-12));
  CHECK(mesh.surfaceEnclosedVolume(mesh.restPositionsVector()) ==
        doctest::Approx(0.3 * 0.4 * 0.3).epsilon(1e-12));
  CHECK((mesh.boundingBoxMin() - Vec3::Zero()).norm() < 1e-15);
  CHECK((mesh.boundingBoxMax() - Vec3(0.3, 0.4, 0.3)).norm() < 1e-13);
}

TEST_CASE("ellipsoid blob is connected and closed")
{
  TetMesh mesh = makeEllipsoidBlob(6, 0.1, 0.07, 0.05);
  CHECK(mesh.numTets() > 100);
  // built at all means the adjacency graph was connected
  CHECK(mesh.surfaceEnclosedVolume(mesh.restPositionsVector()) ==
        doctest::Approx(mesh.totalRestVolume()).epsilon(1e-10));
}

TEST_CASE("deformation gradient of an affine map is its linear part")
{
  TetMesh mesh = makeBoxMesh(2, 2, 2, 0.1, 0.1, 0.1);
  Mat3 A;
  A << 1.2, 0.1, -0.05, 0.02, 0.9, 0.3, -0.1, 0.04, 1.1;
  VecX x = affineDeform(mesh, A, Vec3(0.3, -0.2, 0.5));
  for (int t = 0; t < mesh.numTets(); t++)
    CHECK((mesh.deformationGradient(x, t) - A).norm() < 1e-12);
  CHECK(mesh.surfaceEnclosedVolume(x) ==
        doctest::Approx(A.determinant() * mesh.totalRestVolume()).epsilon(1e-11));
}

TEST_CASE("closest point on triangle covers face, edge, and vertex regions")
{
  Vec3 a(0, 0, 0), b(1, 0, 0), c(0, 1, 0);
  Vec3 bary;

  Vec3 q = closestPointOnTriangle(Vec3(0.2, 0.3, 0.7), a, b, c, &bary);
  CHECK((q - Vec3(0.2, 0.3, 0.0)).norm() < 1e-14);
  CHECK(bary.sum() == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(bary.minCoeff() > 0.0);

  q = closestPointOnTriangle(Vec3(0.5, -1.0, 0.2), a, b, c, &bary);
  CHECK((q - Vec3(0.5, 0.0, 0.0)).norm() < 1e-14);
  CHECK(bary[2] == doctest::Approx(0.0));

  q = closestPointOnTriangle(Vec3(-1.0, -1.0, 0.0), a, b, c, &bary);
  CHECK((q - a).norm() < 1e-14);
  CHECK(bary[0] == doctest::Approx(1.0));

  q = closestPointOnTriangle(Vec3(2.0, 2.0, 0.0), a, b, c, &bary);
  CHECK((q - Vec3(0.5, 0.5, 0.0)).norm() < 1e-14);

  // reconstruction identity for a skewed triangle
  Vec3 a2(0.1, -0.2, 0.3), b2(1.1, 0.2, -0.1), c2(-0.3, 0.9, 0.5);
  Vec3 p(0.4, 0.3, 2.0);
  q = closestPointOnTriangle(p, a2, b2, c2, &bary);
  CHECK((q - (bary[0] * a2 + bary[1] * b2 + bary[2] * c2)).norm() < 1e-13);
}

TEST_CASE("closest surface point agrees with brute force over triangles")
{
  TetMesh mesh = makeFiveTetCube(1.0);
  Mat3 A = Mat3::Identity() * 1.1;
  VecX x = affineDeform(mesh, A, Vec3(0.05, 0, 0));

  for (const Vec3 &query :
       {Vec3(2.0, 0.5, 0.5), Vec3(0.5, 0.5, 0.5), Vec3(-1.0, -1.0, -1.0), Vec3(0.6, 1.8, 0.4)}) {
    SurfacePoint sp = mesh.closestSurfacePoint(x, query);
    REQUIRE(sp.triangle >= 0);
    double best = std::numeric_limits<double>::infinity();
    const auto &tris = mesh.surfaceTriangles();
    for (int tri = 0; tri < mesh.numSurfaceTriangles(); tri++) {
      Vec3 a = mesh.position(x, tris[size_t(3 * tri)]);
      Vec3 b = mesh.position(x, tris[size_t(3 * tri + 1)]);
      Vec3 c = mesh.position(x, tris[size_t(3 * tri + 2)]);
      best = std::min(best, (closestPointOnTriangle(query, a, b, c) - query).norm());
    }
    CHECK(sp.distance == doctest::Approx(best).epsilon(1e-12));
    CHECK((sp.position - query).norm() == doctest::Approx(sp.distance).epsilon(1e-12));
    CHECK(mesh.surfaceTriangleSourceTets()[size_t(sp.triangle)] == sp.sourceTet);

    // the surface point maps into the source tet consistently
    MaterialPoint mp = mesh.materialPointFromSurfacePoint(sp);
    CHECK(mp.barycentric.sum() == doctest::Approx(1.0).epsilon(1e-12));
    CHECK((mesh.materialPointPosition(x, mp) - sp.position).norm() < 1e-12);
  }
}

TEST_CASE("embedding maps interior points exactly and clamps exterior points")
{
  TetMesh mesh = makeBoxMesh(2, 2, 2, 0.1, 0.1, 0.1);
  std::vector<Vec3> pts = {Vec3(0.05, 0.08, 0.11), Vec3(0.15, 0.15, 0.15), Vec3(0.5, 0.1, 0.1)};
  auto embedded = mesh.embedPoints(pts);
  REQUIRE(embedded.size() == pts.size());

  VecX rest = mesh.restPositionsVector();
  for (int i = 0; i < 2; i++) {
    CHECK(embedded[size_t(i)].tet >= 0);
    CHECK(embedded[size_t(i)].barycentric.minCoeff() >= -1e-12);
    CHECK(embedded[size_t(i)].barycentric.sum() == doctest::Approx(1.0).epsilon(1e-12));
    CHECK((mesh.materialPointPosition(rest, embedded[size_t(i)]) - pts[size_t(i)]).norm() < 1e-12);
  }
  // exterior point lands on the boundary, not at its own position
  Vec3 mapped = mesh.materialPointPosition(rest, embedded[2]);
  CHECK((mapped - Vec3(0.2, 0.1, 0.1)).norm() < 1e-12);

  // embedded points follow an affine deformation exactly
  Mat3 A;
  A << 1.1, 0.2, 0, 0, 0.95, -0.1, 0.05, 0, 1.02;
  VecX x = affineDeform(mesh, A, Vec3(1, 2, 3));
  auto moved = mesh.transformEmbedded(x, embedded);
  CHECK((moved[0] - (A * pts[0] + Vec3(1, 2, 3))).norm() < 1e-12);
}

TEST_CASE("dihedral report flags collapsing tets")
{
  TetMesh mesh = makeFiveTetCube(1.0);
  VecX rest = mesh.restPositionsVector();
  DihedralReport atRest = mesh.minDihedralReport(rest, 5.0);
  CHECK(int(atRest.perTetMinDeg.size()) == mesh.numTets());
  CHECK(atRest.minDeg > 30.0);
  CHECK(atRest.countBelowThreshold == 0);
  CHECK(atRest.thresholdDeg == 5.0);
  double worst = 180.0;
  for (double d : atRest.perTetMinDeg)
    worst = std::min(worst, d);
  CHECK(worst == atRest.minDeg);

  // squash the cube to 2% height: every tet flattens
  VecX squashed = rest;
  for (int v = 0; v < mesh.numVertices(); v++)
    squashed[3 * v + 2] *= 0.02;
  DihedralReport flat = mesh.minDihedralReport(squashed, 5.0);
  CHECK(flat.minDeg < 5.0);
  CHECK(flat.countBelowThreshold == mesh.numTets());
}

TEST_CASE("tetgen files round trip with 1-based indices")
{
  TetMesh mesh = makeFiveTetCube(0.7, Vec3(0.1, -0.3, 0.2));
  std::string nodePath = tempPath("plastifit_mesh_rt.node");
  std::string elePath = tempPath("plastifit_mesh_rt.ele");
  saveTetgenNode(nodePath, mesh.restPositionsVector());
  saveTetgenEle(elePath, mesh.tets());

  TetMesh loaded = TetMesh::loadTetgen(nodePath, elePath);
  CHECK(loaded.numVertices() == mesh.numVertices());
  CHECK(loaded.numTets() == mesh.numTets());
  CHECK((loaded.restPositionsVector() - mesh.restPositionsVector()).norm() == 0.0);
  CHECK(loaded.tets() == mesh.tets());

  // 0-based variant with comments is auto-detected
  std::string node0 = tempPath("plastifit_mesh_rt0.node");
  std::string ele0 = tempPath("plastifit_mesh_rt0.ele");
  {
    std::FILE *f = std::fopen(node0.c_str(), "w");
    REQUIRE(f);
    std::fprintf(f, "# comment line\n%d 3 0 0\n", mesh.numVertices());
    for (int v = 0; v < mesh.numVertices(); v++) {
      Vec3 p = mesh.restPosition(v);
      std::fprintf(f, "%d %.17g %.17g %.17g\n", v, p[0], p[1], p[2]);
    }
    std::fclose(f);
    f = std::fopen(ele0.c_str(), "w");
    REQUIRE(f);
    std::fprintf(f, "%d 4 0\n", mesh.numTets());
    for (int t = 0; t < mesh.numTets(); t++) {
      auto tv = mesh.tetVertices(t);
      std::fprintf(f, "%d %d %d %d %d # tet\n", t, tv[0], tv[1], tv[2], tv[3]);
    }
    std::fclose(f);
  }
  TetMesh loaded0 = TetMesh::loadTetgen(node0, ele0);
  CHECK(loaded0.tets() == mesh.tets());

  CHECK_THROWS_AS(TetMesh::loadTetgen(tempPath("plastifit_missing.node"), elePath), ParseError);

  std::remove(nodePath.c_str());
  std::remove(elePath.c_str());
  std::remove(node0.c_str());
  std::remove(ele0.c_str());
}
