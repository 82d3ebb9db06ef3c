#pragma once

#include "types.hpp"

#include <array>
#include <string>
#include <vector>

namespace plastifit
{

// Barycentric location of a point inside (or clamped onto) a tetrahedron.
struct MaterialPoint
{
  int tet = -1;
  Vec4 barycentric = Vec4::Zero();
};

// Location on a boundary triangle. sourceTet is the tet the triangle came from.
struct SurfacePoint
{
  int triangle = -1;
  Vec3 barycentric = Vec3::Zero();
  int sourceTet = -1;
  Vec3 position = Vec3::Zero();
  double distance = 0.0;
};

struct DihedralReport
{
  std::vector<double> perTetMinDeg;  // size m
  double minDeg = 0.0;
  int countBelowThreshold = 0;
  double thresholdDeg = 0.0;
};

// Tetrahedral mesh over rest vertices, with the per-tet quantities every other
// module consumes. Tets are reoriented on construction so rest volumes are
// positive; degenerate tets (|V0| < 1e-18 m^3) and meshes whose tet
// face-adjacency graph is disconnected are rejected.
class TetMesh
{
public:
  // vertices: 3n packed xyz rest positions; tets: 4m vertex indices.
  static TetMesh build(std::vector<double> vertices, std::vector<int> tets);

  // TetGen ASCII .node/.ele pair; 0- and 1-based indexing are auto-detected.
  static TetMesh loadTetgen(const std::string &nodePath, const std::string &elePath);

  int numVertices() const { return int(restPositions_.size()) / 3; }
  int numTets() const { return int(tets_.size()) / 4; }
  int numSurfaceTriangles() const { return int(surfaceTriangles_.size()) / 3; }

  const std::vector<double> &restPositions() const { return restPositions_; }
  const std::vector<int> &tets() const { return tets_; }
  // Boundary triangles, outward-oriented, 3 vertex indices each.
  const std::vector<int> &surfaceTriangles() const { return surfaceTriangles_; }
  const std::vector<int> &surfaceTriangleSourceTets() const { return surfaceSourceTets_; }
  // Neighbor tet across each of the 4 faces (-1 on the boundary).
  // Face f of a tet is the face opposite its vertex f.
  const std::vector<std::array<int, 4>> &tetNeighbors() const { return tetNeighbors_; }

  const Mat3 &restShapeInverse(int tet) const { return restShapeInverses_[size_t(tet)]; }
  double restVolume(int tet) const { return restVolumes_[size_t(tet)]; }
  double totalRestVolume() const;

  Vec3 restPosition(int vtx) const;
  Vec3 position(const VecX &x, int vtx) const;
  std::array<int, 4> tetVertices(int tet) const;

  VecX restPositionsVector() const;
  Vec3 boundingBoxMin() const;
  Vec3 boundingBoxMax() const;
  double boundingBoxDiagonal() const;

  // F = Ds * restShapeInverse for the deformed positions x (3n vector).
  Mat3 deformationGradient(const VecX &x, int tet) const;

  // Exhaustive closest point on the deformed boundary surface.
  SurfacePoint closestSurfacePoint(const VecX &x, const Vec3 &query) const;

  // Embeds rest-space points: containing tet when inside, otherwise the
  // nearest tet with barycentric coordinates of the closest point on it.
  std::vector<MaterialPoint> embedPoints(const std::vector<Vec3> &points) const;

  Vec3 materialPointPosition(const VecX &x, const MaterialPoint &p) const;
  std::vector<Vec3> transformEmbedded(const VecX &x,
                                      const std::vector<MaterialPoint> &points) const;

  MaterialPoint materialPointFromSurfacePoint(const SurfacePoint &sp) const;

  DihedralReport minDihedralReport(const VecX &x, double thresholdDeg = 5.0) const;

  // Signed volume of the deformed boundary surface via the divergence theorem.
  double surfaceEnclosedVolume(const VecX &x) const;

private:
  std::vector<double> restPositions_;
  std::vector<int> tets_;
  std::vector<Mat3> restShapeInverses_;
  std::vector<double> restVolumes_;
  std::vector<int> surfaceTriangles_;
  std::vector<int> surfaceSourceTets_;
  std::vector<std::array<int, 4>> tetNeighbors_;
};

// Closest point on triangle (a,b,c) to p, with barycentric coordinates.
Vec3 closestPointOnTriangle(const Vec3 &p, const Vec3 &a, const Vec3 &b, const Vec3 &c,
                            Vec3 *barycentric = nullptr);

void saveTetgenNode(const std::string &path, const VecX &positions);
void saveTetgenEle(const std::string &path, const std::vector<int> &tets);

}  // namespace plastifit
