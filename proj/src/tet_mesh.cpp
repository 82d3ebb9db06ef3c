#include "plastifit/tet_mesh.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <map>
#include <numeric>
#include <sstream>

namespace plastifit
{

namespace
{

constexpr double kDegenerateVolume = 1e-18;

// Local face f is the face opposite vertex f, ordered so its normal points
// out of a positively oriented tet.
constexpr int kFaceCorners[4][3] = {{1, 2, 3}, {0, 3, 2}, {0, 1, 3}, {0, 2, 1}};

struct UnionFind
{
  std::vector<int> parent;
  explicit UnionFind(int n) : parent(size_t(n)) { std::iota(parent.begin(), parent.end(), 0); }
  int find(int a)
  {
    while (parent[size_t(a)] != a) {
      parent[size_t(a)] = parent[size_t(parent[size_t(a)])];
      a = parent[size_t(a)];
    }
    return a;
  }
  void unite(int a, int b) { parent[size_t(find(a))] = find(b); }
};

std::array<int, 3> sortedTriple(int a, int b, int c)
{
  std::array<int, 3> t = {a, b, c};
  std::sort(t.begin(), t.end());
  return t;
}

// Strips comments, returns whitespace tokens of the next non-empty line.
bool nextTokenLine(std::istream &in, std::vector<std::string> &tokens)
{
  std::string line;
  while (std::getline(in, line)) {
    auto hash = line.find('#');
    if (hash != std::string::npos)
      line.erase(hash);
    std::istringstream ls(line);
    tokens.assign(std::istream_iterator<std::string>(ls), std::istream_iterator<std::string>());
    if (!tokens.empty())
      return true;
  }
  return false;
}

}  // namespace

TetMesh TetMesh::build(std::vector<double> vertices, std::vector<int> tets)
{
  if (vertices.size() % 3 != 0)
    throw ValidationError("vertex array length is not a multiple of 3");
  if (tets.size() % 4 != 0)
    throw ValidationError("tet array length is not a multiple of 4");

  TetMesh mesh;
  mesh.restPositions_ = std::move(vertices);
  mesh.tets_ = std::move(tets);

  const int n = mesh.numVertices();
  const int m = mesh.numTets();
  if (n < 4 || m < 1)
    throw ValidationError("mesh needs at least 4 vertices and 1 tet");

  std::vector<char> referenced(size_t(n), 0);
  for (int t = 0; t < m; t++) {
    for (int c = 0; c < 4; c++) {
      int v = mesh.tets_[size_t(4 * t + c)];
      if (v < 0 || v >= n)
        throw ValidationError("tet " + std::to_string(t) + " references vertex " +
                              std::to_string(v) + " outside [0, " + std::to_string(n) + ")");
      referenced[size_t(v)] = 1;
    }
  }
  for (int v = 0; v < n; v++) {
    if (!referenced[size_t(v)])
      throw ValidationError("vertex " + std::to_string(v) +
                            " is not referenced by any tet; the equilibrium problem "
                            "would have free floating unknowns");
  }

  mesh.restShapeInverses_.resize(size_t(m));
  mesh.restVolumes_.resize(size_t(m));
  for (int t = 0; t < m; t++) {
    int *tv = &mesh.tets_[size_t(4 * t)];
    Vec3 p0 = mesh.restPosition(tv[0]);
    Mat3 Dm;
    Dm.col(0) = mesh.restPosition(tv[1]) - p0;
    Dm.col(1) = mesh.restPosition(tv[2]) - p0;
    Dm.col(2) = mesh.restPosition(tv[3]) - p0;
    double vol = Dm.determinant() / 6.0;
    if (vol < 0.0) {
      std::swap(tv[2], tv[3]);
      Dm.col(1).swap(Dm.col(2));
      vol = -vol;
    }
    if (vol < kDegenerateVolume)
      throw ValidationError("tet " + std::to_string(t) + " is degenerate (|V0| = " +
                            std::to_string(vol) + " m^3 < 1e-18)");
    mesh.restVolumes_[size_t(t)] = vol;
    mesh.restShapeInverses_[size_t(t)] = Dm.inverse();
  }

  // Face incidence: boundary extraction, neighbor table, manifoldness.
  std::map<std::array<int, 3>, std::pair<int, int>> faceOwner;  // face -> (tet, local face)
  mesh.tetNeighbors_.assign(size_t(m), {-1, -1, -1, -1});
  for (int t = 0; t < m; t++) {
    const int *tv = &mesh.tets_[size_t(4 * t)];
    for (int f = 0; f < 4; f++) {
      auto key = sortedTriple(tv[kFaceCorners[f][0]], tv[kFaceCorners[f][1]], tv[kFaceCorners[f][2]]);
      auto it = faceOwner.find(key);
      if (it == faceOwner.end()) {
        faceOwner.emplace(key, std::make_pair(t, f));
      } else if (it->second.first >= 0) {
        auto [other, otherFace] = it->second;
        mesh.tetNeighbors_[size_t(t)][size_t(f)] = other;
        mesh.tetNeighbors_[size_t(other)][size_t(otherFace)] = t;
        it->second.first = -1;  // mark as interior, a third incidence is an error
      } else {
        throw ValidationError("face (" + std::to_string(key[0]) + ", " + std::to_string(key[1]) +
                              ", " + std::to_string(key[2]) + ") is shared by more than two tets");
      }
    }
  }
  for (int t = 0; t < m; t++) {
    const int *tv = &mesh.tets_[size_t(4 * t)];
    for (int f = 0; f < 4; f++) {
      auto key = sortedTriple(tv[kFaceCorners[f][0]], tv[kFaceCorners[f][1]], tv[kFaceCorners[f][2]]);
      if (faceOwner.at(key).first >= 0) {
        for (int c = 0; c < 3; c++)
          mesh.surfaceTriangles_.push_back(tv[kFaceCorners[f][c]]);
        mesh.surfaceSourceTets_.push_back(t);
      }
    }
  }

  UnionFind uf(m);
  for (int t = 0; t < m; t++)
    for (int f = 0; f < 4; f++)
      if (mesh.tetNeighbors_[size_t(t)][size_t(f)] >= 0)
        uf.unite(t, mesh.tetNeighbors_[size_t(t)][size_t(f)]);
  int root = uf.find(0);
  for (int t = 1; t < m; t++) {
    if (uf.find(t) != root)
      throw ValidationError(
          "tet face-adjacency graph has more than one connected component "
          "(tet 0 and tet " + std::to_string(t) + " are not face-connected); "
          "the plastic strain smoothness term requires a single component");
  }
  return mesh;
}

TetMesh TetMesh::loadTetgen(const std::string &nodePath, const std::string &elePath)
{
  std::ifstream nodeIn(nodePath);
  if (!nodeIn)
    throw ParseError("cannot open node file: " + nodePath);
  std::vector<std::string> tok;
  if (!nextTokenLine(nodeIn, tok) || tok.size() < 2)
    throw ParseError(nodePath + ": missing node header");
  int numNodes = 0, dim = 0;
  try {
    numNodes = std::stoi(tok[0]);
    dim = std::stoi(tok[1]);
  } catch (const std::exception &) {
    throw ParseError(nodePath + ": malformed node header");
  }
  if (dim != 3)
    throw ParseError(nodePath + ": expected dimension 3, got " + std::to_string(dim));
  if (numNodes <= 0)
    throw ParseError(nodePath + ": node count must be positive");

  std::vector<long> nodeIds(static_cast<size_t>(numNodes));
  std::vector<double> coords(size_t(numNodes) * 3);
  for (int i = 0; i < numNodes; i++) {
    if (!nextTokenLine(nodeIn, tok) || tok.size() < 4)
      throw ParseError(nodePath + ": node record " + std::to_string(i) + " is truncated");
    try {
      nodeIds[size_t(i)] = std::stol(tok[0]);
      for (int c = 0; c < 3; c++)
        coords[size_t(3 * i + c)] = std::stod(tok[size_t(1 + c)]);
    } catch (const std::exception &) {
      throw ParseError(nodePath + ": malformed node record " + std::to_string(i));
    }
  }

  std::map<long, int> idToDense;
  for (int i = 0; i < numNodes; i++) {
    if (!idToDense.emplace(nodeIds[size_t(i)], i).second)
      throw ParseError(nodePath + ": duplicate node index " + std::to_string(nodeIds[size_t(i)]));
  }

  std::ifstream eleIn(elePath);
  if (!eleIn)
    throw ParseError("cannot open ele file: " + elePath);
  if (!nextTokenLine(eleIn, tok) || tok.size() < 2)
    throw ParseError(elePath + ": missing ele header");
  int numTets = 0, nodesPerTet = 0;
  try {
    numTets = std::stoi(tok[0]);
    nodesPerTet = std::stoi(tok[1]);
  } catch (const std::exception &) {
    throw ParseError(elePath + ": malformed ele header");
  }
  if (nodesPerTet != 4)
    throw ParseError(elePath + ": expected 4 nodes per tet, got " + std::to_string(nodesPerTet));
  if (numTets <= 0)
    throw ParseError(elePath + ": tet count must be positive");

  std::vector<int> tets(size_t(numTets) * 4);
  for (int t = 0; t < numTets; t++) {
    if (!nextTokenLine(eleIn, tok) || tok.size() < 5)
      throw ParseError(elePath + ": tet record " + std::to_string(t) + " is truncated");
    for (int c = 0; c < 4; c++) {
      long id = 0;
      try {
        id = std::stol(tok[size_t(1 + c)]);
      } catch (const std::exception &) {
        throw ParseError(elePath + ": malformed tet record " + std::to_string(t));
      }
      auto it = idToDense.find(id);
      if (it == idToDense.end())
        throw ParseError(elePath + ": tet " + std::to_string(t) + " references unknown node " +
                         std::to_string(id));
      tets[size_t(4 * t + c)] = it->second;
    }
  }
  return build(std::move(coords), std::move(tets));
}

double TetMesh::totalRestVolume() const
{
  return std::accumulate(restVolumes_.begin(), restVolumes_.end(), 0.0);
}

Vec3 TetMesh::restPosition(int vtx) const
{
  return Vec3(restPositions_[size_t(3 * vtx)], restPositions_[size_t(3 * vtx + 1)],
              restPositions_[size_t(3 * vtx + 2)]);
}

Vec3 TetMesh::position(const VecX &x, int vtx) const
{
  return x.segment<3>(3 * vtx);
}

std::array<int, 4> TetMesh::tetVertices(int tet) const
{
  return {tets_[size_t(4 * tet)], tets_[size_t(4 * tet + 1)], tets_[size_t(4 * tet + 2)],
          tets_[size_t(4 * tet + 3)]};
}

VecX TetMesh::restPositionsVector() const
{
  return Eigen::Map<const VecX>(restPositions_.data(), long(restPositions_.size()));
}

Vec3 TetMesh::boundingBoxMin() const
{
  Vec3 lo = restPosition(0);
  for (int v = 1; v < numVertices(); v++)
    lo = lo.cwiseMin(restPosition(v));
  return lo;
}

Vec3 TetMesh::boundingBoxMax() const
{
  Vec3 hi = restPosition(0);
  for (int v = 1; v < numVertices(); v++)
    hi = hi.cwiseMax(restPosition(v));
  return hi;
}

double TetMesh::boundingBoxDiagonal() const
{
  return (boundingBoxMax() - boundingBoxMin()).norm();
}

Mat3 TetMesh::deformationGradient(const VecX &x, int tet) const
{
  auto tv = tetVertices(tet);
  Vec3 p0 = position(x, tv[0]);
  Mat3 Ds;
  Ds.col(0) = position(x, tv[1]) - p0;
  Ds.col(1) = position(x, tv[2]) - p0;
  Ds.col(2) = position(x, tv[3]) - p0;
  return Ds * restShapeInverses_[size_t(tet)];
}

SurfacePoint TetMesh::closestSurfacePoint(const VecX &x, const Vec3 &query) const
{
  SurfacePoint best;
  best.distance = std::numeric_limits<double>::infinity();
  const int numTris = numSurfaceTriangles();
  if (numTris == 0)
    throw ValidationError("mesh has no boundary triangles");
  for (int tri = 0; tri < numTris; tri++) {
    Vec3 a = position(x, surfaceTriangles_[size_t(3 * tri)]);
    Vec3 b = position(x, surfaceTriangles_[size_t(3 * tri + 1)]);
    Vec3 c = position(x, surfaceTriangles_[size_t(3 * tri + 2)]);
    Vec3 bary;
    Vec3 q = closestPointOnTriangle(query, a, b, c, &bary);
    double d = (q - query).norm();
    if (d < best.distance) {
      best.triangle = tri;
      best.barycentric = bary;
      best.sourceTet = surfaceSourceTets_[size_t(tri)];
      best.position = q;
      best.distance = d;
    }
  }
  return best;
}

std::vector<MaterialPoint> TetMesh::embedPoints(const std::vector<Vec3> &points) const
{
  const int m = numTets();
  std::vector<MaterialPoint> result(points.size());
  for (size_t i = 0; i < points.size(); i++) {
    const Vec3 &p = points[i];
    MaterialPoint mp;
    for (int t = 0; t < m && mp.tet < 0; t++) {
      auto tv = tetVertices(t);
      Vec3 b123 = restShapeInverses_[size_t(t)] * (p - restPosition(tv[0]));
      Vec4 bary(1.0 - b123.sum(), b123[0], b123[1], b123[2]);
      if (bary.minCoeff() >= -1e-12) {
        mp.tet = t;
        mp.barycentric = bary;
      }
    }
    if (mp.tet < 0) {
      // Exterior point: closest point over each tet's faces, nearest tet wins.
      double bestDist = std::numeric_limits<double>::infinity();
      Vec3 bestPoint = Vec3::Zero();
      for (int t = 0; t < m; t++) {
        auto tv = tetVertices(t);
        for (int f = 0; f < 4; f++) {
          Vec3 a = restPosition(tv[kFaceCorners[f][0]]);
          Vec3 b = restPosition(tv[kFaceCorners[f][1]]);
          Vec3 c = restPosition(tv[kFaceCorners[f][2]]);
          Vec3 q = closestPointOnTriangle(p, a, b, c);
          double d = (q - p).norm();
          if (d < bestDist) {
            bestDist = d;
            bestPoint = q;
            mp.tet = t;
          }
        }
      }
      auto tv = tetVertices(mp.tet);
      Vec3 b123 = restShapeInverses_[size_t(mp.tet)] * (bestPoint - restPosition(tv[0]));
      Vec4 bary(1.0 - b123.sum(), b123[0], b123[1], b123[2]);
      bary = bary.cwiseMax(0.0);
      mp.barycentric = bary / bary.sum();
    }
    result[i] = mp;
  }
  return result;
}

Vec3 TetMesh::materialPointPosition(const VecX &x, const MaterialPoint &p) const
{
  auto tv = tetVertices(p.tet);
  Vec3 pos = Vec3::Zero();
  for (int c = 0; c < 4; c++)
    pos += p.barycentric[c] * position(x, tv[size_t(c)]);
  return pos;
}

std::vector<Vec3> TetMesh::transformEmbedded(const VecX &x,
                                             const std::vector<MaterialPoint> &points) const
{
  std::vector<Vec3> out(points.size());
  for (size_t i = 0; i < points.size(); i++)
    out[i] = materialPointPosition(x, points[i]);
  return out;
}

MaterialPoint TetMesh::materialPointFromSurfacePoint(const SurfacePoint &sp) const
{
  MaterialPoint mp;
  mp.tet = sp.sourceTet;
  auto tv = tetVertices(mp.tet);
  for (int c = 0; c < 3; c++) {
    int vtx = surfaceTriangles_[size_t(3 * sp.triangle + c)];
    for (int k = 0; k < 4; k++)
      if (tv[size_t(k)] == vtx)
        mp.barycentric[k] += sp.barycentric[c];
  }
  return mp;
}

DihedralReport TetMesh::minDihedralReport(const VecX &x, double thresholdDeg) const
{
  static constexpr int kEdges[6][2] = {{0, 1}, {0, 2}, {0, 3}, {1, 2}, {1, 3}, {2, 3}};
  DihedralReport report;
  report.thresholdDeg = thresholdDeg;
  report.perTetMinDeg.resize(size_t(numTets()));
  report.minDeg = 180.0;
  for (int t = 0; t < numTets(); t++) {
    auto tv = tetVertices(t);
    double minAngle = 180.0;
    for (const auto &edge : kEdges) {
      int p = tv[size_t(edge[0])], q = tv[size_t(edge[1])];
      int others[2];
      int o = 0;
      for (int c = 0; c < 4; c++)
        if (c != edge[0] && c != edge[1])
          others[o++] = tv[size_t(c)];
      Vec3 e = (position(x, q) - position(x, p)).normalized();
      Vec3 u = position(x, others[0]) - position(x, p);
      Vec3 v = position(x, others[1]) - position(x, p);
      u -= u.dot(e) * e;
      v -= v.dot(e) * e;
      double angle = std::atan2(u.cross(v).norm(), u.dot(v)) * 180.0 / M_PI;
      minAngle = std::min(minAngle, angle);
    }
    report.perTetMinDeg[size_t(t)] = minAngle;
    report.minDeg = std::min(report.minDeg, minAngle);
    if (minAngle < thresholdDeg)
      report.countBelowThreshold++;
  }
  return report;
}

double TetMesh::surfaceEnclosedVolume(const VecX &x) const
{
  double vol = 0.0;
  for (int tri = 0; tri < numSurfaceTriangles(); tri++) {
    Vec3 a = position(x, surfaceTriangles_[size_t(3 * tri)]);
    Vec3 b = position(x, surfaceTriangles_[size_t(3 * tri + 1)]);
    Vec3 c = position(x, surfaceTriangles_[size_t(3 * tri + 2)]);
    vol += a.dot(b.cross(c)) / 6.0;
  }
  return vol;
}

Vec3 closestPointOnTriangle(const Vec3 &p, const Vec3 &a, const Vec3 &b, const Vec3 &c,
                            Vec3 *barycentric)
{
  auto finish = [&](double u, double v, double w) {
    if (barycentric)
      *barycentric = Vec3(u, v, w);
    return u * a + v * b + w * c;
  };

  Vec3 ab = b - a, ac = c - a, ap = p - a;
  double d1 = ab.dot(ap), d2 = ac.dot(ap);
  if (d1 <= 0.0 && d2 <= 0.0)
    return finish(1.0, 0.0, 0.0);

  Vec3 bp = p - b;
  double d3 = ab.dot(bp), d4 = ac.dot(bp);
  if (d3 >= 0.0 && d4 <= d3)
    return finish(0.0, 1.0, 0.0);

  double vc = d1 * d4 - d3 * d2;
  if (vc <= 0.0 && d1 >= 0.0 && d3 <= 0.0) {
    double v = d1 / (d1 - d3);
    return finish(1.0 - v, v, 0.0);
  }

  Vec3 cp = p - c;
  double d5 = ab.dot(cp), d6 = ac.dot(cp);
  if (d6 >= 0.0 && d5 <= d6)
    return finish(0.0, 0.0, 1.0);

  double vb = d5 * d2 - d1 * d6;
  if (vb <= 0.0 && d2 >= 0.0 && d6 <= 0.0) {
    double w = d2 / (d2 - d6);
    return finish(1.0 - w, 0.0, w);
  }

  double va = d3 * d6 - d5 * d4;
  if (va <= 0.0 && (d4 - d3) >= 0.0 && (d5 - d6) >= 0.0) {
    double w = (d4 - d3) / ((d4 - d3) + (d5 - d6));
    return finish(0.0, 1.0 - w, w);
  }

  double denom = 1.0 / (va + vb + vc);
  double v = vb * denom, w = vc * denom;
  return finish(1.0 - v - w, v, w);
}

void saveTetgenNode(const std::string &path, const VecX &positions)
{
  std::FILE *f = std::fopen(path.c_str(), "w");
  if (!f)
    throw ValidationError("cannot open for writing: " + path);
  long n = positions.size() / 3;
  std::fprintf(f, "%ld 3 0 0\n", n);
  for (long i = 0; i < n; i++)
    std::fprintf(f, "%ld %.17g %.17g %.17g\n", i + 1, positions[3 * i], positions[3 * i + 1],
                 positions[3 * i + 2]);
  std::fclose(f);
}

void saveTetgenEle(const std::string &path, const std::vector<int> &tets)
{
  if (tets.size() % 4 != 0)
    throw ValidationError("tet array length is not a multiple of 4");
  std::FILE *f = std::fopen(path.c_str(), "w");
  if (!f)
    throw ValidationError("cannot open for writing: " + path);
  long m = long(tets.size() / 4);
  std::fprintf(f, "%ld 4 0\n", m);
  for (long t = 0; t < m; t++)
    std::fprintf(f, "%ld %d %d %d %d\n", t + 1, tets[size_t(4 * t)] + 1, tets[size_t(4 * t + 1)] + 1,
                 tets[size_t(4 * t + 2)] + 1, tets[size_t(4 * t + 3)] + 1);
  std::fclose(f);
}

}  // namespace plastifit
