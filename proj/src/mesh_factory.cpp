#include "plastifit/mesh_factory.hpp"

#include <algorithm>
#include <map>
#include <numeric>
#include <queue>

namespace plastifit
{

namespace
{

// Kuhn subdivision: one tet per permutation of the axes, each walking from
// cell corner (0,0,0) to (1,1,1). Conforming across neighboring cells.
constexpr int kAxisPermutations[6][3] = {{0, 1, 2}, {0, 2, 1}, {1, 0, 2},
                                         {1, 2, 0}, {2, 0, 1}, {2, 1, 0}};

}  // namespace

TetMesh makeFiveTetCube(double edge, const Vec3 &origin)
{
  std::vector<double> verts;
  verts.reserve(24);
  for (int k = 0; k < 2; k++)
    for (int j = 0; j < 2; j++)
      for (int i = 0; i < 2; i++) {
        Vec3 p = origin + edge * Vec3(i, j, k);
        verts.insert(verts.end(), {p.x(), p.y(), p.z()});
      }
  // Corner index = i + 2j + 4k.
  std::vector<int> tets = {
      0, 1, 2, 4,   // corner at 0
      1, 3, 2, 7,   // corner at 3
      1, 4, 5, 7,   // corner at 5
      2, 4, 7, 6,   // corner at 6
      1, 2, 4, 7};  // center tet, face-adjacent to all four above
  return TetMesh::build(std::move(verts), std::move(tets));
}

TetMesh makeBoxMesh(int nx, int ny, int nz, double dx, double dy, double dz, const Vec3 &origin)
{
  if (nx < 1 || ny < 1 || nz < 1)
    throw ValidationError("box mesh needs at least one cell per axis");
  auto vid = [&](int i, int j, int k) { return (k * (ny + 1) + j) * (nx + 1) + i; };
  std::vector<double> verts;
  verts.reserve(size_t(nx + 1) * size_t(ny + 1) * size_t(nz + 1) * 3);
  for (int k = 0; k <= nz; k++)
    for (int j = 0; j <= ny; j++)
      for (int i = 0; i <= nx; i++) {
        Vec3 p = origin + Vec3(i * dx, j * dy, k * dz);
        verts.insert(verts.end(), {p.x(), p.y(), p.z()});
      }
  std::vector<int> tets;
  tets.reserve(size_t(nx) * size_t(ny) * size_t(nz) * 24);
  for (int k = 0; k < nz; k++)
    for (int j = 0; j < ny; j++)
      for (int i = 0; i < nx; i++) {
        for (const auto &perm : kAxisPermutations) {
          int c[3] = {i, j, k};
          tets.push_back(vid(c[0], c[1], c[2]));
          for (int step = 0; step < 3; step++) {
            c[perm[step]]++;
            tets.push_back(vid(c[0], c[1], c[2]));
          }
        }
      }
  return TetMesh::build(std::move(verts), std::move(tets));
}

TetMesh makeEllipsoidBlob(int resolution, double ax, double ay, double az)
{
  if (resolution < 3)
    throw ValidationError("blob resolution must be at least 3");
  const int nx = resolution, ny = resolution, nz = resolution;
  const double dx = 2.0 * ax / nx, dy = 2.0 * ay / ny, dz = 2.0 * az / nz;
  const Vec3 origin(-ax, -ay, -az);

  auto cellInside = [&](int i, int j, int k) {
    Vec3 c = origin + Vec3((i + 0.5) * dx, (j + 0.5) * dy, (k + 0.5) * dz);
    return (c.x() * c.x()) / (ax * ax) + (c.y() * c.y()) / (ay * ay) +
               (c.z() * c.z()) / (az * az) <=
           1.0;
  };
  auto cellIndex = [&](int i, int j, int k) { return (k * ny + j) * nx + i; };

  std::vector<char> keep(size_t(nx) * size_t(ny) * size_t(nz), 0);
  for (int k = 0; k < nz; k++)
    for (int j = 0; j < ny; j++)
      for (int i = 0; i < nx; i++)
        keep[size_t(cellIndex(i, j, k))] = cellInside(i, j, k) ? 1 : 0;

  // Largest face-connected cell component; cells sharing a face yield
  // face-adjacent tets under the Kuhn subdivision.
  std::vector<int> component(keep.size(), -1);
  int numComponents = 0;
  std::vector<long> componentSize;
  for (int k = 0; k < nz; k++)
    for (int j = 0; j < ny; j++)
      for (int i = 0; i < nx; i++) {
        int c0 = cellIndex(i, j, k);
        if (!keep[size_t(c0)] || component[size_t(c0)] >= 0)
          continue;
        int id = numComponents++;
        componentSize.push_back(0);
        std::queue<std::array<int, 3>> frontier;
        frontier.push({i, j, k});
        component[size_t(c0)] = id;
        while (!frontier.empty()) {
          auto [ci, cj, ck] = frontier.front();
          frontier.pop();
          componentSize[size_t(id)]++;
          constexpr int kSteps[6][3] = {{1, 0, 0},  {-1, 0, 0}, {0, 1, 0},
                                        {0, -1, 0}, {0, 0, 1},  {0, 0, -1}};
          for (const auto &s : kSteps) {
            int ni = ci + s[0], nj = cj + s[1], nk = ck + s[2];
            if (ni < 0 || nj < 0 || nk < 0 || ni >= nx || nj >= ny || nk >= nz)
              continue;
            int nc = cellIndex(ni, nj, nk);
            if (keep[size_t(nc)] && component[size_t(nc)] < 0) {
              component[size_t(nc)] = id;
              frontier.push({ni, nj, nk});
            }
          }
        }
      }
  if (numComponents == 0)
    throw ValidationError("blob mask is empty; increase resolution or semi-axes");
  int largest = int(std::max_element(componentSize.begin(), componentSize.end()) -
                    componentSize.begin());

  auto gridId = [&](int i, int j, int k) { return (k * (ny + 1) + j) * (nx + 1) + i; };
  std::map<int, int> gridToDense;
  std::vector<double> verts;
  std::vector<int> tets;
  auto denseVertex = [&](int i, int j, int k) {
    int g = gridId(i, j, k);
    auto it = gridToDense.find(g);
    if (it != gridToDense.end())
      return it->second;
    int idx = int(gridToDense.size());
    gridToDense.emplace(g, idx);
    Vec3 p = origin + Vec3(i * dx, j * dy, k * dz);
    verts.insert(verts.end(), {p.x(), p.y(), p.z()});
    return idx;
  };
  for (int k = 0; k < nz; k++)
    for (int j = 0; j < ny; j++)
      for (int i = 0; i < nx; i++) {
        if (component[size_t(cellIndex(i, j, k))] != largest)
          continue;
        for (const auto &perm : kAxisPermutations) {
          int c[3] = {i, j, k};
          tets.push_back(denseVertex(c[0], c[1], c[2]));
          for (int step = 0; step < 3; step++) {
            c[perm[step]]++;
            tets.push_back(denseVertex(c[0], c[1], c[2]));
          }
        }
      }
  return TetMesh::build(std::move(verts), std::move(tets));
}

}  // namespace plastifit
