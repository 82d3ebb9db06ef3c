#include "plastifit/constraints.hpp"

#include <cmath>

namespace plastifit
{

Vec3 constraintResidual(const TetMesh &mesh, const ConstraintRow &row, const VecX &x)
{
  return mesh.materialPointPosition(x, row.point) - row.target;
}

double constraintEnergy(const TetMesh &mesh, const std::vector<ConstraintRow> &rows, const VecX &x)
{
  double energy = 0.0;
  for (const ConstraintRow &row : rows)
    energy += 0.5 * row.weight * constraintResidual(mesh, row, x).squaredNorm();
  return energy;
}

void addConstraintGradient(const TetMesh &mesh, const std::vector<ConstraintRow> &rows,
                           const VecX &x, VecX &grad)
{
  for (const ConstraintRow &row : rows) {
    const Vec3 scaled = row.weight * constraintResidual(mesh, row, x);
    auto tv = mesh.tetVertices(row.point.tet);
    for (int c = 0; c < 4; c++)
      grad.segment<3>(3 * tv[size_t(c)]) += row.point.barycentric[c] * scaled;
  }
}

void addConstraintHessianTriplets(const TetMesh &mesh, const std::vector<ConstraintRow> &rows,
                                  std::vector<Triplet> &triplets)
{
  for (const ConstraintRow &row : rows) {
    auto tv = mesh.tetVertices(row.point.tet);
    for (int a = 0; a < 4; a++)
      for (int b = 0; b < 4; b++) {
        const double w = row.weight * row.point.barycentric[a] * row.point.barycentric[b];
        if (w == 0.0)
          continue;
        for (int d = 0; d < 3; d++)
          triplets.emplace_back(3 * tv[size_t(a)] + d, 3 * tv[size_t(b)] + d, w);
      }
  }
}

MatX constraintRhsMatrix(const TetMesh &mesh, const std::vector<ConstraintRow> &rows,
                         int numVertices)
{
  MatX rhs = MatX::Zero(3 * numVertices, 3 * long(rows.size()));
  for (size_t k = 0; k < rows.size(); k++) {
    const ConstraintRow &row = rows[k];
    const double scale = std::sqrt(row.weight);
    auto tv = mesh.tetVertices(row.point.tet);
    for (int c = 0; c < 4; c++)
      for (int d = 0; d < 3; d++)
        rhs(3 * tv[size_t(c)] + d, 3 * long(k) + d) += scale * row.point.barycentric[c];
  }
  return rhs;
}

VecX constraintScaledResiduals(const TetMesh &mesh, const std::vector<ConstraintRow> &rows,
                               const VecX &x)
{
  VecX r(3 * long(rows.size()));
  for (size_t k = 0; k < rows.size(); k++)
    r.segment<3>(3 * long(k)) =
        std::sqrt(rows[k].weight) * constraintResidual(mesh, rows[k], x);
  return r;
}

namespace
{

std::vector<ConstraintRow> scaledRows(const std::vector<Landmark> &markers, double classWeight)
{
  std::vector<ConstraintRow> rows;
  rows.reserve(markers.size());
  for (const Landmark &marker : markers) {
    if (!(marker.weight > 0.0))
      throw ValidationError("marker weights must be positive");
    rows.push_back({marker.point, marker.target, classWeight * marker.weight});
  }
  return rows;
}

}  // namespace

std::vector<ConstraintRow> attachmentRows(const TetMesh &, const ConstraintSet &set, double beta)
{
  return scaledRows(set.attachments, beta);
}

std::vector<ConstraintRow> landmarkRows(const TetMesh &, const ConstraintSet &set, double alpha)
{
  return scaledRows(set.landmarks, alpha);
}

std::vector<ConstraintRow> icpRows(const TetMesh &mesh, const ConstraintSet &set, const VecX &x,
                                   double alpha)
{
  std::vector<ConstraintRow> rows;
  rows.reserve(set.icpMarkers.size());
  for (const IcpMarker &marker : set.icpMarkers) {
    if (!(marker.weight > 0.0))
      throw ValidationError("marker weights must be positive");
    SurfacePoint sp = mesh.closestSurfacePoint(x, marker.target);
    rows.push_back({mesh.materialPointFromSurfacePoint(sp), marker.target,
                    alpha * marker.weight});
  }
  return rows;
}

}  // namespace plastifit
