#pragma once

#include "tet_mesh.hpp"

namespace plastifit
{

// Unit-size axis-aligned cube split into 5 tets (4 corner tets plus the
// center tet, which is face-adjacent to all 4). Total volume = edge^3.
TetMesh makeFiveTetCube(double edge = 1.0, const Vec3 &origin = Vec3::Zero());

// Box [origin, origin + (nx*dx, ny*dy, nz*dz)] on an nx*ny*nz cell grid,
// 6 tets per cell (Kuhn subdivision, conforming across cells).
TetMesh makeBoxMesh(int nx, int ny, int nz, double dx, double dy, double dz,
                    const Vec3 &origin = Vec3::Zero());

// Genus-0 blob: cells of a box grid whose centers lie inside the ellipsoid
// with the given semi-axes; only the largest face-connected component is kept.
TetMesh makeEllipsoidBlob(int resolution, double ax, double ay, double az);

}  // namespace plastifit
