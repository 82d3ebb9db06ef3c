#pragma once

#include "constraints.hpp"
#include "optimizer.hpp"
#include "tet_mesh.hpp"

#include <string>
#include <vector>

namespace plastifit
{

// Marker JSON: {"units": "m"|"mm", "attachments": [{"position": [...],
// "target": [...], "weight": w}], "landmarks": [...], "icp": [{"target":
// [...], "weight": w}]}. Millimeter files are converted to meters once here;
// everything downstream is metric. Positions are rest-space and are embedded
// into the mesh immediately. Unknown keys are rejected.
ConstraintSet loadMarkers(const std::string &path, const TetMesh &mesh);

// Inverse of loadMarkers (always meters): embedded points are written back as
// their rest-space positions.
void saveMarkersJson(const std::string &path, const TetMesh &mesh, const ConstraintSet &set);

// Solve configuration JSON; absent keys keep the defaults, unknown keys are
// rejected so typos cannot silently change a fit. The same file may carry a
// "material": {"young_modulus", "poisson_ratio"} subobject.
SolveConfig loadSolveConfig(const std::string &path);
MaterialParams loadMaterialParams(const std::string &path);

// Report JSON. Per-iteration wall times are volatile across machines and are
// only written when includeTiming is set, keeping default outputs
// byte-identical across reruns.
void saveReportJson(const std::string &path, const SolveReport &report, bool includeTiming);

struct ReportSummary
{
  double initialMeanIcpErrorMm = 0.0;
  double initialMaxIcpErrorMm = 0.0;
  double finalMeanIcpErrorMm = 0.0;
  double finalMaxIcpErrorMm = 0.0;
  int totalIterations = 0;
  std::vector<std::string> stageLines;
  bool hitIterationCap = false;
  std::vector<std::string> warnings;
};

// Parses a report written by saveReportJson back into the printable summary.
ReportSummary loadReportSummary(const std::string &path);
std::string formatReportSummary(const ReportSummary &summary);

// Plastic strain field, binary sidecar: magic "PLFB", little-endian uint64
// tet count, then 6m doubles in tet-major order.
void saveFieldBinary(const std::string &path, const PlasticField &field);
PlasticField loadFieldBinary(const std::string &path);

// Per-tet CSV with header tet,s1..s6.
void saveFieldCsv(const std::string &path, const PlasticField &field);

// Fixed-bin histogram of marker errors (meters in, millimeters out).
void saveErrorHistogramCsv(const std::string &path, const std::vector<double> &errors,
                           int bins = 20);

void saveDihedralCsv(const std::string &path, const DihedralReport &report);

// Rewrites the v lines of an OBJ through the fitted deformation (vertices are
// embedded into the rest mesh); every other line is preserved verbatim.
void transferObj(const std::string &inPath, const std::string &outPath, const TetMesh &mesh,
                 const VecX &x);

}  // namespace plastifit
