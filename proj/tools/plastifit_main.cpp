#include "plastifit/derivative_check.hpp"
#include "plastifit/io.hpp"
#include "plastifit/synthetic.hpp"

#include "CLI11.hpp"
#include "json.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

namespace fs = std::filesystem;
using namespace plastifit;

namespace
{

std::vector<double> markerErrors(const TetMesh &mesh, const ConstraintSet &set, const VecX &x)
{
  std::vector<double> errors;
  for (const auto &list : {set.attachments, set.landmarks})
    for (const Landmark &lm : list)
      errors.push_back((mesh.materialPointPosition(x, lm.point) - lm.target).norm());
  for (const IcpMarker &m : set.icpMarkers)
    errors.push_back(mesh.closestSurfacePoint(x, m.target).distance);
  return errors;
}

int runFit(const std::string &nodePath, const std::string &elePath, const std::string &markersPath,
           const std::string &configPath, const std::string &outDir, bool unattached,
           bool recordTiming, const std::string &objPath)
{
  TetMesh mesh = TetMesh::loadTetgen(nodePath, elePath);
  ConstraintSet markers = loadMarkers(markersPath, mesh);
  SolveConfig config = loadSolveConfig(configPath);
  MaterialParams mat = loadMaterialParams(configPath);
  if (unattached)
    config.unattached = true;

  fs::create_directories(outDir);
  FitResult result = fit(mesh, mat, markers, config);

  saveTetgenNode((fs::path(outDir) / "fitted.node").string(), result.x);
  saveFieldBinary((fs::path(outDir) / "field.plfb").string(), result.field);
  saveFieldCsv((fs::path(outDir) / "field.csv").string(), result.field);
  const std::string reportPath = (fs::path(outDir) / "report.json").string();
  saveReportJson(reportPath, result.report, recordTiming);
  saveErrorHistogramCsv((fs::path(outDir) / "error_histogram.csv").string(),
                        markerErrors(mesh, markers, result.x));
  saveDihedralCsv((fs::path(outDir) / "dihedral.csv").string(),
                  mesh.minDihedralReport(result.x, 5.0));
  if (!objPath.empty())
    transferObj(objPath, (fs::path(outDir) / "surface.obj").string(), mesh, result.x);

  std::printf("%s", formatReportSummary(loadReportSummary(reportPath)).c_str());
  return 0;
}

int runCheckDerivatives(unsigned seed, int trials)
{
  DerivativeCheckReport report = runDerivativeChecks(seed, trials);
  for (const BlockCheck &b : report.blocks)
    std::printf("%-22s %.3e\n", b.name.c_str(), b.worstError);
  if (!report.allBelow(1e-4)) {
    std::fprintf(stderr, "derivative check failed: worst error %.3e exceeds 1e-4\n",
                 report.worst());
    return 1;
  }
  return 0;
}

int runGenSynthetic(const std::string &preset, unsigned seed, const std::string &outDir)
{
  SyntheticCase c = makePresetCase(preset, seed);
  fs::create_directories(outDir);

  saveTetgenNode((fs::path(outDir) / "mesh.node").string(), c.mesh.restPositionsVector());
  saveTetgenEle((fs::path(outDir) / "mesh.ele").string(), c.mesh.tets());
  saveTetgenNode((fs::path(outDir) / "truth.node").string(), c.truthX);
  saveMarkersJson((fs::path(outDir) / "markers.json").string(), c.mesh, c.markers);
  saveFieldBinary((fs::path(outDir) / "truth_field.plfb").string(), c.truthField);
  saveFieldCsv((fs::path(outDir) / "truth_field.csv").string(), c.truthField);

  nlohmann::json config;
  config["unattached"] = !c.attached;
  config["material"]["young_modulus"] = c.material.youngModulus;
  config["material"]["poisson_ratio"] = c.material.poissonRatio;
  std::ofstream out((fs::path(outDir) / "config.json").string());
  out << config.dump(2) << "\n";

  std::printf("%s: %d vertices, %d tets, %zu attachments, %zu landmarks, %zu icp markers\n",
              preset.c_str(), c.mesh.numVertices(), c.mesh.numTets(), c.markers.attachments.size(),
              c.markers.landmarks.size(), c.markers.icpMarkers.size());
  return 0;
}

int runReport(const std::string &path)
{
  std::printf("%s", formatReportSummary(loadReportSummary(path)).c_str());
  return 0;
}

}  // namespace

int main(int argc, char **argv)
{
  CLI::App app{"Plastic strain field fitting for tetrahedral meshes"};
  app.require_subcommand(1);

  auto *fitCmd = app.add_subcommand("fit", "Fit a plastic strain field to markers");
  std::vector<std::string> meshPaths;
  std::string markersPath, configPath, outDir, objPath;
  bool unattached = false, recordTiming = false;
  fitCmd->add_option("--mesh", meshPaths, "Tet mesh: <file.node> <file.ele>")
      ->expected(2)
      ->required();
  fitCmd->add_option("--markers", markersPath, "Marker JSON file")->required();
  fitCmd->add_option("--config", configPath, "Solve configuration JSON")->required();
  fitCmd->add_option("--out", outDir, "Output directory")->required();
  fitCmd->add_flag("--unattached", unattached, "Treat the mesh as free floating");
  fitCmd->add_flag("--record-timing", recordTiming, "Include wall times in the report");
  fitCmd->add_option("--obj", objPath, "Surface OBJ to carry through the fitted deformation");

  auto *checkCmd = app.add_subcommand("check-derivatives", "Finite-difference derivative audit");
  unsigned checkSeed = 7;
  int checkTrials = 100;
  checkCmd->add_option("--seed", checkSeed, "Random seed");
  checkCmd->add_option("--trials", checkTrials, "Number of random states per block");

  auto *genCmd = app.add_subcommand("gen-synthetic", "Write a ground-truth fixture");
  std::string preset = "beam";
  unsigned genSeed = 7;
  std::string genOut;
  genCmd->add_option("--preset", preset, "beam, cube, or blob");
  genCmd->add_option("--seed", genSeed, "Random seed for marker sampling");
  genCmd->add_option("--out", genOut, "Output directory")->required();

  auto *reportCmd = app.add_subcommand("report", "Summarize a fit report");
  std::string reportPath;
  reportCmd->add_option("report", reportPath, "report.json path")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (fitCmd->parsed())
      return runFit(meshPaths[0], meshPaths[1], markersPath, configPath, outDir, unattached,
                    recordTiming, objPath);
    if (checkCmd->parsed())
      return runCheckDerivatives(checkSeed, checkTrials);
    if (genCmd->parsed())
      return runGenSynthetic(preset, genSeed, genOut);
    if (reportCmd->parsed())
      return runReport(reportPath);
  } catch (const ValidationError &e) {
    std::fprintf(stderr, "validation error: %s\n", e.what());
    return 2;
  } catch (const NumericalError &e) {
    std::fprintf(stderr, "numerical failure: %s\n", e.what());
    return 3;
  }
  return 0;
}
