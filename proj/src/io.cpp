#include "plastifit/io.hpp"

#include "json.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <sstream>

namespace plastifit
{

namespace
{

using nlohmann::json;

json loadJsonFile(const std::string &path)
{
  std::ifstream in(path);
  if (!in)
    throw ParseError("cannot open " + path);
  json j;
  try {
    in >> j;
  } catch (const json::parse_error &e) {
    throw ParseError(path + ": " + e.what());
  }
  return j;
}

void rejectUnknownKeys(const json &j, const std::vector<std::string> &allowed,
                       const std::string &where)
{
  for (auto it = j.begin(); it != j.end(); ++it)
    if (std::find(allowed.begin(), allowed.end(), it.key()) == allowed.end())
      throw ParseError("unknown key '" + it.key() + "' in " + where);
}

Vec3 parseVec3(const json &j, const std::string &where)
{
  if (!j.is_array() || j.size() != 3)
    throw ParseError(where + " must be a 3-element array");
  Vec3 v;
  for (int d = 0; d < 3; d++) {
    if (!j[size_t(d)].is_number())
      throw ParseError(where + " must hold numbers");
    v[d] = j[size_t(d)].get<double>();
  }
  return v;
}

double parseWeight(const json &entry, const std::string &where)
{
  if (!entry.contains("weight"))
    return 1.0;
  const double w = entry["weight"].get<double>();
  if (!(w > 0.0) || !std::isfinite(w))
    throw ParseError(where + ": weight must be positive and finite");
  return w;
}

}  // namespace

ConstraintSet loadMarkers(const std::string &path, const TetMesh &mesh)
{
  json j = loadJsonFile(path);
  rejectUnknownKeys(j, {"units", "attachments", "landmarks", "icp"}, path);

  double unitScale = 1.0;
  if (j.contains("units")) {
    const std::string units = j["units"].get<std::string>();
    if (units == "mm")
      unitScale = 1e-3;
    else if (units != "m")
      throw ParseError(path + ": units must be \"m\" or \"mm\"");
  }

  ConstraintSet set;
  std::vector<Vec3> positions;
  std::vector<double> weights;
  std::vector<Vec3> targets;
  std::vector<int> kinds;  // 0 attachment, 1 landmark

  for (const char *key : {"attachments", "landmarks"}) {
    if (!j.contains(key))
      continue;
    const json &list = j[key];
    if (!list.is_array())
      throw ParseError(path + ": " + key + " must be an array");
    for (size_t i = 0; i < list.size(); i++) {
      const json &entry = list[i];
      const std::string where = path + ":" + key + "[" + std::to_string(i) + "]";
      rejectUnknownKeys(entry, {"position", "target", "weight"}, where);
      if (!entry.contains("position") || !entry.contains("target"))
        throw ParseError(where + " needs position and target");
      positions.push_back(unitScale * parseVec3(entry["position"], where + ".position"));
      targets.push_back(unitScale * parseVec3(entry["target"], where + ".target"));
      weights.push_back(parseWeight(entry, where));
      kinds.push_back(std::strcmp(key, "attachments") == 0 ? 0 : 1);
    }
  }

  std::vector<MaterialPoint> embedded = mesh.embedPoints(positions);
  for (size_t i = 0; i < embedded.size(); i++) {
    Landmark lm;
    lm.point = embedded[i];
    lm.target = targets[i];
    lm.weight = weights[i];
    if (kinds[i] == 0)
      set.attachments.push_back(lm);
    else
      set.landmarks.push_back(lm);
  }

  if (j.contains("icp")) {
    const json &list = j["icp"];
    if (!list.is_array())
      throw ParseError(path + ": icp must be an array");
    for (size_t i = 0; i < list.size(); i++) {
      const json &entry = list[i];
      const std::string where = path + ":icp[" + std::to_string(i) + "]";
      rejectUnknownKeys(entry, {"target", "weight"}, where);
      if (!entry.contains("target"))
        throw ParseError(where + " needs a target");
      IcpMarker marker;
      marker.target = unitScale * parseVec3(entry["target"], where + ".target");
      marker.weight = parseWeight(entry, where);
      set.icpMarkers.push_back(marker);
    }
  }
  return set;
}

void saveMarkersJson(const std::string &path, const TetMesh &mesh, const ConstraintSet &set)
{
  const VecX rest = mesh.restPositionsVector();
  auto vecArray = [](const Vec3 &v) { return json::array({v[0], v[1], v[2]}); };
  json j;
  j["units"] = "m";
  auto writePoints = [&](const char *key, const std::vector<Landmark> &list) {
    json arr = json::array();
    for (const Landmark &lm : list) {
      json entry;
      entry["position"] = vecArray(mesh.materialPointPosition(rest, lm.point));
      entry["target"] = vecArray(lm.target);
      entry["weight"] = lm.weight;
      arr.push_back(entry);
    }
    j[key] = arr;
  };
  writePoints("attachments", set.attachments);
  writePoints("landmarks", set.landmarks);
  json icp = json::array();
  for (const IcpMarker &m : set.icpMarkers) {
    json entry;
    entry["target"] = vecArray(m.target);
    entry["weight"] = m.weight;
    icp.push_back(entry);
  }
  j["icp"] = icp;

  std::ofstream out(path);
  if (!out)
    throw ValidationError("cannot open for writing: " + path);
  out << j.dump(2) << "\n";
}

SolveConfig loadSolveConfig(const std::string &path)
{
  json j = loadJsonFile(path);
  rejectUnknownKeys(j,
                    {"alpha", "beta", "smoothness_weight", "spd_floor",
                     "max_outer_iterations", "eta_min", "eta_max", "brent_tol",
                     "icp_stop_mm", "unattached", "equilibrium", "material"},
                    path);
  SolveConfig config;
  auto get = [&](const char *key, auto &value) {
    if (j.contains(key))
      value = j[key].get<std::decay_t<decltype(value)>>();
  };
  get("alpha", config.alpha);
  get("beta", config.beta);
  get("smoothness_weight", config.smoothnessWeight);
  get("spd_floor", config.spdFloor);
  get("max_outer_iterations", config.maxOuterIterations);
  get("eta_min", config.etaMin);
  get("eta_max", config.etaMax);
  get("brent_tol", config.brentTol);
  get("icp_stop_mm", config.icpStopMm);
  get("unattached", config.unattached);
  if (j.contains("equilibrium")) {
    const json &eq = j["equilibrium"];
    rejectUnknownKeys(eq,
                      {"force_tol", "max_newton_iterations", "constraint_tol",
                       "max_outer_iterations"},
                      path + ":equilibrium");
    auto getEq = [&](const char *key, auto &value) {
      if (eq.contains(key))
        value = eq[key].get<std::decay_t<decltype(value)>>();
    };
    getEq("force_tol", config.equilibrium.forceTol);
    getEq("max_newton_iterations", config.equilibrium.maxNewtonIterations);
    getEq("constraint_tol", config.equilibrium.constraintTol);
    getEq("max_outer_iterations", config.equilibrium.maxOuterIterations);
  }
  if (config.maxOuterIterations < 1 || config.maxOuterIterations > 80)
    throw ParseError(path + ": max_outer_iterations must be in [1, 80]");
  if (config.alpha <= 0.0 || config.beta <= 0.0 || config.smoothnessWeight <= 0.0)
    throw ParseError(path + ": alpha, beta, smoothness_weight must be positive");
  return config;
}

MaterialParams loadMaterialParams(const std::string &path)
{
  json j = loadJsonFile(path);
  double young = MaterialParams{}.youngModulus;
  double poisson = MaterialParams{}.poissonRatio;
  if (j.contains("material")) {
    const json &m = j["material"];
    rejectUnknownKeys(m, {"young_modulus", "poisson_ratio"}, path + ":material");
    if (m.contains("young_modulus"))
      young = m["young_modulus"].get<double>();
    if (m.contains("poisson_ratio"))
      poisson = m["poisson_ratio"].get<double>();
  }
  return MaterialParams::fromYoungPoisson(young, poisson);
}

void saveReportJson(const std::string &path, const SolveReport &report, bool includeTiming)
{
  json j;
  j["initial_objective"] = report.initialObjective;
  j["final_objective"] = report.finalObjective;
  j["initial_mean_icp_error_mm"] = report.initialMeanIcpErrorMm;
  j["initial_max_icp_error_mm"] = report.initialMaxIcpErrorMm;
  j["final_mean_icp_error_mm"] = report.finalMeanIcpErrorMm;
  j["final_max_icp_error_mm"] = report.finalMaxIcpErrorMm;
  j["warnings"] = report.warnings;

  json stages = json::array();
  for (const StageSummary &s : report.stages) {
    json e;
    e["stage"] = stageName(s.stage);
    e["ran"] = s.ran;
    e["skip_reason"] = s.skipReason;
    e["termination"] = s.ran ? terminationReasonName(s.termination) : "";
    e["iterations"] = s.iterations;
    stages.push_back(e);
  }
  j["stages"] = stages;

  json iterations = json::array();
  for (const IterationRecord &r : report.iterations) {
    json e;
    e["stage"] = stageName(r.stage);
    e["iteration"] = r.iteration;
    e["objective"] = r.objective;
    e["smoothness"] = r.smoothness;
    e["marker_term"] = r.markerTerm;
    e["eta"] = r.eta;
    e["clamped"] = r.clamped;
    e["mean_icp_error_mm"] = r.meanIcpErrorMm;
    e["max_icp_error_mm"] = r.maxIcpErrorMm;
    e["force_residual"] = r.forceResidual;
    if (includeTiming)
      e["wall_time_ms"] = r.wallTimeMs;
    iterations.push_back(e);
  }
  j["iterations"] = iterations;

  std::ofstream out(path);
  if (!out)
    throw ValidationError("cannot write " + path);
  out << j.dump(2) << "\n";
}

ReportSummary loadReportSummary(const std::string &path)
{
  json j = loadJsonFile(path);
  if (!j.is_object() || j.empty())
    throw ParseError(path + ": empty report");
  for (const char *key : {"final_mean_icp_error_mm", "final_max_icp_error_mm", "stages"})
    if (!j.contains(key))
      throw ParseError(path + ": missing key '" + key + "'");

  ReportSummary summary;
  summary.initialMeanIcpErrorMm = j.value("initial_mean_icp_error_mm", 0.0);
  summary.initialMaxIcpErrorMm = j.value("initial_max_icp_error_mm", 0.0);
  summary.finalMeanIcpErrorMm = j["final_mean_icp_error_mm"].get<double>();
  summary.finalMaxIcpErrorMm = j["final_max_icp_error_mm"].get<double>();
  if (j.contains("warnings"))
    summary.warnings = j["warnings"].get<std::vector<std::string>>();
  for (const json &s : j["stages"]) {
    const bool ran = s.value("ran", false);
    const int iters = s.value("iterations", 0);
    summary.totalIterations += iters;
    std::ostringstream line;
    line << s.value("stage", std::string("?")) << ": ";
    if (!ran) {
      line << "skipped (" << s.value("skip_reason", std::string()) << ")";
    } else {
      line << iters << " iterations, " << s.value("termination", std::string());
      if (s.value("termination", std::string()) == "MaxIterations") {
        summary.hitIterationCap = true;
        line << " [hit iteration cap]";
      }
    }
    summary.stageLines.push_back(line.str());
  }
  return summary;
}

std::string formatReportSummary(const ReportSummary &summary)
{
  std::ostringstream out;
  out << "icp error (mm): initial mean " << summary.initialMeanIcpErrorMm << ", max "
      << summary.initialMaxIcpErrorMm << "; final mean " << summary.finalMeanIcpErrorMm
      << ", max " << summary.finalMaxIcpErrorMm << "\n";
  out << "iterations: " << summary.totalIterations << "\n";
  for (const std::string &line : summary.stageLines)
    out << "  " << line << "\n";
  for (const std::string &w : summary.warnings)
    out << "warning: " << w << "\n";
  return out.str();
}

void saveFieldBinary(const std::string &path, const PlasticField &field)
{
  std::ofstream out(path, std::ios::binary);
  if (!out)
    throw ValidationError("cannot write " + path);
  out.write("PLFB", 4);
  const std::uint64_t m = std::uint64_t(field.numTets());
  out.write(reinterpret_cast<const char *>(&m), sizeof(m));
  out.write(reinterpret_cast<const char *>(field.s.data()),
            std::streamsize(sizeof(double) * size_t(field.s.size())));
  if (!out)
    throw ValidationError("short write to " + path);
}

PlasticField loadFieldBinary(const std::string &path)
{
  std::ifstream in(path, std::ios::binary);
  if (!in)
    throw ParseError("cannot open " + path);
  char magic[4];
  in.read(magic, 4);
  if (!in || std::memcmp(magic, "PLFB", 4) != 0)
    throw ParseError(path + ": bad magic");
  std::uint64_t m = 0;
  in.read(reinterpret_cast<char *>(&m), sizeof(m));
  if (!in || m > (std::uint64_t(1) << 32))
    throw ParseError(path + ": bad tet count");
  PlasticField field;
  field.s.resize(Eigen::Index(6 * m));
  in.read(reinterpret_cast<char *>(field.s.data()),
          std::streamsize(sizeof(double) * size_t(6 * m)));
  if (!in)
    throw ParseError(path + ": truncated field data");
  return field;
}

void saveFieldCsv(const std::string &path, const PlasticField &field)
{
  std::ofstream out(path);
  if (!out)
    throw ValidationError("cannot write " + path);
  out << "tet,s1,s2,s3,s4,s5,s6\n";
  out.precision(17);
  for (int t = 0; t < field.numTets(); t++) {
    out << t;
    for (int c = 0; c < 6; c++)
      out << ',' << field.s[6 * t + c];
    out << '\n';
  }
}

void saveErrorHistogramCsv(const std::string &path, const std::vector<double> &errors,
                           int bins)
{
  if (bins < 1)
    throw ValidationError("histogram needs at least one bin");
  std::ofstream out(path);
  if (!out)
    throw ValidationError("cannot write " + path);
  out << "bin_lo_mm,bin_hi_mm,count\n";
  out.precision(17);
  if (errors.empty())
    return;
  double maxMm = 0.0;
  for (double e : errors)
    maxMm = std::max(maxMm, 1000.0 * e);
  const double width = maxMm > 0.0 ? maxMm / bins : 1.0;
  std::vector<int> counts(size_t(bins), 0);
  for (double e : errors) {
    int b = int((1000.0 * e) / width);
    b = std::min(b, bins - 1);
    counts[size_t(b)]++;
  }
  for (int b = 0; b < bins; b++)
    out << b * width << ',' << (b + 1) * width << ',' << counts[size_t(b)] << '\n';
}

void saveDihedralCsv(const std::string &path, const DihedralReport &report)
{
  std::ofstream out(path);
  if (!out)
    throw ValidationError("cannot write " + path);
  out << "tet,min_dihedral_deg\n";
  out.precision(17);
  for (size_t t = 0; t < report.perTetMinDeg.size(); t++)
    out << t << ',' << report.perTetMinDeg[t] << '\n';
}

void transferObj(const std::string &inPath, const std::string &outPath, const TetMesh &mesh,
                 const VecX &x)
{
  std::ifstream in(inPath);
  if (!in)
    throw ParseError("cannot open " + inPath);

  std::vector<std::string> lines;
  std::vector<Vec3> vertices;
  std::vector<size_t> vertexLines;
  std::string line;
  while (std::getline(in, line)) {
    if (line.rfind("v ", 0) == 0) {
      std::istringstream ls(line.substr(2));
      Vec3 p;
      if (!(ls >> p[0] >> p[1] >> p[2]))
        throw ParseError(inPath + ": malformed vertex line '" + line + "'");
      vertices.push_back(p);
      vertexLines.push_back(lines.size());
    }
    lines.push_back(line);
  }
  std::vector<MaterialPoint> embedded = mesh.embedPoints(vertices);

  std::ofstream out(outPath);
  if (!out)
    throw ValidationError("cannot write " + outPath);
  out.precision(17);
  size_t v = 0;
  for (size_t i = 0; i < lines.size(); i++) {
    if (v < vertexLines.size() && vertexLines[v] == i) {
      const Vec3 p = mesh.materialPointPosition(x, embedded[v]);
      out << "v " << p[0] << ' ' << p[1] << ' ' << p[2] << '\n';
      v++;
    } else {
      out << lines[i] << '\n';
    }
  }
}

}  // namespace plastifit
