#include "plastifit/variational_1d.hpp"

#include "plastifit/optimizer.hpp"

#include <Eigen/SparseCholesky>

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>

namespace plastifit
{

namespace
{

const std::vector<Bar1dLandmark> &studyLandmarks()
{
  static const std::vector<Bar1dLandmark> landmarks = {{0.25, 0.25}, {0.5, 1.5}};
  return landmarks;
}

int landmarkNode(double u, int numNodes)
{
  const double h = 1.0 / double(numNodes - 1);
  const double raw = u / h;
  const int node = int(std::lround(raw));
  if (std::abs(raw - double(node)) > 1e-9)
    throw ValidationError("landmark parameter does not land on a grid node");
  return node;
}

}  // namespace

void fillBarMetrics(Bar1dProfile &profile, const std::vector<Bar1dLandmark> &landmarks)
{
  const int n = int(profile.grid.size());
  const double h = profile.grid[1] - profile.grid[0];
  VecX slope(n - 1);
  for (int i = 0; i + 1 < n; i++)
    slope[i] = (profile.positions[i + 1] - profile.positions[i]) / h;

  const int q = (n - 1) / 4;
  profile.segmentSlopes[0] = (profile.positions[q] - profile.positions[0]) / 0.25;
  profile.segmentSlopes[1] = (profile.positions[2 * q] - profile.positions[q]) / 0.25;
  profile.segmentSlopes[2] = (profile.positions[n - 1] - profile.positions[2 * q]) / 0.5;

  profile.slopeTotalVariation = 0.0;
  for (int i = 0; i + 2 < n; i++)
    profile.slopeTotalVariation += std::abs(slope[i + 1] - slope[i]);

  profile.maxLandmarkError = 0.0;
  for (const Bar1dLandmark &lm : landmarks) {
    const int node = landmarkNode(lm.u, n);
    profile.maxLandmarkError =
        std::max(profile.maxLandmarkError, std::abs(profile.positions[node] - lm.target));
  }
  profile.maxPosition = profile.positions.maxCoeff();
}

Bar1dProfile solveVariational1d(int numNodes, int order, double alpha)
{
  if (numNodes < 65 || (numNodes - 1) % 4 != 0)
    throw ValidationError("the bar grid needs at least 64 segments, divisible by 4");
  if (order < 1 || order > 3)
    throw ValidationError("the smoothness order must be 1, 2, or 3");
  if (alpha < 0.0)
    throw ValidationError("the landmark weight must be nonnegative");

  const int n = numNodes;
  const double h = 1.0 / double(n - 1);

  // Energy matrix h * D_r^T D_r + alpha at the landmark nodes; the stencils
  // carry the 1/h^r derivative scale.
  std::vector<double> stencil;
  switch (order) {
  case 1:
    stencil = {-1.0, 1.0};
    break;
  case 2:
    stencil = {1.0, -2.0, 1.0};
    break;
  default:
    stencil = {-1.0, 3.0, -3.0, 1.0};
    break;
  }
  const double scale = 1.0 / std::pow(h, order);
  for (double &c : stencil)
    c *= scale;

  std::vector<Triplet> triplets;
  const int rows = n - order;
  for (int rIdx = 0; rIdx < rows; rIdx++)
    for (size_t a = 0; a < stencil.size(); a++)
      for (size_t b = 0; b < stencil.size(); b++)
        triplets.emplace_back(rIdx + int(a), rIdx + int(b), h * stencil[a] * stencil[b]);
  for (const Bar1dLandmark &lm : studyLandmarks()) {
    const int node = landmarkNode(lm.u, n);
    triplets.emplace_back(node, node, alpha);
  }
  SpMat M(n, n);
  M.setFromTriplets(triplets.begin(), triplets.end());

  VecX rhs = VecX::Zero(n);
  for (const Bar1dLandmark &lm : studyLandmarks())
    rhs[landmarkNode(lm.u, n)] += alpha * lm.target;

  // Hard endpoints x(0) = 0, x(1) = 2: eliminate the first and last unknowns.
  const double x0 = 0.0, x1 = 2.0;
  const int nf = n - 2;
  std::vector<Triplet> freeTriplets;
  VecX freeRhs(nf);
  for (int i = 0; i < nf; i++)
    freeRhs[i] = rhs[i + 1];
  for (int col = 0; col < M.outerSize(); col++) {
    for (SpMat::InnerIterator it(M, col); it; ++it) {
      const int r = int(it.row()), c = col;
      const bool rFree = r > 0 && r < n - 1;
      const bool cFree = c > 0 && c < n - 1;
      if (rFree && cFree)
        freeTriplets.emplace_back(r - 1, c - 1, it.value());
      else if (rFree)
        freeRhs[r - 1] -= it.value() * (c == 0 ? x0 : x1);
    }
  }
  SpMat Mf(nf, nf);
  Mf.setFromTriplets(freeTriplets.begin(), freeTriplets.end());
  Eigen::SimplicialLDLT<SpMat> ldlt(Mf);
  if (ldlt.info() != Eigen::Success)
    throw NumericalError("the discrete smoothness system is singular at this "
                         "order/weight combination");
  VecX xf = ldlt.solve(freeRhs);

  Bar1dProfile profile;
  profile.grid = VecX::LinSpaced(n, 0.0, 1.0);
  profile.positions.resize(n);
  profile.positions[0] = x0;
  profile.positions[n - 1] = x1;
  profile.positions.segment(1, nf) = xf;
  fillBarMetrics(profile, studyLandmarks());
  return profile;
}

namespace
{

// Equilibrium positions for a given per-element stretch. The landmark springs
// act on the bar, so x balances alpha sum (x_k - t_k)^2 against
// beta sum h (e_i / f_i - 1)^2 with pinned endpoints; tridiagonal solve.
VecX barEquilibrium(const VecX &f, double alpha, double beta)
{
  const int ne = int(f.size());
  const int n = ne + 1;
  const double h = 1.0 / double(ne);
  const double x0 = 0.0, x1 = 2.0;

  std::vector<Triplet> triplets;
  VecX rhs = VecX::Zero(n);
  for (int i = 0; i < ne; i++) {
    const double k = 2.0 * beta / (h * f[i] * f[i]);
    triplets.emplace_back(i, i, k);
    triplets.emplace_back(i + 1, i + 1, k);
    triplets.emplace_back(i, i + 1, -k);
    triplets.emplace_back(i + 1, i, -k);
    const double c = 2.0 * beta / f[i];
    rhs[i] -= c;
    rhs[i + 1] += c;
  }
  for (const Bar1dLandmark &lm : studyLandmarks()) {
    const int node = landmarkNode(lm.u, n);
    triplets.emplace_back(node, node, 2.0 * alpha);
    rhs[node] += 2.0 * alpha * lm.target;
  }
  SpMat K(n, n);
  K.setFromTriplets(triplets.begin(), triplets.end());

  const int nf = n - 2;
  std::vector<Triplet> freeTriplets;
  VecX freeRhs(nf);
  for (int i = 0; i < nf; i++)
    freeRhs[i] = rhs[i + 1];
  for (int col = 0; col < K.outerSize(); col++) {
    for (SpMat::InnerIterator it(K, col); it; ++it) {
      const int r = int(it.row()), c = col;
      const bool rFree = r > 0 && r < n - 1;
      const bool cFree = c > 0 && c < n - 1;
      if (rFree && cFree)
        freeTriplets.emplace_back(r - 1, c - 1, it.value());
      else if (rFree)
        freeRhs[r - 1] -= it.value() * (c == 0 ? x0 : x1);
    }
  }
  SpMat Kf(nf, nf);
  Kf.setFromTriplets(freeTriplets.begin(), freeTriplets.end());
  Eigen::SimplicialLDLT<SpMat> ldlt(Kf);
  if (ldlt.info() != Eigen::Success)
    throw NumericalError("the bar equilibrium system is singular");
  VecX xf = ldlt.solve(freeRhs);

  VecX x(n);
  x[0] = x0;
  x[n - 1] = x1;
  x.segment(1, nf) = xf;
  return x;
}

struct BarObjective
{
  double smoothness = 0.0;
  double data = 0.0;
  double elastic = 0.0;
  double total() const { return smoothness + data + elastic; }
};

BarObjective barObjective(const VecX &f, const VecX &x, double alpha, double beta,
                          double smoothnessWeight)
{
  const int ne = int(f.size());
  const double h = 1.0 / double(ne);
  BarObjective out;
  for (int j = 1; j + 1 < ne; j++) {
    const double d2 = (f[j + 1] - 2.0 * f[j] + f[j - 1]) / (h * h);
    out.smoothness += smoothnessWeight * h * d2 * d2;
  }
  for (const Bar1dLandmark &lm : studyLandmarks()) {
    const double r = x[landmarkNode(lm.u, ne + 1)] - lm.target;
    out.data += alpha * r * r;
  }
  for (int i = 0; i < ne; i++) {
    const double e = (x[i + 1] - x[i]) / h;
    const double r = e / f[i] - 1.0;
    out.elastic += beta * h * r * r;
  }
  return out;
}

}  // namespace

Plastic1dResult solvePlastic1d(const Plastic1dOptions &opts)
{
  if (opts.numNodes < 65 || (opts.numNodes - 1) % 4 != 0)
    throw ValidationError("the bar grid needs at least 64 segments, divisible by 4");
  if (opts.alpha <= 0.0 || opts.beta <= 0.0 || opts.smoothnessWeight <= 0.0)
    throw ValidationError("alpha, beta, and the smoothness weight must be positive");

  const int n = opts.numNodes;
  const int ne = n - 1;
  const double h = 1.0 / double(ne);

  // The endpoint stretch 0 -> 2 makes the constant stretch 2 the natural start.
  VecX f = VecX::Constant(ne, 2.0);

  // Smoothness Hessian 2 w h D2^T D2, reused every iteration.
  SpMat Hs(ne, ne);
  {
    std::vector<Triplet> triplets;
    const double s = 1.0 / (h * h);
    const std::array<double, 3> stencil = {s, -2.0 * s, s};
    for (int rIdx = 0; rIdx + 2 < ne; rIdx++)
      for (int a = 0; a < 3; a++)
        for (int b = 0; b < 3; b++)
          triplets.emplace_back(rIdx + a, rIdx + b,
                                2.0 * opts.smoothnessWeight * h * stencil[size_t(a)] *
                                    stencil[size_t(b)]);
    Hs.setFromTriplets(triplets.begin(), triplets.end());
  }

  Plastic1dResult result;
  VecX x = barEquilibrium(f, opts.alpha, opts.beta);
  double current = barObjective(f, x, opts.alpha, opts.beta, opts.smoothnessWeight).total();

  for (int iter = 0; iter < opts.maxIterations; iter++) {
    result.iterations = iter + 1;

    // x sits at the inner optimum of data + elastic, so the reduced gradient
    // keeps only the direct partials: smoothness plus the elastic f-derivative.
    // Curvature keeps the Gauss-Newton diagonal of the elastic residuals with
    // x frozen; the (negative semidefinite) re-equilibration correction is
    // dropped, which only shortens the step the line search then extends.
    VecX grad = Hs * f;
    VecX elasticDiag(ne);
    for (int i = 0; i < ne; i++) {
      const double e = (x[i + 1] - x[i]) / h;
      grad[i] += -2.0 * opts.beta * h * e * (e - f[i]) / (f[i] * f[i] * f[i]);
      const double de = e / (f[i] * f[i]);
      elasticDiag[i] = 2.0 * opts.beta * h * de * de;
    }

    SpMat B = Hs;
    for (int i = 0; i < ne; i++)
      B.coeffRef(i, i) += elasticDiag[i];
    Eigen::SimplicialLDLT<SpMat> bLdlt(B);
    if (bLdlt.info() != Eigen::Success)
      throw NumericalError("the bar strain system is singular");
    VecX delta = bLdlt.solve(VecX(-grad));

    struct Best
    {
      VecX f, x;
      double value = std::numeric_limits<double>::infinity();
    } best;
    auto phi = [&](double eta) {
      VecX ftrial = f + eta * delta;
      for (int i = 0; i < ne; i++)
        ftrial[i] = std::max(ftrial[i], opts.stretchFloor);
      VecX xtrial = barEquilibrium(ftrial, opts.alpha, opts.beta);
      const double value =
          barObjective(ftrial, xtrial, opts.alpha, opts.beta, opts.smoothnessWeight).total();
      if (value < best.value) {
        best.f = std::move(ftrial);
        best.x = std::move(xtrial);
        best.value = value;
      }
      return value;
    };
    LineSearchResult ls = brentLineSearch(phi, current, 1.5, 1e-3);
    if (ls.eta < 0.01 || !(best.value < current))
      break;
    f = best.f;
    x = best.x;
    const double previous = current;
    current = best.value;
    if (previous - current < 1e-10 * std::max(previous, 1.0))
      break;
  }

  result.profile.grid = VecX::LinSpaced(n, 0.0, 1.0);
  result.profile.positions = x;
  fillBarMetrics(result.profile, studyLandmarks());
  result.plasticStretch = f;
  return result;
}

}  // namespace plastifit
