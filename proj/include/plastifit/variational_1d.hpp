#pragma once

#include "types.hpp"

#include <vector>

namespace plastifit
{

// 1D bar study on [0,1]: both endpoints pinned (0 -> 0, 1 -> 2), two interior
// landmarks (1/4 -> 1/4, 1/2 -> 3/2) penalized with weight alpha. The implied
// piecewise slopes are (1, 5, 1); the slope profile's total variation against
// the ideal value 8 measures wiggliness.

struct Bar1dProfile
{
  VecX grid;       // parameter values, uniform on [0,1]
  VecX positions;  // deformed positions x(grid)
  Vec3 segmentSlopes = Vec3::Zero();  // mean slopes on [0,1/4], [1/4,1/2], [1/2,1]
  double slopeTotalVariation = 0.0;
  double maxLandmarkError = 0.0;
  double maxPosition = 0.0;  // detects range overshoot beyond [0,2]
};

struct Bar1dLandmark
{
  double u = 0.0;  // must be a grid node
  double target = 0.0;
};

// Smoothness-penalized fit: min integral (d^r x / du^r)^2 + alpha * sum_k
// (x(u_k) - z_k)^2 with hard endpoints, discretized by order-r forward
// differences on a uniform grid. numNodes - 1 must be divisible by 4.
Bar1dProfile solveVariational1d(int numNodes, int order, double alpha);

struct Plastic1dOptions
{
  int numNodes = 201;
  double alpha = 1e8; // landmark penalty
  double beta = 1e8;  // elastic weight
  // Second-difference penalty on the stretch. Kept far below the per-element
  // elastic weight: once the implied smoothing length drops under one grid
  // cell, the stretch tracks its piecewise-constant target through monotone
  // one-cell transitions instead of ringing around them.
  double smoothnessWeight = 1e-10;
  int maxIterations = 200;
  double stretchFloor = 0.01;
};

struct Plastic1dResult
{
  Bar1dProfile profile;
  VecX plasticStretch;  // per element
  int iterations = 0;
};

// Multiplicative 1D analog: per-element plastic stretch f with smoothness
// penalty, elastic term beta * integral (x' / f - 1)^2, inner equilibrium in
// x balancing the landmark springs against the elastic forces (hard
// endpoints), outer Gauss-Newton descent in f, mirroring the 3D pipeline.
Plastic1dResult solvePlastic1d(const Plastic1dOptions &opts);

// Shared metric evaluation for a profile on a uniform grid.
void fillBarMetrics(Bar1dProfile &profile, const std::vector<Bar1dLandmark> &landmarks);

}  // namespace plastifit
