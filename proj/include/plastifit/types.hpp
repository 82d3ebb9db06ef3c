#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include <stdexcept>
#include <string>

namespace plastifit
{

using Vec3 = Eigen::Vector3d;
using Vec4 = Eigen::Vector4d;
using Vec6 = Eigen::Matrix<double, 6, 1>;
using Vec9 = Eigen::Matrix<double, 9, 1>;
using Vec12 = Eigen::Matrix<double, 12, 1>;
using VecX = Eigen::VectorXd;

using Mat3 = Eigen::Matrix3d;
using Mat9 = Eigen::Matrix<double, 9, 9>;
using Mat12 = Eigen::Matrix<double, 12, 12>;
using Mat12x6 = Eigen::Matrix<double, 12, 6>;
using Mat12x9 = Eigen::Matrix<double, 12, 9>;
using Mat9x12 = Eigen::Matrix<double, 9, 12>;
using Mat9x6 = Eigen::Matrix<double, 9, 6>;
using MatX = Eigen::MatrixXd;

using SpMat = Eigen::SparseMatrix<double>;
using Triplet = Eigen::Triplet<double>;

// Input files or user-provided structures that fail validation.
class ValidationError : public std::runtime_error
{
public:
  explicit ValidationError(const std::string &msg) : std::runtime_error(msg) {}
};

// Unparseable file contents.
class ParseError : public ValidationError
{
public:
  explicit ParseError(const std::string &msg) : ValidationError(msg) {}
};

// Failures of the numerical machinery itself (singular factorizations,
// diverging solves, inconsistent right-hand sides).
class NumericalError : public std::runtime_error
{
public:
  explicit NumericalError(const std::string &msg) : std::runtime_error(msg) {}
};

// Column-major flattening of 3x3 matrices; entry i of vec(M) is M(i % 3, i / 3).
inline Vec9 vec9(const Mat3 &M)
{
  return Eigen::Map<const Vec9>(M.data());
}

inline Mat3 unvec9(const Vec9 &v)
{
  return Eigen::Map<const Mat3>(v.data());
}

inline Mat3 crossProductMatrix(const Vec3 &v)
{
  Mat3 m;
  m << 0.0, -v.z(), v.y(), v.z(), 0.0, -v.x(), -v.y(), v.x(), 0.0;
  return m;
}

}  // namespace plastifit
