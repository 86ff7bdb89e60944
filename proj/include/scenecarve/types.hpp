#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

#include <Eigen/Core>
#include <Eigen/Geometry>

namespace scenecarve {

using Vector3 = Eigen::Vector3d;
using Matrix3 = Eigen::Matrix3d;
using Matrix4 = Eigen::Matrix4d;
using Box3 = Eigen::AlignedBox3d;

// Row-per-element storage in the style of libigl: V is N x 3, F is M x 3.
using Points = Eigen::Matrix<double, Eigen::Dynamic, 3>;
using Triangles = Eigen::Matrix<int, Eigen::Dynamic, 3>;

template <typename Scalar>
using Vector3T = Eigen::Matrix<Scalar, 3, 1>;
template <typename Scalar>
using Matrix3T = Eigen::Matrix<Scalar, 3, 3>;
template <typename Scalar>
using Matrix4T = Eigen::Matrix<Scalar, 4, 4>;

/// Base of every error the library throws. `kind()` lets the CLI and the
/// service map failures to exit codes and HTTP statuses without string
/// matching.
class Error : public std::runtime_error {
 public:
  enum class Kind {
    kParse,
    kValidation,
    kPrecondition,
    kPrerequisite,
    kUnsupportedVersion,
    kNotFound,
  };

  Error(Kind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}

  Kind kind() const { return kind_; }

 private:
  Kind kind_;
};

struct ParseError : Error {
  explicit ParseError(const std::string& what) : Error(Kind::kParse, what) {}
};
struct ValidationError : Error {
  explicit ValidationError(const std::string& what)
      : Error(Kind::kValidation, what) {}
};
struct PreconditionError : Error {
  explicit PreconditionError(const std::string& what)
      : Error(Kind::kPrecondition, what) {}
};
struct PrerequisiteError : Error {
  explicit PrerequisiteError(const std::string& what)
      : Error(Kind::kPrerequisite, what) {}
};
struct UnsupportedVersionError : Error {
  explicit UnsupportedVersionError(const std::string& what)
      : Error(Kind::kUnsupportedVersion, what) {}
};
struct NotFoundError : Error {
  explicit NotFoundError(const std::string& what)
      : Error(Kind::kNotFound, what) {}
};

}  // namespace scenecarve
