#pragma once

#include <Eigen/Eigenvalues>

#include "scenecarve/types.hpp"

namespace scenecarve {

/// Closed-form absolute orientation (unit quaternion form): the rigid
/// transform T minimizing sum ||dst_i - T src_i||^2. Columns are points.
template <typename DerivedSrc, typename DerivedDst>
Matrix4T<typename DerivedSrc::Scalar> horn_fit(const Eigen::MatrixBase<DerivedSrc>& src,
                                               const Eigen::MatrixBase<DerivedDst>& dst) {
  using Scalar = typename DerivedSrc::Scalar;
  using Vec = Vector3T<Scalar>;
  using Mat = Matrix3T<Scalar>;

  const Vec src_mean = src.rowwise().mean();
  const Vec dst_mean = dst.rowwise().mean();
  const Mat s = (src.colwise() - src_mean) * (dst.colwise() - dst_mean).transpose();

  Eigen::Matrix<Scalar, 4, 4> n;
  n << s(0, 0) + s(1, 1) + s(2, 2), s(1, 2) - s(2, 1), s(2, 0) - s(0, 2), s(0, 1) - s(1, 0),
      s(1, 2) - s(2, 1), s(0, 0) - s(1, 1) - s(2, 2), s(0, 1) + s(1, 0), s(2, 0) + s(0, 2),
      s(2, 0) - s(0, 2), s(0, 1) + s(1, 0), -s(0, 0) + s(1, 1) - s(2, 2), s(1, 2) + s(2, 1),
      s(0, 1) - s(1, 0), s(2, 0) + s(0, 2), s(1, 2) + s(2, 1), -s(0, 0) - s(1, 1) + s(2, 2);

  Eigen::SelfAdjointEigenSolver<Eigen::Matrix<Scalar, 4, 4>> solver(n);
  const Eigen::Matrix<Scalar, 4, 1> q = solver.eigenvectors().col(3);  // largest eigenvalue
  const Mat r = Eigen::Quaternion<Scalar>(q(0), q(1), q(2), q(3)).normalized().toRotationMatrix();

  Matrix4T<Scalar> t = Matrix4T<Scalar>::Identity();
  t.template block<3, 3>(0, 0) = r;
  t.template block<3, 1>(0, 3) = dst_mean - r * src_mean;
  return t;
}

template <typename Scalar, typename Derived>
Vector3T<Scalar> apply_rigid(const Matrix4T<Scalar>& t, const Eigen::MatrixBase<Derived>& p) {
  return t.template block<3, 3>(0, 0) * p + t.template block<3, 1>(0, 3);
}

}  // namespace scenecarve
