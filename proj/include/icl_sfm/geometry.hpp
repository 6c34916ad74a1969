#pragma once

#include <cmath>
#include <limits>

#include <Eigen/Dense>

#include "icl_sfm/errors.hpp"

namespace icl_sfm {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Vec4 = Eigen::Vector4d;
using Mat2 = Eigen::Matrix2d;
using Mat3 = Eigen::Matrix3d;
using Mat43 = Eigen::Matrix<double, 4, 3>;

[[nodiscard]] inline Mat3 skew(const Vec3& v) {
  Mat3 s;
  s << 0.0, -v.z(), v.y(),
       v.z(), 0.0, -v.x(),
       -v.y(), v.x(), 0.0;
  return s;
}

// ============================================================================
// UnitQuaternion
// ============================================================================
// Scalar-first Hamilton quaternion q = (q0, qv) constrained to the unit
// sphere. Every factory and operator returns a renormalized value.
class UnitQuaternion {
 public:
  UnitQuaternion() : q_(1.0, 0.0, 0.0, 0.0) {}

  // Normalizes the input; throws DegenerateGeometry on a (near) zero vector.
  UnitQuaternion(double q0, double q1, double q2, double q3) : q_(q0, q1, q2, q3) {
    normalize_or_throw();
  }

  explicit UnitQuaternion(const Vec4& q) : q_(q) { normalize_or_throw(); }

  [[nodiscard]] static UnitQuaternion identity() { return {}; }

  // exp of a rotation vector: rotation by |axis_angle| about its direction.
  [[nodiscard]] static UnitQuaternion from_axis_angle(const Vec3& axis_angle) {
    const double angle = axis_angle.norm();
    if (angle == 0.0) {
      return identity();
    }
    const Vec3 axis = axis_angle / angle;
    const double half = 0.5 * angle;
    const Vec3 v = std::sin(half) * axis;
    return {std::cos(half), v.x(), v.y(), v.z()};
  }

  [[nodiscard]] double w() const { return q_(0); }
  [[nodiscard]] Vec3 vec() const { return q_.tail<3>(); }
  [[nodiscard]] const Vec4& coeffs() const { return q_; }
  [[nodiscard]] double norm() const { return q_.norm(); }

  [[nodiscard]] UnitQuaternion conjugate() const {
    return UnitQuaternion(Vec4(q_(0), -q_(1), -q_(2), -q_(3)));
  }

  // Hamilton product.
  [[nodiscard]] UnitQuaternion operator*(const UnitQuaternion& rhs) const {
    const double a0 = w();
    const double b0 = rhs.w();
    const Vec3 a = vec();
    const Vec3 b = rhs.vec();
    Vec4 out;
    out(0) = a0 * b0 - a.dot(b);
    out.tail<3>() = a0 * b + b0 * a + a.cross(b);
    return UnitQuaternion(out);
  }

 private:
  void normalize_or_throw() {
    const double n = q_.norm();
    if (!(n > 1e-12) || !std::isfinite(n)) {
      throw DegenerateGeometry("quaternion has zero or non-finite norm");
    }
    q_ /= n;
  }

  Vec4 q_;
};

// ============================================================================
// RotationMatrix
// ============================================================================
class RotationMatrix {
 public:
  RotationMatrix() : r_(Mat3::Identity()) {}

  // Wraps an orthonormal matrix. Throws DegenerateGeometry when R^T R != I or
  // det(R) != 1 beyond 1e-9.
  explicit RotationMatrix(const Mat3& r) : r_(r) {
    if ((r_.transpose() * r_ - Mat3::Identity()).cwiseAbs().maxCoeff() > 1e-9 ||
        std::abs(r_.determinant() - 1.0) > 1e-9) {
      throw DegenerateGeometry("matrix is not a proper rotation");
    }
  }

  [[nodiscard]] static RotationMatrix identity() { return {}; }

  [[nodiscard]] const Mat3& matrix() const { return r_; }
  [[nodiscard]] RotationMatrix transpose() const { return RotationMatrix(r_.transpose(), Unchecked{}); }

  [[nodiscard]] Vec3 operator*(const Vec3& v) const { return r_ * v; }
  [[nodiscard]] RotationMatrix operator*(const RotationMatrix& rhs) const {
    return RotationMatrix(r_ * rhs.r_, Unchecked{});
  }

 private:
  struct Unchecked {};
  RotationMatrix(const Mat3& r, Unchecked) : r_(r) {}

  friend RotationMatrix rotation_from_quaternion(const UnitQuaternion& q);

  Mat3 r_;
};

// ============================================================================
// SymPosDef
// ============================================================================
// 3x3 symmetric positive definite matrix. Symmetry is checked relative to the
// largest entry at 1e-12; any eigenvalue <= 0 is rejected.
class SymPosDef {
 public:
  explicit SymPosDef(const Mat3& m) : m_(m) {
    if (!m_.allFinite()) {
      throw NotSPD("matrix has non-finite entries");
    }
    const double scale = std::max(m_.cwiseAbs().maxCoeff(), std::numeric_limits<double>::min());
    if ((m_ - m_.transpose()).cwiseAbs().maxCoeff() > 1e-12 * scale) {
      throw NotSPD("matrix is not symmetric");
    }
    m_ = 0.5 * (m_ + m_.transpose());
    const Eigen::SelfAdjointEigenSolver<Mat3> es(m_);
    if (!(es.eigenvalues().minCoeff() > 0.0)) {
      throw NotSPD("matrix has a non-positive eigenvalue");
    }
  }

  [[nodiscard]] static SymPosDef identity() { return SymPosDef(Mat3::Identity()); }

  [[nodiscard]] const Mat3& matrix() const { return m_; }

 private:
  Mat3 m_;
};

// B(q) = [-qv^T ; q0 I + [qv]x], so that q_dot = 1/2 B(q) w for a body rate w.
[[nodiscard]] inline Mat43 b_matrix(const UnitQuaternion& q) {
  Mat43 b;
  b.row(0) = -q.vec().transpose();
  b.bottomRows<3>() = q.w() * Mat3::Identity() + skew(q.vec());
  return b;
}

// One classical RK4 step of q_dot = 1/2 B(q) w followed by renormalization.
// B is evaluated on the unnormalized stage values, which keeps the map linear
// in q (B(q) w = q (x) (0, w)).
[[nodiscard]] inline UnitQuaternion integrate_quaternion(const UnitQuaternion& q, const Vec3& omega, double dt) {
  const auto rate = [&omega](const Vec4& x) {
    Vec4 dx;
    dx(0) = -x.tail<3>().dot(omega);
    dx.tail<3>() = x(0) * omega + x.tail<3>().cross(omega);
    return Vec4(0.5 * dx);
  };
  const Vec4& q0 = q.coeffs();
  const Vec4 k1 = rate(q0);
  const Vec4 k2 = rate(q0 + 0.5 * dt * k1);
  const Vec4 k3 = rate(q0 + 0.5 * dt * k2);
  const Vec4 k4 = rate(q0 + dt * k3);
  return UnitQuaternion(Vec4(q0 + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)));
}

[[nodiscard]] inline RotationMatrix rotation_from_quaternion(const UnitQuaternion& q) {
  const double q0 = q.w();
  const Vec3 qv = q.vec();
  const Mat3 r = (q0 * q0 - qv.squaredNorm()) * Mat3::Identity() + 2.0 * qv * qv.transpose() + 2.0 * q0 * skew(qv);
  return RotationMatrix(r, RotationMatrix::Unchecked{});
}

// Unique SPD square root via the symmetric eigendecomposition.
[[nodiscard]] inline SymPosDef spd_sqrt(const SymPosDef& m) {
  const Eigen::SelfAdjointEigenSolver<Mat3> es(m.matrix());
  const Vec3 root = es.eigenvalues().cwiseSqrt();
  const Mat3& v = es.eigenvectors();
  Mat3 x = v * root.asDiagonal() * v.transpose();
  x = 0.5 * (x + x.transpose());
  return SymPosDef(x);
}

[[nodiscard]] inline SymPosDef spd_inverse(const SymPosDef& m) {
  const Eigen::SelfAdjointEigenSolver<Mat3> es(m.matrix());
  const Mat3& v = es.eigenvectors();
  Mat3 x = v * es.eigenvalues().cwiseInverse().asDiagonal() * v.transpose();
  x = 0.5 * (x + x.transpose());
  return SymPosDef(x);
}

// sigma_max / sigma_min, or +inf once sigma_min < 1e-15 sigma_max (including
// the zero matrix).
template <typename Derived>
[[nodiscard]] double condition_number(const Eigen::MatrixBase<Derived>& m) {
  static_assert(Derived::RowsAtCompileTime == Derived::ColsAtCompileTime &&
                    (Derived::RowsAtCompileTime == 2 || Derived::RowsAtCompileTime == 3),
                "condition_number supports 2x2 and 3x3 matrices");
  using Plain = typename Derived::PlainObject;
  const Eigen::JacobiSVD<Plain> svd(m.eval());
  const auto& s = svd.singularValues();
  const double smax = s(0);
  const double smin = s(s.size() - 1);
  if (!(smax > 0.0) || smin < 1e-15 * smax) {
    return std::numeric_limits<double>::infinity();
  }
  return smax / smin;
}

// Unit normal of the plane through three points: normalize((p1-p2) x (p3-p2)).
[[nodiscard]] inline Vec3 plane_normal(const Vec3& p1, const Vec3& p2, const Vec3& p3) {
  const Vec3 n = (p1 - p2).cross(p3 - p2);
  const double len = n.norm();
  if (!(len >= 1e-12)) {
    throw DegenerateGeometry("plane points are collinear");
  }
  return n / len;
}

}  // namespace icl_sfm
