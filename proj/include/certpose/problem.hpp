#pragma once

#include <algorithm>
#include <array>
#include <cstddef>
#include <span>

#include <Eigen/Dense>

#include "certpose/errors.hpp"
#include "certpose/geometry.hpp"

namespace certpose {

using Matrix12x6d = Eigen::Matrix<double, 12, 6>;
using Matrix12x7d = Eigen::Matrix<double, 12, 7>;

// Offsets into x = [vec(E); t]. Row k of E (0-based) occupies x[k], x[k+3], x[k+6].
inline constexpr int kTranslationOffset = 9;

/// Cost and constraint structure of the relaxed QCQP
///   min x^T Q x  s.t.  x^T A_1 x = 1,  x^T A_i x = 0 (i = 2..6).
struct ProblemData {
  Matrix9d c = Matrix9d::Zero();
  /// Upper-triangular factor with c = c_sqrt^T c_sqrt (up to round-off). Costs
  /// and gradients go through it so they stay accurate near zero residual.
  Matrix9d c_sqrt = Matrix9d::Zero();
  Matrix12d q = Matrix12d::Zero();
  std::array<Matrix12d, 6> a{};
  /// e_1^T e_2 + t_1 t_2 = 0, left out of the certified set.
  Matrix12d a_dropped = Matrix12d::Zero();
  std::size_t n_points = 0;
};

namespace detail {

inline void set_sym(Matrix12d& m, int i, int j, double v) {
  m(i, j) = v;
  m(j, i) = v;
}

// A matrix for e_r^T e_s + t_r t_s with rows r != s of E.
inline Matrix12d row_product_matrix(int r, int s) {
  Matrix12d m = Matrix12d::Zero();
  for (int col = 0; col < 3; ++col) set_sym(m, r + 3 * col, s + 3 * col, 0.5);
  set_sym(m, kTranslationOffset + r, kTranslationOffset + s, 0.5);
  return m;
}

// A matrix for e_r^T e_r - (t_a^2 + t_b^2) with {a, b} the other two indices.
inline Matrix12d row_norm_matrix(int r) {
  Matrix12d m = Matrix12d::Zero();
  for (int col = 0; col < 3; ++col) m(r + 3 * col, r + 3 * col) = 1.0;
  for (int k = 0; k < 3; ++k) {
    if (k != r) m(kTranslationOffset + k, kTranslationOffset + k) = -1.0;
  }
  return m;
}

inline std::array<Matrix12d, 6> make_constraint_matrices() {
  std::array<Matrix12d, 6> a;
  a[0] = Matrix12d::Zero();
  a[0].bottomRightCorner<3, 3>().setIdentity();
  a[1] = row_norm_matrix(0);
  a[2] = row_norm_matrix(1);
  a[3] = row_norm_matrix(2);
  a[4] = row_product_matrix(0, 2);
  a[5] = row_product_matrix(1, 2);
  return a;
}

}  // namespace detail

/// A_1..A_6 in the layout of x = [vec(E); t].
inline const std::array<Matrix12d, 6>& constraint_matrices() {
  static const std::array<Matrix12d, 6> a = detail::make_constraint_matrices();
  return a;
}

inline const Matrix12d& dropped_constraint_matrix() {
  static const Matrix12d a = detail::row_product_matrix(0, 1);
  return a;
}

/// Kronecker product f' (x) f, so that (f' (x) f)^T vec(E) = f^T E f'.
inline Vector9d kron(const Eigen::Vector3d& f_prime, const Eigen::Vector3d& f) {
  Vector9d k;
  for (int i = 0; i < 3; ++i) k.segment<3>(3 * i) = f_prime[i] * f;
  return k;
}

/// Builds C = sum_i (f'_i (x) f_i)(f'_i (x) f_i)^T, Q and the constraint set.
/// Throws EmptyInput for an empty span.
inline ProblemData build_data_matrix(std::span<const BearingPair> pairs) {
  if (pairs.empty()) throw EmptyInput("build_data_matrix: no correspondences");
  ProblemData data;
  const Eigen::Index rows = std::max<Eigen::Index>(9, static_cast<Eigen::Index>(pairs.size()));
  Eigen::Matrix<double, Eigen::Dynamic, 9> design = Eigen::Matrix<double, Eigen::Dynamic, 9>::Zero(rows, 9);
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    const Vector9d k = kron(pairs[i].f_prime.vector(), pairs[i].f.vector());
    design.row(static_cast<Eigen::Index>(i)) = k.transpose();
    data.c.selfadjointView<Eigen::Lower>().rankUpdate(k);
  }
  data.c = data.c.selfadjointView<Eigen::Lower>();
  const Eigen::HouseholderQR<Eigen::Matrix<double, Eigen::Dynamic, 9>> qr(design);
  data.c_sqrt = qr.matrixQR().topRows<9>().triangularView<Eigen::Upper>();
  data.q.topLeftCorner<9, 9>() = data.c;
  data.a = constraint_matrices();
  data.a_dropped = dropped_constraint_matrix();
  data.n_points = pairs.size();
  return data;
}

/// x^T Q x, i.e. the sum of squared algebraic errors of E.
inline double cost(const ProblemData& data, const Vector12d& x) {
  return (data.c_sqrt * x.head<9>()).squaredNorm();
}

inline double cost(const ProblemData& data, const PrimalPoint& x) { return cost(data, x.vector()); }

inline double cost(const ProblemData& data, const Eigen::Matrix3d& e) {
  return (data.c_sqrt * vec(e)).squaredNorm();
}

/// C vec(E), evaluated through the factor.
inline Vector9d apply_c(const ProblemData& data, const Vector9d& v) {
  return data.c_sqrt.transpose() * (data.c_sqrt * v);
}

/// (x^T A_1 x - 1, x^T A_2 x, ..., x^T A_6 x).
inline Vector6d constraint_residuals(const ProblemData& data, const Vector12d& x) {
  Vector6d h;
  for (int i = 0; i < 6; ++i) h[i] = x.dot(data.a[i] * x);
  h[0] -= 1.0;
  return h;
}

/// J(x) = [A_1 x, ..., A_6 x].
inline Matrix12x6d constraint_jacobian(const Vector12d& x) {
  const auto& a = constraint_matrices();
  Matrix12x6d j;
  for (int i = 0; i < 6; ++i) j.col(i) = a[i] * x;
  return j;
}

/// Seven-constraint Jacobian with the dropped constraint included, columns in
/// the order (t^T t, e1.e2, |e1|^2, e1.e3, |e2|^2, e2.e3, |e3|^2).
inline Matrix12x7d constraint_jacobian_with_dropped(const Vector12d& x) {
  const auto& a = constraint_matrices();
  Matrix12x7d j;
  j.col(0) = a[0] * x;
  j.col(1) = dropped_constraint_matrix() * x;
  j.col(2) = a[1] * x;
  j.col(3) = a[4] * x;
  j.col(4) = a[2] * x;
  j.col(5) = a[5] * x;
  j.col(6) = a[3] * x;
  return j;
}

}  // namespace certpose
