#pragma once

#include "tignn/fem.hpp"

#include <unsupported/Eigen/AutoDiff>

#include <random>

namespace oracle {

using namespace tignn;

using AD = Eigen::AutoDiffScalar<Eigen::Matrix<double, 6, 1>>;

// Psi written in C = F^T F with six independent components
// (c0 c1 c2 on the diagonal, c3 = C01, c4 = C12, c5 = C02).
inline AD psi_of_c(const Eigen::Matrix<AD, 6, 1>& c, const MaterialParams& m) {
  const AD det = c(0) * (c(1) * c(2) - c(4) * c(4)) - c(3) * (c(3) * c(2) - c(4) * c(5)) +
                 c(5) * (c(3) * c(4) - c(1) * c(5));
  const AD J = sqrt(det);
  const AD i1 = c(0) + c(1) + c(2);
  const AD trc2 = c(0) * c(0) + c(1) * c(1) + c(2) * c(2) + 2 * (c(3) * c(3) + c(4) * c(4) + c(5) * c(5));
  const AD i2 = 0.5 * (i1 * i1 - trc2);
  const AD i1b = pow(J, -2.0 / 3.0) * i1;
  const AD i2b = pow(J, -4.0 / 3.0) * i2;
  return m.c10 * (i1b - 3) + m.c01 * (i2b - 3) + (J - 1) * (J - 1) / m.d1;
}

// S = 2 dPsi/dC; off-diagonal components appear twice in C.
inline Mat3 oracle_pk2(const Mat3& F, const MaterialParams& m) {
  const Mat3 C = F.transpose() * F;
  const Vec6 cv = to_voigt(C);
  Eigen::Matrix<AD, 6, 1> c;
  for (int i = 0; i < 6; ++i) c(i) = AD(cv(i), 6, i);
  const Vec6 d = psi_of_c(c, m).derivatives();
  Vec6 s;
  s << 2 * d(0), 2 * d(1), 2 * d(2), d(3), d(4), d(5);
  return from_voigt(s);
}

inline Mat3 random_rotation(std::mt19937_64& rng) {
  std::normal_distribution<double> n(0, 1);
  Eigen::Quaterniond q(n(rng), n(rng), n(rng), n(rng));
  return q.normalized().toRotationMatrix();
}

inline Mat3 random_deformation(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-0.3, 0.3);
  Mat3 F = Mat3::Identity();
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) F(i, j) += u(rng);
  if (F.determinant() <= 0.2) F.col(0) *= -1;
  return F.determinant() > 0.2 ? F : Mat3(Mat3::Identity() * 1.1);
}

}  // namespace oracle
