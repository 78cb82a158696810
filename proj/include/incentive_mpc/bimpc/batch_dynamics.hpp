#pragma once

#include <vector>

#include "incentive_mpc/core.hpp"

namespace incentive_mpc {

// Stacked states x = (x_0, ..., x_N) = A_bar x0 + B1_bar u + B2_bar w, inputs time-major.
struct BatchDynamics {
  Matrix A_bar;
  Matrix B1_bar;
  Matrix B2_bar;
  Eigen::Index n = 0;
  Eigen::Index p = 0;
  Eigen::Index gamma = 0;
  Eigen::Index N = 0;

  Vector propagate(const Vector& x0, const Vector& u, const Vector& w) const {
    require_same_size(x0.size(), n, "BatchDynamics x0");
    require_same_size(u.size(), p * N, "BatchDynamics u");
    require_same_size(w.size(), gamma * N, "BatchDynamics w");
    return A_bar * x0 + B1_bar * u + B2_bar * w;
  }

  // State block k of a stacked trajectory.
  static Vector block(const Vector& stacked, Eigen::Index n, Eigen::Index k) {
    return stacked.segment(k * n, n);
  }
};

inline BatchDynamics build_batch(const Matrix& A, const Matrix& B1, const Matrix& B2, Eigen::Index N) {
  if (A.rows() != A.cols()) throw DimensionError("build_batch: A must be square");
  require_same_size(B1.rows(), A.rows(), "build_batch B1 rows");
  require_same_size(B2.rows(), A.rows(), "build_batch B2 rows");
  if (N < 1) throw std::invalid_argument("build_batch: horizon must be positive");
  BatchDynamics b;
  b.n = A.rows();
  b.p = B1.cols();
  b.gamma = B2.cols();
  b.N = N;
  const Eigen::Index n = b.n;
  b.A_bar = Matrix::Zero(n * (N + 1), n);
  b.B1_bar = Matrix::Zero(n * (N + 1), b.p * N);
  b.B2_bar = Matrix::Zero(n * (N + 1), b.gamma * N);

  // powers[k] = A^k
  std::vector<Matrix> powers(N + 1);
  powers[0] = Matrix::Identity(n, n);
  for (Eigen::Index k = 1; k <= N; ++k) powers[k] = A * powers[k - 1];

  for (Eigen::Index k = 0; k <= N; ++k) {
    b.A_bar.block(k * n, 0, n, n) = powers[k];
    for (Eigen::Index j = 0; j < k; ++j) {
      b.B1_bar.block(k * n, j * b.p, n, b.p) = powers[k - 1 - j] * B1;
      b.B2_bar.block(k * n, j * b.gamma, n, b.gamma) = powers[k - 1 - j] * B2;
    }
  }
  return b;
}

// Step-by-step recursion, the reference for the batch form.
inline Vector simulate_recursive(const Matrix& A, const Matrix& B1, const Matrix& B2, const Vector& x0,
                                 const Vector& u, const Vector& w, Eigen::Index N) {
  const Eigen::Index n = A.rows(), p = B1.cols(), g = B2.cols();
  Vector out(n * (N + 1));
  Vector x = x0;
  out.head(n) = x;
  for (Eigen::Index k = 0; k < N; ++k) {
    x = A * x + B1 * u.segment(k * p, p) + B2 * w.segment(k * g, g);
    out.segment((k + 1) * n, n) = x;
  }
  return out;
}

}  // namespace incentive_mpc
