#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "incentive_mpc/prox/box_set.hpp"

namespace incentive_mpc {

// weight * sum_k max(w_k - knee, 0)
struct HingeTerm {
  double weight = 0.0;
  double knee = 0.0;
};

// min 0.5 w'Hw + h'w + hinge(w) over a box, H symmetric positive definite.
struct PiecewiseQP {
  Matrix H;
  Vector h;
  HingeTerm hinge;
};

struct PiecewiseQPResult {
  Vector w;
  bool converged = false;
  int iterations = 0;
  double kkt = 0.0;  // worst one-sided derivative violation
};

namespace detail {

enum class PieceState : unsigned char { at_lo, below, at_knee, above, at_hi };

// knee strictly inside (lo, hi) with a positive weight, per coordinate
inline bool has_knee(const HingeTerm& hg, double lo, double hi) {
  return hg.weight > 0.0 && hg.knee > lo && hg.knee < hi;
}

// slope of the hinge just right of v
inline double hinge_right(const HingeTerm& hg, double v) { return hg.weight > 0.0 && v >= hg.knee ? hg.weight : 0.0; }
inline double hinge_left(const HingeTerm& hg, double v) { return hg.weight > 0.0 && v > hg.knee ? hg.weight : 0.0; }

inline double piecewise_kkt(const PiecewiseQP& qp, const BoxSet& box, const Vector& w) {
  const Vector g = qp.H * w + qp.h;
  double worst = 0.0;
  for (Eigen::Index k = 0; k < w.size(); ++k) {
    const double lo = box.lower[k], hi = box.upper[k], v = w[k];
    if (v < lo || v > hi) return std::numeric_limits<double>::infinity();
    const double right = g[k] + hinge_right(qp.hinge, v);
    const double left = g[k] + hinge_left(qp.hinge, v);
    // descent to the right is possible when right < 0 and v < hi; to the left when left > 0 and v > lo
    if (v < hi) worst = std::max(worst, -right);
    if (v > lo) worst = std::max(worst, left);
  }
  return worst;
}

}  // namespace detail

// Primal-dual active set over the pieces {lo, (lo, knee), knee, (knee, hi), hi}; each iteration
// solves the free block exactly. Reports converged only after a KKT check at `tol`, scaled by
// 1 + |h|_inf.
inline PiecewiseQPResult solve_piecewise_qp(const PiecewiseQP& qp, const BoxSet& box, double tol = 1e-10,
                                            int max_iter = 60, const Vector* warm = nullptr) {
  using detail::PieceState;
  const Eigen::Index n = box.dim();
  require_same_size(qp.H.rows(), n, "solve_piecewise_qp H");
  require_same_size(qp.h.size(), n, "solve_piecewise_qp h");
  std::vector<PieceState> st(static_cast<std::size_t>(n), PieceState::below);
  std::vector<bool> knee(static_cast<std::size_t>(n));
  for (Eigen::Index k = 0; k < n; ++k) {
    knee[std::size_t(k)] = detail::has_knee(qp.hinge, box.lower[k], box.upper[k]);
    const double lo = box.lower[k], hi = box.upper[k];
    const double v = warm && warm->size() == n ? (*warm)[k] : lo;
    const double scale = 1e-12 * (1.0 + std::abs(hi - lo));
    PieceState s;
    if (v <= lo + scale) s = PieceState::at_lo;
    else if (v >= hi - scale) s = PieceState::at_hi;
    else if (knee[std::size_t(k)] && std::abs(v - qp.hinge.knee) <= scale) s = PieceState::at_knee;
    else if (knee[std::size_t(k)] && v > qp.hinge.knee) s = PieceState::above;
    else s = (qp.hinge.weight > 0.0 && lo >= qp.hinge.knee) ? PieceState::above : PieceState::below;
    st[std::size_t(k)] = s;
  }

  PiecewiseQPResult res;
  res.w = Vector::Zero(n);
  const double tol_abs = tol * (1.0 + qp.h.lpNorm<Eigen::Infinity>());
  std::vector<Eigen::Index> free_idx;
  for (int it = 0; it < max_iter; ++it) {
    res.iterations = it + 1;
    free_idx.clear();
    Vector rhs = -qp.h;
    for (Eigen::Index k = 0; k < n; ++k) {
      switch (st[std::size_t(k)]) {
        case PieceState::at_lo: res.w[k] = box.lower[k]; break;
        case PieceState::at_hi: res.w[k] = box.upper[k]; break;
        case PieceState::at_knee: res.w[k] = qp.hinge.knee; break;
        case PieceState::below: free_idx.push_back(k); break;
        case PieceState::above:
          free_idx.push_back(k);
          rhs[k] -= qp.hinge.weight;
          break;
      }
    }
    if (!free_idx.empty()) {
      const Eigen::Index nf = Eigen::Index(free_idx.size());
      Matrix Hff(nf, nf);
      Vector b(nf);
      for (Eigen::Index i = 0; i < nf; ++i) {
        double bi = rhs[free_idx[std::size_t(i)]];
        for (Eigen::Index k = 0; k < n; ++k) {
          const auto s = st[std::size_t(k)];
          if (s != PieceState::below && s != PieceState::above) bi -= qp.H(free_idx[std::size_t(i)], k) * res.w[k];
        }
        b[i] = bi;
        for (Eigen::Index j = 0; j < nf; ++j) Hff(i, j) = qp.H(free_idx[std::size_t(i)], free_idx[std::size_t(j)]);
      }
      const Vector x = Hff.llt().solve(b);
      for (Eigen::Index i = 0; i < nf; ++i) res.w[free_idx[std::size_t(i)]] = x[i];
    }
    const Vector g = qp.H * res.w + qp.h;
    bool changed = false;
    for (Eigen::Index k = 0; k < n; ++k) {
      const double lo = box.lower[k], hi = box.upper[k], v = res.w[k];
      const bool kn = knee[std::size_t(k)];
      auto& s = st[std::size_t(k)];
      PieceState next = s;
      switch (s) {
        case PieceState::below:
          if (v < lo) next = PieceState::at_lo;
          else if (kn && v > qp.hinge.knee) next = PieceState::at_knee;
          else if (!kn && v > hi) next = PieceState::at_hi;
          break;
        case PieceState::above:
          if (v > hi) next = PieceState::at_hi;
          else if (kn && v < qp.hinge.knee) next = PieceState::at_knee;
          else if (!kn && v < lo) next = PieceState::at_lo;
          break;
        case PieceState::at_lo:
          if (g[k] + detail::hinge_right(qp.hinge, lo) < -tol_abs) next = kn || qp.hinge.weight == 0.0 || lo < qp.hinge.knee ? PieceState::below : PieceState::above;
          break;
        case PieceState::at_hi:
          if (g[k] + detail::hinge_left(qp.hinge, hi) > tol_abs) next = kn ? PieceState::above : (qp.hinge.weight > 0.0 && lo >= qp.hinge.knee ? PieceState::above : PieceState::below);
          break;
        case PieceState::at_knee:
          if (g[k] > tol_abs) next = PieceState::below;
          else if (g[k] + qp.hinge.weight < -tol_abs) next = PieceState::above;
          break;
      }
      if (next != s) {
        s = next;
        changed = true;
      }
    }
    if (!changed) {
      res.kkt = detail::piecewise_kkt(qp, box, res.w);
      res.converged = res.kkt <= tol_abs;
      return res;
    }
  }
  box.project_in_place(res.w);
  res.kkt = detail::piecewise_kkt(qp, box, res.w);
  res.converged = false;
  return res;
}

}  // namespace incentive_mpc
