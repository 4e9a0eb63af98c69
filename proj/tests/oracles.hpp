#pragma once

// Reference implementations used only by the tests. None of these call the
// library's SVD, projection or MSO code.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <numeric>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

namespace oracle {

struct Eigenpairs {
  Eigen::VectorXd values;   // descending
  Eigen::MatrixXd vectors;  // columns match values
};

// Cyclic Jacobi rotations on a symmetric matrix.
inline Eigenpairs jacobi_eigen(Eigen::MatrixXd a, int max_sweeps = 100) {
  const Eigen::Index n = a.rows();
  Eigen::MatrixXd v = Eigen::MatrixXd::Identity(n, n);
  for (int sweep = 0; sweep < max_sweeps; ++sweep) {
    double off = 0.0;
    for (Eigen::Index p = 0; p < n; ++p)
      for (Eigen::Index q = p + 1; q < n; ++q) off += a(p, q) * a(p, q);
    if (off < 1e-30 * std::max(1.0, a.squaredNorm())) break;
    for (Eigen::Index p = 0; p < n; ++p) {
      for (Eigen::Index q = p + 1; q < n; ++q) {
        const double apq = a(p, q);
        if (std::abs(apq) < 1e-300) continue;
        const double theta = (a(q, q) - a(p, p)) / (2.0 * apq);
        const double t = (theta >= 0 ? 1.0 : -1.0) / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;
        for (Eigen::Index k = 0; k < n; ++k) {
          const double akp = a(k, p), akq = a(k, q);
          a(k, p) = c * akp - s * akq;
          a(k, q) = s * akp + c * akq;
        }
        for (Eigen::Index k = 0; k < n; ++k) {
          const double apk = a(p, k), aqk = a(q, k);
          a(p, k) = c * apk - s * aqk;
          a(q, k) = s * apk + c * aqk;
        }
        for (Eigen::Index k = 0; k < n; ++k) {
          const double vkp = v(k, p), vkq = v(k, q);
          v(k, p) = c * vkp - s * vkq;
          v(k, q) = s * vkp + c * vkq;
        }
      }
    }
  }
  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](auto x, auto y) { return a(x, x) > a(y, y); });
  Eigenpairs out{Eigen::VectorXd(n), Eigen::MatrixXd(n, n)};
  for (Eigen::Index i = 0; i < n; ++i) {
    out.values[i] = a(order[static_cast<std::size_t>(i)], order[static_cast<std::size_t>(i)]);
    out.vectors.col(i) = v.col(order[static_cast<std::size_t>(i)]);
  }
  return out;
}

// Singular values of A from the eigenvalues of A^T A (or A A^T), descending.
inline Eigen::VectorXd singular_values(const Eigen::MatrixXd& a) {
  const Eigen::MatrixXd gram = a.rows() >= a.cols() ? Eigen::MatrixXd(a.transpose() * a) : Eigen::MatrixXd(a * a.transpose());
  Eigen::VectorXd ev = jacobi_eigen(gram).values;
  for (Eigen::Index i = 0; i < ev.size(); ++i) ev[i] = std::sqrt(std::max(0.0, ev[i]));
  return ev;
}

// Orthogonal projector onto the leading k eigenvectors of A A^T.
inline Eigen::MatrixXd leading_projector(const Eigen::MatrixXd& a, Eigen::Index k) {
  const auto e = jacobi_eigen(a * a.transpose());
  const Eigen::MatrixXd q = e.vectors.leftCols(k);
  return q * q.transpose();
}

// Dense projector from a basis with orthonormal columns.
inline Eigen::MatrixXd projector(const Eigen::MatrixXd& basis) { return basis * basis.transpose(); }

// Smallest k with cumulative eigenvalue mass >= eta of the total.
// Eigenvalues below 1e-12 of the largest count as zero.
inline Eigen::Index eta_rank(const Eigen::VectorXd& eigenvalues, double eta) {
  Eigen::Index rank = 0;
  for (Eigen::Index i = 0; i < eigenvalues.size(); ++i)
    if (eigenvalues[i] > 1e-12 * eigenvalues[0]) ++rank;
  const double total = eigenvalues.head(rank).sum();
  double run = 0.0;
  for (Eigen::Index i = 0; i < rank; ++i) {
    run += eigenvalues[i];
    if (run >= eta * total) return i + 1;
  }
  return rank;
}

// trace(P_V P_W) / min(k_V, k_W) with explicitly formed d x d projectors.
inline double trace_mso(const Eigen::MatrixXd& v, const Eigen::MatrixXd& w, double eta, Eigen::Index* kv = nullptr,
                        Eigen::Index* kw = nullptr) {
  const auto ev = jacobi_eigen(v * v.transpose());
  const auto ew = jacobi_eigen(w * w.transpose());
  const Eigen::Index k_v = eta_rank(ev.values.cwiseMax(0.0), eta);
  const Eigen::Index k_w = eta_rank(ew.values.cwiseMax(0.0), eta);
  if (kv) *kv = k_v;
  if (kw) *kw = k_w;
  const Eigen::MatrixXd pv = projector(ev.vectors.leftCols(k_v));
  const Eigen::MatrixXd pw = projector(ew.vectors.leftCols(k_w));
  return (pv * pw).trace() / static_cast<double>(std::min(k_v, k_w));
}

inline Eigen::MatrixXd gaussian(Eigen::Index rows, Eigen::Index cols, std::uint64_t seed) {
  std::mt19937_64 rng(seed ^ 0x5eedULL);
  std::normal_distribution<double> n(0.0, 1.0);
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i)
    for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = n(rng);
  return m;
}

// Orthonormal columns via Householder QR; independent of the library's Gram-Schmidt.
inline Eigen::MatrixXd orthonormal(Eigen::Index rows, Eigen::Index cols, std::uint64_t seed) {
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(gaussian(rows, cols, seed));
  return qr.householderQ() * Eigen::MatrixXd::Identity(rows, cols);
}

inline double rel_fro(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  const double denom = std::max(b.norm(), 1e-300);
  return (a - b).norm() / denom;
}

// bf16 by truncating float bits with a round-to-nearest-even bias. Exact for
// inputs that are representable as float.
inline std::uint16_t bf16_from_float(float f) {
  std::uint32_t bits;
  std::memcpy(&bits, &f, 4);
  if ((bits & 0x7f800000u) == 0x7f800000u && (bits & 0x007fffffu)) return static_cast<std::uint16_t>((bits >> 16) | 0x40);
  const std::uint32_t bias = 0x7fffu + ((bits >> 16) & 1u);
  return static_cast<std::uint16_t>((bits + bias) >> 16);
}

inline float float_from_bf16(std::uint16_t h) {
  const std::uint32_t bits = static_cast<std::uint32_t>(h) << 16;
  float f;
  std::memcpy(&f, &bits, 4);
  return f;
}

// IEEE half decode by cases.
inline double double_from_f16(std::uint16_t h) {
  const int sign = (h >> 15) & 1;
  const int exp = (h >> 10) & 0x1f;
  const int frac = h & 0x3ff;
  double mag;
  if (exp == 0)
    mag = std::ldexp(frac, -24);
  else if (exp == 31)
    mag = frac ? std::nan("") : INFINITY;
  else
    mag = std::ldexp(1024 + frac, exp - 25);
  return sign ? -mag : mag;
}

}  // namespace oracle
