#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "tensor_store.hpp"

namespace sspace {

struct SingularFactorization {
  Eigen::MatrixXd U;      // M x r, orthonormal columns
  Eigen::VectorXd sigma;  // r, nonincreasing
  Eigen::MatrixXd Vt;     // r x N, orthonormal rows; empty when only left vectors were requested
};

/// Thin SVD with r = min(M, N). Throws Numeric on non-finite input or when
/// the backend does not converge.
SingularFactorization thin_svd(const Eigen::MatrixXd& a, bool with_right_vectors = true);
inline SingularFactorization thin_svd(const AnalysisMatrix& a) { return thin_svd(a.values); }

/// k = floor(rho * min(M, N)), clamped to at least 1. rho must lie in (0, 1].
Eigen::Index rank_from_rho(double rho, Eigen::Index rows, Eigen::Index cols);

enum class BasisMode { TopK, RandomK, Random };

std::string_view basis_mode_name(BasisMode mode);
std::optional<BasisMode> parse_basis_mode(std::string_view text);

struct SubspaceBasis {
  std::string source_name;
  Eigen::MatrixXd Uk;  // M x k
  Eigen::Index k = 0;
  BasisMode mode = BasisMode::TopK;
  std::optional<std::uint64_t> seed;
  Eigen::VectorXd source_sigma;
  std::vector<Eigen::Index> columns;  // which left singular vectors were kept

  Eigen::Index ambient() const { return Uk.rows(); }
};

/// Builds a k-dimensional basis.
///  - TopK: first k columns of factorization->U.
///  - RandomK: k columns of U drawn uniformly without replacement, in original order.
///  - Random: top-k left singular vectors of a seeded rows x cols standard normal matrix.
/// TopK/RandomK need `factorization`; RandomK/Random need `seed`.
SubspaceBasis select_basis(const SingularFactorization* factorization, BasisMode mode, Eigen::Index k,
                           std::optional<std::uint64_t> seed, Eigen::Index rows, Eigen::Index cols,
                           std::string source_name = {});

/// U_k (U_k^T D). Never forms the M x M projector.
Eigen::MatrixXd project_parallel(const SubspaceBasis& basis, const Eigen::MatrixXd& update);
/// D - U_k (U_k^T D).
Eigen::MatrixXd project_orthogonal(const SubspaceBasis& basis, const Eigen::MatrixXd& update);

struct EnergySplit {
  double kept = 0.0;       // ||P_k D||_F^2 / ||D||_F^2
  double kept_perp = 0.0;  // 1 - kept
  double kept_norm2 = 0.0;
  double total_norm2 = 0.0;
};

/// Fraction of the update's Frobenius energy inside span(U_k). Throws Numeric for a zero update.
EnergySplit energy_kept(const SubspaceBasis& basis, const Eigen::MatrixXd& update);

/// Per-tensor RNG seed from a master seed and the tensor name, independent of scheduling.
std::uint64_t derive_stream_seed(std::uint64_t master_seed, std::string_view name);

/// Seeded rows x cols matrix of i.i.d. standard normal entries.
Eigen::MatrixXd gaussian_matrix(Eigen::Index rows, Eigen::Index cols, std::uint64_t seed);

}  // namespace sspace
