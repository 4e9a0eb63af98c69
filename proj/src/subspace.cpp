#include "subspace.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include <Eigen/SVD>

#include "error.hpp"

namespace sspace {

SingularFactorization thin_svd(const Eigen::MatrixXd& a, bool with_right_vectors) {
  if (a.rows() == 0 || a.cols() == 0) throw Error(ErrorKind::Usage, "SVD of an empty matrix");
  if (!a.allFinite()) throw Error(ErrorKind::Numeric, "SVD input contains non-finite values");
  const unsigned options = Eigen::ComputeThinU | (with_right_vectors ? static_cast<unsigned>(Eigen::ComputeThinV) : 0u);
  Eigen::BDCSVD<Eigen::MatrixXd> svd(a, options);
  if (svd.info() != Eigen::Success) throw Error(ErrorKind::Numeric, "SVD did not converge");
  SingularFactorization f;
  f.U = svd.matrixU();
  f.sigma = svd.singularValues();
  if (with_right_vectors) f.Vt = svd.matrixV().transpose();
  if (!f.U.allFinite() || !f.sigma.allFinite()) throw Error(ErrorKind::Numeric, "SVD produced non-finite factors");
  return f;
}

Eigen::Index rank_from_rho(double rho, Eigen::Index rows, Eigen::Index cols) {
  if (!(rho > 0.0 && rho <= 1.0)) throw Error(ErrorKind::Usage, "rho must lie in (0, 1]");
  if (rows < 1 || cols < 1) throw Error(ErrorKind::Usage, "matrix dimensions must be positive");
  const auto r = std::min(rows, cols);
  const auto k = static_cast<Eigen::Index>(std::floor(rho * static_cast<double>(r)));
  return std::max<Eigen::Index>(1, k);
}

std::string_view basis_mode_name(BasisMode mode) {
  switch (mode) {
    case BasisMode::TopK: return "topk";
    case BasisMode::RandomK: return "randomk";
    case BasisMode::Random: return "random";
  }
  return "?";
}

std::optional<BasisMode> parse_basis_mode(std::string_view text) {
  if (text == "topk") return BasisMode::TopK;
  if (text == "randomk") return BasisMode::RandomK;
  if (text == "random") return BasisMode::Random;
  return std::nullopt;
}

std::uint64_t derive_stream_seed(std::uint64_t master_seed, std::string_view name) {
  std::uint64_t h = 0xcbf29ce484222325ull;  // FNV-1a
  for (unsigned char c : name) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  // splitmix64 finalizer
  std::uint64_t z = master_seed ^ h;
  z += 0x9e3779b97f4a7c15ull;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

Eigen::MatrixXd gaussian_matrix(Eigen::Index rows, Eigen::Index cols, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i)
    for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = normal(rng);
  return m;
}

SubspaceBasis select_basis(const SingularFactorization* factorization, BasisMode mode, Eigen::Index k,
                           std::optional<std::uint64_t> seed, Eigen::Index rows, Eigen::Index cols,
                           std::string source_name) {
  if (mode != BasisMode::Random && factorization == nullptr)
    throw Error(ErrorKind::Usage, "basis mode " + std::string(basis_mode_name(mode)) + " needs a factorization");
  if (mode != BasisMode::TopK && !seed)
    throw Error(ErrorKind::Usage, "basis mode " + std::string(basis_mode_name(mode)) + " needs a seed");

  SubspaceBasis basis;
  basis.source_name = std::move(source_name);
  basis.mode = mode;
  basis.seed = mode == BasisMode::TopK ? std::nullopt : seed;

  SingularFactorization random_factorization;
  const SingularFactorization* f = factorization;
  if (mode == BasisMode::Random) {
    random_factorization = thin_svd(gaussian_matrix(rows, cols, *seed), false);
    f = &random_factorization;
  }
  const Eigen::Index r = f->sigma.size();
  if (k < 1 || k > r)
    throw Error(ErrorKind::Usage, "subspace rank k=" + std::to_string(k) + " outside [1, " + std::to_string(r) + "]");

  basis.k = k;
  basis.source_sigma = factorization ? factorization->sigma : f->sigma;
  if (mode == BasisMode::RandomK) {
    std::vector<Eigen::Index> all(static_cast<std::size_t>(r));
    std::iota(all.begin(), all.end(), Eigen::Index{0});
    std::mt19937_64 rng(*seed);
    std::sample(all.begin(), all.end(), std::back_inserter(basis.columns), k, rng);
  } else {
    basis.columns.resize(static_cast<std::size_t>(k));
    std::iota(basis.columns.begin(), basis.columns.end(), Eigen::Index{0});
  }
  basis.Uk = f->U(Eigen::all, basis.columns);
  return basis;
}

namespace {

void require_rows(const SubspaceBasis& basis, const Eigen::MatrixXd& update) {
  if (update.rows() != basis.ambient())
    throw Error(ErrorKind::Mismatch, "update has " + std::to_string(update.rows()) + " rows but basis '" +
                                         basis.source_name + "' has " + std::to_string(basis.ambient()));
}

bool is_full(const SubspaceBasis& basis) { return basis.k == basis.ambient(); }

}  // namespace

Eigen::MatrixXd project_parallel(const SubspaceBasis& basis, const Eigen::MatrixXd& update) {
  require_rows(basis, update);
  // k == M: U_k is square orthogonal and P_k is exactly the identity.
  if (is_full(basis)) return update;
  return basis.Uk * (basis.Uk.transpose() * update);
}

Eigen::MatrixXd project_orthogonal(const SubspaceBasis& basis, const Eigen::MatrixXd& update) {
  require_rows(basis, update);
  if (is_full(basis)) return Eigen::MatrixXd::Zero(update.rows(), update.cols());
  return update - basis.Uk * (basis.Uk.transpose() * update);
}

EnergySplit energy_kept(const SubspaceBasis& basis, const Eigen::MatrixXd& update) {
  require_rows(basis, update);
  EnergySplit e;
  e.total_norm2 = update.squaredNorm();
  if (!(e.total_norm2 > 0.0)) throw Error(ErrorKind::Numeric, "energy ratio of a zero-norm update");
  e.kept_norm2 = is_full(basis) ? e.total_norm2 : (basis.Uk.transpose() * update).squaredNorm();
  e.kept = std::clamp(e.kept_norm2 / e.total_norm2, 0.0, 1.0);
  e.kept_perp = 1.0 - e.kept;
  return e;
}

}  // namespace sspace
