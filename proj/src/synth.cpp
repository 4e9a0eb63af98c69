#include "synth.hpp"

#include <cmath>

#include "error.hpp"
#include "subspace.hpp"

namespace sspace {

void validate(const SynthSpec& spec) {
  if (spec.rows < 1 || spec.cols < 1) throw Error(ErrorKind::Usage, "synth dimensions must be positive");
  if (spec.planted_k < 1 || spec.planted_k > std::min(spec.rows, spec.cols))
    throw Error(ErrorKind::Usage, "planted_k must lie in [1, min(rows, cols)]");
  if (!(spec.in_energy >= 0.0 && spec.in_energy <= 1.0)) throw Error(ErrorKind::Usage, "in_energy must lie in [0, 1]");
  if (spec.in_energy < 1.0 && spec.planted_k == spec.rows)
    throw Error(ErrorKind::Usage, "infeasible energy split: planted subspace fills the ambient space");
  if (spec.layer_count < 1) throw Error(ErrorKind::Usage, "layer_count must be at least 1");
}

Eigen::MatrixXd random_orthonormal(Eigen::Index rows, Eigen::Index cols, std::uint64_t seed) {
  if (cols > rows) throw Error(ErrorKind::Usage, "cannot fit more orthonormal columns than rows");
  Eigen::MatrixXd q = gaussian_matrix(rows, cols, seed);
  for (Eigen::Index j = 0; j < cols; ++j) {
    for (int pass = 0; pass < 2; ++pass) {
      for (Eigen::Index i = 0; i < j; ++i) q.col(j) -= q.col(i).dot(q.col(j)) * q.col(i);
    }
    const double norm = q.col(j).norm();
    if (!(norm > 1e-8)) throw Error(ErrorKind::Numeric, "degenerate Gaussian draw during orthonormalization");
    q.col(j) /= norm;
  }
  return q;
}

PlantedUpdate planted_update(const SynthSpec& spec, const std::string& name) {
  validate(spec);
  const Eigen::Index m = spec.rows, n = spec.cols, k = spec.planted_k;
  const Eigen::Index r = std::min(m, n);

  const Eigen::MatrixXd q = random_orthonormal(m, m, derive_stream_seed(spec.seed, name + "/left"));
  const Eigen::MatrixXd z = random_orthonormal(n, r, derive_stream_seed(spec.seed, name + "/right"));
  // Planted values in (10, 20], the rest in [0.1, 1]: Top-K picks exactly the first k columns of q.
  Eigen::VectorXd sigma(r);
  for (Eigen::Index i = 0; i < r; ++i) {
    sigma[i] = i < k ? 20.0 - 10.0 * static_cast<double>(i) / static_cast<double>(k)
                     : 1.0 - 0.9 * static_cast<double>(i - k) / static_cast<double>(std::max<Eigen::Index>(1, r - k));
  }

  PlantedUpdate out;
  out.in_energy = spec.in_energy;
  out.planted_basis = q.leftCols(k);
  out.source = {name, q.leftCols(r) * sigma.asDiagonal() * z.transpose()};

  Eigen::MatrixXd task = Eigen::MatrixXd::Zero(m, n);
  if (spec.in_energy > 0.0) {
    const Eigen::MatrixXd inside =
        out.planted_basis * gaussian_matrix(k, n, derive_stream_seed(spec.seed, name + "/inside"));
    task += std::sqrt(spec.in_energy) / inside.norm() * inside;
  }
  if (spec.in_energy < 1.0) {
    const Eigen::MatrixXd outside =
        q.rightCols(m - k) * gaussian_matrix(m - k, n, derive_stream_seed(spec.seed, name + "/outside"));
    task += std::sqrt(1.0 - spec.in_energy) / outside.norm() * outside;
  }
  out.task = {name, std::move(task)};
  return out;
}

PlantedPair planted_pair(Eigen::Index d, Eigen::Index k_v, Eigen::Index k_w, Eigen::Index shared, std::uint64_t seed) {
  if (k_v < 1 || k_w < 1 || shared < 0 || shared > std::min(k_v, k_w) || k_v + k_w - shared > d)
    throw Error(ErrorKind::Usage, "infeasible planted pair: need shared <= min(k_v, k_w) and k_v + k_w - shared <= d");
  const Eigen::MatrixXd q = random_orthonormal(d, k_v + k_w - shared, derive_stream_seed(seed, "pair/basis"));

  std::vector<Eigen::Index> cols_w;
  for (Eigen::Index i = 0; i < shared; ++i) cols_w.push_back(i);
  for (Eigen::Index i = k_v; i < k_v + k_w - shared; ++i) cols_w.push_back(i);

  auto spread = [](Eigen::Index k) {
    Eigen::VectorXd s(k);
    for (Eigen::Index i = 0; i < k; ++i) s[i] = static_cast<double>(k - i);
    return s;
  };
  const Eigen::MatrixXd rot_v = random_orthonormal(k_v, k_v, derive_stream_seed(seed, "pair/v"));
  const Eigen::MatrixXd rot_w = random_orthonormal(k_w, k_w, derive_stream_seed(seed, "pair/w"));

  PlantedPair p;
  p.V = q.leftCols(k_v) * spread(k_v).asDiagonal() * rot_v.transpose();
  p.W = q(Eigen::all, cols_w) * spread(k_w).asDiagonal() * rot_w.transpose();
  p.shared = shared;
  p.mso = static_cast<double>(shared) / static_cast<double>(std::min(k_v, k_w));
  return p;
}

namespace {

NamedTensor f64_tensor(const std::string& name, const Shape& shape, const Eigen::MatrixXd& values) {
  return matrix_as_tensor(name, DType::F64, shape, values);
}

}  // namespace

SynthModel synth_model(const SynthSpec& spec) {
  validate(spec);
  SynthModel model;
  model.spec = spec;
  for (long layer = 0; layer < spec.layer_count; ++layer) {
    const std::string prefix = "model.layers." + std::to_string(layer) + ".";
    const std::string weight = prefix + "mlp.weight";
    const auto planted = planted_update(spec, weight);
    const Eigen::MatrixXd w0 = 0.02 * gaussian_matrix(spec.rows, spec.cols, derive_stream_seed(spec.seed, weight + "/base"));
    const Eigen::MatrixXd wa = w0 + planted.source.values;
    const Eigen::MatrixXd wft = wa + planted.task.values;
    const Shape shape{spec.rows, spec.cols};
    model.base.add(f64_tensor(weight, shape, w0));
    model.aligned.add(f64_tensor(weight, shape, wa));
    model.finetuned.add(f64_tensor(weight, shape, wft));
    model.truth.push_back({weight, layer, spec.rows, spec.cols, spec.planted_k,
                           static_cast<double>(spec.planted_k) / static_cast<double>(std::min(spec.rows, spec.cols)),
                           spec.in_energy});

    if (spec.include_vectors) {
      const std::string norm = prefix + "norm.weight";
      const Eigen::MatrixXd n0 = Eigen::MatrixXd::Ones(1, spec.cols);
      const Eigen::MatrixXd na = n0 + 0.01 * gaussian_matrix(1, spec.cols, derive_stream_seed(spec.seed, norm + "/aligned"));
      const Eigen::MatrixXd nft = na + 0.01 * gaussian_matrix(1, spec.cols, derive_stream_seed(spec.seed, norm + "/task"));
      const Shape vshape{spec.cols};
      model.base.add(f64_tensor(norm, vshape, n0));
      model.aligned.add(f64_tensor(norm, vshape, na));
      model.finetuned.add(f64_tensor(norm, vshape, nft));
    }
  }
  model.base.set_provenance("synth:base");
  model.aligned.set_provenance("synth:aligned");
  model.finetuned.set_provenance("synth:finetuned");
  return model;
}

ActivationSet gaussian_activation_set(const std::string& prompt_set_id, long layer_count, Eigen::Index n,
                                      Eigen::Index d, std::uint64_t seed) {
  ActivationSet set;
  set.prompt_set_id = prompt_set_id;
  set.model_id = "synth";
  for (long l = 0; l < layer_count; ++l) {
    set.layers.push_back({prompt_set_id, l, set.token_policy,
                          gaussian_matrix(n, d, derive_stream_seed(seed, prompt_set_id + "/layer_" + std::to_string(l)))});
  }
  return set;
}

std::pair<ActivationSet, ActivationSet> planted_activation_sets(const PlantedActivationSpec& spec) {
  if (spec.layer_count < 1 || spec.n < 2 || spec.d < 1 || spec.shared_dim < 1 || spec.shared_dim > spec.d)
    throw Error(ErrorKind::Usage, "infeasible planted activation spec");
  ActivationSet a, b;
  a.prompt_set_id = "planted_a";
  b.prompt_set_id = "planted_b";
  a.model_id = b.model_id = "synth";
  // Mode scales fall by 3x per mode so the leading directions are well separated.
  Eigen::VectorXd scales(spec.shared_dim);
  for (Eigen::Index j = 0; j < spec.shared_dim; ++j) scales[j] = 10.0 * std::pow(3.0, -static_cast<double>(j));

  for (long l = 0; l < spec.layer_count; ++l) {
    const std::string tag = "/layer_" + std::to_string(l);
    const Eigen::MatrixXd basis = random_orthonormal(spec.d, spec.shared_dim, derive_stream_seed(spec.seed, "modes" + tag));
    for (auto* set : {&a, &b}) {
      const std::string id = set->prompt_set_id + tag;
      const Eigen::MatrixXd coeff = gaussian_matrix(spec.n, spec.shared_dim, derive_stream_seed(spec.seed, id + "/coeff"));
      const Eigen::MatrixXd noise = gaussian_matrix(spec.n, spec.d, derive_stream_seed(spec.seed, id + "/noise"));
      set->layers.push_back({set->prompt_set_id, l, set->token_policy,
                             coeff * scales.asDiagonal() * basis.transpose() + spec.noise * noise});
    }
  }
  return {std::move(a), std::move(b)};
}

}  // namespace sspace
