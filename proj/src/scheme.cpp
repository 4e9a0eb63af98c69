#include "scheme.hpp"

#include <charconv>

#include "error.hpp"
#include "parallel.hpp"

namespace sspace {

std::string_view scheme_name(Scheme scheme) {
  return scheme == Scheme::Parallel ? "parallel" : "orthogonal";
}

std::optional<Scheme> parse_scheme(std::string_view text) {
  if (text == "parallel") return Scheme::Parallel;
  if (text == "orthogonal") return Scheme::Orthogonal;
  return std::nullopt;
}

std::string_view skip_reason_name(SkipReason reason) {
  switch (reason) {
    case SkipReason::None: return "";
    case SkipReason::LowRank: return "rank<2";
    case SkipReason::LayerFilter: return "layer_filter";
  }
  return "";
}

void validate(const ProjectionSpec& spec) {
  if (!(spec.rho > 0.0 && spec.rho <= 1.0)) throw Error(ErrorKind::Usage, "rho must lie in (0, 1]");
  for (auto p : spec.layers.percentiles)
    if (p < 0.0 || p > 100.0) throw Error(ErrorKind::Usage, "layer percentiles must lie in [0, 100]");
  for (auto i : spec.layers.indices)
    if (i < 0) throw Error(ErrorKind::Usage, "layer indices must be nonnegative");
}

ProjectionPlan::ProjectionPlan(const DeltaModel& subspace_source, const DeltaModel& task_update, BasisMode mode,
                               LayerFilter layers, std::uint64_t seed)
    : mode_(mode),
      layers_(std::move(layers)),
      seed_(seed),
      source_provenance_(subspace_source.provenance()),
      task_provenance_(task_update.provenance()) {
  require_same_layout(subspace_source, task_update, "subspace source", "task update");
  const auto names = task_update.names();
  const auto selected = resolve_layers(layers_, names);

  entries_.resize(names.size());
  parallel_for(names.size(), [&](std::size_t i) {
    Entry& e = entries_[i];
    const NamedTensor& task = task_update.at(names[i]);
    e.name = names[i];
    e.layer = layer_index_of(e.name);
    e.shape = task.shape();
    e.stream_seed = derive_stream_seed(seed_, e.name);
    e.task = tensor_as_matrix(task);
    if (!e.task) {
      e.skip = SkipReason::LowRank;
      e.task_flat = task.to_f64();
      return;
    }
    if (!selected.count(e.name)) {
      e.skip = SkipReason::LayerFilter;
      return;
    }
    try {
      if (mode_ == BasisMode::Random) {
        e.factorization = thin_svd(gaussian_matrix(e.task->rows(), e.task->cols(), e.stream_seed), false);
      } else {
        e.factorization = thin_svd(tensor_as_matrix(subspace_source.at(e.name))->values, false);
      }
    } catch (const Error& err) {
      throw Error(err.kind(), "tensor '" + e.name + "': " + err.what());
    }
  });
}

ProjectionReport ProjectionPlan::run(double rho, std::optional<Scheme> scheme,
                                     std::vector<Eigen::MatrixXd>* projected) const {
  ProjectionReport report;
  report.spec = {rho, mode_, scheme.value_or(Scheme::Parallel), layers_, seed_};
  validate(report.spec);
  report.source_provenance = source_provenance_;
  report.task_provenance = task_provenance_;
  report.tensors.resize(entries_.size());
  if (projected) projected->assign(entries_.size(), Eigen::MatrixXd());

  parallel_for(entries_.size(), [&](std::size_t i) {
    const Entry& e = entries_[i];
    TensorRecord& rec = report.tensors[i];
    rec.name = e.name;
    rec.layer = e.layer;
    rec.skip = e.skip;
    if (e.task) {
      rec.rows = e.task->rows();
      rec.cols = e.task->cols();
    }
    if (e.skip != SkipReason::None) return;

    rec.k = rank_from_rho(rho, rec.rows, rec.cols);
    const BasisMode pick = mode_ == BasisMode::Random ? BasisMode::TopK : mode_;
    SubspaceBasis basis = select_basis(&*e.factorization, pick, rec.k, e.stream_seed, rec.rows, rec.cols, e.name);
    const Eigen::MatrixXd& update = e.task->values;
    rec.total_norm2 = update.squaredNorm();
    if (rec.total_norm2 > 0.0) {
      const auto split = energy_kept(basis, update);
      rec.kept_norm2 = split.kept_norm2;
      rec.energy = split.kept;
      rec.energy_perp = split.kept_perp;
    }
    if (projected) {
      (*projected)[i] = *scheme == Scheme::Parallel ? project_parallel(basis, update) : project_orthogonal(basis, update);
    }
  });

  double kept = 0.0, total = 0.0;
  for (const auto& rec : report.tensors) {
    if (rec.skipped()) continue;
    kept += rec.kept_norm2;
    total += rec.total_norm2;
  }
  if (total > 0.0) {
    report.global_energy = std::clamp(kept / total, 0.0, 1.0);
    report.global_energy_perp = 1.0 - *report.global_energy;
  }
  return report;
}

ProjectionReport ProjectionPlan::measure(double rho) const { return run(rho, std::nullopt, nullptr); }

std::pair<Checkpoint, ProjectionReport> ProjectionPlan::apply(const Checkpoint& base, double rho, Scheme scheme) const {
  if (base.size() != entries_.size())
    throw Error(ErrorKind::Mismatch, "base has " + std::to_string(base.size()) + " tensors but the task update has " +
                                         std::to_string(entries_.size()));
  for (const auto& e : entries_) {
    const NamedTensor* t = base.find(e.name);
    if (!t) throw Error(ErrorKind::Mismatch, "tensor name sets differ; missing from base: " + e.name);
    if (t->shape() != e.shape) throw Error(ErrorKind::Mismatch, "shape mismatch for tensor '" + e.name + "' in base");
  }

  std::vector<Eigen::MatrixXd> projected;
  ProjectionReport report = run(rho, scheme, &projected);

  std::vector<std::optional<NamedTensor>> out(entries_.size());
  parallel_for(entries_.size(), [&](std::size_t i) {
    const Entry& e = entries_[i];
    const NamedTensor& b = base.at(e.name);
    std::vector<double> values = b.to_f64();
    if (!e.task) {
      for (std::size_t j = 0; j < values.size(); ++j) values[j] += e.task_flat[j];
    } else {
      const Eigen::MatrixXd& update = e.skip == SkipReason::None ? projected[i] : e.task->values;
      std::size_t flat = 0;
      for (Eigen::Index r = 0; r < update.rows(); ++r)
        for (Eigen::Index c = 0; c < update.cols(); ++c) values[flat++] += update(r, c);
    }
    out[i] = NamedTensor::from_values(e.name, b.dtype(), b.shape(), values);
  });

  Checkpoint result;
  for (auto& t : out) result.add(std::move(*t));
  char rho_text[32];
  auto [end, ec] = std::to_chars(rho_text, rho_text + sizeof rho_text, rho);
  result.set_provenance("project(" + std::string(scheme_name(scheme)) + "," + std::string(basis_mode_name(mode_)) +
                        ",rho=" + std::string(rho_text, end) + "," + task_provenance_ + "|" + source_provenance_ +
                        ")+" + (base.provenance().empty() ? std::string("unnamed") : base.provenance()));
  return {std::move(result), std::move(report)};
}

std::pair<Checkpoint, ProjectionReport> apply_scheme(const DeltaModel& subspace_source, const DeltaModel& task_update,
                                                     const Checkpoint& base, const ProjectionSpec& spec) {
  validate(spec);
  ProjectionPlan plan(subspace_source, task_update, spec.mode, spec.layers, spec.seed);
  return plan.apply(base, spec.rho, spec.scheme);
}

}  // namespace sspace
