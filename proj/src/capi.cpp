#include "sspace/sspace.h"

#include <cstring>
#include <memory>
#include <new>
#include <string>
#include <vector>

#include "activation.hpp"
#include "delta.hpp"
#include "error.hpp"
#include "mso.hpp"
#include "parallel.hpp"
#include "report.hpp"
#include "scheme.hpp"
#include "synth.hpp"

struct sspace_checkpoint {
  sspace::Checkpoint ckpt;
  std::vector<std::string> names;  // cached for stable c_str() pointers
  std::string provenance;

  explicit sspace_checkpoint(sspace::Checkpoint c) : ckpt(std::move(c)) { refresh(); }
  void refresh() {
    names = ckpt.names();
    provenance = ckpt.provenance();
  }
};

struct sspace_report {
  std::string json;
  std::string csv;
};

namespace {

thread_local std::string g_last_error;

sspace_status status_of(sspace::ErrorKind kind) {
  switch (kind) {
    case sspace::ErrorKind::Usage: return SSPACE_ERR_USAGE;
    case sspace::ErrorKind::Io: return SSPACE_ERR_IO;
    case sspace::ErrorKind::Format: return SSPACE_ERR_FORMAT;
    case sspace::ErrorKind::Mismatch: return SSPACE_ERR_MISMATCH;
    case sspace::ErrorKind::Numeric: return SSPACE_ERR_NUMERIC;
  }
  return SSPACE_ERR_INTERNAL;
}

template <class Body>
sspace_status guarded(Body&& body) {
  try {
    body();
    g_last_error.clear();
    return SSPACE_OK;
  } catch (const sspace::Error& e) {
    g_last_error = e.what();
    return status_of(e.kind());
  } catch (const std::bad_alloc&) {
    g_last_error = "out of memory";
    return SSPACE_ERR_INTERNAL;
  } catch (const std::exception& e) {
    g_last_error = e.what();
    return SSPACE_ERR_INTERNAL;
  } catch (...) {
    g_last_error = "unknown failure";
    return SSPACE_ERR_INTERNAL;
  }
}

void require(bool condition, const char* what) {
  if (!condition) throw sspace::Error(sspace::ErrorKind::Usage, what);
}

sspace_checkpoint* wrap(sspace::Checkpoint c) { return new sspace_checkpoint(std::move(c)); }

sspace_report* make_report(const sspace::Json& body, std::string csv) {
  sspace::Json doc;
  doc["schema"] = sspace::kReportSchema;
  doc["tool"] = std::string("sspace ") + sspace::kToolVersion;
  for (const auto& [k, v] : body.items()) doc[k] = v;
  return new sspace_report{doc.dump(2) + "\n", std::move(csv)};
}

sspace::BasisMode to_mode(sspace_basis_mode mode) {
  switch (mode) {
    case SSPACE_BASIS_TOPK: return sspace::BasisMode::TopK;
    case SSPACE_BASIS_RANDOMK: return sspace::BasisMode::RandomK;
    case SSPACE_BASIS_RANDOM: return sspace::BasisMode::Random;
  }
  throw sspace::Error(sspace::ErrorKind::Usage, "unknown basis mode");
}

sspace::Scheme to_scheme(sspace_scheme scheme) {
  switch (scheme) {
    case SSPACE_SCHEME_PARALLEL: return sspace::Scheme::Parallel;
    case SSPACE_SCHEME_ORTHOGONAL: return sspace::Scheme::Orthogonal;
  }
  throw sspace::Error(sspace::ErrorKind::Usage, "unknown projection scheme");
}

sspace::LayerFilter to_filter(const char* layers) {
  return sspace::parse_layer_filter(layers ? std::string_view(layers) : std::string_view("all"));
}

std::vector<double> to_vector(const double* values, size_t count) {
  require(count == 0 || values != nullptr, "null grid pointer");
  return {values, values + count};
}

}  // namespace

extern "C" {

const char* sspace_version(void) { return sspace::kToolVersion; }

const char* sspace_last_error(void) { return g_last_error.c_str(); }

const char* sspace_status_name(sspace_status status) {
  switch (status) {
    case SSPACE_OK: return "ok";
    case SSPACE_ERR_USAGE: return "usage";
    case SSPACE_ERR_IO: return "io";
    case SSPACE_ERR_FORMAT: return "format";
    case SSPACE_ERR_MISMATCH: return "mismatch";
    case SSPACE_ERR_NUMERIC: return "numeric";
    case SSPACE_ERR_INTERNAL: return "internal";
  }
  return "unknown";
}

void sspace_set_threads(unsigned count) { sspace::set_thread_count(count); }

sspace_status sspace_checkpoint_read(const char* path, sspace_checkpoint** out) {
  return guarded([&] {
    require(path && out, "null argument");
    *out = wrap(sspace::read_checkpoint(path));
  });
}

sspace_status sspace_checkpoint_write(const sspace_checkpoint* ckpt, const char* path) {
  return guarded([&] {
    require(ckpt && path, "null argument");
    sspace::write_checkpoint(ckpt->ckpt, path);
  });
}

void sspace_checkpoint_free(sspace_checkpoint* ckpt) { delete ckpt; }

size_t sspace_checkpoint_tensor_count(const sspace_checkpoint* ckpt) { return ckpt ? ckpt->names.size() : 0; }

const char* sspace_checkpoint_tensor_name(const sspace_checkpoint* ckpt, size_t index) {
  if (!ckpt || index >= ckpt->names.size()) return nullptr;
  return ckpt->names[index].c_str();
}

const char* sspace_checkpoint_provenance(const sspace_checkpoint* ckpt) {
  return ckpt ? ckpt->provenance.c_str() : "";
}

sspace_status sspace_checkpoint_set_provenance(sspace_checkpoint* ckpt, const char* tag) {
  return guarded([&] {
    require(ckpt && tag, "null argument");
    ckpt->ckpt.set_provenance(tag);
    ckpt->refresh();
  });
}

sspace_status sspace_checkpoint_tensor_shape(const sspace_checkpoint* ckpt, const char* name, int64_t* dims,
                                             size_t capacity, size_t* rank) {
  return guarded([&] {
    require(ckpt && name && rank, "null argument");
    const auto& shape = ckpt->ckpt.at(name).shape();
    *rank = shape.size();
    for (size_t i = 0; i < shape.size() && i < capacity && dims; ++i) dims[i] = shape[i];
  });
}

sspace_status sspace_checkpoint_tensor_values(const sspace_checkpoint* ckpt, const char* name, double* values,
                                              size_t count) {
  return guarded([&] {
    require(ckpt && name && values, "null argument");
    const auto& t = ckpt->ckpt.at(name);
    require(count == t.numel(), "value buffer size does not match the tensor element count");
    const auto v = t.to_f64();
    std::memcpy(values, v.data(), v.size() * sizeof(double));
  });
}

sspace_status sspace_delta_compute(const sspace_checkpoint* minuend, const sspace_checkpoint* subtrahend,
                                   const char* minuend_id, const char* subtrahend_id, sspace_checkpoint** out) {
  return guarded([&] {
    require(minuend && subtrahend && out, "null argument");
    *out = wrap(sspace::compute_delta(minuend->ckpt, subtrahend->ckpt, minuend_id ? minuend_id : "",
                                      subtrahend_id ? subtrahend_id : ""));
  });
}

sspace_status sspace_delta_negate(const sspace_checkpoint* delta, sspace_checkpoint** out) {
  return guarded([&] {
    require(delta && out, "null argument");
    *out = wrap(sspace::negate_delta(delta->ckpt));
  });
}

sspace_status sspace_delta_apply(const sspace_checkpoint* base, const sspace_checkpoint* delta,
                                 sspace_checkpoint** out) {
  return guarded([&] {
    require(base && delta && out, "null argument");
    *out = wrap(sspace::apply_delta(base->ckpt, delta->ckpt));
  });
}

sspace_status sspace_delta_summary(const sspace_checkpoint* delta, sspace_report** report) {
  return guarded([&] {
    require(delta && report, "null argument");
    *report = make_report(sspace::delta_summary_json(delta->ckpt), sspace::delta_summary_csv(delta->ckpt));
  });
}

sspace_status sspace_project(const sspace_checkpoint* subspace_source, const sspace_checkpoint* task_update,
                             const sspace_checkpoint* base, const sspace_projection_spec* spec, const double* rhos,
                             size_t rho_count, sspace_checkpoint** out_checkpoints, sspace_report** report) {
  return guarded([&] {
    require(subspace_source && task_update && base && spec && report, "null argument");
    std::vector<double> grid = rho_count ? to_vector(rhos, rho_count) : std::vector<double>{spec->rho};
    sspace::ProjectionSpec cpp_spec{grid.front(), to_mode(spec->mode), to_scheme(spec->scheme), to_filter(spec->layers),
                                    spec->seed};
    for (double rho : grid) {
      cpp_spec.rho = rho;
      sspace::validate(cpp_spec);
    }
    sspace::ProjectionPlan plan(subspace_source->ckpt, task_update->ckpt, cpp_spec.mode, cpp_spec.layers,
                                cpp_spec.seed);
    std::vector<std::unique_ptr<sspace_checkpoint>> outputs;
    std::vector<sspace::ProjectionReport> runs;
    for (double rho : grid) {
      auto [ckpt, rep] = plan.apply(base->ckpt, rho, cpp_spec.scheme);
      if (out_checkpoints) outputs.emplace_back(wrap(std::move(ckpt)));
      runs.push_back(std::move(rep));
    }
    *report = make_report(sspace::projection_runs_json(runs, false), sspace::projection_runs_csv(runs, false));
    if (out_checkpoints)
      for (size_t i = 0; i < outputs.size(); ++i) out_checkpoints[i] = outputs[i].release();
  });
}

sspace_status sspace_energy(const sspace_checkpoint* subspace_source, const sspace_checkpoint* task_update,
                            sspace_basis_mode mode, const char* layers, uint64_t seed, const double* rhos,
                            size_t rho_count, sspace_report** report) {
  return guarded([&] {
    require(subspace_source && task_update && report, "null argument");
    require(rho_count > 0, "rho grid is empty");
    const auto grid = to_vector(rhos, rho_count);
    for (double rho : grid) sspace::validate(sspace::ProjectionSpec{rho});
    sspace::ProjectionPlan plan(subspace_source->ckpt, task_update->ckpt, to_mode(mode), to_filter(layers), seed);
    std::vector<sspace::ProjectionReport> runs;
    for (double rho : grid) runs.push_back(plan.measure(rho));
    *report = make_report(sspace::projection_runs_json(runs, true), sspace::projection_runs_csv(runs, true));
  });
}

sspace_status sspace_weight_mso(const sspace_checkpoint* const* deltas, const char* const* labels, size_t count,
                                const char* layers, const double* etas, size_t eta_count, sspace_report** report) {
  return guarded([&] {
    require(deltas && labels && report, "null argument");
    std::vector<std::pair<std::string, sspace::DeltaModel>> inputs;
    for (size_t i = 0; i < count; ++i) {
      require(deltas[i] && labels[i], "null delta or label");
      inputs.emplace_back(labels[i], deltas[i]->ckpt);
    }
    const auto rep = sspace::pairwise_weight_mso(inputs, to_filter(layers), to_vector(etas, eta_count));
    *report = make_report(sspace::pairwise_report_json(rep), sspace::pairwise_report_csv(rep));
  });
}

sspace_status sspace_matrix_mso(const double* v, size_t d, size_t n_v, const double* w, size_t n_w, double eta,
                                double* mso, double* baseline, size_t* k_v, size_t* k_w) {
  return guarded([&] {
    require(v && w && mso, "null argument");
    using RowMajor = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
    const Eigen::MatrixXd mv = Eigen::Map<const RowMajor>(v, static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(n_v));
    const Eigen::MatrixXd mw = Eigen::Map<const RowMajor>(w, static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(n_w));
    const auto r = sspace::mso(mv, mw, eta);
    *mso = r.mso;
    if (baseline) *baseline = r.baseline;
    if (k_v) *k_v = static_cast<size_t>(r.k_v);
    if (k_w) *k_w = static_cast<size_t>(r.k_w);
  });
}

sspace_status sspace_activation_mso(const char* path_a, const char* path_b, const double* etas, size_t eta_count,
                                    double band_low_pct, double band_high_pct, int center, sspace_report** report) {
  return guarded([&] {
    require(path_a && path_b && report, "null argument");
    const auto a = sspace::load_activation_set(path_a);
    const auto b = sspace::load_activation_set(path_b);
    const auto rep = sspace::activation_mso(a, b, to_vector(etas, eta_count), {band_low_pct, band_high_pct}, center != 0);
    *report = make_report(sspace::activation_report_json(rep), sspace::activation_report_csv(rep));
  });
}

sspace_status sspace_synth_model(const sspace_synth_spec* spec, sspace_checkpoint** base, sspace_checkpoint** aligned,
                                 sspace_checkpoint** finetuned, sspace_report** truth) {
  return guarded([&] {
    require(spec && base && aligned && finetuned, "null argument");
    sspace::SynthSpec s{spec->rows, spec->cols, spec->planted_k, spec->in_energy, spec->seed,
                        static_cast<long>(spec->layer_count), spec->include_vectors != 0};
    auto model = sspace::synth_model(s);
    std::unique_ptr<sspace_report> rep;
    if (truth) rep.reset(make_report(sspace::synth_truth_json(model), sspace::synth_truth_csv(model)));
    *base = wrap(std::move(model.base));
    *aligned = wrap(std::move(model.aligned));
    *finetuned = wrap(std::move(model.finetuned));
    if (truth) *truth = rep.release();
  });
}

sspace_status sspace_synth_activations(int planted, int64_t layer_count, int64_t n, int64_t d, int64_t shared_dim,
                                       uint64_t seed, sspace_checkpoint** set_a, sspace_checkpoint** set_b) {
  return guarded([&] {
    require(set_a && set_b, "null argument");
    require(layer_count >= 1 && n >= 2 && d >= 1, "activation fixtures need layer_count >= 1, n >= 2, d >= 1");
    std::pair<sspace::ActivationSet, sspace::ActivationSet> sets;
    if (planted) {
      sspace::PlantedActivationSpec spec{static_cast<long>(layer_count), n, d, shared_dim, 0.01, seed};
      sets = sspace::planted_activation_sets(spec);
    } else {
      sets.first = sspace::gaussian_activation_set("gaussian_a", static_cast<long>(layer_count), n, d, seed);
      sets.second = sspace::gaussian_activation_set("gaussian_b", static_cast<long>(layer_count), n, d, seed);
    }
    auto a = std::make_unique<sspace_checkpoint>(sspace::activation_set_to_checkpoint(sets.first, sspace::DType::F32));
    auto b = std::make_unique<sspace_checkpoint>(sspace::activation_set_to_checkpoint(sets.second, sspace::DType::F32));
    *set_a = a.release();
    *set_b = b.release();
  });
}

const char* sspace_report_json(const sspace_report* report) { return report ? report->json.c_str() : ""; }

const char* sspace_report_csv(const sspace_report* report) { return report ? report->csv.c_str() : ""; }

void sspace_report_free(sspace_report* report) { delete report; }

}  // extern "C"
