#include "report.hpp"

#include <charconv>
#include <cmath>
#include <sstream>

namespace sspace {

std::string format_number(double value) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, value);
  return std::string(buf, end);
}

namespace {

template <class T>
Json opt(const std::optional<T>& v) {
  return v ? Json(*v) : Json(nullptr);
}

std::string opt_csv(const std::optional<double>& v) { return v ? format_number(*v) : std::string{}; }
std::string opt_csv(const std::optional<long>& v) { return v ? std::to_string(*v) : std::string{}; }

// Quotes a CSV field only when it needs it.
std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

Json spec_json(const ProjectionSpec& spec, bool energy_only) {
  Json j;
  j["rho"] = spec.rho;
  j["mode"] = basis_mode_name(spec.mode);
  if (!energy_only) j["scheme"] = scheme_name(spec.scheme);
  j["layers"] = format_layer_filter(spec.layers);
  j["seed"] = spec.seed;
  return j;
}

Json mso_json(const MsoResult& r) {
  Json j;
  j["eta"] = r.eta;
  j["k_v"] = r.k_v;
  j["k_w"] = r.k_w;
  j["d"] = r.d;
  j["mso"] = r.mso;
  j["baseline"] = r.baseline;
  return j;
}

Json projection_json_impl(const ProjectionReport& report, bool energy_only) {
  Json j;
  j["spec"] = spec_json(report.spec, energy_only);
  j["source_provenance"] = report.source_provenance;
  j["task_provenance"] = report.task_provenance;
  j["global_energy"] = opt(report.global_energy);
  j["global_energy_perp"] = opt(report.global_energy_perp);
  Json tensors = Json::array();
  for (const auto& t : report.tensors) {
    Json row;
    row["name"] = t.name;
    row["layer"] = opt(t.layer);
    row["M"] = t.rows;
    row["N"] = t.cols;
    row["k"] = t.k;
    row["E_k"] = opt(t.energy);
    row["E_k_perp"] = opt(t.energy_perp);
    row["skipped"] = t.skipped();
    row["skip_reason"] = skip_reason_name(t.skip);
    tensors.push_back(std::move(row));
  }
  j["tensors"] = std::move(tensors);
  return j;
}

}  // namespace

Json projection_report_json(const ProjectionReport& report) { return projection_json_impl(report, false); }

Json projection_runs_json(const std::vector<ProjectionReport>& runs, bool energy_only) {
  Json j;
  j["kind"] = energy_only ? "energy" : "project";
  Json arr = Json::array();
  for (const auto& r : runs) arr.push_back(projection_json_impl(r, energy_only));
  j["runs"] = std::move(arr);
  return j;
}

std::string projection_runs_csv(const std::vector<ProjectionReport>& runs, bool energy_only) {
  std::ostringstream out;
  out << "rho," << (energy_only ? "" : "scheme,") << "mode,tensor,layer,M,N,k,E_k,E_k_perp,skipped,skip_reason\n";
  for (const auto& r : runs) {
    for (const auto& t : r.tensors) {
      out << format_number(r.spec.rho) << ',';
      if (!energy_only) out << scheme_name(r.spec.scheme) << ',';
      out << basis_mode_name(r.spec.mode) << ',' << csv_field(t.name) << ',' << opt_csv(t.layer) << ',' << t.rows
          << ',' << t.cols << ',' << t.k << ',' << opt_csv(t.energy) << ',' << opt_csv(t.energy_perp) << ','
          << (t.skipped() ? "true" : "false") << ',' << skip_reason_name(t.skip) << '\n';
    }
  }
  return out.str();
}

Json pairwise_report_json(const PairwiseReport& report) {
  Json j;
  j["kind"] = "mso";
  j["labels"] = report.labels;
  j["provenance"] = report.provenance;
  j["layers"] = format_layer_filter(report.layers);
  j["eta_grid"] = report.eta_grid;
  Json rows = Json::array();
  for (const auto& r : report.rows) {
    Json row;
    row["pair"] = r.pair;
    row["tensor"] = r.tensor;
    row["layer"] = opt(r.layer);
    row.update(mso_json(r.result));
    rows.push_back(std::move(row));
  }
  j["rows"] = std::move(rows);
  Json means = Json::array();
  for (const auto& m : report.layer_means) {
    Json row;
    row["pair"] = m.pair;
    row["layer"] = opt(m.layer);
    row["eta"] = m.eta;
    row["mean_mso"] = m.mean_mso;
    row["mean_baseline"] = m.mean_baseline;
    row["tensor_count"] = m.tensor_count;
    means.push_back(std::move(row));
  }
  j["layer_means"] = std::move(means);
  return j;
}

std::string pairwise_report_csv(const PairwiseReport& report) {
  std::ostringstream out;
  out << "pair,tensor,layer,eta,k_v,k_w,d,mso,baseline\n";
  for (const auto& r : report.rows) {
    const auto& m = r.result;
    out << csv_field(r.pair) << ',' << csv_field(r.tensor) << ',' << opt_csv(r.layer) << ',' << format_number(m.eta)
        << ',' << m.k_v << ',' << m.k_w << ',' << m.d << ',' << format_number(m.mso) << ','
        << format_number(m.baseline) << '\n';
  }
  return out.str();
}

Json activation_report_json(const ActivationMsoReport& report) {
  Json j;
  j["kind"] = "act-mso";
  j["set_a"] = report.set_a;
  j["set_b"] = report.set_b;
  j["token_policy_a"] = report.policy_a;
  j["token_policy_b"] = report.policy_b;
  j["depth_band"] = {report.band.low_pct, report.band.high_pct};
  j["centered"] = report.centered;
  j["eta_grid"] = report.eta_grid;
  Json layers = Json::array();
  for (const auto& r : report.layers) {
    Json row;
    row["layer"] = r.layer;
    row["depth_pct"] = r.depth_pct;
    row.update(mso_json(r.result));
    layers.push_back(std::move(row));
  }
  j["layers"] = std::move(layers);
  Json band = Json::array();
  for (const auto& b : report.band_rows) {
    Json row;
    row["eta"] = b.eta;
    row["mean_mso"] = b.mean_mso;
    row["mean_baseline"] = b.mean_baseline;
    row["layers"] = b.layers;
    band.push_back(std::move(row));
  }
  j["band"] = std::move(band);
  return j;
}

std::string activation_report_csv(const ActivationMsoReport& report) {
  std::ostringstream out;
  out << "layer,depth_pct,eta,k_a,k_b,d,mso,baseline\n";
  for (const auto& r : report.layers) {
    const auto& m = r.result;
    out << r.layer << ',' << format_number(r.depth_pct) << ',' << format_number(m.eta) << ',' << m.k_v << ','
        << m.k_w << ',' << m.d << ',' << format_number(m.mso) << ',' << format_number(m.baseline) << '\n';
  }
  return out.str();
}

Json delta_summary_json(const DeltaModel& delta) {
  Json j;
  j["kind"] = "delta";
  j["provenance"] = delta.provenance();
  Json tensors = Json::array();
  for (const auto& [name, t] : delta) {
    double norm2 = 0.0;
    for (std::size_t i = 0; i < t.numel(); ++i) norm2 += t.at(i) * t.at(i);
    Json row;
    row["name"] = name;
    row["layer"] = opt(layer_index_of(name));
    row["shape"] = t.shape();
    row["dtype"] = dtype_name(t.dtype());
    row["frobenius"] = std::sqrt(norm2);
    tensors.push_back(std::move(row));
  }
  j["tensors"] = std::move(tensors);
  return j;
}

std::string delta_summary_csv(const DeltaModel& delta) {
  std::ostringstream out;
  out << "tensor,layer,shape,dtype,frobenius\n";
  for (const auto& [name, t] : delta) {
    double norm2 = 0.0;
    for (std::size_t i = 0; i < t.numel(); ++i) norm2 += t.at(i) * t.at(i);
    std::string shape;
    for (auto d : t.shape()) shape += (shape.empty() ? "" : "x") + std::to_string(d);
    out << csv_field(name) << ',' << opt_csv(layer_index_of(name)) << ',' << shape << ',' << dtype_name(t.dtype())
        << ',' << format_number(std::sqrt(norm2)) << '\n';
  }
  return out.str();
}

Json synth_truth_json(const SynthModel& model) {
  Json j;
  j["kind"] = "synth";
  j["spec"] = {{"rows", model.spec.rows},
               {"cols", model.spec.cols},
               {"planted_k", model.spec.planted_k},
               {"in_energy", model.spec.in_energy},
               {"seed", model.spec.seed},
               {"layer_count", model.spec.layer_count}};
  Json tensors = Json::array();
  for (const auto& t : model.truth) {
    tensors.push_back({{"name", t.name},
                       {"layer", t.layer},
                       {"M", t.rows},
                       {"N", t.cols},
                       {"planted_k", t.planted_k},
                       {"planted_rho", t.planted_rho},
                       {"in_energy", t.in_energy}});
  }
  j["truth"] = std::move(tensors);
  return j;
}

std::string synth_truth_csv(const SynthModel& model) {
  std::ostringstream out;
  out << "tensor,layer,M,N,planted_k,planted_rho,in_energy\n";
  for (const auto& t : model.truth) {
    out << csv_field(t.name) << ',' << t.layer << ',' << t.rows << ',' << t.cols << ',' << t.planted_k << ','
        << format_number(t.planted_rho) << ',' << format_number(t.in_energy) << '\n';
  }
  return out.str();
}

}  // namespace sspace
