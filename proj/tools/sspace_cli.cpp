// sspace command-line front end. Talks to the analysis core only through the
// C API in sspace/sspace.h.

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "sspace/sspace.h"

namespace fs = std::filesystem;
using Json = nlohmann::ordered_json;

namespace {

enum ExitCode { kOk = 0, kInternal = 1, kUsage = 2, kIo = 3, kNumeric = 4 };

struct CliError {
  std::string kind;
  int exit_code;
  std::string message;
};

[[noreturn]] void usage_error(const std::string& message) { throw CliError{"usage", kUsage, message}; }

void check(sspace_status status) {
  if (status == SSPACE_OK) return;
  int code = kInternal;
  switch (status) {
    case SSPACE_ERR_USAGE:
    case SSPACE_ERR_MISMATCH: code = kUsage; break;
    case SSPACE_ERR_IO:
    case SSPACE_ERR_FORMAT: code = kIo; break;
    case SSPACE_ERR_NUMERIC: code = kNumeric; break;
    default: break;
  }
  throw CliError{sspace_status_name(status), code, sspace_last_error()};
}

struct CheckpointDeleter {
  void operator()(sspace_checkpoint* c) const { sspace_checkpoint_free(c); }
};
struct ReportDeleter {
  void operator()(sspace_report* r) const { sspace_report_free(r); }
};
using CheckpointPtr = std::unique_ptr<sspace_checkpoint, CheckpointDeleter>;
using ReportPtr = std::unique_ptr<sspace_report, ReportDeleter>;

CheckpointPtr load(const std::string& path) {
  if (!fs::exists(path)) throw CliError{"io", kIo, "no such file: " + path};
  sspace_checkpoint* raw = nullptr;
  check(sspace_checkpoint_read(path.c_str(), &raw));
  return CheckpointPtr(raw);
}

void save(const sspace_checkpoint* ckpt, const std::string& path) { check(sspace_checkpoint_write(ckpt, path.c_str())); }

// "start:stop:step" or "a,b,c"; values strictly increasing in (0, 1].
std::vector<double> parse_grid(const std::string& text, const std::string& what) {
  std::vector<double> out;
  auto number = [&](const std::string& s) {
    try {
      std::size_t used = 0;
      const double v = std::stod(s, &used);
      if (used != s.size()) throw std::invalid_argument(s);
      return v;
    } catch (const std::exception&) {
      usage_error("bad number '" + s + "' in " + what);
    }
  };
  if (text.find(':') != std::string::npos) {
    std::vector<std::string> parts;
    std::stringstream ss(text);
    for (std::string p; std::getline(ss, p, ':');) parts.push_back(p);
    if (parts.size() != 3) usage_error(what + " range must be start:stop:step");
    const double start = number(parts[0]), stop = number(parts[1]), step = number(parts[2]);
    if (!(step > 0.0)) usage_error(what + " step must be positive");
    for (long i = 0;; ++i) {
      const double v = std::round((start + static_cast<double>(i) * step) * 1e12) / 1e12;
      if (v > stop + 1e-12) break;
      out.push_back(v);
    }
  } else {
    std::stringstream ss(text);
    for (std::string p; std::getline(ss, p, ',');) out.push_back(number(p));
  }
  if (out.empty()) usage_error(what + " is empty");
  for (std::size_t i = 0; i < out.size(); ++i) {
    if (!(out[i] > 0.0 && out[i] <= 1.0)) usage_error(what + " values must lie in (0, 1]");
    if (i > 0 && !(out[i] > out[i - 1])) usage_error(what + " must be strictly increasing");
  }
  return out;
}

const char* kDefaultRhoGrid = "0.01,0.25,0.50,0.75,0.99";
const char* kDefaultEtaGrid = "0.1:0.9:0.1";

sspace_basis_mode parse_mode(const std::string& s) {
  if (s == "topk") return SSPACE_BASIS_TOPK;
  if (s == "randomk") return SSPACE_BASIS_RANDOMK;
  if (s == "random") return SSPACE_BASIS_RANDOM;
  usage_error("unknown --mode '" + s + "'");
}

sspace_scheme parse_scheme(const std::string& s) {
  if (s == "parallel") return SSPACE_SCHEME_PARALLEL;
  if (s == "orthogonal") return SSPACE_SCHEME_ORTHOGONAL;
  usage_error("unknown --scheme '" + s + "'");
}

std::string label_for(const sspace_checkpoint* ckpt, const std::string& path) {
  const std::string tag = sspace_checkpoint_provenance(ckpt);
  return tag.empty() ? fs::path(path).filename().string() : tag;
}

std::string format_rho(double rho) {
  std::ostringstream s;
  s << rho;
  return s.str();
}

// out.safetensors -> out.rho0.25.safetensors
std::string grid_output_path(const std::string& out, double rho) {
  fs::path p(out);
  const auto ext = p.extension().string();
  p.replace_extension();
  return p.string() + ".rho" + format_rho(rho) + ext;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw CliError{"io", kIo, "cannot open '" + path.string() + "' for writing"};
  f << text;
  if (!f) throw CliError{"io", kIo, "write to '" + path.string() + "' failed"};
}

// Inserts the resolved invocation after the schema/tool header and writes
// JSON (to `path`, or stdout) plus CSV next to it.
void emit_report(const sspace_report* report, const Json& config, const std::string& path) {
  Json body = Json::parse(sspace_report_json(report));
  Json doc;
  for (const auto& [k, v] : body.items()) {
    doc[k] = v;
    if (k == "tool") doc["config"] = config;
  }
  const std::string json_text = doc.dump(2) + "\n";
  if (path.empty() || path == "-") {
    std::cout << json_text;
    return;
  }
  write_text(path, json_text);
  fs::path csv(path);
  csv.replace_extension(".csv");
  if (csv == fs::path(path)) csv += ".csv";
  write_text(csv, sspace_report_csv(report));
}

struct Options {
  unsigned threads = 0;
  // shared
  std::string report;
  std::string out;
  std::uint64_t seed = 0;
  std::string layers = "all";
  // delta
  std::string model, base;
  bool negate = false;
  // project / energy
  std::string subspace_source, task_update;
  std::optional<double> rho;
  std::string rho_grid;
  std::string mode = "topk";
  std::string scheme = "parallel";
  // mso / act-mso
  std::string a, b;
  std::vector<std::string> inputs;
  std::optional<double> eta;
  std::string eta_grid;
  std::string depth_band = "65:90";
  bool center = false;
  // synth
  std::string kind = "model";
  std::int64_t rows = 32, cols = 32, planted_k = 8, layer_count = 4;
  double in_energy = 0.7;
  bool no_vectors = false;
  std::int64_t n = 200, d = 64, shared_dim = 4;
  bool planted = false;
};

int run_delta(const Options& o) {
  auto model = load(o.model);
  auto base = load(o.base);
  sspace_checkpoint* raw = nullptr;
  check(sspace_delta_compute(model.get(), base.get(), label_for(model.get(), o.model).c_str(),
                             label_for(base.get(), o.base).c_str(), &raw));
  CheckpointPtr delta(raw);
  if (o.negate) {
    check(sspace_delta_negate(delta.get(), &raw));
    delta.reset(raw);
  }
  save(delta.get(), o.out);
  sspace_report* rep = nullptr;
  check(sspace_delta_summary(delta.get(), &rep));
  ReportPtr report(rep);
  Json config{{"subcommand", "delta"}, {"model", o.model}, {"base", o.base}, {"negate", o.negate}, {"out", o.out}};
  emit_report(report.get(), config, o.report);
  return kOk;
}

std::vector<double> rho_values(const Options& o) {
  if (o.rho && !o.rho_grid.empty()) usage_error("--rho and --rho-grid are mutually exclusive");
  if (o.rho) {
    if (!(*o.rho > 0.0 && *o.rho <= 1.0)) usage_error("--rho must lie in (0, 1]");
    return {*o.rho};
  }
  return parse_grid(o.rho_grid.empty() ? kDefaultRhoGrid : o.rho_grid, "--rho-grid");
}

std::vector<double> eta_values(const Options& o) {
  if (o.eta && !o.eta_grid.empty()) usage_error("--eta and --eta-grid are mutually exclusive");
  if (o.eta) {
    if (!(*o.eta > 0.0 && *o.eta <= 1.0)) usage_error("--eta must lie in (0, 1]");
    return {*o.eta};
  }
  return parse_grid(o.eta_grid.empty() ? kDefaultEtaGrid : o.eta_grid, "--eta-grid");
}

int run_project(const Options& o) {
  const auto rhos = rho_values(o);
  const auto mode = parse_mode(o.mode);
  const auto scheme = parse_scheme(o.scheme);
  if (o.out.empty()) usage_error("--out is required");
  auto source = load(o.subspace_source);
  auto task = load(o.task_update);
  auto base = load(o.base);

  sspace_projection_spec spec{rhos.front(), mode, scheme, o.layers.c_str(), o.seed};
  std::vector<sspace_checkpoint*> outputs(rhos.size(), nullptr);
  sspace_report* rep = nullptr;
  check(sspace_project(source.get(), task.get(), base.get(), &spec, rhos.data(), rhos.size(), outputs.data(), &rep));
  ReportPtr report(rep);
  std::vector<CheckpointPtr> owned;
  for (auto* c : outputs) owned.emplace_back(c);

  Json written = Json::array();
  for (std::size_t i = 0; i < rhos.size(); ++i) {
    const std::string path = o.rho ? o.out : grid_output_path(o.out, rhos[i]);
    save(owned[i].get(), path);
    written.push_back(path);
  }
  Json config{{"subcommand", "project"}, {"subspace_source", o.subspace_source}, {"task_update", o.task_update},
              {"base", o.base},          {"rho", rhos},                         {"mode", o.mode},
              {"scheme", o.scheme},      {"layers", o.layers},                  {"seed", o.seed},
              {"out", written}};
  emit_report(report.get(), config, o.report);
  return kOk;
}

int run_energy(const Options& o) {
  const auto rhos = rho_values(o);
  const auto mode = parse_mode(o.mode);
  auto source = load(o.subspace_source);
  auto task = load(o.task_update);
  sspace_report* rep = nullptr;
  check(sspace_energy(source.get(), task.get(), mode, o.layers.c_str(), o.seed, rhos.data(), rhos.size(), &rep));
  ReportPtr report(rep);
  Json config{{"subcommand", "energy"}, {"subspace_source", o.subspace_source}, {"task_update", o.task_update},
              {"rho", rhos},           {"mode", o.mode},                      {"layers", o.layers},
              {"seed", o.seed}};
  emit_report(report.get(), config, o.report);
  return kOk;
}

int run_mso(const Options& o) {
  const auto etas = eta_values(o);
  std::vector<std::pair<std::string, std::string>> labeled;
  if (!o.a.empty()) labeled.emplace_back("a", o.a);
  if (!o.b.empty()) labeled.emplace_back("b", o.b);
  for (const auto& item : o.inputs) {
    const auto eq = item.find('=');
    if (eq == std::string::npos || eq == 0) usage_error("--input expects LABEL=PATH, got '" + item + "'");
    labeled.emplace_back(item.substr(0, eq), item.substr(eq + 1));
  }
  if (labeled.size() < 2) usage_error("mso needs at least two inputs (--a/--b or --input LABEL=PATH)");

  std::vector<CheckpointPtr> deltas;
  std::vector<const sspace_checkpoint*> handles;
  std::vector<const char*> labels;
  for (const auto& [label, path] : labeled) {
    deltas.push_back(load(path));
    handles.push_back(deltas.back().get());
    labels.push_back(label.c_str());
  }
  sspace_report* rep = nullptr;
  check(sspace_weight_mso(handles.data(), labels.data(), handles.size(), o.layers.c_str(), etas.data(), etas.size(),
                          &rep));
  ReportPtr report(rep);
  Json inputs = Json::object();
  for (const auto& [label, path] : labeled) inputs[label] = path;
  Json config{{"subcommand", "mso"}, {"inputs", inputs}, {"eta", etas}, {"layers", o.layers}};
  emit_report(report.get(), config, o.report);
  return kOk;
}

int run_act_mso(const Options& o) {
  const auto etas = eta_values(o);
  const auto colon = o.depth_band.find(':');
  if (colon == std::string::npos) usage_error("--depth-band must be LO:HI");
  double lo = 0, hi = 0;
  try {
    lo = std::stod(o.depth_band.substr(0, colon));
    hi = std::stod(o.depth_band.substr(colon + 1));
  } catch (const std::exception&) {
    usage_error("--depth-band must be LO:HI");
  }
  for (const auto& p : {o.a, o.b})
    if (!fs::exists(p)) throw CliError{"io", kIo, "no such file: " + p};
  sspace_report* rep = nullptr;
  check(sspace_activation_mso(o.a.c_str(), o.b.c_str(), etas.data(), etas.size(), lo, hi, o.center ? 1 : 0, &rep));
  ReportPtr report(rep);
  Json config{{"subcommand", "act-mso"}, {"a", o.a},           {"b", o.b},
              {"eta", etas},             {"depth_band", {lo, hi}}, {"center", o.center}};
  emit_report(report.get(), config, o.report);
  return kOk;
}

int run_synth(const Options& o) {
  if (o.out.empty()) usage_error("--out DIR is required");
  std::error_code ec;
  fs::create_directories(o.out, ec);
  if (ec) throw CliError{"io", kIo, "cannot create directory '" + o.out + "'"};
  const fs::path dir(o.out);

  if (o.kind == "activations") {
    sspace_checkpoint *a = nullptr, *b = nullptr;
    check(sspace_synth_activations(o.planted ? 1 : 0, o.layer_count, o.n, o.d, o.shared_dim, o.seed, &a, &b));
    CheckpointPtr set_a(a), set_b(b);
    save(set_a.get(), (dir / "a.safetensors").string());
    save(set_b.get(), (dir / "b.safetensors").string());
    return kOk;
  }
  if (o.kind != "model") usage_error("--kind must be model or activations");

  sspace_synth_spec spec{o.rows, o.cols, o.planted_k, o.in_energy, o.seed, o.layer_count, o.no_vectors ? 0 : 1};
  sspace_checkpoint *w0 = nullptr, *wa = nullptr, *wft = nullptr;
  sspace_report* rep = nullptr;
  check(sspace_synth_model(&spec, &w0, &wa, &wft, &rep));
  CheckpointPtr base(w0), aligned(wa), finetuned(wft);
  ReportPtr truth(rep);
  save(base.get(), (dir / "base.safetensors").string());
  save(aligned.get(), (dir / "aligned.safetensors").string());
  save(finetuned.get(), (dir / "finetuned.safetensors").string());
  Json config{{"subcommand", "synth"}, {"rows", o.rows},           {"cols", o.cols},
              {"planted_k", o.planted_k}, {"in_energy", o.in_energy}, {"layer_count", o.layer_count},
              {"seed", o.seed},           {"vectors", !o.no_vectors}};
  emit_report(truth.get(), config, o.report.empty() ? (dir / "truth.json").string() : o.report);
  return kOk;
}

void print_error(const CliError& e) {
  Json line{{"error", e.kind}, {"exit", e.exit_code}, {"message", e.message}};
  std::cerr << line.dump() << std::endl;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"sspace: weight-delta subspace projection and Mode Subspace Overlap analysis"};
  app.require_subcommand(1);
  app.fallthrough();
  Options o;
  app.add_option("--threads", o.threads, "Worker threads (default: SSPACE_THREADS or all cores)");

  auto* delta = app.add_subcommand("delta", "Write the f64 difference model - base");
  delta->add_option("--model", o.model, "Minuend checkpoint")->required();
  delta->add_option("--base", o.base, "Subtrahend checkpoint")->required();
  delta->add_option("--out", o.out, "Output delta checkpoint")->required();
  delta->add_flag("--negate", o.negate, "Write base - model instead");
  delta->add_option("--report", o.report, "Report path (JSON; CSV written alongside)");

  auto add_projection_flags = [&](CLI::App* cmd) {
    cmd->add_option("--subspace-source", o.subspace_source, "Delta whose SVD defines the subspace")->required();
    cmd->add_option("--task-update", o.task_update, "Task delta to project")->required();
    cmd->add_option("--rho", o.rho, "Fractional rank in (0, 1]");
    cmd->add_option("--rho-grid", o.rho_grid, "start:stop:step or comma list");
    cmd->add_option("--mode", o.mode, "topk | randomk | random");
    cmd->add_option("--layers", o.layers, "all | <csv indices> | p<csv percentiles>");
    cmd->add_option("--seed", o.seed, "Master seed for randomized modes");
    cmd->add_option("--report", o.report, "Report path (JSON; CSV written alongside)");
  };
  auto* project = app.add_subcommand("project", "Project a task update onto or away from a delta subspace");
  add_projection_flags(project);
  project->add_option("--base", o.base, "Checkpoint the task update was trained from")->required();
  project->add_option("--scheme", o.scheme, "parallel | orthogonal");
  project->add_option("--out", o.out, "Projected checkpoint (grid runs insert .rho<value>)")->required();

  auto* energy = app.add_subcommand("energy", "Energy-kept ratios over a rho grid");
  add_projection_flags(energy);

  auto* mso = app.add_subcommand("mso", "Pairwise Mode Subspace Overlap of weight deltas");
  mso->add_option("--a", o.a, "First delta (label a)");
  mso->add_option("--b", o.b, "Second delta (label b)");
  mso->add_option("--input", o.inputs, "Additional LABEL=PATH deltas");
  mso->add_option("--eta", o.eta, "Single energy fraction");
  mso->add_option("--eta-grid", o.eta_grid, "start:stop:step or comma list");
  mso->add_option("--layers", o.layers, "all | <csv indices> | p<csv percentiles>");
  mso->add_option("--report", o.report, "Report path (JSON; CSV written alongside)");

  auto* act = app.add_subcommand("act-mso", "Activation-space MSO between two prompt sets");
  act->add_option("--a", o.a, "Activation file A")->required();
  act->add_option("--b", o.b, "Activation file B")->required();
  act->add_option("--eta", o.eta, "Single energy fraction");
  act->add_option("--eta-grid", o.eta_grid, "start:stop:step or comma list");
  act->add_option("--depth-band", o.depth_band, "LO:HI depth percentiles (default 65:90)");
  act->add_flag("--center", o.center, "Subtract per-layer means first");
  act->add_option("--report", o.report, "Report path (JSON; CSV written alongside)");

  auto* synth = app.add_subcommand("synth", "Write planted-subspace fixtures");
  synth->add_option("--out", o.out, "Output directory")->required();
  synth->add_option("--kind", o.kind, "model | activations");
  synth->add_option("--rows", o.rows, "Rows per weight matrix");
  synth->add_option("--cols", o.cols, "Columns per weight matrix");
  synth->add_option("--planted-k", o.planted_k, "Planted subspace rank");
  synth->add_option("--in-energy", o.in_energy, "Task energy fraction inside the planted subspace");
  synth->add_option("--layer-count", o.layer_count, "Number of layers");
  synth->add_flag("--no-vectors", o.no_vectors, "Omit rank-1 norm tensors");
  synth->add_option("--n", o.n, "Prompts per activation set");
  synth->add_option("--d", o.d, "Hidden size of activation sets");
  synth->add_option("--shared-dim", o.shared_dim, "Shared modes for planted activation sets");
  synth->add_flag("--planted", o.planted, "Planted shared-mode activation sets instead of Gaussian");
  synth->add_option("--seed", o.seed, "Seed");
  synth->add_option("--report", o.report, "Truth report path (default <out>/truth.json)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);
    print_error({"usage", kUsage, e.what()});
    return kUsage;
  }

  try {
    if (o.threads > 0) sspace_set_threads(o.threads);
    if (*delta) return run_delta(o);
    if (*project) return run_project(o);
    if (*energy) return run_energy(o);
    if (*mso) return run_mso(o);
    if (*act) return run_act_mso(o);
    if (*synth) return run_synth(o);
  } catch (const CliError& e) {
    print_error(e);
    return e.exit_code;
  } catch (const std::exception& e) {
    print_error({"internal", kInternal, e.what()});
    return kInternal;
  }
  return kUsage;
}
