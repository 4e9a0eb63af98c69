// Acceptance suite: one PASS/FAIL line per criterion, exit status 1 if any fail.

#include <array>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <random>
#include <sstream>
#include <string>
#include <sys/wait.h>
#include <vector>

#include <json.hpp>

#include "activation.hpp"
#include "delta.hpp"
#include "mso.hpp"
#include "oracles.hpp"
#include "scheme.hpp"
#include "subspace.hpp"
#include "synth.hpp"
#include "tensor_store.hpp"

namespace fs = std::filesystem;
using namespace sspace;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

struct Outcome {
  bool pass = true;
  std::string detail;
};

// Tracks the worst observed value of a metric against its tolerance.
struct Worst {
  std::string label;
  double tolerance;
  double value = 0.0;
  void see(double v) { value = std::max(value, v); }
  bool ok() const { return value <= tolerance; }
  std::string str() const {
    std::ostringstream s;
    s << label << "=" << value << (ok() ? "<=" : ">") << tolerance;
    return s.str();
  }
};

std::string read_file(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  std::stringstream s;
  s << f.rdbuf();
  return s.str();
}

int run_cli(const std::string& args, const fs::path& dir) {
  const std::string cmd = "cd '" + dir.string() + "' && '" + SSPACE_CLI_PATH + "' " + args + " >/dev/null";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

Outcome projector_algebra() {
  const auto t0 = Clock::now();
  Worst complement{"complement", 1e-11}, idem{"idempotency", 1e-10}, sum{"E+Eperp", 1e-12},
      pyth{"pythagoras", 1e-10};
  const std::array<std::pair<int, int>, 3> shapes{{{64, 48}, {48, 64}, {32, 32}}};
  const std::array<double, 5> rhos{0.01, 0.25, 0.50, 0.75, 0.99};
  int cases = 0;
  for (auto [m, n] : shapes) {
    for (std::uint64_t pair = 0; pair < 50; ++pair) {
      const std::uint64_t seed = 1000 * static_cast<std::uint64_t>(m) + pair;
      const Eigen::MatrixXd src = gaussian_matrix(m, n, derive_stream_seed(seed, "source"));
      const Eigen::MatrixXd d = gaussian_matrix(m, n, derive_stream_seed(seed, "task"));
      const auto f = thin_svd(src);
      for (double rho : rhos) {
        const Eigen::Index k = rank_from_rho(rho, m, n);
        for (auto mode : {BasisMode::TopK, BasisMode::RandomK, BasisMode::Random}) {
          const auto basis = select_basis(mode == BasisMode::Random ? nullptr : &f, mode, k, seed, m, n);
          const Eigen::MatrixXd par = project_parallel(basis, d);
          const Eigen::MatrixXd orth = project_orthogonal(basis, d);
          complement.see((par + orth - d).norm() / d.norm());
          idem.see((project_parallel(basis, par) - par).norm() / std::max(par.norm(), 1e-300));
          const auto e = energy_kept(basis, d);
          sum.see(std::abs(e.kept + e.kept_perp - 1.0));
          pyth.see(std::abs(d.squaredNorm() - par.squaredNorm() - orth.squaredNorm()) / d.squaredNorm());
          ++cases;
        }
      }
    }
  }
  const double secs = seconds_since(t0);
  Outcome o;
  o.pass = complement.ok() && idem.ok() && sum.ok() && pyth.ok() && secs < 30.0;
  std::ostringstream s;
  s << cases << " cases; " << complement.str() << " " << idem.str() << " " << sum.str() << " " << pyth.str()
    << " time=" << secs << "s<30s";
  o.detail = s.str();
  return o;
}

Outcome planted_energy() {
  Worst err{"max|E_k-truth|", 1e-8};
  for (double e : {0.0, 0.3, 0.7, 1.0}) {
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
      SynthSpec spec;
      spec.in_energy = e;
      spec.seed = seed;
      const auto p = planted_update(spec);
      const auto f = thin_svd(p.source);
      const auto b = select_basis(&f, BasisMode::TopK, spec.planted_k, std::nullopt, spec.rows, spec.cols);
      err.see(std::abs(energy_kept(b, p.task.values).kept - e));

      const auto model = synth_model(spec);
      ProjectionSpec ps;
      ps.rho = 0.25;
      const auto rep = apply_scheme(compute_delta(model.aligned, model.base),
                                    compute_delta(model.finetuned, model.aligned), model.aligned, ps)
                           .second;
      for (const auto& t : rep.tensors)
        if (t.energy) err.see(std::abs(*t.energy - e));
      err.see(std::abs(*rep.global_energy - e));
    }
  }
  return {err.ok(), "in_energy in {0,0.3,0.7,1}, 5 seeds, matrix and model paths; " + err.str()};
}

Outcome energy_linearity() {
  const int m = 200, seeds = 20;
  const std::array<double, 5> rhos{0.01, 0.25, 0.50, 0.75, 0.99};
  std::array<std::array<double, 5>, 3> mean{};
  for (int seed = 0; seed < seeds; ++seed) {
    const auto us = static_cast<std::uint64_t>(seed);
    const Eigen::MatrixXd src = gaussian_matrix(m, m, derive_stream_seed(us, "lin/source"));
    const Eigen::MatrixXd task = gaussian_matrix(m, m, derive_stream_seed(us, "lin/task"));
    const auto f = thin_svd(src, false);
    for (std::size_t r = 0; r < rhos.size(); ++r) {
      const Eigen::Index k = rank_from_rho(rhos[r], m, m);
      const auto top = select_basis(&f, BasisMode::TopK, k, us, m, m);
      const auto rk = select_basis(&f, BasisMode::RandomK, k, us, m, m);
      const auto rnd = select_basis(nullptr, BasisMode::Random, k, derive_stream_seed(us, "lin/random"), m, m);
      mean[0][r] += energy_kept(top, task).kept / seeds;
      mean[1][r] += energy_kept(rk, task).kept / seeds;
      mean[2][r] += energy_kept(rnd, task).kept / seeds;
    }
  }
  Worst dev{"max|mean E_k-k/M|", 0.05};
  std::ostringstream s;
  const char* names[] = {"topk", "randomk", "random"};
  for (std::size_t md = 0; md < 3; ++md) {
    s << names[md] << "[";
    for (std::size_t r = 0; r < rhos.size(); ++r) {
      const double want = static_cast<double>(rank_from_rho(rhos[r], m, m)) / m;
      dev.see(std::abs(mean[md][r] - want));
      s << (r ? "," : "") << mean[md][r];
    }
    s << "] ";
  }
  return {dev.ok(), s.str() + dev.str()};
}

Outcome mso_correctness() {
  Worst self{"self|1-mso|", 0.0}, disjoint{"disjoint", 1e-10}, planted{"planted|mso-0.5|", 1e-10},
      oracle_err{"oracle", 1e-10};
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const Eigen::MatrixXd a = gaussian_matrix(40, 12, seed);
    for (double eta : {0.1, 0.5, 0.9, 1.0}) self.see(std::abs(1.0 - mso(a, a, eta).mso));
    const auto dj = planted_pair(64, 6, 4, 0, seed);
    disjoint.see(mso(dj.V, dj.W, 1.0).mso);
    const auto pp = planted_pair(64, 6, 4, 2, seed);
    planted.see(std::abs(mso(pp.V, pp.W, 1.0).mso - 0.5));
  }
  for (std::uint64_t pair = 0; pair < 50; ++pair) {
    const Eigen::MatrixXd v = gaussian_matrix(24, 5 + static_cast<Eigen::Index>(pair % 7), derive_stream_seed(pair, "v"));
    const Eigen::MatrixXd w = gaussian_matrix(24, 9, derive_stream_seed(pair, "w"));
    for (double eta : {0.3, 0.7, 1.0}) oracle_err.see(std::abs(mso(v, w, eta).mso - oracle::trace_mso(v, w, eta)));
  }
  const bool ok = self.ok() && disjoint.ok() && planted.ok() && oracle_err.ok();
  return {ok, self.str() + " " + disjoint.str() + " " + planted.str() + " " + oracle_err.str() + " (50 pairs)"};
}

Outcome random_baseline() {
  auto run = [](Eigen::Index kv, Eigen::Index kw, Eigen::Index d, std::uint64_t tag) {
    double sum = 0.0;
    for (std::uint64_t i = 0; i < 200; ++i) {
      const Eigen::MatrixXd v = gaussian_matrix(d, kv, derive_stream_seed(tag + i, "base/v"));
      const Eigen::MatrixXd w = gaussian_matrix(d, kw, derive_stream_seed(tag + i, "base/w"));
      sum += mso(v, w, 1.0).mso;
    }
    return sum / 200.0;
  };
  const double a = run(4, 8, 64, 0);
  const double b = run(16, 16, 256, 100000);
  const bool ok = std::abs(a - 0.125) <= 0.02 && std::abs(b - 0.0625) <= 0.01;
  std::ostringstream s;
  s << "(4,8,64) mean=" << a << " vs 0.125+-0.02; (16,16,256) mean=" << b << " vs 0.0625+-0.01";
  return {ok, s.str()};
}

Outcome sign_invariance() {
  Worst diff{"max|diff|", 1e-12};
  const std::vector<double> grid{0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0};
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const Eigen::MatrixXd d = gaussian_matrix(48, 32, derive_stream_seed(seed, "sign/d"));
    const Eigen::MatrixXd da = gaussian_matrix(48, 32, derive_stream_seed(seed, "sign/a"));
    for (double eta : grid) diff.see(std::abs(mso(d, -da, eta).mso - mso(d, da, eta).mso));
  }
  SynthSpec spec;
  spec.seed = 9;
  const auto m = synth_model(spec);
  const auto da = compute_delta(m.aligned, m.base);
  const auto dt = compute_delta(m.finetuned, m.aligned);
  const auto plus = pairwise_weight_mso({{"T", dt}, {"A", da}}, LayerFilter::all(), grid);
  const auto minus = pairwise_weight_mso({{"T", dt}, {"A", negate_delta(da)}}, LayerFilter::all(), grid);
  for (std::size_t i = 0; i < plus.rows.size(); ++i)
    diff.see(std::abs(plus.rows[i].result.mso - minus.rows[i].result.mso));
  return {diff.ok(), "10 random fixtures + synth model, 10-point eta grid; " + diff.str()};
}

// Runs the whole CLI pipeline in `dir`; returns false on any nonzero exit.
bool pipeline(const fs::path& dir, std::string& why) {
  auto step = [&](const std::string& args) {
    if (run_cli(args, dir) == 0) return true;
    why = "command failed: " + args;
    return false;
  };
  if (!step("synth --out fx --layer-count 4 --rows 32 --cols 32 --planted-k 8 --in-energy 0.7 --seed 11")) return false;
  if (!step("delta --model fx/aligned.safetensors --base fx/base.safetensors --out dA.safetensors --report dA.json"))
    return false;
  if (!step("delta --model fx/finetuned.safetensors --base fx/aligned.safetensors --out dT.safetensors --report dT.json"))
    return false;
  for (const char* scheme : {"parallel", "orthogonal"})
    for (const char* mode : {"topk", "randomk", "random"})
      for (const char* layers : {"all", "0,3", "p70"}) {
        const std::string tag = std::string(scheme) + "_" + mode + "_" + (std::string(layers) == "0,3" ? "idx" : layers);
        if (!step(std::string("project --subspace-source dA.safetensors --task-update dT.safetensors ") +
                  "--base fx/aligned.safetensors --rho-grid 0.01,0.25,0.50,0.75,0.99 --seed 5 --scheme " + scheme +
                  " --mode " + mode + " --layers " + layers + " --out " + tag + ".safetensors --report " + tag +
                  ".json"))
          return false;
      }
  return true;
}

Outcome end_to_end() {
  const std::string root = (fs::temp_directory_path() / ("sspace_accept_" + std::to_string(std::random_device{}()))).string();
  const fs::path run1 = fs::path(root) / "run1", run2 = fs::path(root) / "run2";
  fs::create_directories(run1);
  fs::create_directories(run2);
  Outcome o;
  std::string why;
  const auto t0 = Clock::now();
  if (!pipeline(run1, why)) {
    fs::remove_all(root);
    return {false, why};
  }
  const double secs = seconds_since(t0);
  if (!pipeline(run2, why)) {
    fs::remove_all(root);
    return {false, why};
  }

  // Bitwise reruns.
  std::size_t files = 0, differing = 0;
  for (const auto& entry : fs::recursive_directory_iterator(run1)) {
    if (!entry.is_regular_file()) continue;
    ++files;
    const auto other = run2 / fs::relative(entry.path(), run1);
    if (!fs::exists(other) || read_file(entry.path()) != read_file(other)) ++differing;
  }

  // Reports against truth.
  const auto truth = nlohmann::json::parse(read_file(run1 / "fx/truth.json"))["truth"];
  const double in_energy = truth[0]["in_energy"];
  const auto base = read_checkpoint(run1 / "fx/aligned.safetensors");
  const auto task = read_checkpoint(run1 / "dT.safetensors");
  Worst energy_err{"topk@0.25|E-truth|", 1e-8}, recon{"par+orth-task", 1e-10}, split{"E+Eperp", 1e-12};
  std::size_t filter_errors = 0;
  for (const char* mode : {"topk", "randomk", "random"})
    for (const char* layers : {"all", "idx", "p70"}) {
      const std::string stem = std::string(mode) + "_" + layers;
      const auto rep = nlohmann::json::parse(read_file(run1 / ("parallel_" + stem + ".json")));
      for (const auto& run : rep["runs"]) {
        const double rho = run["spec"]["rho"];
        for (const auto& t : run["tensors"]) {
          const long layer = t["layer"];
          const bool vec = t["name"].get<std::string>().find("norm") != std::string::npos;
          const bool want_selected = std::string(layers) == "all"  ? true
                                     : std::string(layers) == "idx" ? (layer == 0 || layer == 3)
                                                                     : layer == 2;
          const std::string reason = t["skip_reason"];
          const std::string want_reason = vec ? "rank<2" : (want_selected ? "" : "layer_filter");
          if (reason != want_reason) ++filter_errors;
          if (t["E_k"].is_null()) continue;
          split.see(std::abs(t["E_k"].get<double>() + t["E_k_perp"].get<double>() - 1.0));
          if (std::string(mode) == "topk" && rho == 0.25) energy_err.see(std::abs(t["E_k"].get<double>() - in_energy));
        }
        if (std::string(mode) == "topk" && rho == 0.25) energy_err.see(std::abs(run["global_energy"].get<double>() - in_energy));
      }
      // Parallel and orthogonal outputs split the task update.
      for (const char* rho : {"0.01", "0.25", "0.5", "0.75", "0.99"}) {
        const auto par = read_checkpoint(run1 / ("parallel_" + stem + ".rho" + rho + ".safetensors"));
        const auto orth = read_checkpoint(run1 / ("orthogonal_" + stem + ".rho" + rho + ".safetensors"));
        for (const auto& [name, t] : task) {
          if (t.rank() < 2) continue;
          const auto& b = base.at(name);
          double err = 0.0, norm = 0.0;
          bool projected = par.at(name) != orth.at(name);
          for (std::size_t i = 0; i < t.numel(); ++i) {
            const double got = par.at(name).at(i) + orth.at(name).at(i) - 2.0 * b.at(i);
            const double want = projected ? t.at(i) : 2.0 * t.at(i);
            err += (got - want) * (got - want);
            norm += want * want;
          }
          recon.see(std::sqrt(err / norm));
        }
      }
    }
  fs::remove_all(root);

  std::ostringstream s;
  s << "18 project runs x 5 rho; " << energy_err.str() << " " << split.str() << " " << recon.str()
    << " filter_errors=" << filter_errors << " time=" << secs << "s<10s rerun_identical=" << (files - differing) << "/"
    << files;
  o.pass = energy_err.ok() && split.ok() && recon.ok() && filter_errors == 0 && secs < 10.0 && differing == 0 && files > 0;
  o.detail = s.str();
  return o;
}

Outcome file_round_trip() {
  const fs::path fixture = fs::path(SSPACE_TEST_DATA) / "mixed_dtype.safetensors";
  const auto original = read_file(fixture);
  const auto ckpt = read_checkpoint(fixture);
  const auto bytes = encode_checkpoint(ckpt);
  const std::string written(reinterpret_cast<const char*>(bytes.data()), bytes.size());
  std::ostringstream s;
  s << ckpt.size() << " tensors (";
  bool first = true;
  for (const auto& [name, t] : ckpt) {
    s << (first ? "" : ",") << dtype_name(t.dtype());
    first = false;
  }
  s << "), " << original.size() << " bytes in, " << written.size() << " bytes out, identical="
    << (written == original ? "yes" : "no");
  return {written == original && ckpt.size() == 3, s.str()};
}

Outcome activation_models() {
  const std::vector<double> grid{0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9};
  const DepthBand band{65, 90};
  std::vector<double> mso_mean(grid.size(), 0.0), base_mean(grid.size(), 0.0);
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto a = gaussian_activation_set("null_a", 12, 32, 256, derive_stream_seed(seed, "null/a"));
    const auto b = gaussian_activation_set("null_b", 12, 32, 256, derive_stream_seed(seed, "null/b"));
    const auto rep = activation_mso(a, b, grid, band);
    for (std::size_t e = 0; e < grid.size(); ++e) {
      mso_mean[e] += rep.band_rows[e].mean_mso / 20.0;
      base_mean[e] += rep.band_rows[e].mean_baseline / 20.0;
    }
  }
  double worst_null = 0.0;
  for (std::size_t e = 0; e < grid.size(); ++e) worst_null = std::max(worst_null, std::abs(mso_mean[e] - base_mean[e]));

  double worst_planted = 1.0;
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    PlantedActivationSpec spec;
    spec.seed = seed;
    const auto [a, b] = planted_activation_sets(spec);
    const auto rep = activation_mso(a, b, {0.1, 0.2}, band);
    for (const auto& row : rep.band_rows) worst_planted = std::min(worst_planted, row.mean_mso);
  }
  std::ostringstream s;
  s << "null n=32 d=256 20 seeds: max|mso-baseline|=" << worst_null << "<=0.03; planted min mso(eta<=0.2)="
    << worst_planted << ">=0.95";
  return {worst_null <= 0.03 && worst_planted >= 0.95, s.str()};
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"projector algebra", projector_algebra},
      {"planted-energy oracle", planted_energy},
      {"energy linearity", energy_linearity},
      {"MSO correctness", mso_correctness},
      {"random baseline", random_baseline},
      {"sign invariance", sign_invariance},
      {"end-to-end pipeline", end_to_end},
      {"file round-trip", file_round_trip},
      {"activation null/planted", activation_models},
  };
  int failures = 0;
  for (const auto& [name, check] : criteria) {
    Outcome o;
    try {
      o = check();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    if (!o.pass) ++failures;
    std::cout << (o.pass ? "PASS " : "FAIL ") << name << ": " << o.detail << std::endl;
  }
  std::cout << (failures ? "FAILED " : "ALL PASSED ") << (criteria.size() - static_cast<std::size_t>(failures)) << "/"
            << criteria.size() << std::endl;
  return failures ? 1 : 0;
}
