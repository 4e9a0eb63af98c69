#include <doctest.h>

#include <sstream>

#include "delta.hpp"
#include "report.hpp"
#include "scheme.hpp"
#include "synth.hpp"

using namespace sspace;

TEST_CASE("shortest round-trip number formatting") {
  CHECK(format_number(0.25) == "0.25");
  CHECK(format_number(0.1) == "0.1");
  CHECK(std::stod(format_number(1.0 / 3.0)) == 1.0 / 3.0);
}

TEST_CASE("projection reports carry one CSV row per tensor per run") {
  const auto m = synth_model({});
  const auto src = compute_delta(m.aligned, m.base);
  const auto task = compute_delta(m.finetuned, m.aligned);
  ProjectionPlan plan(src, task, BasisMode::TopK, LayerFilter::all(), 0);
  std::vector<ProjectionReport> runs{plan.measure(0.25), plan.measure(0.5)};
  const auto csv = projection_runs_csv(runs, true);
  std::istringstream in(csv);
  std::string line;
  std::getline(in, line);
  CHECK(line == "rho,mode,tensor,layer,M,N,k,E_k,E_k_perp,skipped,skip_reason");
  int rows = 0;
  while (std::getline(in, line)) ++rows;
  CHECK(rows == 16);
  const auto j = projection_runs_json(runs, true);
  CHECK(j["kind"] == "energy");
  CHECK(j["runs"].size() == 2);
  CHECK(j["runs"][0]["tensors"][1]["E_k"].is_null());
  CHECK(j["runs"][0]["tensors"][1]["skip_reason"] == "rank<2");
  CHECK_FALSE(j["runs"][0]["spec"].contains("scheme"));
}

TEST_CASE("delta summary lists shape, dtype and norm") {
  const auto m = synth_model({});
  const auto d = compute_delta(m.aligned, m.base);
  const auto j = delta_summary_json(d);
  CHECK(j["tensors"].size() == 8);
  CHECK(j["tensors"][0]["dtype"] == "F64");
  CHECK(delta_summary_csv(d).rfind("tensor,layer,shape,dtype,frobenius\nmodel.layers.0.mlp.weight,0,32x32,F64,", 0) == 0);
}
