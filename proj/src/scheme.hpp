#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "delta.hpp"
#include "layers.hpp"
#include "subspace.hpp"

namespace sspace {

enum class Scheme { Parallel, Orthogonal };

std::string_view scheme_name(Scheme scheme);
std::optional<Scheme> parse_scheme(std::string_view text);

struct ProjectionSpec {
  double rho = 0.25;
  BasisMode mode = BasisMode::TopK;
  Scheme scheme = Scheme::Parallel;
  LayerFilter layers;
  std::uint64_t seed = 0;
};

void validate(const ProjectionSpec& spec);

/// Why a tensor was not projected. Skipped tensors carry the full task update.
enum class SkipReason { None, LowRank, LayerFilter };

std::string_view skip_reason_name(SkipReason reason);

struct TensorRecord {
  std::string name;
  std::optional<long> layer;
  Eigen::Index rows = 0;
  Eigen::Index cols = 0;
  Eigen::Index k = 0;
  std::optional<double> energy;       // absent when skipped or when the task update is zero
  std::optional<double> energy_perp;
  double kept_norm2 = 0.0;
  double total_norm2 = 0.0;
  SkipReason skip = SkipReason::None;

  bool skipped() const { return skip != SkipReason::None; }
};

struct ProjectionReport {
  ProjectionSpec spec;
  std::vector<TensorRecord> tensors;  // sorted by name
  std::optional<double> global_energy;       // sum of kept norms / sum of total norms over analyzed tensors
  std::optional<double> global_energy_perp;
  std::string source_provenance;
  std::string task_provenance;
};

/// Per-tensor factorizations of a subspace source, cached so several rho
/// values and both schemes can be evaluated without repeating SVDs.
class ProjectionPlan {
 public:
  ProjectionPlan(const DeltaModel& subspace_source, const DeltaModel& task_update, BasisMode mode,
                 LayerFilter layers, std::uint64_t seed);

  /// Energy-kept report only; no checkpoint is produced.
  ProjectionReport measure(double rho) const;

  /// base + projected task update (skipped tensors get the full update).
  std::pair<Checkpoint, ProjectionReport> apply(const Checkpoint& base, double rho, Scheme scheme) const;

 private:
  struct Entry {
    std::string name;
    std::optional<long> layer;
    SkipReason skip = SkipReason::None;
    Shape shape;
    std::optional<AnalysisMatrix> task;  // rank >= 2 tensors
    std::vector<double> task_flat;       // rank < 2 tensors
    std::optional<SingularFactorization> factorization;  // source, or the seeded Gaussian for Random
    std::uint64_t stream_seed = 0;
  };

  ProjectionReport run(double rho, std::optional<Scheme> scheme, std::vector<Eigen::MatrixXd>* projected) const;

  BasisMode mode_;
  LayerFilter layers_;
  std::uint64_t seed_;
  std::string source_provenance_;
  std::string task_provenance_;
  std::vector<Entry> entries_;
};

std::pair<Checkpoint, ProjectionReport> apply_scheme(const DeltaModel& subspace_source, const DeltaModel& task_update,
                                                     const Checkpoint& base, const ProjectionSpec& spec);

}  // namespace sspace
