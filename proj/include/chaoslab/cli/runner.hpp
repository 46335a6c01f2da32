#pragma once

#include <functional>
#include <ostream>
#include <string>
#include <vector>

#include "chaoslab/cli/config.hpp"
#include "chaoslab/cli/manifest.hpp"
#include "chaoslab/diagnostics.hpp"

namespace chaoslab::cli {

struct Contract {
  std::string name;
  bool pass;
  std::string detail;
};

struct RunResult {
  int exit_code = 0;  // 0 iff every contract passed and no cell failed
  std::vector<Contract> contracts;
  std::vector<std::string> failures;
  std::vector<std::string> warnings;
  std::vector<ManifestEntry> manifest;
};

// Reference law for compare and sweep: distances plus the quantile law at a time.
struct ReferenceBundle {
  ReferenceKind kind;
  Reference reference;
  std::function<QuantileMeasure(double)> law;
};

ReferenceKind resolve_reference(const ExperimentConfig& c);
ReferenceBundle make_reference(const ExperimentConfig& c, const std::vector<double>& times, bool refine);

// Writes every artifact under c.output plus manifest.tsv.
RunResult run(const ExperimentConfig& c, std::ostream& log);

}  // namespace chaoslab::cli
