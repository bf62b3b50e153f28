#pragma once

#include <cstdint>
#include <ostream>
#include <string>
#include <vector>

#include "exk/field.hpp"
#include "exk/geometry.hpp"

namespace exk {

struct ValidationCheck {
  std::string suite;
  std::string name;
  double measured = 0.0;
  double tolerance = 0.0;
  bool passed = false;
  bool info_only = false;  // reported, never fails the run
  std::string detail;
};

struct ValidationReport {
  std::vector<ValidationCheck> checks;
  bool passed() const;
};

struct ValidationOptions {
  int random_points = 100;
  int ec_masks = 500;
  int h2_grid = 25;
  std::uint64_t seed = 0;
};

/// Runs the invariant suites: hermite, lambda, derivatives, conditioning,
/// ec_oracle, h2 and the informational condition check.
ValidationReport run_validation(const FieldModel& model, const RectDomain& domain,
                                const ValidationOptions& options = {});

/// One line per check: suite, name, PASS/FAIL/INFO, measured, tolerance, detail.
void write_report(const ValidationReport& report, std::ostream& out);

}  // namespace exk
