#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

namespace ncgru {

enum class GradcheckScope { Cell, Cayley, Bptt };

std::string to_string(GradcheckScope s);
GradcheckScope gradcheck_scope_from_string(const std::string& s);

struct GradcheckOptions {
  std::size_t hidden = 4;  // n; cayley uses it as the matrix size
  std::size_t input = 3;
  std::size_t length = 5;
  std::size_t batch = 2;
  std::size_t instances = 5;
  std::uint64_t seed = 1;
  double fd_step = 1e-6;
};

/// Worst relative error seen for one named tensor over all instances.
struct GradcheckEntry {
  std::string name;
  double rel_error = 0.0;
};

struct GradcheckReport {
  GradcheckScope scope = GradcheckScope::Cell;
  double tolerance = 0.0;
  double max_rel_error = 0.0;
  std::size_t instances = 0;
  /// Draws discarded because a modReLU input sat within 1e-3 of a kink.
  std::size_t rejected = 0;
  /// Cell scope only: a zero upstream gradient produced exactly zero gradients.
  bool zero_grad_exact = true;
  bool passed = false;
  std::vector<GradcheckEntry> entries;
};

/// Relative error ‖a − b‖ / max(‖a‖, ‖b‖, 1e-8).
double relative_error(const std::vector<double>& a, const std::vector<double>& b);

/// Central finite differences against the analytic gradients.
/// Tolerances: 1e-5 for cell and bptt, 1e-6 for cayley.
GradcheckReport run_gradcheck(GradcheckScope scope, const GradcheckOptions& opts = {});

std::string format_report(const GradcheckReport& r);

}  // namespace ncgru
