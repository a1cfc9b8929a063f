#pragma once

#include <cstdint>
#include <string>

namespace eclab {

struct GradcheckResult {
  int instances = 0;
  double step = 0.0;            // central-difference step h
  double max_rel_error = 0.0;   // worst instance, gradient-norm scaled
  double mean_rel_error = 0.0;
  int worst_instance = -1;
  std::string worst_label;
};

// Randomized analytic-vs-finite-difference check of the surrogate gradients.
// Instances cycle through beta in {0, 0.04}, plain and reshaped advantages,
// sequence and token granularity, plus the single-step tabular form. The
// generator avoids clip-kink neighbourhoods so central differences are valid.
GradcheckResult run_gradcheck(int instances, double h, std::uint64_t seed);

}  // namespace eclab
