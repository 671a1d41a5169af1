#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace gcn {

struct CheckItem {
  std::string name;
  double max_rel_error = 0.0;
};

// Finite-difference gradient checks over every layer op plus a tiny
// end-to-end model per gate variant. Dropout keep probabilities are 1 inside
// the model checks so the loss stays a deterministic function of the
// parameters; dropout itself is checked separately with a replayed mask.
std::vector<CheckItem> run_grad_check_suite(std::uint64_t seed);

double suite_max_error(const std::vector<CheckItem>& items);

}  // namespace gcn
