#pragma once
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "mrhar/tensor.hpp"

namespace mrhar {

// Flat, versioned, self-describing text checkpoint.
//
//   mrhar-checkpoint v1
//   <parameter count>
//   <path> <rank> <dims...> <row-major values...>
//
// One parameter per line; values printed with 17 significant digits so the
// exact doubles round-trip.
using NamedParams = std::vector<std::pair<std::string, TensorPtr>>;

void save_checkpoint(const std::string& path, const NamedParams& params);
std::map<std::string, TensorPtr> load_checkpoint(const std::string& path);

// Copies values into model parameters, validating names and shapes.
void restore_params(const NamedParams& params, const std::map<std::string, TensorPtr>& loaded);

} // namespace mrhar
