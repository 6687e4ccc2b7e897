#pragma once

#include <string>

#include "metadapt/param_set.hpp"

namespace metadapt {

/// JSON checkpoint of ordered (name, shape, values) records. Values are
/// written with shortest round-trip formatting, so a save/load cycle is
/// bit-exact.
void save_param_set(const std::string& path, const ParamSet& params);
ParamSet load_param_set(const std::string& path);

}  // namespace metadapt
