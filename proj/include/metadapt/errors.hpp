#pragma once

#include <stdexcept>

namespace metadapt {

// Error taxonomy used across the library. Each maps to one validation
// category so the CLI can report a machine-parsable reason.
struct DimensionError : std::runtime_error { using std::runtime_error::runtime_error; };
struct ConfigError : std::runtime_error { using std::runtime_error::runtime_error; };
struct DataError : std::runtime_error { using std::runtime_error::runtime_error; };
struct ScheduleError : std::runtime_error { using std::runtime_error::runtime_error; };

}  // namespace metadapt
