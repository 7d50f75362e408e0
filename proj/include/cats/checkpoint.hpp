#pragma once

#include <string>

#include "cats/caci.hpp"

namespace cats {

/// Versioned binary checkpoint holding every trainable tensor plus the model
/// constants. Round-trips bit-exactly (raw little-endian doubles).
void save_checkpoint(const CatsLinearModel& model, const std::string& path);
CatsLinearModel load_checkpoint(const std::string& path);

/// Human-readable shape/constant listing for the `inspect` command.
std::string describe_checkpoint(const CatsLinearModel& model);

}  // namespace cats
