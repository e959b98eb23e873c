#pragma once

#include "bt/tracker.hpp"

#include <filesystem>
#include <string>

namespace bt {

enum class MaskSource { Files, PlaneRemoval };
enum class KeypointSource { Detector, Files };

/// Flat key=value run configuration. '#' starts a comment; blank lines are
/// ignored. Angles are given in degrees.
struct RunConfig {
  TrackerConfig tracker;
  MaskSource mask_source = MaskSource::Files;
  KeypointSource keypoint_source = KeypointSource::Detector;
  PlaneRemovalParams plane_removal;

  /// Sets every seeded component from one value.
  void set_seed(std::uint64_t seed);
};

/// Throws ConfigError carrying the offending line number for unknown keys,
/// malformed lines and bad values.
RunConfig parse_config(const std::string& text);
RunConfig load_config(const std::filesystem::path& path);
/// Every key with its current value; parse_config(format_config(c)) == c.
std::string format_config(const RunConfig& config);

}  // namespace bt
