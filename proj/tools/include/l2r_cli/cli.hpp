#pragma once

#include <filesystem>
#include <ostream>
#include <string>
#include <vector>

#include "l2r/pointcloud.hpp"

namespace l2r::cli {

enum ExitCode : int { kOk = 0, kCheckFailed = 1, kUsage = 2 };

/// Runs one command line (without the program name) and returns the exit code.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

/// Frames of a directory: the LiDAR sequence of a corpus when a manifest is
/// present, otherwise every frame file sorted by name with timestamps 0, 1, ...
std::vector<PointCloudFrame> load_frame_directory(const std::filesystem::path& dir);

}  // namespace l2r::cli
