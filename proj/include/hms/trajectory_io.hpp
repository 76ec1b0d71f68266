#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "hms/pose.hpp"

namespace hms {

// Trajectory file format: UTF-8 text, header line
//   frame,roll,pitch,yaw,tx,ty,tz
// then one record per frame with the frame index strictly increasing from 0.
std::vector<PoseFrame> read_trajectory(std::istream& in, const std::string& name = "<stream>");
std::vector<PoseFrame> read_trajectory_file(const std::string& path);

void write_trajectory(std::ostream& out, const std::vector<PoseFrame>& frames);
void write_trajectory_file(const std::string& path, const std::vector<PoseFrame>& frames);

}  // namespace hms
