#pragma once

#include <Eigen/Core>

#include <vector>

#include "hms/pose.hpp"

namespace hms {

// Per trajectory: population standard deviation over time of each Euler
// channel, averaged over the three channels; then averaged over trajectories.
// Throws std::invalid_argument for trajectories shorter than 2 frames.
double diversity_metric(const std::vector<std::vector<PoseFrame>>& trajectories);

using LandmarkSequence = std::vector<Eigen::MatrixX2d>;

// Mean over frames and points of the Euclidean distance between
// corresponding landmarks.
double lmd_metric(const std::vector<LandmarkSequence>& pred,
                  const std::vector<LandmarkSequence>& target);

}  // namespace hms
