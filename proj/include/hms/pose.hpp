#pragma once

#include <Eigen/Core>

#include <vector>

namespace hms {

using Vector6d = Eigen::Matrix<double, 6, 1>;

// Single-frame head pose: roll-pitch-yaw Euler angles in radians (intrinsic,
// applied about x, then y, then z) plus a translation in model units.
struct PoseFrame {
    double roll = 0.0;
    double pitch = 0.0;
    double yaw = 0.0;
    double tx = 0.0;
    double ty = 0.0;
    double tz = 0.0;

    Vector6d to_vector() const;
    static PoseFrame from_vector(const Vector6d& v);
    bool finite() const;
};

// t consecutive pose frames at a fixed frame rate.
struct PoseClip {
    std::vector<PoseFrame> frames;
    double fps = 25.0;

    int length() const { return static_cast<int>(frames.size()); }
};

// Componentwise differences against the clip's first frame.
// offsets[0] is the zero vector by construction.
struct OffsetClip {
    std::vector<Vector6d> offsets;

    int length() const { return static_cast<int>(offsets.size()); }
};

// Wraps an angle into the canonical range (-pi, pi].
double wrap_angle(double a);

// R = Rx(roll) * Ry(pitch) * Rz(yaw). Throws std::domain_error on non-finite input.
Eigen::Matrix3d euler_to_rotation(double roll, double pitch, double yaw);
Eigen::Matrix3d euler_to_rotation(const PoseFrame& pose);

struct EulerAngles {
    double roll = 0.0;
    double pitch = 0.0;
    double yaw = 0.0;
};

// Recovers canonical-range angles, pitch in [-pi/2, pi/2]. At gimbal lock
// (|pitch| = pi/2) roll is set to 0. Throws std::domain_error unless R is
// orthonormal with determinant +1 within 1e-6.
EulerAngles rotation_to_euler(const Eigen::Matrix3d& R);

// Cuts a trajectory into clips of length t starting at multiples of stride;
// a final window shorter than t is dropped. Throws std::invalid_argument on
// bad t/stride, std::runtime_error when the trajectory is shorter than t.
std::vector<PoseClip> segment_clips(const std::vector<PoseFrame>& trajectory, int t, int stride,
                                    double fps = 25.0);

// First-frame-relative offsets of a clip.
OffsetClip clip_to_offsets(const PoseClip& clip);

// Rebuilds frames as anchor + offsets[i].
std::vector<PoseFrame> offsets_to_frames(const OffsetClip& offsets, const PoseFrame& anchor);

}  // namespace hms
