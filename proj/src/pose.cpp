#include "hms/pose.hpp"

#include <Eigen/LU>

#include <cmath>
#include <stdexcept>
#include <string>

namespace hms {

Vector6d PoseFrame::to_vector() const {
    Vector6d v;
    v << roll, pitch, yaw, tx, ty, tz;
    return v;
}

PoseFrame PoseFrame::from_vector(const Vector6d& v) {
    return PoseFrame{v[0], v[1], v[2], v[3], v[4], v[5]};
}

bool PoseFrame::finite() const {
    return to_vector().allFinite();
}

double wrap_angle(double a) {
    a = std::remainder(a, 2.0 * M_PI);  // (-pi, pi] up to the -pi boundary
    if (a <= -M_PI) a = M_PI;
    return a;
}

Eigen::Matrix3d euler_to_rotation(double roll, double pitch, double yaw) {
    if (!std::isfinite(roll) || !std::isfinite(pitch) || !std::isfinite(yaw)) {
        throw std::domain_error("euler_to_rotation: non-finite Euler angles");
    }
    const double cr = std::cos(roll), sr = std::sin(roll);
    const double cp = std::cos(pitch), sp = std::sin(pitch);
    const double cy = std::cos(yaw), sy = std::sin(yaw);

    Eigen::Matrix3d rx, ry, rz;
    rx << 1, 0, 0,
          0, cr, -sr,
          0, sr, cr;
    ry << cp, 0, sp,
          0, 1, 0,
          -sp, 0, cp;
    rz << cy, -sy, 0,
          sy, cy, 0,
          0, 0, 1;
    return rx * ry * rz;
}

Eigen::Matrix3d euler_to_rotation(const PoseFrame& pose) {
    return euler_to_rotation(pose.roll, pose.pitch, pose.yaw);
}

EulerAngles rotation_to_euler(const Eigen::Matrix3d& R) {
    if (!R.allFinite()) {
        throw std::domain_error("rotation_to_euler: non-finite matrix");
    }
    const double ortho = (R.transpose() * R - Eigen::Matrix3d::Identity()).cwiseAbs().maxCoeff();
    if (ortho > 1e-6 || std::abs(R.determinant() - 1.0) > 1e-6) {
        throw std::domain_error("rotation_to_euler: matrix is not a proper rotation (orthonormality error " +
                                std::to_string(ortho) + ")");
    }

    EulerAngles e;
    const double sp = std::clamp(R(0, 2), -1.0, 1.0);
    if (1.0 - std::abs(sp) < 1e-12) {
        // Gimbal lock: roll and yaw share an axis; resolve with roll = 0.
        e.roll = 0.0;
        e.pitch = std::copysign(M_PI / 2.0, sp);
        e.yaw = std::atan2(R(1, 0), R(1, 1));
    } else {
        e.pitch = std::asin(sp);
        e.roll = std::atan2(-R(1, 2), R(2, 2));
        e.yaw = std::atan2(-R(0, 1), R(0, 0));
    }
    e.roll = wrap_angle(e.roll);
    e.yaw = wrap_angle(e.yaw);
    return e;
}

std::vector<PoseClip> segment_clips(const std::vector<PoseFrame>& trajectory, int t, int stride,
                                    double fps) {
    if (t < 2) throw std::invalid_argument("segment_clips: clip length t must be >= 2");
    if (stride < 1) throw std::invalid_argument("segment_clips: stride must be >= 1");
    const int n = static_cast<int>(trajectory.size());
    if (n < t) {
        throw std::runtime_error("segment_clips: trajectory has " + std::to_string(n) +
                                 " frames but a clip needs " + std::to_string(t) +
                                 "; no clip can be produced");
    }
    std::vector<PoseClip> clips;
    for (int start = 0; start + t <= n; start += stride) {
        PoseClip clip;
        clip.fps = fps;
        clip.frames.assign(trajectory.begin() + start, trajectory.begin() + start + t);
        clips.push_back(std::move(clip));
    }
    return clips;
}

OffsetClip clip_to_offsets(const PoseClip& clip) {
    OffsetClip out;
    out.offsets.reserve(clip.frames.size());
    if (clip.frames.empty()) return out;
    const Vector6d base = clip.frames.front().to_vector();
    out.offsets.push_back(Vector6d::Zero());
    for (std::size_t i = 1; i < clip.frames.size(); ++i) {
        out.offsets.push_back(clip.frames[i].to_vector() - base);
    }
    return out;
}

std::vector<PoseFrame> offsets_to_frames(const OffsetClip& offsets, const PoseFrame& anchor) {
    std::vector<PoseFrame> frames;
    frames.reserve(offsets.offsets.size());
    const Vector6d base = anchor.to_vector();
    for (const Vector6d& off : offsets.offsets) {
        frames.push_back(PoseFrame::from_vector(base + off));
    }
    return frames;
}

}  // namespace hms
