#include "hms/metrics.hpp"

#include <cmath>
#include <stdexcept>

namespace hms {

double diversity_metric(const std::vector<std::vector<PoseFrame>>& trajectories) {
    if (trajectories.empty()) throw std::invalid_argument("diversity_metric: no trajectories");
    double total = 0.0;
    for (const auto& traj : trajectories) {
        const std::size_t n = traj.size();
        if (n < 2) throw std::invalid_argument("diversity_metric: trajectory shorter than 2 frames");
        double channel_sum = 0.0;
        for (int ch = 0; ch < 3; ++ch) {
            double mean = 0.0;
            for (const PoseFrame& f : traj) mean += f.to_vector()[ch];
            mean /= static_cast<double>(n);
            double var = 0.0;
            for (const PoseFrame& f : traj) {
                const double d = f.to_vector()[ch] - mean;
                var += d * d;
            }
            channel_sum += std::sqrt(var / static_cast<double>(n));
        }
        total += channel_sum / 3.0;
    }
    return total / static_cast<double>(trajectories.size());
}

double lmd_metric(const std::vector<LandmarkSequence>& pred,
                  const std::vector<LandmarkSequence>& target) {
    if (pred.size() != target.size() || pred.empty()) {
        throw std::invalid_argument("lmd_metric: sequence list sizes differ or are empty");
    }
    double total = 0.0;
    long count = 0;
    for (std::size_t s = 0; s < pred.size(); ++s) {
        if (pred[s].size() != target[s].size()) {
            throw std::invalid_argument("lmd_metric: frame counts differ in sequence " +
                                        std::to_string(s));
        }
        for (std::size_t f = 0; f < pred[s].size(); ++f) {
            const Eigen::MatrixX2d& p = pred[s][f];
            const Eigen::MatrixX2d& q = target[s][f];
            if (p.rows() != q.rows()) {
                throw std::invalid_argument("lmd_metric: landmark counts differ");
            }
            for (Eigen::Index i = 0; i < p.rows(); ++i) {
                total += (p.row(i) - q.row(i)).norm();
                ++count;
            }
        }
    }
    if (count == 0) throw std::invalid_argument("lmd_metric: no landmarks to compare");
    return total / static_cast<double>(count);
}

}  // namespace hms
