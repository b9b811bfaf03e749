#pragma once

#include <cstddef>
#include <iosfwd>
#include <span>
#include <string>

namespace pqkv {

/// Fitted latency model. Clustering one layer for s tokens with T iterations
/// costs alpha1 + beta1*s*T seconds of pool work; prefill compute over s
/// tokens costs alpha2 + beta2*s + gamma2*s^2 seconds; transfers move at the
/// given bandwidths in bytes per second.
struct CostModel {
    double alpha1 = 0.0;
    double beta1 = 0.0;
    double alpha2 = 0.0;
    double beta2 = 0.0;
    double gamma2 = 0.0;
    double offload_bandwidth = 0.0;  // GPU -> CPU
    double fetch_bandwidth = 0.0;    // CPU -> GPU

    double clustering_time(double s, double iterations) const {
        return alpha1 + beta1 * s * iterations;
    }
    double compute_time(double s) const { return alpha2 + s * (beta2 + s * gamma2); }

    /// Throws std::invalid_argument when beta1 <= 0, gamma2 < 0, or a
    /// bandwidth is non-positive.
    void validate() const;
};

struct ClusteringSample {
    double s = 0.0;
    double iterations = 0.0;
    double seconds = 0.0;
};

struct ComputeSample {
    double s = 0.0;
    double seconds = 0.0;
};

struct ClusteringFit {
    double alpha1 = 0.0;
    double beta1 = 0.0;
};

struct ComputeFit {
    double alpha2 = 0.0;
    double beta2 = 0.0;
    double gamma2 = 0.0;
};

/// Least squares of seconds against s*iterations. Throws on fewer than two
/// samples or a degenerate (constant) design.
ClusteringFit fit_clustering(std::span<const ClusteringSample> samples);

/// Least squares of seconds against (1, s, s^2). Throws on fewer than three
/// distinct s values.
ComputeFit fit_compute(std::span<const ComputeSample> samples);

/// Largest iteration count whose clustering time still hides under compute:
/// (gamma2*s^2 + beta2*s + alpha2 - alpha1) / (beta1*s), before flooring.
double t_max_preclip(const CostModel& model, double s);

/// floor(t_max_preclip) clamped to [clip_lo, clip_hi].
std::size_t t_max(const CostModel& model, double s, std::size_t clip_lo = 3,
                  std::size_t clip_hi = 30);

// key=value text format: alpha1, beta1, alpha2, beta2, gamma2,
// offload_bandwidth, fetch_bandwidth; '#' starts a comment line.
void write_cost_model(std::ostream& out, const CostModel& model);
CostModel read_cost_model(std::istream& in);
void save_cost_model(const std::string& path, const CostModel& model);
CostModel load_cost_model(const std::string& path);

}  // namespace pqkv
