#pragma once

#include <functional>
#include <string>
#include <string_view>

#include "csd/types.hpp"

namespace csd {

/// Squared distance used inside the RBF kernel, with its gradient in the
/// first argument. Euclidean is built in; harness or bridge code may register
/// alternatives under a string id.
struct Distance {
    std::function<double(const Vector&, const Vector&)> squared;
    std::function<Vector(const Vector&, const Vector&)> squared_grad_first;
};

inline constexpr std::string_view kSquaredEuclidean = "squared-euclidean";

const Distance& squared_euclidean();

/// Registers (or replaces) a distance. Thread-safe; "squared-euclidean" is reserved.
void register_distance(const std::string& id, Distance distance);

/// Throws LookupError for unknown ids.
const Distance& lookup_distance(std::string_view id);

enum class BandwidthPolicy { Fixed, Median };

struct KernelSpec {
    std::string distance{kSquaredEuclidean};
    BandwidthPolicy bandwidth = BandwidthPolicy::Median;
    double h = 1.0;  // used when bandwidth == Fixed

    void validate() const;

    static KernelSpec fixed(double h) { return {std::string(kSquaredEuclidean), BandwidthPolicy::Fixed, h}; }
    static KernelSpec median() { return {std::string(kSquaredEuclidean), BandwidthPolicy::Median, 1.0}; }
};

/// exp(-||x - x2||^2 / h). Throws DomainError for h <= 0.
double rbf(const Vector& x, const Vector& x2, double h);
double rbf(const Distance& distance, const Vector& x, const Vector& x2, double h);

/// Gradient of rbf(x, x2, h) with respect to x, the FIRST argument:
/// -(2/h) (x - x2) rbf(x, x2, h).
Vector rbf_grad_first(const Vector& x, const Vector& x2, double h);
Vector rbf_grad_first(const Distance& distance, const Vector& x, const Vector& x2, double h);

/// med^2 / log(B), med being the median of the B(B-1)/2 pairwise distances
/// (sqrt of the squared distance). Falls back to 1 with a warning when the
/// result would not be positive. Throws DomainError for B < 2.
double median_bandwidth(const VectorList& points, const Distance& distance = squared_euclidean());

/// Bandwidth for one evaluation over `points`. A median policy with a single
/// point resolves to 1 (the kernel is then only ever evaluated at distance 0).
double resolve_bandwidth(const KernelSpec& spec, const VectorList& points);

/// Dense pairwise kernel evaluation over a particle snapshot.
/// values(j, i) = k(x_j, x_i); grad_first[j][i] = grad_{x_j} k(x_j, x_i).
struct KernelMatrix {
    Matrix values;
    std::vector<VectorList> grad_first;
    double bandwidth = 1.0;

    std::size_t size() const { return static_cast<std::size_t>(values.rows()); }
};

KernelMatrix kernel_matrix(const VectorList& points, const KernelSpec& spec);

/// k = delta_ij with zero gradients: disables kernel mixing and repulsion.
KernelMatrix identity_kernel(std::size_t n, Eigen::Index dim);

}  // namespace csd
