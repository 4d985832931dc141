#include "csd/kernel.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <mutex>
#include <shared_mutex>

#include "csd/errors.hpp"
#include "csd/parallel.hpp"

namespace csd {
namespace {

struct Registry {
    std::shared_mutex mutex;
    std::map<std::string, Distance, std::less<>> entries;
};

Registry& registry() {
    static Registry r;
    return r;
}

void check_bandwidth(double h) {
    if (!(h > 0.0) || !std::isfinite(h)) throw DomainError("kernel bandwidth must be positive and finite");
}

void check_dims(const Vector& x, const Vector& x2) {
    if (x.size() != x2.size()) {
        throw DimensionError("kernel arguments have dimensions " + std::to_string(x.size()) + " and " +
                             std::to_string(x2.size()));
    }
}

}  // namespace

const Distance& squared_euclidean() {
    static const Distance d{
        [](const Vector& a, const Vector& b) { return (a - b).squaredNorm(); },
        [](const Vector& a, const Vector& b) -> Vector { return 2.0 * (a - b); },
    };
    return d;
}

void register_distance(const std::string& id, Distance distance) {
    if (id == kSquaredEuclidean) throw ContractError("distance id 'squared-euclidean' is reserved");
    if (!distance.squared || !distance.squared_grad_first) {
        throw ContractError("distance '" + id + "' must provide both the value and its gradient");
    }
    auto& r = registry();
    std::unique_lock lock(r.mutex);
    r.entries.insert_or_assign(id, std::move(distance));
}

const Distance& lookup_distance(std::string_view id) {
    if (id == kSquaredEuclidean) return squared_euclidean();
    auto& r = registry();
    std::shared_lock lock(r.mutex);
    const auto it = r.entries.find(id);
    if (it == r.entries.end()) throw LookupError("unknown kernel distance '" + std::string(id) + "'");
    return it->second;
}

void KernelSpec::validate() const {
    lookup_distance(distance);
    if (bandwidth == BandwidthPolicy::Fixed && !(h > 0.0 && std::isfinite(h))) {
        throw ContractError("fixed kernel bandwidth must be > 0");
    }
}

double rbf(const Distance& distance, const Vector& x, const Vector& x2, double h) {
    check_bandwidth(h);
    check_dims(x, x2);
    return std::exp(-distance.squared(x, x2) / h);
}

double rbf(const Vector& x, const Vector& x2, double h) { return rbf(squared_euclidean(), x, x2, h); }

Vector rbf_grad_first(const Distance& distance, const Vector& x, const Vector& x2, double h) {
    const double k = rbf(distance, x, x2, h);
    return (-k / h) * distance.squared_grad_first(x, x2);
}

Vector rbf_grad_first(const Vector& x, const Vector& x2, double h) {
    return rbf_grad_first(squared_euclidean(), x, x2, h);
}

double median_bandwidth(const VectorList& points, const Distance& distance) {
    const std::size_t count = points.size();
    if (count < 2) throw DomainError("median bandwidth needs at least two points");

    std::vector<double> distances;
    distances.reserve(count * (count - 1) / 2);
    for (std::size_t a = 0; a < count; ++a) {
        for (std::size_t b = a + 1; b < count; ++b) {
            check_dims(points[a], points[b]);
            distances.push_back(std::sqrt(std::max(0.0, distance.squared(points[a], points[b]))));
        }
    }
    std::sort(distances.begin(), distances.end());
    const std::size_t mid = distances.size() / 2;
    const double med = distances.size() % 2 == 1 ? distances[mid] : 0.5 * (distances[mid - 1] + distances[mid]);

    const double h = med * med / std::log(static_cast<double>(count));
    if (!(h > 0.0) || !std::isfinite(h)) {
        spdlog::warn("median bandwidth degenerate (median distance {}), falling back to h = 1", med);
        return 1.0;
    }
    return h;
}

double resolve_bandwidth(const KernelSpec& spec, const VectorList& points) {
    if (spec.bandwidth == BandwidthPolicy::Fixed) return spec.h;
    if (points.size() < 2) return 1.0;
    return median_bandwidth(points, lookup_distance(spec.distance));
}

KernelMatrix kernel_matrix(const VectorList& points, const KernelSpec& spec) {
    const Distance& distance = lookup_distance(spec.distance);
    const std::size_t n = points.size();
    KernelMatrix km;
    km.bandwidth = resolve_bandwidth(spec, points);
    km.values.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
    km.grad_first.assign(n, VectorList(n));
    parallel_for(n, [&](std::size_t j) {
        for (std::size_t i = 0; i < n; ++i) {
            const double k = rbf(distance, points[j], points[i], km.bandwidth);
            km.values(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(i)) = k;
            km.grad_first[j][i] = (-k / km.bandwidth) * distance.squared_grad_first(points[j], points[i]);
        }
    });
    return km;
}

KernelMatrix identity_kernel(std::size_t n, Eigen::Index dim) {
    KernelMatrix km;
    km.values = Matrix::Identity(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
    km.grad_first.assign(n, VectorList(n, Vector::Zero(dim)));
    return km;
}

}  // namespace csd
