#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

namespace csd {

/// One optimization step. Optional fields are mode-specific and are written
/// as empty CSV cells when absent.
struct MetricsRow {
    std::size_t step = 0;
    double eta = 0.0;
    std::optional<double> t_drawn;
    double mean_grad_norm = 0.0;
    double mean_pairwise_distance = 0.0;
    double min_pairwise_distance = 0.0;
    std::optional<double> seam_discrepancy;
    std::optional<double> stein_residual;
};

/// Column order of metrics.csv.
const std::vector<std::string>& metrics_columns();

/// 17 significant digits, shortest form not required.
std::string format_real(double value);

/// Header + one LF-terminated line per row.
std::string metrics_to_csv(const std::vector<MetricsRow>& rows);

}  // namespace csd
