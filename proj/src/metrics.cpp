#include "csd/metrics.hpp"

#include <cstdio>
#include <sstream>

namespace csd {

const std::vector<std::string>& metrics_columns() {
    static const std::vector<std::string> columns{
        "step",           "eta",           "t_drawn", "mean_grad_norm", "mean_pairwise_distance", "min_pairwise_distance",
        "seam_discrepancy", "stein_residual",
    };
    return columns;
}

std::string format_real(double value) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", value);
    return buf;
}

std::string metrics_to_csv(const std::vector<MetricsRow>& rows) {
    std::ostringstream out;
    const auto& columns = metrics_columns();
    for (std::size_t c = 0; c < columns.size(); ++c) out << (c ? "," : "") << columns[c];
    out << '\n';
    auto optional_cell = [](const std::optional<double>& v) { return v ? format_real(*v) : std::string(); };
    for (const auto& row : rows) {
        out << row.step << ',' << format_real(row.eta) << ',' << optional_cell(row.t_drawn) << ','
            << format_real(row.mean_grad_norm) << ',' << format_real(row.mean_pairwise_distance) << ','
            << format_real(row.min_pairwise_distance) << ',' << optional_cell(row.seam_discrepancy) << ','
            << optional_cell(row.stein_residual) << '\n';
    }
    return out.str();
}

}  // namespace csd
