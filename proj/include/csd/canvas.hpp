#pragma once

#include <compare>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <variant>
#include <vector>

#include "csd/distill.hpp"
#include "csd/metrics.hpp"
#include "csd/oracle.hpp"
#include "csd/types.hpp"

namespace csd {

/// H x W x C lattice of reals, stored row-major as (row, col, channel).
struct Canvas {
    std::size_t height = 0;
    std::size_t width = 0;
    std::size_t channels = 0;
    Vector values;

    static Canvas zeros(std::size_t height, std::size_t width, std::size_t channels);

    std::size_t index(std::size_t row, std::size_t col, std::size_t channel) const {
        return (row * width + col) * channels + channel;
    }
    double& at(std::size_t row, std::size_t col, std::size_t channel) {
        return values[static_cast<Eigen::Index>(index(row, col, channel))];
    }
    double at(std::size_t row, std::size_t col, std::size_t channel) const {
        return values[static_cast<Eigen::Index>(index(row, col, channel))];
    }
    bool same_shape(const Canvas& other) const {
        return height == other.height && width == other.width && channels == other.channels;
    }

    /// Throws ContractError on zero extents, size mismatch or non-finite values.
    void validate() const;
};

struct PatchOrigin {
    std::size_t row = 0;
    std::size_t col = 0;
    auto operator<=>(const PatchOrigin&) const = default;
};

/// Row origins {0, s, 2s, ...} with H-P appended when the stride does not land
/// on it; likewise for columns. Row-major order. Throws DomainError unless
/// P <= H, P <= W and 1 <= s <= P.
std::vector<PatchOrigin> enumerate_patches(std::size_t height, std::size_t width, std::size_t patch,
                                           std::size_t stride);

/// Overlapping patch decomposition of an H x W canvas with per-cell coverage counts.
struct PatchGrid {
    std::size_t height = 0;
    std::size_t width = 0;
    std::size_t patch = 0;
    std::size_t stride = 0;
    std::vector<PatchOrigin> origins;
    std::vector<int> counts;  // H*W, row-major

    static PatchGrid build(std::size_t height, std::size_t width, std::size_t patch, std::size_t stride);

    /// Coverage counts restricted to `batch`.
    std::vector<int> counts_for(const std::vector<PatchOrigin>& batch) const;
};

/// P*P*C patch at `origin`, flattened as (row, col, channel).
Vector extract_patch(const Canvas& canvas, PatchOrigin origin, std::size_t patch);

/// Adjoint of extract_patch: zero canvas-sized vector with `patch_values` written at `origin`.
Vector scatter_patch(const Vector& patch_values, PatchOrigin origin, std::size_t patch, std::size_t height,
                     std::size_t width, std::size_t channels);

struct IdentityRenderer {};
/// x = A theta.
struct LinearRenderer {
    Matrix a;
};
/// x = the P x P patch of a canvas-shaped theta at `origin`.
struct PatchViewRenderer {
    std::size_t height = 0;
    std::size_t width = 0;
    std::size_t channels = 0;
    std::size_t patch = 0;
    PatchOrigin origin;
};
using Renderer = std::variant<IdentityRenderer, LinearRenderer, PatchViewRenderer>;

Vector render(const Renderer& renderer, const Vector& theta);

/// Pulls a pixel-space gradient back to parameters: v, A^T v, or the patch scatter.
Vector apply_jacobian(const Renderer& renderer, const Vector& pixel_grad);

/// Whether appearance counts come from the patches in the current batch or
/// from the complete grid.
enum class CountMode { Batch, FullGrid };

/// Sums canvas-shaped gradients and divides every cell by the number of
/// patches covering it (per `mode`). Uncovered cells get 0.
Vector accumulate_normalize(const VectorList& canvas_grads, const PatchGrid& grid,
                            const std::vector<PatchOrigin>& batch, CountMode mode = CountMode::Batch);

/// Mean squared jump of the edit delta (after - before) across horizontally
/// or vertically adjacent cell pairs separated by a patch edge, over channels.
/// A pair straddles an edge when some patch spans the pair's row (column) and
/// starts at the right (lower) cell or ends at the left (upper) cell.
double seam_discrepancy(const Canvas& before, const Canvas& after, const PatchGrid& grid);

struct CanvasEditResult {
    Canvas canvas;
    std::vector<MetricsRow> rows;
    std::vector<double> wall_ms;
    std::vector<int> visit_counts;  // per cell: number of steps in which a batch patch covered it
};

/// Patch-batch editing of a canvas. Each step samples `batch_size` origins
/// without replacement, edits them jointly as one particle set against the
/// frozen source patches, scatters and normalizes the gradients, and descends.
CanvasEditResult edit_canvas(const Canvas& source, const PatchGrid& grid, const ScoreOracle& oracle,
                             const Condition& cond, const DistillConfig& config, std::size_t batch_size,
                             std::uint64_t seed, CountMode mode = CountMode::Batch);

struct FramesEditResult {
    std::vector<Canvas> frames;
    std::vector<MetricsRow> rows;
    std::vector<double> wall_ms;
};

/// Sequence editing: a random batch of whole frames forms the particle set each step.
FramesEditResult edit_frames(const std::vector<Canvas>& frames, const ScoreOracle& oracle, const Condition& cond,
                             const DistillConfig& config, std::size_t batch_size, std::uint64_t seed);

/// Mean over cells of the across-frame variance of the edit delta.
double frame_delta_dispersion(const std::vector<Canvas>& before, const std::vector<Canvas>& after);

/// "CSDC" magic, u32 H, u32 W, u32 C, then H*W*C little-endian f64.
void write_canvas_binary(const std::filesystem::path& path, const Canvas& canvas);
Canvas read_canvas_binary(const std::filesystem::path& path);

/// Header "row,col,channel,value", one line per entry.
void write_canvas_csv(const std::filesystem::path& path, const Canvas& canvas);
Canvas read_canvas_csv(const std::filesystem::path& path);

}  // namespace csd
