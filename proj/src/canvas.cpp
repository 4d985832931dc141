#include "csd/canvas.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <chrono>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>
#include <string>

#include "csd/errors.hpp"

namespace csd {
namespace {

std::vector<std::size_t> axis_origins(std::size_t extent, std::size_t patch, std::size_t stride) {
    std::vector<std::size_t> out;
    for (std::size_t o = 0; o + patch <= extent; o += stride) out.push_back(o);
    if (out.back() != extent - patch) out.push_back(extent - patch);
    return out;
}

std::vector<std::size_t> sample_batch(Rng& rng, std::size_t population, std::size_t count) {
    std::vector<std::size_t> idx(population);
    std::iota(idx.begin(), idx.end(), 0);
    // Partial Fisher-Yates: the first `count` slots are a uniform sample without replacement.
    for (std::size_t i = 0; i < count; ++i) {
        std::uniform_int_distribution<std::size_t> pick(i, population - 1);
        std::swap(idx[i], idx[pick(rng)]);
    }
    idx.resize(count);
    std::sort(idx.begin(), idx.end());
    return idx;
}

double mean_norm(const VectorList& v) {
    double s = 0.0;
    for (const auto& x : v) s += x.norm();
    return v.empty() ? 0.0 : s / static_cast<double>(v.size());
}

void put_u32(std::ostream& out, std::uint32_t v) {
    const std::array<char, 4> b{static_cast<char>(v & 0xff), static_cast<char>((v >> 8) & 0xff),
                                static_cast<char>((v >> 16) & 0xff), static_cast<char>((v >> 24) & 0xff)};
    out.write(b.data(), 4);
}

std::uint32_t get_u32(std::istream& in) {
    std::array<unsigned char, 4> b{};
    in.read(reinterpret_cast<char*>(b.data()), 4);
    return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
           (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

}  // namespace

Canvas Canvas::zeros(std::size_t height, std::size_t width, std::size_t channels) {
    return {height, width, channels, Vector::Zero(static_cast<Eigen::Index>(height * width * channels))};
}

void Canvas::validate() const {
    if (height == 0 || width == 0 || channels == 0) throw ContractError("canvas extents must be >= 1");
    if (static_cast<std::size_t>(values.size()) != height * width * channels) {
        throw ContractError("canvas value count does not match H*W*C");
    }
    if (!values.allFinite()) throw ContractError("canvas contains non-finite values");
}

std::vector<PatchOrigin> enumerate_patches(std::size_t height, std::size_t width, std::size_t patch,
                                           std::size_t stride) {
    if (patch == 0 || patch > height || patch > width) {
        throw DomainError("patch size " + std::to_string(patch) + " does not fit a " + std::to_string(height) + "x" +
                          std::to_string(width) + " canvas");
    }
    if (stride < 1 || stride > patch) throw DomainError("stride must lie in [1, patch size]");
    std::vector<PatchOrigin> out;
    for (const auto r : axis_origins(height, patch, stride)) {
        for (const auto c : axis_origins(width, patch, stride)) out.push_back({r, c});
    }
    return out;
}

PatchGrid PatchGrid::build(std::size_t height, std::size_t width, std::size_t patch, std::size_t stride) {
    PatchGrid grid{height, width, patch, stride, enumerate_patches(height, width, patch, stride), {}};
    grid.counts = grid.counts_for(grid.origins);
    return grid;
}

std::vector<int> PatchGrid::counts_for(const std::vector<PatchOrigin>& batch) const {
    std::vector<int> out(height * width, 0);
    for (const auto& o : batch) {
        for (std::size_t r = o.row; r < o.row + patch; ++r) {
            for (std::size_t c = o.col; c < o.col + patch; ++c) ++out[r * width + c];
        }
    }
    return out;
}

Vector extract_patch(const Canvas& canvas, PatchOrigin origin, std::size_t patch) {
    if (origin.row + patch > canvas.height || origin.col + patch > canvas.width) {
        throw DimensionError("patch at (" + std::to_string(origin.row) + ", " + std::to_string(origin.col) +
                             ") exceeds the canvas");
    }
    Vector out(static_cast<Eigen::Index>(patch * patch * canvas.channels));
    Eigen::Index k = 0;
    for (std::size_t r = 0; r < patch; ++r) {
        for (std::size_t c = 0; c < patch; ++c) {
            for (std::size_t ch = 0; ch < canvas.channels; ++ch) out[k++] = canvas.at(origin.row + r, origin.col + c, ch);
        }
    }
    return out;
}

Vector scatter_patch(const Vector& patch_values, PatchOrigin origin, std::size_t patch, std::size_t height,
                     std::size_t width, std::size_t channels) {
    if (static_cast<std::size_t>(patch_values.size()) != patch * patch * channels) {
        throw DimensionError("patch vector has " + std::to_string(patch_values.size()) + " entries, expected " +
                             std::to_string(patch * patch * channels));
    }
    if (origin.row + patch > height || origin.col + patch > width) {
        throw DimensionError("patch origin lies outside the canvas");
    }
    Canvas out = Canvas::zeros(height, width, channels);
    Eigen::Index k = 0;
    for (std::size_t r = 0; r < patch; ++r) {
        for (std::size_t c = 0; c < patch; ++c) {
            for (std::size_t ch = 0; ch < channels; ++ch) out.at(origin.row + r, origin.col + c, ch) = patch_values[k++];
        }
    }
    return out.values;
}

Vector render(const Renderer& renderer, const Vector& theta) {
    return std::visit(
        [&](const auto& r) -> Vector {
            using R = std::decay_t<decltype(r)>;
            if constexpr (std::is_same_v<R, IdentityRenderer>) {
                return theta;
            } else if constexpr (std::is_same_v<R, LinearRenderer>) {
                if (r.a.cols() != theta.size()) throw DimensionError("linear renderer: parameter dimension mismatch");
                return r.a * theta;
            } else {
                if (static_cast<std::size_t>(theta.size()) != r.height * r.width * r.channels) {
                    throw DimensionError("patch-view renderer: canvas dimension mismatch");
                }
                return extract_patch(Canvas{r.height, r.width, r.channels, theta}, r.origin, r.patch);
            }
        },
        renderer);
}

Vector apply_jacobian(const Renderer& renderer, const Vector& pixel_grad) {
    return std::visit(
        [&](const auto& r) -> Vector {
            using R = std::decay_t<decltype(r)>;
            if constexpr (std::is_same_v<R, IdentityRenderer>) {
                return pixel_grad;
            } else if constexpr (std::is_same_v<R, LinearRenderer>) {
                if (r.a.rows() != pixel_grad.size()) throw DimensionError("linear renderer: pixel dimension mismatch");
                return r.a.transpose() * pixel_grad;
            } else {
                return scatter_patch(pixel_grad, r.origin, r.patch, r.height, r.width, r.channels);
            }
        },
        renderer);
}

Vector accumulate_normalize(const VectorList& canvas_grads, const PatchGrid& grid,
                            const std::vector<PatchOrigin>& batch, CountMode mode) {
    for (const auto& o : batch) {
        if (std::find(grid.origins.begin(), grid.origins.end(), o) == grid.origins.end()) {
            throw ContractError("batch origin (" + std::to_string(o.row) + ", " + std::to_string(o.col) +
                                ") is not part of the grid");
        }
    }
    const std::size_t cells = grid.height * grid.width;
    if (canvas_grads.empty()) return Vector();
    const auto size = canvas_grads.front().size();
    if (size % static_cast<Eigen::Index>(cells) != 0) throw DimensionError("gradient size is not a multiple of H*W");
    const auto channels = static_cast<std::size_t>(size) / cells;

    Vector sum = Vector::Zero(size);
    for (const auto& g : canvas_grads) {
        if (g.size() != size) throw DimensionError("canvas gradients have mismatched sizes");
        sum += g;
    }
    const std::vector<int> counts = mode == CountMode::Batch ? grid.counts_for(batch) : grid.counts;
    for (std::size_t cell = 0; cell < cells; ++cell) {
        for (std::size_t ch = 0; ch < channels; ++ch) {
            auto& v = sum[static_cast<Eigen::Index>(cell * channels + ch)];
            v = counts[cell] > 0 ? v / counts[cell] : 0.0;
        }
    }
    return sum;
}

double seam_discrepancy(const Canvas& before, const Canvas& after, const PatchGrid& grid) {
    if (!before.same_shape(after)) throw DimensionError("seam_discrepancy: canvas shapes differ");
    if (before.height != grid.height || before.width != grid.width) {
        throw DimensionError("seam_discrepancy: grid does not match canvas");
    }
    const std::size_t h = grid.height;
    const std::size_t w = grid.width;
    const std::size_t p = grid.patch;
    // horizontal[r*w + c]: pair (r,c)-(r,c+1); vertical[r*w + c]: pair (r,c)-(r+1,c)
    std::vector<char> horizontal(h * w, 0);
    std::vector<char> vertical(h * w, 0);
    for (const auto& o : grid.origins) {
        for (std::size_t r = o.row; r < o.row + p; ++r) {
            if (o.col > 0) horizontal[r * w + o.col - 1] = 1;
            if (o.col + p < w) horizontal[r * w + o.col + p - 1] = 1;
        }
        for (std::size_t c = o.col; c < o.col + p; ++c) {
            if (o.row > 0) vertical[(o.row - 1) * w + c] = 1;
            if (o.row + p < h) vertical[(o.row + p - 1) * w + c] = 1;
        }
    }
    const Vector delta = after.values - before.values;
    const std::size_t ch = before.channels;
    auto d = [&](std::size_t r, std::size_t c, std::size_t k) {
        return delta[static_cast<Eigen::Index>((r * w + c) * ch + k)];
    };
    double total = 0.0;
    std::size_t pairs = 0;
    for (std::size_t r = 0; r < h; ++r) {
        for (std::size_t c = 0; c < w; ++c) {
            if (horizontal[r * w + c]) {
                for (std::size_t k = 0; k < ch; ++k) total += std::pow(d(r, c, k) - d(r, c + 1, k), 2);
                pairs += ch;
            }
            if (vertical[r * w + c]) {
                for (std::size_t k = 0; k < ch; ++k) total += std::pow(d(r, c, k) - d(r + 1, c, k), 2);
                pairs += ch;
            }
        }
    }
    return pairs == 0 ? 0.0 : total / static_cast<double>(pairs);
}

CanvasEditResult edit_canvas(const Canvas& source, const PatchGrid& grid, const ScoreOracle& oracle,
                             const Condition& cond, const DistillConfig& config, std::size_t batch_size,
                             std::uint64_t seed, CountMode mode) {
    source.validate();
    config.validate();
    if (source.height != grid.height || source.width != grid.width) {
        throw DimensionError("patch grid does not match the canvas");
    }
    if (batch_size < 1 || batch_size > grid.origins.size()) {
        throw ContractError("batch size must lie in [1, " + std::to_string(grid.origins.size()) + "]");
    }

    Rng patch_rng = derive_stream(seed, "canvas/patches");
    Rng timestep_rng = derive_stream(seed, "distill/timestep");
    Rng noise_rng = derive_stream(seed, "distill/noise");
    const auto patch_dim = static_cast<Eigen::Index>(grid.patch * grid.patch * source.channels);

    CanvasEditResult out{source, {}, {}, std::vector<int>(grid.height * grid.width, 0)};
    Canvas& canvas = out.canvas;
    for (std::size_t step = 0; step < config.steps; ++step) {
        const auto start = std::chrono::steady_clock::now();
        std::vector<PatchOrigin> batch;
        for (const auto idx : sample_batch(patch_rng, grid.origins.size(), batch_size)) batch.push_back(grid.origins[idx]);

        EditProblem problem;
        problem.oracle = &oracle;
        problem.conditions = {cond};
        for (const auto& o : batch) {
            problem.source.particles.push_back(extract_patch(source, o, grid.patch));
            problem.target.particles.push_back(extract_patch(canvas, o, grid.patch));
        }
        const StepDraw draw = draw_step(timestep_rng, noise_rng, config, batch.size(), patch_dim);
        const VectorList grads = csd_edit_grads(problem, draw, config);

        VectorList scattered;
        scattered.reserve(batch.size());
        for (std::size_t i = 0; i < batch.size(); ++i) {
            const PatchViewRenderer view{source.height, source.width, source.channels, grid.patch, batch[i]};
            scattered.push_back(apply_jacobian(view, grads[i]));
        }
        const double eta = config.eta_at(step);
        canvas.values -= eta * accumulate_normalize(scattered, grid, batch, mode);
        if (!canvas.values.allFinite()) throw NumericError("canvas became non-finite at step " + std::to_string(step), step);

        const auto batch_counts = grid.counts_for(batch);
        for (std::size_t cell = 0; cell < batch_counts.size(); ++cell) out.visit_counts[cell] += batch_counts[cell] > 0;

        VectorList edited;
        for (const auto& o : batch) edited.push_back(extract_patch(canvas, o, grid.patch));
        const auto stats = pairwise_distance_stats(edited);
        MetricsRow row;
        row.step = step;
        row.eta = eta;
        row.t_drawn = draw.t;
        row.mean_grad_norm = mean_norm(grads);
        row.mean_pairwise_distance = stats.mean;
        row.min_pairwise_distance = stats.min;
        row.seam_discrepancy = seam_discrepancy(source, canvas, grid);
        out.rows.push_back(row);
        out.wall_ms.push_back(
            std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count());
    }
    return out;
}

FramesEditResult edit_frames(const std::vector<Canvas>& frames, const ScoreOracle& oracle, const Condition& cond,
                             const DistillConfig& config, std::size_t batch_size, std::uint64_t seed) {
    if (frames.empty()) throw ContractError("edit_frames needs at least one frame");
    for (const auto& f : frames) {
        f.validate();
        if (!f.same_shape(frames.front())) throw DimensionError("all frames must share one shape");
    }
    config.validate();
    if (batch_size < 1 || batch_size > frames.size()) {
        throw ContractError("batch size must lie in [1, " + std::to_string(frames.size()) + "]");
    }

    Rng frame_rng = derive_stream(seed, "frames/batch");
    Rng timestep_rng = derive_stream(seed, "distill/timestep");
    Rng noise_rng = derive_stream(seed, "distill/noise");

    FramesEditResult out{frames, {}, {}};
    for (std::size_t step = 0; step < config.steps; ++step) {
        const auto start = std::chrono::steady_clock::now();
        const auto batch = sample_batch(frame_rng, frames.size(), batch_size);

        EditProblem problem;
        problem.oracle = &oracle;
        problem.conditions = {cond};
        for (const auto idx : batch) {
            problem.source.particles.push_back(frames[idx].values);
            problem.target.particles.push_back(out.frames[idx].values);
        }
        const StepDraw draw = draw_step(timestep_rng, noise_rng, config, batch.size(), frames.front().values.size());
        const VectorList grads = csd_edit_grads(problem, draw, config);
        const double eta = config.eta_at(step);
        for (std::size_t i = 0; i < batch.size(); ++i) {
            auto& frame = out.frames[batch[i]].values;
            frame -= eta * apply_jacobian(IdentityRenderer{}, grads[i]);
            if (!frame.allFinite()) throw NumericError("frame became non-finite at step " + std::to_string(step), step);
        }

        VectorList all;
        for (const auto& f : out.frames) all.push_back(f.values);
        const auto stats = pairwise_distance_stats(all);
        MetricsRow row;
        row.step = step;
        row.eta = eta;
        row.t_drawn = draw.t;
        row.mean_grad_norm = mean_norm(grads);
        row.mean_pairwise_distance = stats.mean;
        row.min_pairwise_distance = stats.min;
        out.rows.push_back(row);
        out.wall_ms.push_back(
            std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count());
    }
    return out;
}

double frame_delta_dispersion(const std::vector<Canvas>& before, const std::vector<Canvas>& after) {
    if (before.size() != after.size() || before.empty()) throw DimensionError("frame lists must match and be non-empty");
    const auto n = static_cast<double>(before.size());
    Vector mean = Vector::Zero(before.front().values.size());
    VectorList deltas;
    for (std::size_t f = 0; f < before.size(); ++f) {
        if (!before[f].same_shape(after[f]) || !before[f].same_shape(before.front())) {
            throw DimensionError("frame shapes differ");
        }
        deltas.push_back(after[f].values - before[f].values);
        mean += deltas.back();
    }
    mean /= n;
    double var = 0.0;
    for (const auto& d : deltas) var += (d - mean).squaredNorm();
    return var / (n * static_cast<double>(mean.size()));
}

void write_canvas_binary(const std::filesystem::path& path, const Canvas& canvas) {
    canvas.validate();
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
    out.write("CSDC", 4);
    put_u32(out, static_cast<std::uint32_t>(canvas.height));
    put_u32(out, static_cast<std::uint32_t>(canvas.width));
    put_u32(out, static_cast<std::uint32_t>(canvas.channels));
    for (Eigen::Index k = 0; k < canvas.values.size(); ++k) {
        const auto bits = std::bit_cast<std::uint64_t>(canvas.values[k]);
        std::array<char, 8> b{};
        for (int i = 0; i < 8; ++i) b[static_cast<std::size_t>(i)] = static_cast<char>((bits >> (8 * i)) & 0xff);
        out.write(b.data(), 8);
    }
}

Canvas read_canvas_binary(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + path.string());
    std::array<char, 4> magic{};
    in.read(magic.data(), 4);
    if (!in || std::string(magic.data(), 4) != "CSDC") throw ContractError(path.string() + ": bad canvas magic");
    Canvas c;
    c.height = get_u32(in);
    c.width = get_u32(in);
    c.channels = get_u32(in);
    if (!in) throw ContractError(path.string() + ": truncated canvas header");
    c.values.resize(static_cast<Eigen::Index>(c.height * c.width * c.channels));
    for (Eigen::Index k = 0; k < c.values.size(); ++k) {
        std::array<unsigned char, 8> b{};
        in.read(reinterpret_cast<char*>(b.data()), 8);
        if (!in) throw ContractError(path.string() + ": truncated canvas body");
        std::uint64_t bits = 0;
        for (int i = 0; i < 8; ++i) bits |= static_cast<std::uint64_t>(b[static_cast<std::size_t>(i)]) << (8 * i);
        c.values[k] = std::bit_cast<double>(bits);
    }
    c.validate();
    return c;
}

void write_canvas_csv(const std::filesystem::path& path, const Canvas& canvas) {
    canvas.validate();
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
    out << "row,col,channel,value\n";
    for (std::size_t r = 0; r < canvas.height; ++r) {
        for (std::size_t c = 0; c < canvas.width; ++c) {
            for (std::size_t k = 0; k < canvas.channels; ++k) {
                out << r << ',' << c << ',' << k << ',' << format_real(canvas.at(r, c, k)) << '\n';
            }
        }
    }
}

Canvas read_canvas_csv(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path.string());
    std::string line;
    std::getline(in, line);
    if (line != "row,col,channel,value") throw ContractError(path.string() + ": expected header row,col,channel,value");
    struct Entry {
        std::size_t r, c, k;
        double v;
    };
    std::vector<Entry> entries;
    std::size_t h = 0, w = 0, ch = 0;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::istringstream ss(line);
        Entry e{};
        char sep = 0;
        if (!(ss >> e.r >> sep >> e.c >> sep >> e.k >> sep >> e.v)) {
            throw ContractError(path.string() + ": malformed line '" + line + "'");
        }
        h = std::max(h, e.r + 1);
        w = std::max(w, e.c + 1);
        ch = std::max(ch, e.k + 1);
        entries.push_back(e);
    }
    Canvas canvas = Canvas::zeros(h, w, ch);
    if (entries.size() != h * w * ch) throw ContractError(path.string() + ": canvas CSV does not cover every cell");
    for (const auto& e : entries) canvas.at(e.r, e.c, e.k) = e.v;
    canvas.validate();
    return canvas;
}

}  // namespace csd
