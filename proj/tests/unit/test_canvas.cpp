#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>

#include "csd/canvas.hpp"
#include "csd/errors.hpp"
#include "reference.hpp"
#include "toys.hpp"

using namespace csd;
namespace fs = std::filesystem;

namespace {

Canvas random_canvas(std::uint64_t seed, std::size_t h, std::size_t w, std::size_t c) {
    Rng rng = derive_stream(seed, "test/canvas");
    Canvas out = Canvas::zeros(h, w, c);
    out.values = standard_normal(rng, out.values.size());
    return out;
}

Canvas transpose(const Canvas& in) {
    Canvas out = Canvas::zeros(in.width, in.height, in.channels);
    for (std::size_t r = 0; r < in.height; ++r)
        for (std::size_t c = 0; c < in.width; ++c)
            for (std::size_t k = 0; k < in.channels; ++k) out.at(c, r, k) = in.at(r, c, k);
    return out;
}

fs::path temp_dir(const std::string& name) {
    const fs::path dir = fs::temp_directory_path() / ("csd_test_" + name);
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

}  // namespace

TEST(EnumeratePatches, Examples) {
    EXPECT_EQ(enumerate_patches(5, 5, 5, 3), (std::vector<PatchOrigin>{{0, 0}}));
    EXPECT_EQ(enumerate_patches(6, 6, 4, 2), (std::vector<PatchOrigin>{{0, 0}, {0, 2}, {2, 0}, {2, 2}}));
    EXPECT_EQ(enumerate_patches(7, 4, 4, 3), (std::vector<PatchOrigin>{{0, 0}, {3, 0}}));
    EXPECT_EQ(enumerate_patches(4, 26, 4, 2).size(), 12u);
}

TEST(EnumeratePatches, Preconditions) {
    EXPECT_THROW(enumerate_patches(3, 6, 4, 2), DomainError);
    EXPECT_THROW(enumerate_patches(6, 3, 4, 2), DomainError);
    EXPECT_THROW(enumerate_patches(6, 6, 4, 0), DomainError);
    EXPECT_THROW(enumerate_patches(6, 6, 4, 5), DomainError);
}

TEST(EnumeratePatches, RandomizedCoverage) {
    Rng rng = derive_stream(1, "test");
    for (int trial = 0; trial < 200; ++trial) {
        const std::size_t p = 1 + rng() % 6;
        const std::size_t h = p + rng() % 12, w = p + rng() % 12;
        const std::size_t s = 1 + rng() % p;
        const auto grid = PatchGrid::build(h, w, p, s);
        EXPECT_EQ(grid.origins, ref::enumerate_patches(h, w, p, s));
        for (std::size_t r = 0; r < h; ++r) {
            for (std::size_t c = 0; c < w; ++c) {
                int n = 0;
                for (const auto& o : grid.origins) n += ref::covers(o, p, r, c);
                EXPECT_GE(n, 1);
                EXPECT_EQ(grid.counts[r * w + c], n);
            }
        }
    }
}

TEST(Renderers, ApplyJacobian) {
    const Vector v = Vector::LinSpaced(4, 1.0, 4.0);
    EXPECT_EQ(apply_jacobian(IdentityRenderer{}, v), v);
    EXPECT_EQ(apply_jacobian(LinearRenderer{2.0 * Matrix::Identity(4, 4)}, v), 2.0 * v);
    Matrix a(2, 3);
    a << 1, 2, 3, 4, 5, 6;
    const Vector theta = (Vector(3) << 1, 0, -1).finished();
    EXPECT_EQ(render(LinearRenderer{a}, theta), a * theta);
    EXPECT_EQ(apply_jacobian(LinearRenderer{a}, Vector::Ones(2)), a.transpose() * Vector::Ones(2));
    EXPECT_THROW(apply_jacobian(LinearRenderer{a}, Vector::Ones(3)), DimensionError);

    const PatchViewRenderer view{6, 6, 1, 4, {2, 2}};
    const Vector g = apply_jacobian(view, Vector::Ones(16));
    for (std::size_t r = 0; r < 6; ++r)
        for (std::size_t c = 0; c < 6; ++c) EXPECT_EQ(g[r * 6 + c], (r >= 2 && c >= 2) ? 1.0 : 0.0);
}

TEST(Renderers, PatchAdjointness) {
    Rng rng = derive_stream(2, "test");
    for (int trial = 0; trial < 50; ++trial) {
        const Canvas c = random_canvas(trial, 7, 9, 2);
        const PatchOrigin o{rng() % 4, rng() % 6};
        const Vector p = standard_normal(rng, 4 * 4 * 2);
        const double lhs = extract_patch(c, o, 4).dot(p);
        const double rhs = c.values.dot(scatter_patch(p, o, 4, 7, 9, 2));
        EXPECT_NEAR(lhs, rhs, 1e-12);
        const PatchViewRenderer view{7, 9, 2, 4, o};
        EXPECT_EQ(render(view, c.values), extract_patch(c, o, 4));
    }
}

TEST(AccumulateNormalize, DisjointConstant) {
    const auto grid = PatchGrid::build(4, 6, 2, 2);
    VectorList grads;
    for (const auto& o : grid.origins) grads.push_back(scatter_patch(Vector::Constant(4, 2.5), o, 2, 4, 6, 1));
    const Vector out = accumulate_normalize(grads, grid, grid.origins);
    EXPECT_EQ(out, Vector::Constant(24, 2.5));
}

TEST(AccumulateNormalize, OverlapConstant) {
    const auto grid = PatchGrid::build(4, 6, 4, 2);  // col origins 0, 2
    VectorList grads;
    for (const auto& o : grid.origins) grads.push_back(scatter_patch(Vector::Constant(16, -0.7), o, 4, 4, 6, 1));
    EXPECT_EQ(accumulate_normalize(grads, grid, grid.origins), Vector::Constant(24, -0.7));
}

TEST(AccumulateNormalize, HandField) {
    const auto grid = PatchGrid::build(6, 6, 4, 2);
    VectorList grads;
    for (std::size_t i = 0; i < grid.origins.size(); ++i) {
        grads.push_back(scatter_patch(Vector::Constant(16, static_cast<double>(i)), grid.origins[i], 4, 6, 6, 1));
    }
    const Vector out = accumulate_normalize(grads, grid, grid.origins);
    const double expected[3][3] = {{0.0, 0.5, 1.0}, {1.0, 1.5, 2.0}, {2.0, 2.5, 3.0}};
    for (std::size_t r = 0; r < 6; ++r)
        for (std::size_t c = 0; c < 6; ++c) EXPECT_EQ(out[r * 6 + c], expected[r / 2][c / 2]) << r << "," << c;
}

TEST(AccumulateNormalize, BatchVersusFullGrid) {
    const auto grid = PatchGrid::build(6, 6, 4, 2);
    const std::vector<PatchOrigin> batch{{0, 0}};
    const VectorList grads{scatter_patch(Vector::Constant(16, 4.0), {0, 0}, 4, 6, 6, 1)};
    const Vector b = accumulate_normalize(grads, grid, batch, CountMode::Batch);
    const Vector f = accumulate_normalize(grads, grid, batch, CountMode::FullGrid);
    EXPECT_EQ(b[0], 4.0);
    EXPECT_EQ(b[3 * 6 + 3], 4.0);
    EXPECT_EQ(b[5 * 6 + 5], 0.0);
    EXPECT_EQ(f[0], 4.0);
    EXPECT_EQ(f[3 * 6 + 3], 1.0);
    EXPECT_THROW(accumulate_normalize(grads, grid, {{1, 1}}), ContractError);
}

TEST(AccumulateNormalize, StrideEqualsPatchIsIdentity) {
    const auto grid = PatchGrid::build(6, 9, 3, 3);
    const Canvas field = random_canvas(3, 6, 9, 2);
    VectorList grads;
    for (const auto& o : grid.origins) grads.push_back(scatter_patch(extract_patch(field, o, 3), o, 3, 6, 9, 2));
    EXPECT_EQ(accumulate_normalize(grads, grid, grid.origins), field.values);
}

TEST(Seam, TrivialCases) {
    const auto grid = PatchGrid::build(6, 6, 4, 2);
    const Canvas c = random_canvas(4, 6, 6, 1);
    EXPECT_EQ(seam_discrepancy(c, c, grid), 0.0);
    Canvas shifted = c;
    shifted.values.array() += 3.0;
    EXPECT_NEAR(seam_discrepancy(c, shifted, grid), 0.0, 1e-28);
}

TEST(Seam, HandExample) {
    // boundary pairs on a 6x6 grid with 4x4 patches at stride 2: columns 1|2 and 3|4
    // in every row (12 pairs), likewise 12 vertical pairs. A unit step between
    // columns 1 and 2 jumps on 6 of the 24 pairs.
    const auto grid = PatchGrid::build(6, 6, 4, 2);
    const Canvas before = Canvas::zeros(6, 6, 1);
    Canvas after = before;
    for (std::size_t r = 0; r < 6; ++r)
        for (std::size_t c = 2; c < 6; ++c) after.at(r, c, 0) = 1.0;
    EXPECT_DOUBLE_EQ(seam_discrepancy(before, after, grid), 0.25);
}

TEST(Seam, MatchesBruteForceAndTransposes) {
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        const std::size_t h = 5 + seed % 4, w = 7 + seed % 5;
        const auto grid = PatchGrid::build(h, w, 3, 1 + seed % 3);
        const Canvas a = random_canvas(seed, h, w, 2), b = random_canvas(seed + 100, h, w, 2);
        const double s = seam_discrepancy(a, b, grid);
        EXPECT_NEAR(s, ref::seam(a, b, grid.origins, 3), 1e-12);
        const auto tgrid = PatchGrid::build(w, h, 3, 1 + seed % 3);
        EXPECT_NEAR(s, seam_discrepancy(transpose(a), transpose(b), tgrid), 1e-12);
    }
}

TEST(EditCanvas, SinglePatchEqualsWholeVector) {
    const auto o = toys::variance_oracle(4 * 4 * 1);
    const Canvas src = random_canvas(5, 4, 4, 1);
    const auto grid = PatchGrid::build(4, 4, 4, 2);
    DistillConfig cfg;
    cfg.steps = 25;
    const auto edited = edit_canvas(src, grid, o, toys::kEdit, cfg, 1, 9);
    const auto traj = optimize(EditProblem::from_source(ParticleSet{{src.values}}, {toys::kEdit}, o), cfg, 9);
    EXPECT_LT((edited.canvas.values - traj.final_state.particles[0]).norm(), 1e-12);
    ASSERT_EQ(edited.rows.size(), 25u);
    EXPECT_EQ(edited.visit_counts, std::vector<int>(16, 25));
}

TEST(EditCanvas, DeterministicAndChecked) {
    toys::CanvasToy toy;
    DistillConfig cfg = toy.config(true);
    cfg.steps = 20;
    const Canvas src = toy.source(0);
    const auto a = edit_canvas(src, toy.grid, toy.oracle, toys::kEdit, cfg, 4, 3);
    const auto b = edit_canvas(src, toy.grid, toy.oracle, toys::kEdit, cfg, 4, 3);
    EXPECT_EQ(a.canvas.values, b.canvas.values);
    EXPECT_EQ(metrics_to_csv(a.rows), metrics_to_csv(b.rows));
    for (const auto& r : a.rows) EXPECT_TRUE(r.seam_discrepancy.has_value());
    EXPECT_THROW(edit_canvas(src, toy.grid, toy.oracle, toys::kEdit, cfg, 13, 3), ContractError);
    EXPECT_THROW(edit_canvas(src, toy.grid, toy.oracle, toys::kEdit, cfg, 0, 3), ContractError);
    const auto other = PatchGrid::build(6, 6, 4, 2);
    EXPECT_THROW(edit_canvas(src, other, toy.oracle, toys::kEdit, cfg, 2, 3), DimensionError);
}

TEST(EditCanvas, CornersVisitedLessOften) {
    toys::CanvasToy toy;
    DistillConfig cfg = toy.config(true);
    cfg.steps = 200;
    const auto out = edit_canvas(toy.source(1), toy.grid, toy.oracle, toys::kEdit, cfg, 4, 1);
    // column 0 is covered by one patch, column 12 by two
    EXPECT_LT(out.visit_counts[0], out.visit_counts[12]);
}

TEST(EditFrames, OneFrameIsSingleParticleEdit) {
    const auto o = toys::variance_oracle(9);
    const Canvas f = random_canvas(6, 3, 3, 1);
    DistillConfig cfg;
    cfg.steps = 15;
    const auto out = edit_frames({f}, o, toys::kEdit, cfg, 1, 4);
    const auto traj = optimize(EditProblem::from_source(ParticleSet{{f.values}}, {toys::kEdit}, o), cfg, 4);
    EXPECT_LT((out.frames[0].values - traj.final_state.particles[0]).norm(), 1e-12);
}

TEST(EditFrames, IdenticalFramesStayIdentical) {
    toys::FramesToy toy;
    const Canvas f = toy.frames(0).front();
    DistillConfig cfg = toy.config(true);
    cfg.steps = 30;
    cfg.noise_sharing = NoiseSharing::Shared;
    const auto out = edit_frames(std::vector<Canvas>(5, f), toy.oracle, toys::kEdit, cfg, 5, 2);
    for (const auto& g : out.frames) EXPECT_EQ(g.values, out.frames.front().values);
}

TEST(EditFrames, KernelLowersPairwiseSpreadVariation) {
    toys::FramesToy toy;
    std::vector<double> with, without;
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        const auto frames = toy.frames(seed);
        with.push_back(toys::pairwise_cv(edit_frames(frames, toy.oracle, toys::kEdit, toy.config(true), 4, seed).frames));
        without.push_back(
            toys::pairwise_cv(edit_frames(frames, toy.oracle, toys::kEdit, toy.config(false), 4, seed).frames));
    }
    EXPECT_LT(ref::median(with), ref::median(without));
}

TEST(EditFrames, ShapeChecks) {
    const auto o = toys::variance_oracle(4);
    DistillConfig cfg;
    EXPECT_THROW(edit_frames({Canvas::zeros(2, 2, 1), Canvas::zeros(1, 4, 1)}, o, toys::kEdit, cfg, 1, 0), DimensionError);
    EXPECT_THROW(edit_frames({}, o, toys::kEdit, cfg, 1, 0), ContractError);
    EXPECT_THROW(edit_frames({Canvas::zeros(2, 2, 1)}, o, toys::kEdit, cfg, 2, 0), ContractError);
}

TEST(FrameDispersion, Values) {
    const Canvas a = Canvas::zeros(1, 2, 1);
    Canvas b = a, c = a;
    b.values << 1.0, 1.0;
    c.values << 3.0, 1.0;
    // deltas (1,1) and (3,1): per-cell variances 1 and 0
    EXPECT_DOUBLE_EQ(frame_delta_dispersion({a, a}, {b, c}), 0.5);
    EXPECT_EQ(frame_delta_dispersion({a, a}, {b, b}), 0.0);
}

TEST(CanvasIo, BinaryRoundTrip) {
    const auto dir = temp_dir("bin");
    Canvas c = random_canvas(7, 3, 5, 2);
    c.values[0] = -0.0;
    c.values[1] = 1e-310;
    write_canvas_binary(dir / "c.csdc", c);
    EXPECT_EQ(fs::file_size(dir / "c.csdc"), 16u + 30u * 8u);
    const Canvas back = read_canvas_binary(dir / "c.csdc");
    EXPECT_EQ(back.height, 3u);
    EXPECT_EQ(back.width, 5u);
    EXPECT_EQ(back.channels, 2u);
    for (Eigen::Index i = 0; i < c.values.size(); ++i) {
        EXPECT_EQ(std::bit_cast<std::uint64_t>(back.values[i]), std::bit_cast<std::uint64_t>(c.values[i]));
    }
    std::ifstream in(dir / "c.csdc", std::ios::binary);
    char head[8];
    in.read(head, 8);
    EXPECT_EQ(std::string(head, 4), "CSDC");
    EXPECT_EQ(static_cast<unsigned char>(head[4]), 3);
    EXPECT_EQ(head[5], 0);
}

TEST(CanvasIo, BinaryRejectsBadInput) {
    const auto dir = temp_dir("badbin");
    std::ofstream(dir / "bad.csdc", std::ios::binary) << "NOPE0000000000000000";
    EXPECT_ANY_THROW(read_canvas_binary(dir / "bad.csdc"));
    Canvas c = random_canvas(8, 2, 2, 1);
    write_canvas_binary(dir / "short.csdc", c);
    fs::resize_file(dir / "short.csdc", 16 + 3 * 8);
    EXPECT_ANY_THROW(read_canvas_binary(dir / "short.csdc"));
    EXPECT_ANY_THROW(read_canvas_binary(dir / "missing.csdc"));
}

TEST(CanvasIo, CsvRoundTrip) {
    const auto dir = temp_dir("csv");
    const Canvas c = random_canvas(9, 2, 3, 2);
    write_canvas_csv(dir / "c.csv", c);
    const Canvas back = read_canvas_csv(dir / "c.csv");
    EXPECT_TRUE(back.same_shape(c));
    EXPECT_EQ(back.values, c.values);
    std::ifstream in(dir / "c.csv");
    std::string header;
    std::getline(in, header);
    EXPECT_EQ(header, "row,col,channel,value");
}

TEST(CanvasType, Validate) {
    EXPECT_THROW(Canvas::zeros(0, 2, 1).validate(), ContractError);
    Canvas c = Canvas::zeros(2, 2, 1);
    c.values[3] = std::nan("");
    EXPECT_THROW(c.validate(), ContractError);
    c.values.resize(3);
    EXPECT_THROW(c.validate(), ContractError);
}
