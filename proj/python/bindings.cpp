#include <pybind11/eigen.h>
#include <pybind11/functional.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <sstream>

#include <json.hpp>

#include "csd/canvas.hpp"
#include "csd/config.hpp"
#include "csd/errors.hpp"
#include "csd/harness.hpp"
#include "csd/kernel.hpp"
#include "csd/self_check.hpp"
#include "csd/svgd.hpp"

namespace py = pybind11;
using nlohmann::json;

namespace {

csd::NoiseSchedule schedule_of(const std::string& kind) {
    return csd::NoiseSchedule{csd::schedule_kind_from_string(kind), 0.0, 1.0};
}

csd::VectorList rows_of(const csd::Matrix& m) {
    csd::VectorList out;
    for (Eigen::Index i = 0; i < m.rows(); ++i) out.push_back(m.row(i).transpose());
    return out;
}

csd::Matrix matrix_of(const csd::VectorList& rows) {
    csd::Matrix m(static_cast<Eigen::Index>(rows.size()), rows.empty() ? 0 : rows.front().size());
    for (std::size_t i = 0; i < rows.size(); ++i) m.row(static_cast<Eigen::Index>(i)) = rows[i].transpose();
    return m;
}

csd::Canvas canvas_of(const csd::Vector& values, std::size_t h, std::size_t w, std::size_t c) {
    csd::Canvas canvas = csd::Canvas::zeros(h, w, c);
    canvas.values = values;
    canvas.validate();
    return canvas;
}

}  // namespace

PYBIND11_MODULE(_csd, m) {
    m.doc() = "Collaborative score distillation core";

    py::register_exception<csd::ConfigError>(m, "ConfigError", PyExc_ValueError);
    py::register_exception<csd::NumericError>(m, "NumericError", PyExc_ArithmeticError);
    py::register_exception<csd::ContractError>(m, "ContractError", PyExc_ValueError);
    py::register_exception<csd::DimensionError>(m, "DimensionError", PyExc_ValueError);

    m.def("alpha_sigma", [](const std::string& kind, double t) {
        const auto as = csd::alpha_sigma(schedule_of(kind), t);
        return py::make_tuple(as.alpha, as.sigma);
    }, py::arg("kind"), py::arg("t"));

    m.def("rbf", py::overload_cast<const csd::Vector&, const csd::Vector&, double>(&csd::rbf), py::arg("x"),
          py::arg("y"), py::arg("h"));
    m.def("rbf_grad_first", py::overload_cast<const csd::Vector&, const csd::Vector&, double>(&csd::rbf_grad_first),
          py::arg("x"), py::arg("y"), py::arg("h"));
    m.def("median_bandwidth", [](const csd::Matrix& points) { return csd::median_bandwidth(rows_of(points)); },
          py::arg("points"));

    m.def("enumerate_patches", [](std::size_t h, std::size_t w, std::size_t p, std::size_t s) {
        std::vector<std::pair<std::size_t, std::size_t>> out;
        for (const auto& o : csd::enumerate_patches(h, w, p, s)) out.emplace_back(o.row, o.col);
        return out;
    }, py::arg("height"), py::arg("width"), py::arg("patch"), py::arg("stride"));

    py::class_<csd::EditOracle>(m, "EditOracle")
        .def(py::init([](const std::string& spec) { return csd::edit_oracle_from_json(json::parse(spec)); }),
             py::arg("spec_json"))
        .def_property_readonly("dim", &csd::EditOracle::dim)
        .def("eps", [](const csd::EditOracle& o, const csd::Vector& x_t, double t, const std::string& condition_json,
                       double omega_y, double omega_s, const std::string& kind) {
            const csd::Condition cond = csd::condition_from_json(json::parse(condition_json));
            return o.eps(schedule_of(kind), x_t, t, cond, csd::GuidanceParams{omega_y, omega_s});
        }, py::arg("x_t"), py::arg("t"), py::arg("condition_json"), py::arg("omega_y") = 7.5,
             py::arg("omega_s") = 1.5, py::arg("schedule") = "vp-cosine");

    m.def("svgd_gaussian", [](const csd::Matrix& init, const csd::Vector& mean, double variance, double eta,
                              std::size_t steps) {
        const auto target = csd::GaussianMixture::isotropic(mean, variance);
        const csd::ScoreFn score = [&](const csd::Vector& x) { return csd::gmm_score(target, x); };
        csd::ParticleSet set{rows_of(init)};
        for (std::size_t i = 0; i < steps; ++i) set = csd::svgd_step(set, score, csd::KernelSpec::median(), eta);
        return matrix_of(set.particles);
    }, py::arg("init"), py::arg("mean"), py::arg("variance"), py::arg("eta"), py::arg("steps"),
       "SVGD towards N(mean, variance I) with the median bandwidth; rows are particles.");

    m.def("edit_canvas", [](const csd::EditOracle& oracle, const csd::Vector& values, std::size_t h, std::size_t w,
                            std::size_t c, std::size_t patch, std::size_t stride, std::size_t batch,
                            const std::string& condition_json, std::size_t steps, double eta, bool kernel_mixing,
                            std::uint64_t seed) {
        const csd::Canvas src = canvas_of(values, h, w, c);
        csd::DistillConfig cfg;
        cfg.steps = steps;
        cfg.eta = eta;
        cfg.kernel_mixing = kernel_mixing;
        const auto grid = csd::PatchGrid::build(h, w, patch, stride);
        const auto res = csd::edit_canvas(src, grid, oracle, csd::condition_from_json(json::parse(condition_json)),
                                          cfg, batch, seed);
        return py::make_tuple(res.canvas.values, csd::seam_discrepancy(src, res.canvas, grid));
    }, py::arg("oracle"), py::arg("values"), py::arg("height"), py::arg("width"), py::arg("channels"),
       py::arg("patch"), py::arg("stride"), py::arg("batch"), py::arg("condition_json"), py::arg("steps") = 100,
       py::arg("eta") = 1.0, py::arg("kernel_mixing") = true, py::arg("seed") = 0,
       "Returns (edited values, seam discrepancy).");

    m.def("run", [](const std::filesystem::path& config, std::optional<std::uint64_t> seed,
                    std::optional<std::filesystem::path> out) {
        std::ostringstream log;
        const int code = csd::run_experiment(config, csd::RunOptions{seed, out}, log);
        return py::make_tuple(code, log.str());
    }, py::arg("config"), py::arg("seed") = py::none(), py::arg("out") = py::none(),
       "Runs an experiment config; returns (exit code, log).");

    m.def("check", [](std::uint64_t seed) {
        py::list out;
        for (const auto& r : csd::run_self_check(seed)) out.append(py::make_tuple(r.name, r.passed, r.detail));
        return out;
    }, py::arg("seed") = 0);

    m.def("sha256_hex", [](const std::string& s) { return csd::sha256_hex(s); });
}
