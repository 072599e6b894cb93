// Python bindings for the geometry, planning, simulation and run entry points.
// Point clouds cross the boundary as (N, 3) float64 arrays.

#include "decompgrind/orchestrator.hpp"

#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <cmath>
#include <numbers>
#include <sstream>

namespace py = pybind11;
using namespace decompgrind;

namespace {

using Array = py::array_t<double, py::array::c_style | py::array::forcecast>;

PointCloud to_cloud(const Array& a, double point_volume) {
    if (a.ndim() != 2 || a.shape(1) != 3) throw std::invalid_argument("expected an (N, 3) array");
    const auto r = a.unchecked<2>();
    std::vector<Point3> p(static_cast<std::size_t>(r.shape(0)));
    for (py::ssize_t i = 0; i < r.shape(0); ++i) p[static_cast<std::size_t>(i)] = {r(i, 0), r(i, 1), r(i, 2)};
    PointCloud c(std::move(p), point_volume);
    c.validate();
    return c;
}

Array to_array(const PointCloud& c) {
    Array a({static_cast<py::ssize_t>(c.size()), py::ssize_t{3}});
    auto w = a.mutable_unchecked<2>();
    for (std::size_t i = 0; i < c.size(); ++i) {
        for (int k = 0; k < 3; ++k) w(static_cast<py::ssize_t>(i), k) = c[i][k];
    }
    return a;
}

std::vector<double> radians(const std::vector<double>& deg) {
    std::vector<double> out;
    for (double d : deg) out.push_back(d * std::numbers::pi / 180.0);
    return out;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "Cutting-surface planning and learned force adaptation for rough grinding";

    py::class_<CuttingSurface>(m, "CuttingSurface")
        .def(py::init([](double theta, double psi, double offset) { return CuttingSurface{theta, psi, offset}; }),
             py::arg("theta") = 0.0, py::arg("psi") = 0.0, py::arg("offset") = 0.0)
        .def_readwrite("theta", &CuttingSurface::theta)
        .def_readwrite("psi", &CuttingSurface::psi)
        .def_readwrite("offset", &CuttingSurface::offset)
        .def("normal", [](const CuttingSurface& s) {
            const Point3 n = s.normal();
            return std::vector<double>{n.x(), n.y(), n.z()};
        })
        .def("__repr__", [](const CuttingSurface& s) {
            std::ostringstream o;
            o << "CuttingSurface(theta=" << s.theta << ", psi=" << s.psi << ", offset=" << s.offset << ")";
            return o.str();
        });

    m.def("split", [](const Array& points, const CuttingSurface& s) {
        const auto r = split(to_cloud(points, 1.0), s);
        return py::make_tuple(to_array(r.next_shape), to_array(r.removal_shape));
    }, py::arg("points"), py::arg("surface"), "Kept and removed points; points on the plane are kept.");

    m.def("chamfer", [](const Array& a, const Array& b) { return chamfer(to_cloud(a, 1.0), to_cloud(b, 1.0)); },
          py::arg("a"), py::arg("b"));

    m.def("plan",
          [](const Array& current, const Array& target, double point_volume, int horizon, std::vector<double> theta_deg,
             std::vector<double> psi_deg, double x_step, double k_c) {
              const PointCloud cur = to_cloud(current, point_volume);
              PlannerConfig cfg;
              cfg.horizon = horizon;
              cfg.k_c = k_c;
              cfg.theta_grid = radians(theta_deg);
              cfg.psi_grid = radians(psi_deg);
              fit_x_grid(cfg, cur, x_step);
              const auto r = plan(cur, to_cloud(target, point_volume), cfg);
              py::dict out;
              out["surfaces"] = r.surfaces;
              out["per_step_cost"] = r.per_step_cost;
              out["objective"] = r.objective;
              return out;
          },
          py::arg("current"), py::arg("target"), py::arg("point_volume") = 1.0, py::arg("horizon") = 2,
          py::arg("theta_deg") = std::vector<double>{-30, -20, -10, 0, 10, 20, 30},
          py::arg("psi_deg") = std::vector<double>{-30, -20, -10, 0, 10, 20, 30}, py::arg("x_step") = 1.0,
          py::arg("k_c") = PlannerConfig{}.k_c);

    m.def("resistance",
          [](double removal_rate, double k_r, double lambda, double belt_speed) {
              const auto r = resistance(removal_rate, MaterialModel{k_r, lambda, belt_speed, 30.0});
              return py::make_tuple(r.normal, r.tangential);
          },
          py::arg("removal_rate"), py::arg("k_r") = 340.0, py::arg("lam") = 0.5, py::arg("belt_speed") = 10000.0,
          "(F_N, F_T) in N for a removal rate in mm^3/s.");

    m.def("workpiece_names", &workpiece_names);

    m.def("gen_workpiece", [](const std::string& name, std::uint64_t seed) {
        const auto gw = gen_workpiece(named_workpiece(name), seed);
        py::dict out;
        out["initial"] = to_array(gw.initial);
        out["target"] = to_array(gw.target);
        out["point_volume"] = gw.initial.point_volume();
        out["cell_size"] = gw.cell_size;
        out["interface"] = gw.interface;
        return out;
    }, py::arg("name"), py::arg("seed") = 1);

    m.def("train_policy",
          [](const std::vector<std::string>& workpieces, int repetitions, int window, int epochs, std::uint64_t seed,
             const std::string& path) {
              std::vector<WorkpieceSpec> specs;
              for (const auto& w : workpieces) specs.push_back(named_workpiece(w));
              const auto eps = record_demonstrations(specs, repetitions, DemoConfig{}, seed);
              const auto ds = build_dataset(eps, window, 20.0, nullptr, true);
              TrainConfig tc;
              tc.epochs = epochs;
              const auto model = train(ds, ModelConfig{}, tc);
              save_model(path, model);
              py::dict out;
              out["windows"] = ds.windows.size();
              out["initial_loss"] = model.initial_loss;
              out["loss_history"] = model.loss_history;
              out["mean_feed"] = mean_feed(eps);
              return out;
          },
          py::arg("workpieces") = std::vector<std::string>{"WP-T1", "WP-T2"}, py::arg("repetitions") = 5,
          py::arg("window") = 20, py::arg("epochs") = 150, py::arg("seed") = 1, py::arg("path") = "policy.txt",
          "Record expert demonstrations, train the policy and save it to `path`.");

    m.def("run",
          [](const std::string& method, const std::string& workpiece, std::uint64_t seed, const std::string& model_path,
             double feed1, double feed2) {
              const auto variant = parse_method(method);
              const auto spec = named_workpiece(workpiece);
              MethodResources res;
              PolicyModel model;
              if (!model_path.empty()) {
                  model = load_model(model_path);
                  res.policy = &model;
                  res.bcil_policy = &model;
              }
              res.demo_feed_1 = feed1;
              res.demo_feed_2 = feed2;
              const RunConfig cfg = default_run_config();
              const bool single = spec.family == WorkpieceFamily::T || spec.family == WorkpieceFamily::S;
              const auto r = single ? run_single_removal(variant, spec, cfg, res, seed)
                                    : run_baseline(variant, spec, cfg, res, seed);
              return report_json(r, -1);
          },
          py::arg("method"), py::arg("workpiece"), py::arg("seed") = 1, py::arg("model_path") = "",
          py::arg("feed1") = 0.0, py::arg("feed2") = 0.0,
          "Run one method on one named workpiece; returns the run report as JSON text.");
}
