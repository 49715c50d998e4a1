#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "subrosa/experiment.hpp"
#include "subrosa/geodesics.hpp"
#include "subrosa/heat.hpp"
#include "subrosa/io.hpp"
#include "subrosa/moser.hpp"
#include "subrosa/parallel.hpp"
#include "subrosa/poisson.hpp"

namespace py = pybind11;
using namespace subrosa;

namespace {

std::vector<py::ssize_t> grid_shape(const Grid& g) {
    std::vector<py::ssize_t> shape;
    for (int a = 0; a < g.dim(); ++a) shape.push_back(static_cast<py::ssize_t>(g.extent(a)));
    return shape;
}

py::array_t<double> scalar_to_numpy(const ScalarField& f) {
    py::array_t<double> arr(grid_shape(*f.grid()));
    std::copy(f.values().begin(), f.values().end(), arr.mutable_data());
    return arr;
}

std::vector<double> numpy_to_values(const Grid& g, const py::array_t<double>& arr) {
    auto a = py::array_t<double, py::array::c_style | py::array::forcecast>::ensure(arr);
    if (!a || static_cast<std::size_t>(a.size()) != g.size())
        throw structural_error("array size does not match the grid");
    return std::vector<double>(a.data(), a.data() + a.size());
}

py::array_t<double> positions_to_numpy(const FlowMap& f) {
    const int n = f.grid->dim();
    py::array_t<double> arr({static_cast<py::ssize_t>(f.positions.size()),
                             static_cast<py::ssize_t>(n)});
    auto view = arr.mutable_unchecked<2>();
    for (std::size_t i = 0; i < f.positions.size(); ++i)
        for (int c = 0; c < n; ++c)
            view(static_cast<py::ssize_t>(i), c) = f.positions[i][static_cast<std::size_t>(c)];
    return arr;
}

std::array<double, 3> to_point(const std::vector<double>& v) {
    if (v.size() < 2 || v.size() > 3)
        throw structural_error("points need 2 or 3 coordinates");
    std::array<double, 3> p{0.0, 0.0, 0.0};
    std::copy(v.begin(), v.end(), p.begin());
    return p;
}

}  // namespace

PYBIND11_MODULE(subrosa, m) {
    m.doc() = "horizontal density transport, subelliptic Poisson solves, subriemannian "
              "geodesics and entropy gradient flows on periodic grids";

    py::register_exception<config_error>(m, "ConfigError");
    py::register_exception<structural_error>(m, "StructuralError");
    py::register_exception<solver_error>(m, "SolverError");
    py::register_exception<integration_error>(m, "IntegrationError");

    py::class_<Grid, std::shared_ptr<Grid>>(m, "Grid")
        .def(py::init([](std::vector<std::size_t> dims, std::vector<double> periods) {
                 return std::make_shared<Grid>(std::move(dims), std::move(periods));
             }),
             py::arg("dims"), py::arg("periods") = std::vector<double>{})
        .def_property_readonly("dim", &Grid::dim)
        .def_property_readonly("size", &Grid::size)
        .def("extent", &Grid::extent)
        .def("period", &Grid::period)
        .def("spacing", &Grid::spacing);

    py::class_<ScalarField>(m, "ScalarField")
        .def(py::init([](GridPtr g, const py::array_t<double>& a) {
                 return ScalarField(g, numpy_to_values(*g, a));
             }),
             py::arg("grid"), py::arg("values"))
        .def_static("from_expression",
                    [](GridPtr g, const std::string& e) {
                        return ScalarField::from_expression(g, Expr::parse(e));
                    })
        .def_property_readonly("grid", [](const ScalarField& f) { return std::const_pointer_cast<Grid>(f.grid()); })
        .def("numpy", &scalar_to_numpy);

    py::class_<VectorField>(m, "VectorField")
        .def_property_readonly("grid", [](const VectorField& v) { return std::const_pointer_cast<Grid>(v.grid()); })
        .def("component",
             [](const VectorField& v, int c) {
                 ScalarField s(v.grid());
                 std::copy(v.component(c).begin(), v.component(c).end(), s.values().begin());
                 return scalar_to_numpy(s);
             });

    py::class_<Density>(m, "Density")
        .def_static("uniform", &Density::uniform)
        .def_static("normalized",
                    [](GridPtr g, const py::array_t<double>& a) {
                        return Density::normalized(g, numpy_to_values(*g, a));
                    })
        .def_static("raw",
                    [](GridPtr g, const py::array_t<double>& a) {
                        return Density::raw(g, numpy_to_values(*g, a));
                    })
        .def_static("from_expression",
                    [](GridPtr g, const std::string& e, bool normalize) {
                        return Density::from_expression(g, Expr::parse(e), normalize);
                    },
                    py::arg("grid"), py::arg("expression"), py::arg("normalize") = false)
        .def_property_readonly("grid", [](const Density& d) { return std::const_pointer_cast<Grid>(d.grid()); })
        .def_property_readonly("mass", &Density::mass)
        .def("numpy", [](const Density& d) { return scalar_to_numpy(d.ratio()); });

    py::class_<Frame>(m, "Frame")
        .def_static("builtin", &Frame::builtin)
        .def_static("from_expressions",
                    [](GridPtr g, const std::vector<std::vector<std::string>>& coeffs) {
                        return Frame::from_expressions(g, coeffs);
                    })
        .def_property_readonly("rank", &Frame::rank)
        .def_property_readonly("name", &Frame::name);

    // grid-core operations
    m.def("integrate", &integrate);
    m.def("grad", &grad, py::arg("f"), py::arg("order") = 4);
    m.def("divergence", &divergence, py::arg("w"), py::arg("nu"), py::arg("order") = 4);
    m.def("inner_scalar",
          py::overload_cast<const ScalarField&, const ScalarField&, const Density&>(&inner));
    m.def("inner_vector",
          py::overload_cast<const VectorField&, const VectorField&, const Density&>(&inner));

    // distribution operations
    m.def("project_tau", &project_tau);
    m.def("horizontal_gradient", &horizontal_gradient, py::arg("u"), py::arg("frame"),
          py::arg("order") = 4);
    m.def("bracket",
          py::overload_cast<const VectorField&, const VectorField&, int>(&bracket),
          py::arg("x"), py::arg("y"), py::arg("order") = 4);
    m.def("check_bracket_generating", [](const Frame& f, int depth) {
        const GrowthReport r = check_bracket_generating(f, depth);
        py::dict d;
        d["bracket_generating"] = r.bracket_generating;
        d["depth_needed"] = r.depth_needed;
        d["minimal_growth"] = r.minimal_growth();
        return d;
    });

    // subelliptic solver
    m.def("sub_laplacian", &sub_laplacian, py::arg("u"), py::arg("frame"), py::arg("nu"),
          py::arg("order") = 4);
    m.def("solve_poisson", [](const ScalarField& rho, const Frame& frame, const Density& nu,
                              double tol) {
        const PoissonSolution sol = solve_poisson(rho, frame, nu, tol);
        return py::make_tuple(sol.u, sol.residual_norm, sol.iterations);
    }, py::arg("rho"), py::arg("frame"), py::arg("nu"), py::arg("tol") = 1e-8);
    m.def("hodge_decompose", [](const VectorField& w, const Frame& frame, const Density& nu,
                                double tol) {
        HodgeDecomposition d = hodge_decompose(w, frame, nu, tol);
        return py::make_tuple(d.potential, d.gradient_part, d.divergence_free);
    }, py::arg("w"), py::arg("frame"), py::arg("nu"), py::arg("tol") = 1e-8);

    // transport
    py::class_<FlowMap>(m, "FlowMap")
        .def_property_readonly("t_final", [](const FlowMap& f) { return f.t_final; })
        .def("positions", &positions_to_numpy)
        .def("log_jacobian", [](const FlowMap& f) {
            py::array_t<double> arr(static_cast<py::ssize_t>(f.log_jacobian.size()));
            std::copy(f.log_jacobian.begin(), f.log_jacobian.end(), arr.mutable_data());
            return arr;
        });

    auto report_to_dict = [](const TransportReport& r) {
        py::dict d;
        d["l1_error"] = r.l1_error;
        d["l2_error"] = r.l2_error;
        d["linf_error"] = r.linf_error;
        d["horizontality_residual"] = r.horizontality_residual;
        d["mass_defect"] = r.mass_defect;
        d["monge_ampere_l2"] = r.monge_ampere_l2;
        return d;
    };
    m.def("moser_flow", [report_to_dict](const Density& mu0, const Density& mu1,
                                         const Frame& frame, int steps, double tol) {
        auto [flow, report] = moser_flow(mu0, mu1, frame, steps, tol);
        return py::make_tuple(std::move(flow), report_to_dict(report));
    }, py::arg("mu0"), py::arg("mu1"), py::arg("frame"), py::arg("steps") = 64,
       py::arg("tol") = 1e-8);
    m.def("pushforward_density", [](const FlowMap& flow, const Density& mu0) {
        return pushforward_density(flow, mu0);
    });
    m.def("verify_transport", [report_to_dict](const FlowMap& flow, const Density& mu0,
                                               const Density& mu1) {
        return report_to_dict(verify_transport(flow, mu0, mu1));
    });

    // geodesics
    m.def("sub_hamiltonian", [](const std::vector<double>& q, const std::vector<double>& p,
                                const Frame& frame) {
        return sub_hamiltonian(CotangentState{to_point(q), to_point(p)}, frame);
    });
    m.def("exp_tau", [](const std::vector<double>& q0, const std::vector<double>& p0, double t,
                        const Frame& frame, double dt) {
        const GeodesicTrajectory traj = exp_tau(to_point(q0), to_point(p0), t, frame, dt);
        const int n = frame.grid()->dim();
        const py::ssize_t rows = static_cast<py::ssize_t>(traj.times.size());
        py::array_t<double> out({rows, static_cast<py::ssize_t>(2 * n + 2)});
        auto view = out.mutable_unchecked<2>();
        for (py::ssize_t i = 0; i < rows; ++i) {
            const auto ui = static_cast<std::size_t>(i);
            view(i, 0) = traj.times[ui];
            for (int c = 0; c < n; ++c) {
                view(i, 1 + c) = traj.states[ui].q[static_cast<std::size_t>(c)];
                view(i, 1 + n + c) = traj.states[ui].p[static_cast<std::size_t>(c)];
            }
            view(i, 1 + 2 * n) = traj.hamiltonian[ui];
        }
        return out;
    }, py::arg("q0"), py::arg("p0"), py::arg("t"), py::arg("frame"), py::arg("dt") = 1e-3);
    m.def("horizontal_exponential", [](const ScalarField& f, double t, const Frame& frame,
                                       double dt) {
        HorizontalExpReport rep;
        FlowMap flow = horizontal_exponential(f, t, frame, dt, &rep);
        py::dict d;
        d["shock"] = rep.shock_flag;
        d["min_neighbor_separation"] = rep.min_neighbor_separation;
        d["min_jacobian"] = rep.min_jacobian;
        return py::make_tuple(std::move(flow), d);
    }, py::arg("f"), py::arg("t"), py::arg("frame"), py::arg("dt") = 1e-2);
    m.def("displacement_interpolation", [](const Density& nu, const ScalarField& f, double t,
                                           const Frame& frame, double dt) {
        return displacement_interpolation(nu, f, t, frame, dt);
    }, py::arg("nu"), py::arg("f"), py::arg("t"), py::arg("frame"), py::arg("dt") = 1e-2);
    m.def("monge_ampere_residual", &monge_ampere_residual);
    m.def("hj_evolve", [](const ScalarField& f0, double t_max, const Frame& frame, double dt,
                          std::size_t snapshots) {
        const PotentialPath path = hj_evolve(f0, t_max, frame, dt, snapshots);
        py::list out;
        for (std::size_t j = 0; j < path.times.size(); ++j)
            out.append(py::make_tuple(path.times[j], path.fields[j],
                                      static_cast<bool>(path.shock_flags[j])));
        return out;
    }, py::arg("f0"), py::arg("t_max"), py::arg("frame"), py::arg("dt") = 1e-2,
       py::arg("snapshots") = 5);
    m.def("burgers_residual", &burgers_residual);
    m.def("moser_pullback", [](const Density& mu0, const Density& mu1, const Frame& frame,
                               int steps, double tol) {
        return moser_pullback(mu0, mu1, frame, steps, tol);
    }, py::arg("mu0"), py::arg("mu1"), py::arg("frame"), py::arg("steps") = 64,
       py::arg("tol") = 1e-8);
    m.def("sub_laplacian_via_projection", &sub_laplacian_via_projection, py::arg("u"),
          py::arg("frame"), py::arg("nu"), py::arg("order") = 4);

    // heat and entropy
    m.def("entropy", &entropy);
    m.def("heat_evolve", [](const Density& nu0, double t_max, double dt, const Frame& frame,
                            const std::vector<double>& times) {
        const HeatTrajectory traj = heat_evolve(nu0, t_max, dt, frame, times);
        py::list snapshots;
        for (const auto& [t, d] : traj.snapshots) snapshots.append(py::make_tuple(t, d));
        return snapshots;
    }, py::arg("nu0"), py::arg("t_max"), py::arg("dt"), py::arg("frame"), py::arg("times"));
    m.def("wasserstein_metric", [](const Density& base, const ScalarField& eta1,
                                   const ScalarField& eta2, const Frame& frame, double tol) {
        return wasserstein_metric(TangentDensity(base, eta1), TangentDensity(base, eta2), frame,
                                  tol);
    }, py::arg("base"), py::arg("eta1"), py::arg("eta2"), py::arg("frame"), py::arg("tol") = 1e-8);
    m.def("gradient_flow_check", [](const std::vector<std::pair<double, Density>>& traj,
                                    const Frame& frame, double tol) {
        const GradientFlowReport r = gradient_flow_check(traj, frame, tol);
        py::dict d;
        d["max_defect"] = r.max_defect;
        d["max_identity_residual"] = r.max_identity_residual;
        d["entropy_monotone"] = r.entropy_monotone;
        return d;
    }, py::arg("trajectory"), py::arg("frame"), py::arg("tol") = 1e-8);

    // io
    m.def("write_field", [](const std::string& path, const ScalarField& f) {
        write_field(std::filesystem::path(path), f);
    });
    m.def("read_scalar_field", [](const std::string& path) {
        return read_field(path).as_scalar();
    });
    m.def("write_flowmap", [](const std::string& path, const FlowMap& f) {
        write_flowmap(path, f);
    });
    m.def("read_flowmap", [](const std::string& path) { return read_flowmap(path); });

    // harness
    m.def("run_experiment", [](const std::string& config_json) {
        const ExperimentConfig cfg = parse_config(config_json);
        const ExperimentReport rep = run_experiment(cfg);
        return py::make_tuple(rep.pass, rep.summary_json);
    });
    m.def("set_thread_count", &par::set_thread_count);
}
