#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>
#include <string>

#include "subrosa/config.hpp"
#include "subrosa/experiment.hpp"
#include "subrosa/io.hpp"
#include "subrosa/parallel.hpp"
#include "subrosa/random_fields.hpp"

using namespace subrosa;

namespace {

struct TempDir {
    std::filesystem::path path;
    TempDir() {
        path = std::filesystem::temp_directory_path() /
               ("subrosa-test-" + std::to_string(std::random_device{}()));
        std::filesystem::create_directories(path);
    }
    ~TempDir() { std::filesystem::remove_all(path); }
};

}  // namespace

TEST_CASE("field container round trip is exact") {
    TempDir tmp;
    auto g = make_grid({8, 4, 8}, {1.0, 2.0, 1.0});
    std::mt19937_64 rng(5);
    ScalarField f = random_smooth_scalar(g, rng);
    const auto path = tmp.path / "field.srfld";
    write_field(path, f);
    LoadedField lf = read_field(path);
    REQUIRE(*lf.grid == *g);
    ScalarField back = lf.as_scalar();
    for (std::size_t i = 0; i < g->size(); ++i) CHECK(back[i] == f[i]);

    VectorField v = random_vector_field(g, rng);
    const auto vpath = tmp.path / "vector.srfld";
    write_field(vpath, v);
    VectorField vback = read_field(vpath).as_vector();
    for (int c = 0; c < 3; ++c)
        for (std::size_t i = 0; i < g->size(); ++i) CHECK(vback.at(c, i) == v.at(c, i));

    CHECK_THROWS_AS(read_field(vpath).as_scalar(), config_error);
    CHECK_THROWS_AS(read_field(tmp.path / "missing.srfld"), config_error);
}

TEST_CASE("flow container round trip is exact") {
    TempDir tmp;
    auto g = make_grid({8, 8});
    FlowMap flow = FlowMap::identity(g);
    flow.t_final = 0.75;
    std::mt19937_64 rng(9);
    std::uniform_real_distribution<double> shift(-0.3, 0.3);
    for (std::size_t i = 0; i < g->size(); ++i) {
        flow.positions[i] = g->wrap({flow.positions[i][0] + shift(rng),
                                     flow.positions[i][1] + shift(rng), 0.0});
        flow.log_jacobian[i] = shift(rng);
    }
    const auto path = tmp.path / "flow.srflw";
    write_flowmap(path, flow);
    FlowMap back = read_flowmap(path);
    CHECK(back.t_final == flow.t_final);
    for (std::size_t i = 0; i < g->size(); ++i) {
        CHECK(back.positions[i][0] == flow.positions[i][0]);
        CHECK(back.positions[i][1] == flow.positions[i][1]);
        CHECK(back.log_jacobian[i] == flow.log_jacobian[i]);
    }
}

TEST_CASE("csv export writes one row per node") {
    TempDir tmp;
    auto g = make_grid({4, 4});
    ScalarField f(g, 1.5);
    const auto path = tmp.path / "f.csv";
    write_csv(path, f);
    std::ifstream is(path);
    std::string line;
    std::size_t rows = 0;
    std::getline(is, line);
    CHECK(line == "x,y,value");
    while (std::getline(is, line)) ++rows;
    CHECK(rows == g->size());
}

TEST_CASE("config parsing: defaults, unknown keys, expression errors") {
    const ExperimentConfig cfg = parse_config(R"json({
        "kind": "moser",
        "grid": {"dims": [16, 16, 16]},
        "frame": "sin-heisenberg",
        "target": "1 + 0.3*sin(2*pi*z)"
    })json");
    CHECK(cfg.kind == ExperimentKind::Moser);
    CHECK(cfg.steps == 64);
    CHECK(cfg.tol == 1e-8);
    CHECK(cfg.source.empty());  // defaults to the uniform density

    // misspelled key is named in the error
    try {
        parse_config(R"json({"kind": "moser", "target": "1", "stpes": 32})json");
        FAIL("expected config_error");
    } catch (const config_error& e) {
        CHECK(std::string(e.what()).find("stpes") != std::string::npos);
    }

    // malformed frame expression fails fast with a position
    CHECK_THROWS_AS(parse_config(R"json({
        "kind": "growth",
        "frame": [["1", "0", "0"], ["0", "1", "sin(2*pi*x"]]
    })json"),
                    expression_error);

    CHECK_THROWS_AS(parse_config(R"json({"kind": "warp"})json"), config_error);
    CHECK_THROWS_AS(parse_config(R"json({"kind": "moser"})json"), config_error);  // target missing
    CHECK_THROWS_AS(parse_config(R"json({"kind": "moser", "target": "@no/such/file.srfld"})json"),
                    config_error);
    CHECK_THROWS_AS(parse_config("{not json"), config_error);

    // the resolved echo parses back as a config
    const ExperimentConfig echoed = parse_config(cfg.echo_json());
    CHECK(echoed.kind == cfg.kind);
    CHECK(echoed.dims == cfg.dims);
    CHECK(echoed.target.expression == cfg.target.expression);
}

TEST_CASE("expression inputs sample onto the grid") {
    auto g = make_grid({16, 8});
    FieldSpec zero{"0", ""};
    ScalarField z = resolve_scalar(zero, g);
    CHECK(norm_linf(z) == 0.0);

    FieldSpec wave{"sin(2*pi*x)", ""};
    ScalarField w = resolve_scalar(wave, g);
    for (std::size_t i = 0; i < g->size(); ++i)
        CHECK(w[i] == doctest::Approx(std::sin(2.0 * std::acos(-1.0) * g->node(i)[0]))
                          .epsilon(1e-15));
}

TEST_CASE("reductions are bit-identical across thread counts") {
    auto g = make_grid({32, 32, 32});
    std::mt19937_64 rng(77);
    ScalarField f = random_smooth_scalar(g, rng);
    const Density uni = Density::uniform(g);

    par::set_thread_count(1);
    const double serial = integrate(f, uni);
    const double serial_norm = norm_l2(f, uni);
    par::set_thread_count(4);
    CHECK(integrate(f, uni) == serial);
    CHECK(norm_l2(f, uni) == serial_norm);
    par::set_thread_count(0);
}

TEST_CASE("experiment runner: growth and geodesic kinds") {
    TempDir tmp;
    ExperimentConfig cfg = parse_config(R"json({
        "kind": "growth",
        "grid": {"dims": [8, 8, 8]},
        "frame": "sin-heisenberg",
        "max_depth": 3
    })json");
    cfg.out = (tmp.path / "growth").string();
    ExperimentReport rep = run_experiment(cfg);
    CHECK(rep.pass);
    CHECK(rep.summary_json.find("bracket_generating") != std::string::npos);
    CHECK(std::filesystem::exists(tmp.path / "growth" / "report.json"));
    CHECK(std::filesystem::exists(tmp.path / "growth" / "config.json"));
    CHECK(std::filesystem::exists(tmp.path / "growth" / "growth.csv"));

    ExperimentConfig geo = parse_config(R"json({
        "kind": "geodesic",
        "grid": {"dims": [8, 8, 8]},
        "frame": "sin-heisenberg",
        "q0": [0.1, 0.2, 0.3],
        "p0": [0.4, 0.8, -0.5],
        "t_max": 1.0,
        "dt": 1e-3
    })json");
    ExperimentReport grep = run_experiment(geo);
    CHECK(grep.pass);
    CHECK(grep.summary_json.find("energy_drift") != std::string::npos);
    CHECK(grep.summary_json.find("endpoint_error_ratio") != std::string::npos);
}

TEST_CASE("fit_order recovers a known slope") {
    std::vector<double> h{1.0 / 16, 1.0 / 32, 1.0 / 64};
    std::vector<double> e;
    for (const double x : h) e.push_back(3.0 * x * x);
    CHECK(fit_order(h, e) == doctest::Approx(2.0).epsilon(1e-12));
}
