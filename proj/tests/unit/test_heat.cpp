#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "subrosa/heat.hpp"
#include "subrosa/random_fields.hpp"

using namespace subrosa;

namespace {
constexpr double kTwoPi = 2.0 * std::numbers::pi;
}

TEST_CASE("entropy: reference volume, Taylor oracle, Jensen") {
    auto g = make_grid({16, 16, 16});
    CHECK(std::abs(entropy(Density::uniform(g))) <= 1e-14);

    // (1+e)log(1+e) integrates to a^2/4 + a^4/32 + O(a^6) for e = a sin;
    // the quadrature itself is spectrally accurate for this integrand
    const double a = 0.1;
    Density nu = Density::from_expression(g, Expr::parse("1 + 0.1*sin(2*pi*x)"));
    const double expected = a * a / 4.0 + a * a * a * a / 32.0;
    CHECK(std::abs(entropy(nu) - expected) <= 1e-6);

    std::mt19937_64 rng(41);
    for (int trial = 0; trial < 100; ++trial) {
        ScalarField bump = random_smooth_scalar(g, rng, 2, 0.4);
        std::vector<double> vals(g->size());
        for (std::size_t i = 0; i < g->size(); ++i) vals[i] = 1.0 + 0.8 * std::tanh(bump[i]);
        Density d = Density::normalized(g, std::move(vals));
        CHECK(entropy(d) >= -1e-12);
    }
}

TEST_CASE("heat flow: stationary state, eigenmode decay, conservation") {
    auto g = make_grid({16, 16, 16});
    Frame fr = Frame::builtin("sin-heisenberg", g);

    HeatTrajectory still = heat_evolve(Density::uniform(g), 0.01, 1e-3, fr, {0.0, 0.01});
    for (const auto& [t, d] : still.snapshots) {
        (void)t;
        for (std::size_t i = 0; i < g->size(); ++i)
            CHECK(d[i] == doctest::Approx(1.0).epsilon(1e-13));
    }

    Density nu0 = Density::from_expression(g, Expr::parse("1 + 0.2*sin(2*pi*y)"));
    HeatTrajectory traj = heat_evolve(nu0, 0.05, 1e-3, fr, {0.05});
    const auto& [tend, dend] = traj.snapshots.back();
    CHECK(tend == doctest::Approx(0.05));
    const double decay = 0.2 * std::exp(-kTwoPi * kTwoPi * 0.05);
    double num = 0.0, den = 0.0;
    for (std::size_t i = 0; i < g->size(); ++i) {
        const double target = decay * std::sin(kTwoPi * g->node(i)[1]);
        num += (dend[i] - 1.0 - target) * (dend[i] - 1.0 - target);
        den += target * target;
    }
    CHECK(std::sqrt(num / den) <= 5e-3);  // measured 2.8e-3 at this resolution

    for (const auto& step : traj.steps) CHECK(step.mass_drift <= 1e-12);
    for (std::size_t i = 1; i < traj.steps.size(); ++i)
        CHECK(traj.steps[i].entropy <= traj.steps[i - 1].entropy + 1e-12);
}

TEST_CASE("explicit stepper cross-checks the implicit one") {
    auto g = make_grid({12, 12, 12});
    Frame fr = Frame::builtin("sin-heisenberg", g);
    Density nu0 = Density::from_expression(g, Expr::parse("1 + 0.1*sin(2*pi*y)"));
    const double dt = 2e-5, tmax = 2e-3;

    HeatOptions explicit_opts;
    explicit_opts.stepper = HeatStepper::ExplicitRk4;
    HeatTrajectory a = heat_evolve(nu0, tmax, dt, fr, {tmax});
    HeatTrajectory b = heat_evolve(nu0, tmax, dt, fr, {tmax}, explicit_opts);
    double gap = 0.0;
    for (std::size_t i = 0; i < g->size(); ++i)
        gap = std::max(gap, std::abs(a.snapshots[0].second[i] - b.snapshots[0].second[i]));
    CHECK(gap <= 1e-8);

    HeatOptions unstable = explicit_opts;
    CHECK_THROWS_AS(heat_evolve(nu0, 1.0, 0.1, fr, {1.0}, unstable), config_error);
}

TEST_CASE("wasserstein metric: null vector, round trip, symmetry") {
    auto g = make_grid({12, 12, 12});
    Frame fr = Frame::builtin("sin-heisenberg", g);
    Density base = Density::from_expression(g, Expr::parse("1 + 0.1*cos(2*pi*z)"));

    TangentDensity zero(base, ScalarField(g, 0.0));
    CHECK(wasserstein_metric(zero, zero, fr, 1e-9) == doctest::Approx(0.0).epsilon(1e-14));

    // eta built as -(lap^tau f) nu for a known potential: the metric of the
    // tangent vector recovers the Dirichlet energy of f
    std::mt19937_64 rng(3);
    ScalarField f = random_smooth_scalar(g, rng, 2, 0.5, true);
    ScalarField lap = sub_laplacian(f, fr, base);
    ScalarField eta(g);
    for (std::size_t i = 0; i < g->size(); ++i) eta[i] = -lap[i] * base[i];
    const double tol = 1e-9;
    TangentDensity v(base, eta);
    const double metric = wasserstein_metric(v, v, fr, tol);
    const auto coef = horizontal_coefficients(f, fr);
    double dirichlet = 0.0;
    for (const auto& c : coef) dirichlet += inner(c, c, base);
    CHECK(std::abs(metric - dirichlet) <= 10.0 * tol * std::max(1.0, dirichlet) + 1e-12);

    ScalarField eta2 = random_smooth_scalar(g, rng, 2, 0.3, true);
    // make eta2 a legal tangent: zero total integral against mu
    TangentDensity w(base, eta2);
    const double m12 = wasserstein_metric(v, w, fr, tol);
    const double m21 = wasserstein_metric(w, v, fr, tol);
    CHECK(std::abs(m12 - m21) <= 1e-10 * std::max(1.0, std::abs(m12)));

    Density other = Density::uniform(g);
    TangentDensity mismatched(other, ScalarField(g, 0.0));
    CHECK_THROWS_AS(wasserstein_metric(v, mismatched, fr, tol), structural_error);

    CHECK_THROWS_AS(TangentDensity(base, ScalarField(g, 0.5)), structural_error);
}

TEST_CASE("gradient flow check on a heat trajectory") {
    auto g = make_grid({12, 12, 12});
    Frame fr = Frame::builtin("sin-heisenberg", g);

    // stationary density: everything vanishes
    std::vector<std::pair<double, Density>> still;
    for (const double t : {0.0, 0.01, 0.02}) still.emplace_back(t, Density::uniform(g));
    GradientFlowReport quiet = gradient_flow_check(still, fr, 1e-9);
    CHECK(quiet.max_defect <= 1e-12);
    CHECK(quiet.entropy_monotone);

    Density nu0 = Density::from_expression(g, Expr::parse("1 + 0.2*sin(2*pi*y)"));
    const double ds = 0.004;
    HeatTrajectory traj = heat_evolve(nu0, 0.01 + ds, 2e-4, fr, {0.01 - ds, 0.01, 0.01 + ds});
    GradientFlowReport rep = gradient_flow_check(traj.snapshots, fr, 1e-10);
    CHECK(rep.entropy_monotone);
    // dEnt/dt = -|d nu/dt|^2 up to the snapshot window and stencil errors
    CHECK(rep.max_defect <= 2e-2);
    const auto& mid = rep.rows[1];
    CHECK(mid.dent_dt < 0.0);
    CHECK(mid.metric_sq > 0.0);
    CHECK(std::abs(mid.dent_dt + mid.metric_sq) <=
          0.05 * std::abs(mid.dent_dt));  // within 5 percent at this window
}
