#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <string>
#include <vector>

#include "doctest.h"
#include "nfde/errors.hpp"
#include "nfde/nn.hpp"
#include "nfde/numerics.hpp"
#include "nfde/solver.hpp"

using nfde::fde_solve_pc;
using nfde::RhsFn;
using nfde::TimeGrid;
using nfde::Trajectory;
using nfde::Var;

namespace {

RhsFn linear_decay() {
    return RhsFn{1, [](double, std::span<const Var> h, std::span<Var> out) {
                     out[0] = -h[0];
                 }};
}

RhsFn relaxation() {
    return RhsFn{1, [](double, std::span<const Var> h, std::span<Var> out) {
                     out[0] = Var(1.0) - h[0];
                 }};
}

double max_error_vs(const Trajectory& traj, const std::function<double(double)>& exact) {
    double err = 0.0;
    for (int m = 0; m <= traj.grid.n_steps; ++m)
        err = std::max(err, std::abs(traj.value(m, 0) - exact(traj.grid.node(m))));
    return err;
}

// Classic local Heun scheme, the independent reference for the alpha = 1 case.
std::vector<double> heun(double y0, double dt, int n_steps,
                         const std::function<double(double)>& f) {
    std::vector<double> y(static_cast<std::size_t>(n_steps) + 1);
    y[0] = y0;
    for (int n = 0; n < n_steps; ++n) {
        const double f0 = f(y[static_cast<std::size_t>(n)]);
        const double pred = y[static_cast<std::size_t>(n)] + dt * f0;
        y[static_cast<std::size_t>(n) + 1] =
            y[static_cast<std::size_t>(n)] + 0.5 * dt * (f0 + f(pred));
    }
    return y;
}

} // namespace

TEST_CASE("make_grid covers the interval and absorbs rounding") {
    TimeGrid g = nfde::make_grid(0.0, 1.0, 0.1);
    CHECK(g.n_steps == 10);
    CHECK(g.t_end() == doctest::Approx(1.0).epsilon(1e-12));

    // 0.3/0.1 is 2.9999... in floating point; the slack keeps it at 3 steps.
    TimeGrid g2 = nfde::make_grid(0.0, 0.3, 0.1);
    CHECK(g2.n_steps == 3);

    TimeGrid g3 = nfde::make_grid(0.0, 0.35, 0.1);
    CHECK(g3.n_steps == 4);

    CHECK_THROWS_AS(nfde::make_grid(0.0, 1.0, 0.0), std::invalid_argument);
    CHECK_THROWS_AS(nfde::make_grid(1.0, 0.5, 0.1), std::invalid_argument);
}

TEST_CASE("predictor weights: worked example and closed forms") {
    // n = 1, alpha = 0.5, dt = 1: dt^a/a * ((n+1-j)^a - (n-j)^a), j = 0..n.
    const std::vector<double> b = nfde::predictor_weights(1, 0.5, 1.0);
    REQUIRE(b.size() == 2);
    CHECK(b[0] == doctest::Approx(2.0 * (std::sqrt(2.0) - 1.0)).epsilon(1e-15));
    CHECK(b[1] == doctest::Approx(2.0).epsilon(1e-15));

    // n = 0 collapses to a single rectangle weight dt^a / a.
    const std::vector<double> b0 = nfde::predictor_weights(0, 0.3, 0.25);
    REQUIRE(b0.size() == 1);
    CHECK(b0[0] == doctest::Approx(std::pow(0.25, 0.3) / 0.3).epsilon(1e-15));
}

TEST_CASE("corrector weights: worked example and closed forms") {
    // n = 1, alpha = 0.5: [1 - sqrt(2)/2, 2 sqrt(2) - 2, 1].
    const std::vector<double> a = nfde::corrector_weights(1, 0.5);
    REQUIRE(a.size() == 3);
    CHECK(a[0] == doctest::Approx(1.0 - std::sqrt(2.0) / 2.0).epsilon(1e-14));
    CHECK(a[1] == doctest::Approx(2.0 * std::sqrt(2.0) - 2.0).epsilon(1e-14));
    CHECK(a[2] == 1.0);

    // n = 0: [alpha, 1].
    const std::vector<double> a0 = nfde::corrector_weights(0, 0.7);
    REQUIRE(a0.size() == 2);
    CHECK(a0[0] == doctest::Approx(0.7).epsilon(1e-15));
    CHECK(a0[1] == 1.0);
}

TEST_CASE("weights collapse exactly to trapezoid and rectangle at alpha = 1") {
    for (int n = 0; n <= 50; ++n) {
        const std::vector<double> b = nfde::predictor_weights(n, 1.0, 0.02);
        for (double w : b) CHECK(w == 0.02); // exact, not approximate

        const std::vector<double> a = nfde::corrector_weights(n, 1.0);
        REQUIRE(a.size() == static_cast<std::size_t>(n) + 2);
        CHECK(a.front() == 1.0);
        CHECK(a.back() == 1.0);
        for (std::size_t j = 1; j + 1 < a.size(); ++j) CHECK(a[j] == 2.0);
    }
}

TEST_CASE("weights are positive and the predictor row telescopes") {
    for (double alpha : {0.3, 0.6, 0.9}) {
        for (int n : {0, 1, 5, 17, 40}) {
            const std::vector<double> b = nfde::predictor_weights(n, alpha, 0.5);
            double sum = 0.0;
            for (double w : b) {
                CHECK(w > 0.0);
                sum += w;
            }
            // sum_j ((n+1-j)^a - (n-j)^a) telescopes to (n+1)^a.
            const double expect =
                std::pow(0.5, alpha) / alpha * std::pow(n + 1.0, alpha);
            CHECK(sum == doctest::Approx(expect).epsilon(1e-12));

            for (double w : nfde::corrector_weights(n, alpha)) CHECK(w > 0.0);
        }
    }
}

TEST_CASE("first corrector weight depends on n for fractional orders only") {
    CHECK(nfde::corrector_weights(1, 0.6)[0] != nfde::corrector_weights(2, 0.6)[0]);
    CHECK(nfde::corrector_weights(1, 1.0)[0] == 1.0);
    CHECK(nfde::corrector_weights(30, 1.0)[0] == 1.0);
}

TEST_CASE("zero right-hand side keeps the state constant") {
    RhsFn rhs{1, [](double, std::span<const Var>, std::span<Var> out) { out[0] = Var(0.0); }};
    const std::vector<double> y0 = {0.3};
    const Trajectory traj = fde_solve_pc(rhs, Var(0.6), y0, TimeGrid{0.0, 0.1, 25});
    for (int m = 0; m <= 25; ++m) CHECK(traj.value(m, 0) == 0.3);
}

TEST_CASE("alpha = 1 linear decay matches the exponential and Heun exactly") {
    const TimeGrid grid{0.0, 0.01, 100};
    const std::vector<double> y0 = {1.0};
    const Trajectory traj = fde_solve_pc(linear_decay(), Var(1.0), y0, grid);
    CHECK(max_error_vs(traj, [](double t) { return std::exp(-t); }) <= 1e-3);

    const std::vector<double> ref = heun(1.0, 0.01, 100, [](double y) { return -y; });
    for (int m = 0; m <= 100; ++m)
        CHECK(std::abs(traj.value(m, 0) - ref[static_cast<std::size_t>(m)]) <= 1e-12);
}

TEST_CASE("fractional relaxation matches the Mittag-Leffler closed form") {
    for (double alpha : {0.5, 0.8}) {
        const double dt = 1.0 / 512.0;
        const Trajectory traj =
            fde_solve_pc(relaxation(), Var(alpha), std::vector<double>{0.3},
                         TimeGrid{0.0, dt, 512});
        const double exact =
            1.0 - 0.7 * nfde::mittag_leffler(alpha, -1.0); // t = 1, t^alpha = 1
        CHECK(std::abs(traj.value(512, 0) - exact) <= 5e-3);
    }
}

TEST_CASE("empirical convergence order sits in the fractional window") {
    for (double alpha : {0.6, 0.8}) {
        auto err_at = [&](int n) {
            const double dt = 1.0 / n;
            const Trajectory traj = fde_solve_pc(relaxation(), Var(alpha),
                                                 std::vector<double>{0.3},
                                                 TimeGrid{0.0, dt, n});
            const double exact = 1.0 - 0.7 * nfde::mittag_leffler(alpha, -1.0);
            return std::abs(traj.value(n, 0) - exact);
        };
        const double order = std::log2(err_at(128) / err_at(256));
        CHECK(order >= 1.0);
        CHECK(order <= std::min(2.0, 1.0 + alpha) + 0.4);
    }
}

TEST_CASE("two-dimensional rotation at alpha = 1") {
    RhsFn rot{2, [](double, std::span<const Var> h, std::span<Var> out) {
                  out[0] = -h[1];
                  out[1] = h[0];
              }};
    const TimeGrid grid{0.0, 0.005, 200};
    const Trajectory traj = fde_solve_pc(rot, Var(1.0), std::vector<double>{1.0, 0.0}, grid);
    for (int m = 0; m <= 200; m += 20) {
        const double t = grid.node(m);
        CHECK(traj.value(m, 0) == doctest::Approx(std::cos(t)).epsilon(1e-4));
        CHECK(traj.value(m, 1) == doctest::Approx(std::sin(t)).epsilon(1e-4));
    }
}

TEST_CASE("extra corrector sweeps stay accurate") {
    const TimeGrid grid{0.0, 0.01, 100};
    const Trajectory traj =
        fde_solve_pc(linear_decay(), Var(1.0), std::vector<double>{1.0}, grid, nullptr, 3);
    CHECK(max_error_vs(traj, [](double t) { return std::exp(-t); }) <= 2e-3);
}

TEST_CASE("taped and untaped solves agree bit for bit") {
    nfde::MlpConfig cfg;
    cfg.layer_sizes = {1, 6, 1};
    cfg.seed = 11;
    const nfde::Mlp net = nfde::mlp_init(cfg);

    const TimeGrid grid{0.0, 0.25, 20};
    const std::vector<double> y0 = {0.4};

    nfde::Tape tape;
    const nfde::BoundMlp bound = nfde::bind_mlp(net, &tape);
    RhsFn rhs_taped{1, [&](double, std::span<const Var> h, std::span<Var> out) {
                        out[0] = bound.forward(std::vector<Var>(h.begin(), h.end()))[0];
                    }};
    const Trajectory taped = fde_solve_pc(rhs_taped, tape.input(0.77), y0, grid, &tape);

    const nfde::BoundMlp plain = nfde::bind_mlp(net, nullptr);
    RhsFn rhs_plain{1, [&](double, std::span<const Var> h, std::span<Var> out) {
                        out[0] = plain.forward(std::vector<Var>(h.begin(), h.end()))[0];
                    }};
    const Trajectory untaped = fde_solve_pc(rhs_plain, Var(0.77), y0, grid);

    for (int m = 0; m <= 20; ++m) CHECK(taped.value(m, 0) == untaped.value(m, 0));
}

TEST_CASE("diverging state names the failing step") {
    RhsFn blow{1, [](double, std::span<const Var> h, std::span<Var> out) {
                   out[0] = h[0] * 1e200;
               }};
    try {
        fde_solve_pc(blow, Var(0.9), std::vector<double>{1.0}, TimeGrid{0.0, 0.5, 10});
        FAIL("expected NumericalError");
    } catch (const nfde::NumericalError& e) {
        CHECK(std::string(e.what()).find("step") != std::string::npos);
    }
}

TEST_CASE("solver input validation") {
    CHECK_THROWS_AS(
        fde_solve_pc(linear_decay(), Var(0.0), std::vector<double>{1.0}, TimeGrid{0, 0.1, 5}),
        std::domain_error);
    CHECK_THROWS_AS(
        fde_solve_pc(linear_decay(), Var(1.2), std::vector<double>{1.0}, TimeGrid{0, 0.1, 5}),
        std::domain_error);
    CHECK_THROWS_AS(
        fde_solve_pc(linear_decay(), Var(0.5), std::vector<double>{}, TimeGrid{0, 0.1, 5}),
        std::invalid_argument);
    CHECK_THROWS_AS(fde_solve_pc(linear_decay(), Var(0.5), std::vector<double>{1.0},
                                 TimeGrid{0, -0.1, 5}),
                    std::invalid_argument);
}

TEST_CASE("euler baseline converges at first order and is exact for constants") {
    const TimeGrid grid{0.0, 0.001, 1000};
    const Trajectory traj = nfde::ode_solve_euler(linear_decay(), std::vector<double>{1.0}, grid);
    CHECK(max_error_vs(traj, [](double t) { return std::exp(-t); }) <= 1e-3);

    RhsFn constant{1, [](double, std::span<const Var>, std::span<Var> out) {
                       out[0] = Var(2.0);
                   }};
    const Trajectory lin = nfde::ode_solve_euler(constant, std::vector<double>{0.0},
                                                 TimeGrid{0.0, 0.125, 8});
    CHECK(lin.value(8, 0) == 2.0); // 2 t with exact dyadic steps
}

TEST_CASE("read_at_observations: node hits, interpolation, and range checks") {
    const TimeGrid grid{0.0, 0.5, 4};
    RhsFn rhs{1, [](double, std::span<const Var> h, std::span<Var> out) { out[0] = h[0]; }};
    const Trajectory traj = fde_solve_pc(rhs, Var(1.0), std::vector<double>{1.0}, grid);

    const std::vector<double> at_nodes = {0.0, 0.5, 2.0};
    const auto reads = nfde::read_at_observations(traj, at_nodes);
    REQUIRE(reads.size() == 3);
    CHECK(reads[0][0].v == traj.value(0, 0));
    CHECK(reads[1][0].v == traj.value(1, 0));
    CHECK(reads[2][0].v == traj.value(4, 0));

    // A small perturbation within dt*1e-9 still counts as the node.
    const auto near = nfde::read_at_observations(traj, std::vector<double>{0.5 + 1e-13});
    CHECK(near[0][0].v == traj.value(1, 0));

    const auto mid = nfde::read_at_observations(traj, std::vector<double>{0.75});
    CHECK(mid[0][0].v ==
          doctest::Approx(0.5 * (traj.value(1, 0) + traj.value(2, 0))).epsilon(1e-15));

    CHECK_THROWS_AS(nfde::read_at_observations(traj, std::vector<double>{-0.1}),
                    std::invalid_argument);
    CHECK_THROWS_AS(nfde::read_at_observations(traj, std::vector<double>{2.1}),
                    std::invalid_argument);
}

TEST_CASE("trajectory csv uses full precision") {
    const TimeGrid grid{0.0, 0.1, 3};
    const Trajectory traj = fde_solve_pc(relaxation(), Var(0.5), std::vector<double>{0.3}, grid);
    const std::string path =
        (std::filesystem::temp_directory_path() / "nfde_traj_test.csv").string();
    nfde::write_trajectory_csv(traj, path);

    std::ifstream is(path);
    std::string header;
    std::getline(is, header);
    CHECK(header == "t,y0");
    double t = 0.0, y = 0.0;
    char comma = 0;
    is >> t >> comma >> y;
    CHECK(t == 0.0);
    CHECK(y == 0.3); // 17 significant digits reproduce the double exactly
    std::filesystem::remove(path);
}

TEST_CASE("benchmark produces rows for both solvers") {
    const std::vector<int> sizes = {16};
    const nfde::BenchmarkResult r = nfde::benchmark_solvers(sizes, 2);
    bool saw_pc100 = false, saw_euler16 = false;
    for (const nfde::BenchmarkRow& row : r.rows) {
        CHECK(row.mean_seconds > 0.0);
        CHECK(row.std_seconds >= 0.0);
        CHECK(row.est_bytes > 0);
        if (row.solver == "pc_fractional" && row.n_steps == 100) saw_pc100 = true;
        if (row.solver == "euler_ode" && row.n_steps == 16) saw_euler16 = true;
    }
    CHECK(saw_pc100);
    CHECK(saw_euler16);
    const std::string text = r.to_text();
    CHECK(text.find("pc_fractional") != std::string::npos);
    CHECK(text.find("reference") != std::string::npos);
}
