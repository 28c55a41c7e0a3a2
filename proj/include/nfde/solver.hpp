#pragma once

#include <functional>
#include <span>
#include <string>
#include <vector>

#include "nfde/tape.hpp"

namespace nfde {

// Uniform grid t_m = t0 + m*dt, m = 0..n_steps.
struct TimeGrid {
    double t0 = 0.0;
    double dt = 0.0;
    int n_steps = 0;

    double node(int m) const { return t0 + m * dt; }
    double t_end() const { return node(n_steps); }
};

// Builds a grid covering [t0, tf]; n_steps = ceil((tf-t0)/dt) up to a relative
// slack of 1e-9 so tf lands on the last node when (tf-t0)/dt is integral.
TimeGrid make_grid(double t0, double tf, double dt);

// Right-hand side f(t, h). `out` has rhs.dim entries. State and output are
// Vars, so the same callable serves plain solves and taped training solves.
struct RhsFn {
    int dim = 1;
    std::function<void(double t, std::span<const Var> h, std::span<Var> out)> eval;
};

// Dense solve output. States hold the same Vars the solver produced, so a
// taped solve keeps its graph alive for read-out and loss construction;
// untaped solves carry plain values.
struct Trajectory {
    TimeGrid grid;
    std::vector<std::vector<Var>> states;      // n_steps+1 rows of dim entries
    std::vector<std::vector<Var>> rhs_history; // same shape

    int dim() const { return states.empty() ? 0 : static_cast<int>(states[0].size()); }
    double value(int step, int k) const { return states[step][k].v; }
};

// Fractional Adams-Bashforth-Moulton weights for the step to t_{n+1}, as plain
// reals (exact integer collapse at alpha = 1).
//   predictor_weights(n, alpha, dt)[j] = dt^alpha/alpha * ((n+1-j)^alpha - (n-j)^alpha), j = 0..n
//   corrector_weights(n, alpha)[j]:
//     j = 0:        n^{alpha+1} - (n - alpha) (n+1)^alpha
//     1 <= j <= n:  (n-j+2)^{alpha+1} + (n-j)^{alpha+1} - 2 (n-j+1)^{alpha+1}
//     j = n+1:      1
// alpha must lie in (0, 1], dt > 0, n >= 0.
std::vector<double> predictor_weights(int n, double alpha, double dt);
std::vector<double> corrector_weights(int n, double alpha);

// Predictor-corrector solve of D^alpha h = f(t, h), h(t0) = y0, alpha in (0,1].
// Each step: predictor h0 + (1/Gamma(alpha)) sum_j b_j f_j over the full stored
// history (the b_j as in predictor_weights), one rhs evaluation at the
// predicted point, corrector with prefactor dt^alpha / Gamma(alpha+2), then a
// final rhs evaluation at the corrected state which is what enters the stored
// history. corrector_iters > 1 repeats the correct/evaluate pair.
//
// With a tape, alpha may itself be a taped node and the weights are built from
// it, so gradients flow through the memory kernel. Taped and untaped solves
// run the identical arithmetic and agree bit-for-bit.
//
// O(n_steps^2) work, O(n_steps) storage. Throws NumericalError naming the step
// where a state went non-finite.
Trajectory fde_solve_pc(const RhsFn& rhs, Var alpha, std::span<const double> y0,
                        const TimeGrid& grid, Tape* tape = nullptr, int corrector_iters = 1);

// Forward Euler baseline for first-order systems; O(n_steps) work and storage.
// rhs_history's last row holds f at the final state.
Trajectory ode_solve_euler(const RhsFn& rhs, std::span<const double> y0,
                           const TimeGrid& grid, Tape* tape = nullptr);

// Reads at observation times: exact state when an observation falls on a grid
// node (|t - node| <= dt * 1e-9), linear interpolation between bracketing
// nodes otherwise. Stays on the trajectory's tape. Throws std::invalid_argument
// for times outside the grid.
std::vector<std::vector<Var>> read_at_observations(const Trajectory& traj,
                                                   std::span<const double> obs_times);

// header t,y0..y{d-1}; 17 significant digits.
void write_trajectory_csv(const Trajectory& traj, const std::string& path);

// --- Benchmark -----------------------------------------------------------------

struct BenchmarkRow {
    std::string solver;  // "pc_fractional" or "euler_ode"
    int n_steps = 0;
    double mean_seconds = 0.0;
    double std_seconds = 0.0;
    std::size_t est_bytes = 0; // additional allocation for one solve
};

struct BenchmarkResult {
    std::vector<BenchmarkRow> rows;
    std::string to_text() const;
};

// Times both solvers on the linear relaxation problem over [0, 20]
// (D^0.6 y = -y and y' = -y, y0 = 1) at 100 steps plus the requested sizes.
// Small solves are looped internally so each sample is measurable; mean and
// population std are per single solve, over `repeats` samples.
BenchmarkResult benchmark_solvers(std::span<const int> sizes, int repeats = 5);

} // namespace nfde
