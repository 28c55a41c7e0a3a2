#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "nfde/data.hpp"
#include "nfde/nn.hpp"
#include "nfde/solver.hpp"

namespace nfde {

struct TrainConfig {
    int max_iters = 200;
    double lr = 1e-3;
    std::uint64_t seed = 0;
    enum class Solver { pc_fractional, euler_ode } solver = Solver::pc_fractional;
    std::optional<double> solver_dt;  // empty: match the observation spacing
    enum class AlphaMode { scalar_logit, tiny_net, fixed } alpha_mode = AlphaMode::scalar_logit;
    double alpha_init = 0.99;         // doubles as the value in fixed mode
    int runs = 3;                     // used by the experiment harness
    std::vector<int> hidden = {64, 64};
    bool time_input = false;          // append t to the rhs net input
    bool normalize = true;
    int corrector_iters = 1;
    double divergence_loss = 1e6;     // run is marked failed past this
};

struct LossHistory {
    std::vector<double> loss;     // per-iteration, before that iteration's update
    std::vector<double> alpha;    // realized order per iteration (NaN for euler_ode)
    std::vector<double> seconds;  // wall clock per iteration
    double final_loss = 0.0;      // loss of the final parameters, full recompute
    bool failed = false;
    int fail_iter = -1;
};

struct TrainedModel {
    Mlp f_net;
    std::optional<AlphaParam> alpha;  // empty for the Euler baseline
    std::vector<double> x0;           // initial state in normalized units
    double t0 = 0.0;
    double train_dt = 0.0;
    TrainConfig::Solver solver = TrainConfig::Solver::pc_fractional;
    std::optional<NormStats> norm;
    bool time_input = false;
    int corrector_iters = 1;
};

// Full-batch training per the predictor-corrector scheme: each iteration
// realizes alpha, solves on the training grid under a fresh tape, reads at the
// observation times, backpropagates the mean squared error (observations at t0
// are excluded; that residual is identically zero) and takes one Adam step.
// The dataset is raw; min-max normalization is fitted here and stored on the
// model. A constant series skips normalization.
std::pair<TrainedModel, LossHistory> train(const TimeSeries& dataset, const TrainConfig& cfg);

// Single untaped solve with frozen parameters, in normalized units.
Trajectory predict(const TrainedModel& model, double t0, double tf, double dt);

// Solves over [model.t0, max test time] at dt, reads at the test times and
// returns the MSE in normalized units. Test values are raw; the model's stored
// stats are applied. Points at the model's t0 are excluded as in training.
double evaluate(const TrainedModel& model, const TimeSeries& test, double dt);

// Versioned flat text files; doubles are written with 17 significant digits,
// so identical runs produce identical bytes.
void save_model(const TrainedModel& model, const std::string& path);
TrainedModel load_model(const std::string& path);

// iter,loss,alpha,seconds. With include_timing false the seconds field is left
// empty so repeated runs produce identical bytes.
void write_loss_history_csv(const LossHistory& h, const std::string& path, bool include_timing);
LossHistory read_loss_history_csv(const std::string& path);

namespace detail {
// Solver injection point for equivalence tests against independent schemes.
using SolveFn = std::function<Trajectory(const RhsFn&, Var alpha, std::span<const double>,
                                         const TimeGrid&, Tape*)>;
std::pair<TrainedModel, LossHistory> train_with_solver(const TimeSeries& dataset,
                                                       const TrainConfig& cfg,
                                                       const SolveFn& solve);
} // namespace detail

} // namespace nfde
