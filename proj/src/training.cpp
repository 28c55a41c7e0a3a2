#include "nfde/training.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>

#include "nfde/errors.hpp"

namespace nfde {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

void check_dataset(const TimeSeries& s) {
    if (s.size() < 2) throw DataError("train: dataset needs at least 2 observations");
    if (s.dim() < 1) throw DataError("train: dataset has no value columns");
    for (std::size_t i = 1; i < s.size(); ++i)
        if (!(s.times[i] > s.times[i - 1]))
            throw DataError("train: observation times must be strictly ascending");
    for (const auto& row : s.values)
        for (double v : row)
            if (!std::isfinite(v)) throw DataError("train: non-finite observation value");
}

bool is_constant(const TimeSeries& s) {
    for (int k = 0; k < s.dim(); ++k) {
        double lo = s.values[0][k], hi = lo;
        for (const auto& row : s.values) {
            lo = std::min(lo, row[k]);
            hi = std::max(hi, row[k]);
        }
        if (hi > lo) return false;
    }
    return true;
}

TimeGrid training_grid(const TimeSeries& s, const TrainConfig& cfg) {
    const double t0 = s.times.front();
    const double tf = s.times.back();
    const double dt =
        cfg.solver_dt ? *cfg.solver_dt
                      : (tf - t0) / static_cast<double>(s.size() - 1);
    if (!(dt > 0.0)) throw std::invalid_argument("train: solver dt must be > 0");
    return make_grid(t0, tf, dt);
}

struct Workspace {
    const TimeSeries* data = nullptr; // normalized
    TimeGrid grid;
    Mlp f_net;
    AlphaParam alpha; // unused when has_alpha is false
    bool has_alpha = false;
    std::vector<double> flat; // f params then alpha params
    std::size_t n_f = 0;
};

// One full-batch forward pass: solve on the grid, read at observations past
// t0, mean squared error. Used taped inside the loop and untaped afterwards.
Var forward_loss(const Workspace& w, std::span<const double> flat, Tape* tape,
                 const detail::SolveFn& solve, const TrainConfig& cfg, double* alpha_out) {
    const int d = w.data->dim();
    const BoundMlp bf = bind_mlp(w.f_net, flat.subspan(0, w.n_f), tape);

    Var alpha(1.0);
    if (w.has_alpha) {
        std::vector<Var> apv;
        apv.reserve(flat.size() - w.n_f);
        for (std::size_t i = w.n_f; i < flat.size(); ++i)
            apv.push_back(tape ? tape->input(flat[i]) : Var(flat[i]));
        alpha = alpha_value(w.alpha, apv, tape);
    }
    if (alpha_out) *alpha_out = w.has_alpha ? alpha.v : std::numeric_limits<double>::quiet_NaN();

    const bool time_input = cfg.time_input;
    RhsFn rhs{d, [&bf, time_input, tape, d](double t, std::span<const Var> h,
                                            std::span<Var> out) {
                  std::vector<Var> in(h.begin(), h.end());
                  if (time_input) in.push_back(tape ? tape->constant(t) : Var(t));
                  const std::vector<Var> o = bf.forward(in);
                  for (int k = 0; k < d; ++k) out[k] = o[k];
              }};

    const Trajectory traj = solve(rhs, alpha, w.data->values[0], w.grid, tape);

    // Observations at t0 are excluded: the state is pinned there.
    const std::span<const double> obs(w.data->times.data() + 1, w.data->size() - 1);
    const std::vector<std::vector<Var>> reads = read_at_observations(traj, obs);
    std::vector<Var> pred;
    std::vector<double> target;
    pred.reserve(obs.size() * d);
    target.reserve(obs.size() * d);
    for (std::size_t i = 0; i < reads.size(); ++i)
        for (int k = 0; k < d; ++k) {
            pred.push_back(reads[i][k]);
            target.push_back(w.data->values[i + 1][k]);
        }
    return mse_loss(pred, target);
}

std::pair<TrainedModel, LossHistory> train_impl(const TimeSeries& dataset,
                                                const TrainConfig& cfg,
                                                const detail::SolveFn& solve) {
    check_dataset(dataset);
    if (cfg.max_iters < 1) throw std::invalid_argument("train: max_iters must be >= 1");
    if (!(cfg.lr > 0.0)) throw std::invalid_argument("train: lr must be > 0");

    Workspace w;
    TimeSeries normed;
    std::optional<NormStats> stats;
    if (cfg.normalize && !is_constant(dataset)) {
        auto [n, st] = normalize(dataset);
        normed = std::move(n);
        stats = std::move(st);
    } else {
        normed = dataset;
    }
    w.data = &normed;
    w.grid = training_grid(normed, cfg);

    const int d = normed.dim();
    MlpConfig fcfg;
    fcfg.layer_sizes.push_back(d + (cfg.time_input ? 1 : 0));
    for (int hsize : cfg.hidden) fcfg.layer_sizes.push_back(hsize);
    fcfg.layer_sizes.push_back(d);
    fcfg.seed = cfg.seed;
    w.f_net = mlp_init(fcfg);

    w.has_alpha = cfg.solver == TrainConfig::Solver::pc_fractional;
    bool train_alpha = false;
    if (w.has_alpha) {
        switch (cfg.alpha_mode) {
            case TrainConfig::AlphaMode::scalar_logit:
                w.alpha = make_alpha_scalar(cfg.alpha_init);
                train_alpha = true;
                break;
            case TrainConfig::AlphaMode::tiny_net:
                w.alpha = make_alpha_tiny_net(cfg.alpha_init, splitmix64(cfg.seed));
                train_alpha = true;
                break;
            case TrainConfig::AlphaMode::fixed:
                w.alpha = make_alpha_fixed(cfg.alpha_init);
                break;
        }
    }

    w.n_f = w.f_net.param_count();
    w.flat.assign(w.f_net.params.begin(), w.f_net.params.end());
    if (w.has_alpha && train_alpha) {
        const auto av = w.alpha.param_values();
        w.flat.insert(w.flat.end(), av.begin(), av.end());
    }

    AdamState adam = make_adam(w.flat.size(), cfg.lr);
    LossHistory hist;
    hist.loss.reserve(cfg.max_iters);
    hist.alpha.reserve(cfg.max_iters);
    hist.seconds.reserve(cfg.max_iters);

    Tape tape;
    int nonfinite_streak = 0;
    for (int it = 0; it < cfg.max_iters; ++it) {
        const auto t_start = std::chrono::steady_clock::now();
        tape.clear();
        double realized = std::numeric_limits<double>::quiet_NaN();
        const Var loss = forward_loss(w, w.flat, &tape, solve, cfg, &realized);

        hist.loss.push_back(loss.v);
        hist.alpha.push_back(realized);

        bool updated = false;
        if (!std::isfinite(loss.v)) {
            if (++nonfinite_streak >= 3) {
                hist.failed = true;
                hist.fail_iter = it;
            }
        } else if (loss.v > cfg.divergence_loss) {
            hist.failed = true;
            hist.fail_iter = it;
        } else {
            nonfinite_streak = 0;
            const Gradients g = backward(tape, loss.id);
            const std::vector<double> grads = parameter_gradients(tape, g);
            adam_step(adam, w.flat, grads);
            updated = true;
        }

        // tiny_net: this iteration's realized order is the next one's input.
        if (w.has_alpha && w.alpha.mode == AlphaParam::Mode::tiny_net &&
            std::isfinite(realized))
            w.alpha.alpha_in = realized;

        const std::chrono::duration<double> el = std::chrono::steady_clock::now() - t_start;
        hist.seconds.push_back(el.count());
        if (hist.failed) break;
        (void)updated;
    }

    // Publish final parameters.
    std::copy(w.flat.begin(), w.flat.begin() + static_cast<std::ptrdiff_t>(w.n_f),
              w.f_net.params.begin());
    if (w.has_alpha && train_alpha) {
        auto av = w.alpha.param_values();
        std::copy(w.flat.begin() + static_cast<std::ptrdiff_t>(w.n_f), w.flat.end(), av.begin());
    }

    double final_alpha = std::numeric_limits<double>::quiet_NaN();
    const Var final_loss = forward_loss(w, w.flat, nullptr, solve, cfg, &final_alpha);
    hist.final_loss = final_loss.v;

    TrainedModel model;
    model.f_net = std::move(w.f_net);
    if (w.has_alpha) model.alpha = std::move(w.alpha);
    model.x0 = normed.values[0];
    model.t0 = normed.times.front();
    model.train_dt = w.grid.dt;
    model.solver = cfg.solver;
    model.norm = std::move(stats);
    model.time_input = cfg.time_input;
    model.corrector_iters = cfg.corrector_iters;
    return {std::move(model), std::move(hist)};
}

detail::SolveFn solver_for(const TrainConfig& cfg) {
    if (cfg.solver == TrainConfig::Solver::euler_ode)
        return [](const RhsFn& rhs, Var, std::span<const double> y0, const TimeGrid& g,
                  Tape* tape) { return ode_solve_euler(rhs, y0, g, tape); };
    const int iters = cfg.corrector_iters;
    return [iters](const RhsFn& rhs, Var alpha, std::span<const double> y0, const TimeGrid& g,
                   Tape* tape) { return fde_solve_pc(rhs, alpha, y0, g, tape, iters); };
}

} // namespace

std::pair<TrainedModel, LossHistory> train(const TimeSeries& dataset, const TrainConfig& cfg) {
    return train_impl(dataset, cfg, solver_for(cfg));
}

namespace detail {
std::pair<TrainedModel, LossHistory> train_with_solver(const TimeSeries& dataset,
                                                       const TrainConfig& cfg,
                                                       const SolveFn& solve) {
    return train_impl(dataset, cfg, solve);
}
} // namespace detail

// --- Inference -------------------------------------------------------------------

namespace {

RhsFn model_rhs(const TrainedModel& model, const BoundMlp& bf) {
    const int d = static_cast<int>(model.x0.size());
    const bool time_input = model.time_input;
    return RhsFn{d, [&bf, time_input, d](double t, std::span<const Var> h,
                                         std::span<Var> out) {
                     std::vector<Var> in(h.begin(), h.end());
                     if (time_input) in.push_back(Var(t));
                     const std::vector<Var> o = bf.forward(in);
                     for (int k = 0; k < d; ++k) out[k] = o[k];
                 }};
}

} // namespace

Trajectory predict(const TrainedModel& model, double t0, double tf, double dt) {
    if (!(tf > t0)) throw std::invalid_argument("predict: tf must exceed t0");
    if (!(dt > 0.0)) throw std::invalid_argument("predict: dt must be > 0");
    const TimeGrid grid = make_grid(t0, tf, dt);
    const BoundMlp bf = bind_mlp(model.f_net, nullptr);
    const RhsFn rhs = model_rhs(model, bf);
    if (model.solver == TrainConfig::Solver::euler_ode)
        return ode_solve_euler(rhs, model.x0, grid);
    const Var alpha = alpha_value(*model.alpha, nullptr);
    return fde_solve_pc(rhs, alpha, model.x0, grid, nullptr, model.corrector_iters);
}

double evaluate(const TrainedModel& model, const TimeSeries& test, double dt) {
    if (test.size() == 0) throw DataError("evaluate: empty test set");
    if (!(dt > 0.0)) throw std::invalid_argument("evaluate: dt must be > 0");
    const TimeSeries normed = model.norm ? apply_norm(test, *model.norm) : test;

    const double tol = dt * 1e-9;
    std::vector<double> obs;
    std::vector<double> target;
    double tmax = model.t0;
    for (std::size_t i = 0; i < normed.size(); ++i) {
        if (std::abs(normed.times[i] - model.t0) <= tol) continue; // pinned to x0
        obs.push_back(normed.times[i]);
        for (double v : normed.values[i]) target.push_back(v);
        tmax = std::max(tmax, normed.times[i]);
    }
    if (obs.empty()) return 0.0;

    const Trajectory traj = predict(model, model.t0, tmax, dt);
    const std::vector<std::vector<Var>> reads = read_at_observations(traj, obs);
    std::vector<double> pred;
    pred.reserve(target.size());
    for (const auto& row : reads)
        for (const Var& v : row) pred.push_back(v.v);
    return mse_loss(pred, target);
}

// --- Model files --------------------------------------------------------------------

namespace {

std::string fmt17(double x) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

} // namespace

void save_model(const TrainedModel& model, const std::string& path) {
    std::ofstream os(path);
    if (!os) throw DataError("cannot open for writing: " + path);
    os << "nfde-model 1\n";
    os << "solver "
       << (model.solver == TrainConfig::Solver::euler_ode ? "euler_ode" : "pc_fractional")
       << '\n';
    os << "t0 " << fmt17(model.t0) << '\n';
    os << "train_dt " << fmt17(model.train_dt) << '\n';
    os << "time_input " << (model.time_input ? 1 : 0) << '\n';
    os << "corrector_iters " << model.corrector_iters << '\n';
    os << "x0 " << model.x0.size();
    for (double v : model.x0) os << ' ' << fmt17(v);
    os << '\n';
    if (model.norm) {
        os << "norm " << model.norm->min.size();
        for (double v : model.norm->min) os << ' ' << fmt17(v);
        for (double v : model.norm->max) os << ' ' << fmt17(v);
        os << '\n';
    } else {
        os << "norm none\n";
    }
    write_mlp(os, model.f_net, "f");
    if (!model.alpha) {
        os << "alpha none\n";
    } else {
        switch (model.alpha->mode) {
            case AlphaParam::Mode::scalar_logit:
                os << "alpha scalar_logit " << fmt17(model.alpha->logit) << '\n';
                break;
            case AlphaParam::Mode::fixed:
                os << "alpha fixed " << fmt17(model.alpha->fixed_value) << '\n';
                break;
            case AlphaParam::Mode::tiny_net:
                os << "alpha tiny_net " << fmt17(model.alpha->alpha_in) << '\n';
                write_mlp(os, model.alpha->net, "a");
                break;
        }
    }
    if (!os) throw DataError("write failed: " + path);
}

TrainedModel load_model(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw DataError("cannot open model file: " + path);
    std::string magic;
    int version = 0;
    if (!(is >> magic >> version) || magic != "nfde-model" || version != 1)
        throw DataError("not an nfde-model v1 file: " + path);

    TrainedModel model;
    std::string key, val;
    if (!(is >> key >> val) || key != "solver") throw DataError("model file: expected solver");
    if (val == "pc_fractional") model.solver = TrainConfig::Solver::pc_fractional;
    else if (val == "euler_ode") model.solver = TrainConfig::Solver::euler_ode;
    else throw DataError("model file: unknown solver '" + val + "'");

    if (!(is >> key >> model.t0) || key != "t0") throw DataError("model file: expected t0");
    if (!(is >> key >> model.train_dt) || key != "train_dt")
        throw DataError("model file: expected train_dt");
    int ti = 0;
    if (!(is >> key >> ti) || key != "time_input")
        throw DataError("model file: expected time_input");
    model.time_input = ti != 0;
    if (!(is >> key >> model.corrector_iters) || key != "corrector_iters")
        throw DataError("model file: expected corrector_iters");

    std::size_t n = 0;
    if (!(is >> key >> n) || key != "x0") throw DataError("model file: expected x0");
    model.x0.resize(n);
    for (double& v : model.x0)
        if (!(is >> v)) throw DataError("model file: truncated x0");

    if (!(is >> key) || key != "norm") throw DataError("model file: expected norm");
    if (!(is >> val)) throw DataError("model file: truncated norm");
    if (val != "none") {
        const std::size_t nd = std::stoul(val);
        NormStats st;
        st.min.resize(nd);
        st.max.resize(nd);
        for (double& v : st.min)
            if (!(is >> v)) throw DataError("model file: truncated norm");
        for (double& v : st.max)
            if (!(is >> v)) throw DataError("model file: truncated norm");
        model.norm = std::move(st);
    }

    model.f_net = read_mlp(is, "f");

    if (!(is >> key >> val) || key != "alpha") throw DataError("model file: expected alpha");
    if (val == "none") {
        // Euler baseline
    } else if (val == "scalar_logit") {
        AlphaParam a;
        a.mode = AlphaParam::Mode::scalar_logit;
        if (!(is >> a.logit)) throw DataError("model file: truncated alpha");
        model.alpha = a;
    } else if (val == "fixed") {
        AlphaParam a;
        a.mode = AlphaParam::Mode::fixed;
        if (!(is >> a.fixed_value)) throw DataError("model file: truncated alpha");
        model.alpha = a;
    } else if (val == "tiny_net") {
        AlphaParam a;
        a.mode = AlphaParam::Mode::tiny_net;
        if (!(is >> a.alpha_in)) throw DataError("model file: truncated alpha");
        a.net = read_mlp(is, "a");
        model.alpha = a;
    } else {
        throw DataError("model file: unknown alpha mode '" + val + "'");
    }

    if (model.solver == TrainConfig::Solver::pc_fractional && !model.alpha)
        throw DataError("model file: fractional solver requires an alpha block");
    return model;
}

// --- Loss history files ----------------------------------------------------------------

void write_loss_history_csv(const LossHistory& h, const std::string& path, bool include_timing) {
    std::ofstream os(path);
    if (!os) throw DataError("cannot open for writing: " + path);
    os << "iter,loss,alpha,seconds\n";
    for (std::size_t i = 0; i < h.loss.size(); ++i) {
        os << i << ',' << fmt17(h.loss[i]) << ',' << fmt17(h.alpha[i]) << ',';
        if (include_timing) os << fmt17(h.seconds[i]);
        os << '\n';
    }
}

LossHistory read_loss_history_csv(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw DataError("cannot open loss history: " + path);
    std::string line;
    if (!std::getline(is, line) || line.rfind("iter,loss,alpha", 0) != 0)
        throw DataError("not a loss-history CSV: " + path);
    LossHistory h;
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        std::stringstream ss(line);
        std::string cell;
        std::vector<std::string> cells;
        while (std::getline(ss, cell, ',')) cells.push_back(cell);
        while (cells.size() < 4) cells.push_back("");
        if (cells.size() != 4) throw DataError("malformed loss-history row: " + line);
        try {
            h.loss.push_back(std::stod(cells[1]));
            h.alpha.push_back(std::stod(cells[2]));
            h.seconds.push_back(cells[3].empty() ? 0.0 : std::stod(cells[3]));
        } catch (const std::exception&) {
            throw DataError("malformed loss-history row: " + line);
        }
    }
    if (!h.loss.empty()) h.final_loss = h.loss.back();
    return h;
}

} // namespace nfde
