// Command line front end: generate / train / predict / evaluate / experiment /
// benchmark / plot. Exit codes: 0 success, 1 usage error, 2 data error,
// 3 numerical failure.
#include <cinttypes>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "nfde/errors.hpp"
#include "nfde/experiment.hpp"

namespace {

using nfde::ExperimentSpec;
using nfde::TrainConfig;

nfde::SplitSpec::Kind parse_split(const std::string& s) {
    if (s == "reconstruction") return nfde::SplitSpec::Kind::reconstruction;
    if (s == "extrapolation") return nfde::SplitSpec::Kind::extrapolation;
    if (s == "completion") return nfde::SplitSpec::Kind::completion;
    throw std::invalid_argument("unknown split: " + s);
}

ExperimentSpec::Model parse_model(const std::string& s) {
    if (s == "nfde" || s == "neural_fde") return ExperimentSpec::Model::neural_fde;
    if (s == "node" || s == "neural_ode") return ExperimentSpec::Model::neural_ode;
    throw std::invalid_argument("unknown model: " + s);
}

// --alpha accepts "learn" (scalar head), "net" (tiny network head), or a fixed
// real value in (0, 1].
void apply_alpha_flag(const std::string& s, TrainConfig& cfg) {
    if (s == "learn") {
        cfg.alpha_mode = TrainConfig::AlphaMode::scalar_logit;
        return;
    }
    if (s == "net" || s == "learn-net") {
        cfg.alpha_mode = TrainConfig::AlphaMode::tiny_net;
        return;
    }
    std::size_t used = 0;
    double v = 0.0;
    try {
        v = std::stod(s, &used);
    } catch (const std::exception&) {
        throw std::invalid_argument("--alpha expects 'learn', 'net' or a real: " + s);
    }
    if (used != s.size() || !(v > 0.0) || v > 1.0)
        throw std::invalid_argument("--alpha value must lie in (0, 1]: " + s);
    cfg.alpha_mode = TrainConfig::AlphaMode::fixed;
    cfg.alpha_init = v;
}

TrainConfig::AlphaMode parse_alpha_mode(const std::string& s) {
    if (s == "scalar_logit") return TrainConfig::AlphaMode::scalar_logit;
    if (s == "tiny_net") return TrainConfig::AlphaMode::tiny_net;
    if (s == "fixed") return TrainConfig::AlphaMode::fixed;
    throw std::invalid_argument("unknown alpha_mode: " + s);
}

TrainConfig::Solver parse_solver(const std::string& s) {
    if (s == "pc_fractional") return TrainConfig::Solver::pc_fractional;
    if (s == "euler_ode") return TrainConfig::Solver::euler_ode;
    throw std::invalid_argument("unknown solver: " + s);
}

void check_keys(const nlohmann::json& j, std::initializer_list<const char*> allowed,
                const char* where) {
    for (const auto& item : j.items()) {
        bool ok = false;
        for (const char* k : allowed)
            if (item.key() == k) ok = true;
        if (!ok)
            throw std::invalid_argument(std::string("config: unknown key '") + item.key() +
                                        "' in " + where);
    }
}

void apply_train_json(const nlohmann::json& j, TrainConfig& cfg) {
    check_keys(j,
               {"max_iters", "lr", "seed", "solver", "solver_dt", "alpha_mode", "alpha_init",
                "runs", "hidden", "time_input", "normalize", "corrector_iters",
                "divergence_loss"},
               "train");
    if (j.contains("max_iters")) cfg.max_iters = j["max_iters"].get<int>();
    if (j.contains("lr")) cfg.lr = j["lr"].get<double>();
    if (j.contains("seed")) cfg.seed = j["seed"].get<std::uint64_t>();
    if (j.contains("solver")) cfg.solver = parse_solver(j["solver"].get<std::string>());
    if (j.contains("solver_dt")) {
        if (j["solver_dt"].is_null()) cfg.solver_dt.reset();
        else cfg.solver_dt = j["solver_dt"].get<double>();
    }
    if (j.contains("alpha_mode"))
        cfg.alpha_mode = parse_alpha_mode(j["alpha_mode"].get<std::string>());
    if (j.contains("alpha_init")) cfg.alpha_init = j["alpha_init"].get<double>();
    if (j.contains("runs")) cfg.runs = j["runs"].get<int>();
    if (j.contains("hidden")) cfg.hidden = j["hidden"].get<std::vector<int>>();
    if (j.contains("time_input")) cfg.time_input = j["time_input"].get<bool>();
    if (j.contains("normalize")) cfg.normalize = j["normalize"].get<bool>();
    if (j.contains("corrector_iters")) cfg.corrector_iters = j["corrector_iters"].get<int>();
    if (j.contains("divergence_loss")) cfg.divergence_loss = j["divergence_loss"].get<double>();
}

void apply_config_file(const std::string& path, ExperimentSpec& spec) {
    std::ifstream is(path);
    if (!is) throw nfde::DataError("cannot open config: " + path);
    nlohmann::json j;
    try {
        is >> j;
    } catch (const std::exception& e) {
        throw nfde::DataError("config parse failure in " + path + ": " + e.what());
    }
    check_keys(j,
               {"dataset", "data_alpha", "ro_x0", "pg_r", "pg_K", "pg_p0", "split",
                "train_points", "train_horizon", "test_points", "test_horizon",
                "completion_points", "holdout_stride", "gen_refine", "time_column",
                "value_column", "model", "train", "out_dir", "jobs"},
               "config");
    if (j.contains("dataset")) spec.dataset = j["dataset"].get<std::string>();
    if (j.contains("data_alpha")) spec.data_alpha = j["data_alpha"].get<double>();
    if (j.contains("ro_x0")) spec.ro_x0 = j["ro_x0"].get<double>();
    if (j.contains("pg_r")) spec.pg_r = j["pg_r"].get<double>();
    if (j.contains("pg_K")) spec.pg_K = j["pg_K"].get<double>();
    if (j.contains("pg_p0")) spec.pg_p0 = j["pg_p0"].get<double>();
    if (j.contains("split")) spec.split = parse_split(j["split"].get<std::string>());
    if (j.contains("train_points")) spec.train_points = j["train_points"].get<int>();
    if (j.contains("train_horizon")) spec.train_horizon = j["train_horizon"].get<double>();
    if (j.contains("test_points")) spec.test_points = j["test_points"].get<int>();
    if (j.contains("test_horizon")) spec.test_horizon = j["test_horizon"].get<double>();
    if (j.contains("completion_points"))
        spec.completion_points = j["completion_points"].get<int>();
    if (j.contains("holdout_stride")) spec.holdout_stride = j["holdout_stride"].get<int>();
    if (j.contains("gen_refine")) spec.gen_refine = j["gen_refine"].get<int>();
    if (j.contains("time_column")) spec.time_column = j["time_column"].get<std::string>();
    if (j.contains("value_column")) spec.value_column = j["value_column"].get<std::string>();
    if (j.contains("model")) spec.model = parse_model(j["model"].get<std::string>());
    if (j.contains("train")) apply_train_json(j["train"], spec.train);
    if (j.contains("out_dir")) spec.out_dir = j["out_dir"].get<std::string>();
    if (j.contains("jobs")) spec.jobs = j["jobs"].get<int>();
}

std::string join_path(const std::string& dir, const std::string& name) {
    return (std::filesystem::path(dir) / name).string();
}

nfde::TimeSeries trajectory_to_series(const nfde::Trajectory& traj) {
    nfde::TimeSeries s;
    for (int m = 0; m <= traj.grid.n_steps; ++m) {
        s.times.push_back(traj.grid.node(m));
        std::vector<double> row;
        row.reserve(traj.states[m].size());
        for (const nfde::Var& v : traj.states[m]) row.push_back(v.v);
        s.values.push_back(std::move(row));
    }
    return s;
}

// --- generate -------------------------------------------------------------------

struct GenerateOpts {
    std::string system;
    double alpha = 0.99;
    int points = 200;
    double horizon = -1.0; // default depends on the system
    double x0 = 0.3;
    double r = 0.1, K = 1000.0, p0 = 100.0;
    int refine = 8;
    std::string out;
};

void run_generate(const GenerateOpts& o) {
    if (o.system != "ro" && o.system != "pg")
        throw std::invalid_argument("--system must be ro or pg");
    const double horizon = o.horizon > 0 ? o.horizon : (o.system == "ro" ? 20.0 : 200.0);
    if (o.points < 2) throw std::invalid_argument("--points must be >= 2");
    const nfde::TimeGrid grid{0.0, horizon / (o.points - 1), o.points - 1};
    nfde::TimeSeries s;
    std::vector<std::pair<std::string, double>> params;
    if (o.system == "ro") {
        s = nfde::gen_ro(o.alpha, o.x0, grid, o.refine);
        params = {{"x0", o.x0}};
    } else {
        s = nfde::gen_pg(o.alpha, o.r, o.K, o.p0, grid, o.refine);
        params = {{"r", o.r}, {"K", o.K}, {"p0", o.p0}};
    }
    if (!o.out.empty()) {
        const auto parent = std::filesystem::path(o.out).parent_path();
        if (!parent.empty()) std::filesystem::create_directories(parent);
    }
    nfde::write_series_csv(s, o.out);
    nfde::write_generation_manifest(o.out, o.system, o.alpha, grid, o.refine, params);
    std::printf("wrote %zu points to %s\n", s.size(), o.out.c_str());
    std::printf("manifest %s.manifest.json\n", o.out.c_str());
}

// --- train ----------------------------------------------------------------------

struct DatasetOpts {
    std::string system;  // ro | pg, empty when --dataset is used
    std::string dataset; // CSV path
    double data_alpha = 0.99;
    int points = 200;
    double horizon = -1.0;
    std::string time_column = "0";
    std::string value_column = "1";
};

nfde::TimeSeries resolve_series(const DatasetOpts& d) {
    if (!d.system.empty() && !d.dataset.empty())
        throw std::invalid_argument("--system and --dataset are mutually exclusive");
    if (d.system.empty() && d.dataset.empty())
        throw std::invalid_argument("one of --system or --dataset is required");
    if (!d.system.empty()) {
        GenerateOpts g;
        g.system = d.system;
        g.alpha = d.data_alpha;
        g.points = d.points;
        g.horizon = d.horizon;
        if (d.system != "ro" && d.system != "pg")
            throw std::invalid_argument("--system must be ro or pg");
        const double horizon = g.horizon > 0 ? g.horizon : (d.system == "ro" ? 20.0 : 200.0);
        const nfde::TimeGrid grid{0.0, horizon / (g.points - 1), g.points - 1};
        return d.system == "ro" ? nfde::gen_ro(g.alpha, g.x0, grid, g.refine)
                                : nfde::gen_pg(g.alpha, g.r, g.K, g.p0, grid, g.refine);
    }
    return nfde::load_csv(d.dataset, d.time_column, d.value_column).series;
}

void run_train(const DatasetOpts& d, const TrainConfig& cfg, const std::string& out_dir) {
    const nfde::TimeSeries series = resolve_series(d);
    std::filesystem::create_directories(out_dir);
    auto [model, hist] = nfde::train(series, cfg);
    nfde::save_model(model, join_path(out_dir, "model.txt"));
    nfde::write_loss_history_csv(hist, join_path(out_dir, "loss.csv"), true);
    double total_seconds = 0.0;
    for (double s : hist.seconds) total_seconds += s;
    if (hist.failed)
        std::printf("failed at iter %d\n", hist.fail_iter);
    std::printf("iterations %zu\n", hist.loss.size());
    std::printf("final_loss %.17g\n", hist.final_loss);
    if (model.alpha)
        std::printf("alpha %.17g\n", nfde::alpha_value(*model.alpha, nullptr).v);
    std::printf("seconds %.3f\n", total_seconds);
    std::printf("model %s\n", join_path(out_dir, "model.txt").c_str());
    std::printf("loss_csv %s\n", join_path(out_dir, "loss.csv").c_str());
}

// --- experiment -------------------------------------------------------------------

void run_experiment_verb(const ExperimentSpec& spec) {
    const nfde::RunResult result = nfde::run_experiment(spec);
    for (const nfde::RunRecord& r : result.runs)
        if (r.failed)
            std::fprintf(stderr,
                         "warning: run %d (seed %" PRIu64
                         ") diverged; excluded from aggregates\n",
                         r.run_index, r.seed);

    const std::string out = spec.out_dir.empty() ? "." : spec.out_dir;
    nfde::emit_report(std::span<const nfde::RunResult>(&result, 1), join_path(out, "report"));

    std::vector<nfde::LossHistory> histories;
    std::vector<std::string> labels;
    char buf[96];
    for (const nfde::RunRecord& r : result.runs) {
        std::snprintf(buf, sizeof buf, "run%d_loss.csv", r.run_index);
        histories.push_back(nfde::read_loss_history_csv(join_path(out, buf)));
        if (std::isfinite(r.alpha))
            std::snprintf(buf, sizeof buf, "%s run %d (a=%.4f)", result.model.c_str(),
                          r.run_index, r.alpha);
        else
            std::snprintf(buf, sizeof buf, "%s run %d", result.model.c_str(), r.run_index);
        labels.emplace_back(buf);
    }
    nfde::emit_loss_plot(histories, labels, join_path(out, "loss.svg"));

    std::printf("dataset %s\nmodel %s\nsplit %s\n", result.dataset.c_str(),
                result.model.c_str(), result.split.c_str());
    for (const nfde::RunRecord& r : result.runs) {
        if (r.failed) {
            std::printf("run %d seed %" PRIu64 " failed\n", r.run_index, r.seed);
            continue;
        }
        std::printf("run %d seed %" PRIu64 " final_train %s test_mse %s", r.run_index, r.seed,
                    nfde::format_sci(r.final_train_loss).c_str(),
                    nfde::format_sci(r.test_mse).c_str());
        if (std::isfinite(r.alpha)) std::printf(" alpha %.4f", r.alpha);
        std::printf(" (%.1fs)\n", r.wall_seconds);
    }
    std::printf("mse_avg %s\nmse_std %s\n", nfde::format_sci(result.mse_avg).c_str(),
                nfde::format_sci(result.mse_std).c_str());
    std::printf("report %s.csv %s.txt\nplot %s\n", join_path(out, "report").c_str(),
                join_path(out, "report").c_str(), join_path(out, "loss.svg").c_str());
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Neural fractional differential equations: solver, training, experiments"};
    app.require_subcommand(1);

    // generate
    GenerateOpts gen;
    CLI::App* c_gen = app.add_subcommand("generate", "Generate a synthetic dataset CSV");
    c_gen->add_option("--system", gen.system, "ro | pg")->required();
    c_gen->add_option("--alpha", gen.alpha, "derivative order used for generation");
    c_gen->add_option("--points", gen.points, "number of samples");
    c_gen->add_option("--horizon", gen.horizon, "end time (default ro:20, pg:200)");
    c_gen->add_option("--x0", gen.x0, "relaxation oscillator initial state");
    c_gen->add_option("--r", gen.r, "population growth rate");
    c_gen->add_option("--K", gen.K, "population carrying capacity");
    c_gen->add_option("--p0", gen.p0, "population initial state");
    c_gen->add_option("--refine", gen.refine, "internal grid refinement factor");
    c_gen->add_option("--out", gen.out, "output CSV path")->required();
    c_gen->callback([&] { run_generate(gen); });

    // train
    DatasetOpts t_data;
    TrainConfig t_cfg;
    std::string t_alpha_flag, t_model_flag = "nfde", t_out = "out";
    double t_dt = 0.0;
    CLI::App* c_train = app.add_subcommand("train", "Train one model on a dataset");
    c_train->add_option("--system", t_data.system, "ro | pg (synthetic data)");
    c_train->add_option("--dataset", t_data.dataset, "CSV path");
    c_train->add_option("--data-alpha", t_data.data_alpha, "generation order for --system");
    c_train->add_option("--points", t_data.points, "synthetic sample count");
    c_train->add_option("--horizon", t_data.horizon, "synthetic end time");
    c_train->add_option("--time-column", t_data.time_column, "CSV time column (name or index)");
    c_train->add_option("--value-column", t_data.value_column,
                        "CSV value column (name or index)");
    c_train->add_option("--model", t_model_flag, "nfde | node");
    c_train->add_option("--alpha", t_alpha_flag, "learn | net | fixed value in (0,1]");
    c_train->add_option("--iters", t_cfg.max_iters, "training iterations");
    c_train->add_option("--lr", t_cfg.lr, "Adam learning rate");
    c_train->add_option("--dt", t_dt, "solver step (default: observation spacing)");
    c_train->add_option("--seed", t_cfg.seed, "RNG seed");
    c_train->add_option("--hidden", t_cfg.hidden, "hidden layer sizes")->delimiter(',');
    c_train->add_flag("--time-input", t_cfg.time_input, "append t to the rhs net input");
    bool t_no_norm = false;
    c_train->add_flag("--no-normalize", t_no_norm, "skip min-max normalization");
    c_train->add_option("--corrector-iters", t_cfg.corrector_iters, "corrector sweeps per step");
    c_train->add_option("--out", t_out, "output directory");
    c_train->callback([&] {
        if (!t_alpha_flag.empty()) apply_alpha_flag(t_alpha_flag, t_cfg);
        if (c_train->count("--dt")) t_cfg.solver_dt = t_dt;
        if (t_no_norm) t_cfg.normalize = false;
        t_cfg.solver = parse_model(t_model_flag) == ExperimentSpec::Model::neural_ode
                           ? TrainConfig::Solver::euler_ode
                           : TrainConfig::Solver::pc_fractional;
        run_train(t_data, t_cfg, t_out);
    });

    // predict
    std::string p_model, p_out = "trajectory.csv";
    double p_t0 = std::nan(""), p_tf = 0.0, p_dt = 0.0;
    CLI::App* c_pred = app.add_subcommand("predict", "Integrate a saved model forward");
    c_pred->add_option("--model-file", p_model, "saved model path")->required();
    c_pred->add_option("--tf", p_tf, "end time")->required();
    c_pred->add_option("--t0", p_t0, "start time (default: model's)");
    c_pred->add_option("--dt", p_dt, "grid step (default: model's training step)");
    c_pred->add_option("--out", p_out, "output CSV path");
    c_pred->callback([&] {
        const nfde::TrainedModel model = nfde::load_model(p_model);
        const double t0 = std::isnan(p_t0) ? model.t0 : p_t0;
        const double dt = p_dt > 0 ? p_dt : model.train_dt;
        const nfde::Trajectory traj = nfde::predict(model, t0, p_tf, dt);
        nfde::TimeSeries s = trajectory_to_series(traj);
        if (model.norm) s = nfde::denormalize(s, *model.norm);
        nfde::write_series_csv(s, p_out);
        std::printf("wrote %zu states to %s\n", s.size(), p_out.c_str());
    });

    // evaluate
    std::string e_model, e_dataset, e_tcol = "0", e_vcol = "1";
    double e_dt = 0.0;
    CLI::App* c_eval = app.add_subcommand("evaluate", "MSE of a saved model on a CSV test set");
    c_eval->add_option("--model-file", e_model, "saved model path")->required();
    c_eval->add_option("--dataset", e_dataset, "test CSV path")->required();
    c_eval->add_option("--time-column", e_tcol, "CSV time column (name or index)");
    c_eval->add_option("--value-column", e_vcol, "CSV value column (name or index)");
    c_eval->add_option("--dt", e_dt, "solver step (default: model's training step)");
    c_eval->callback([&] {
        const nfde::TrainedModel model = nfde::load_model(e_model);
        const nfde::TimeSeries test = nfde::load_csv(e_dataset, e_tcol, e_vcol).series;
        const double dt = e_dt > 0 ? e_dt : model.train_dt;
        std::printf("mse %.17g\n", nfde::evaluate(model, test, dt));
    });

    // experiment
    ExperimentSpec x;
    std::string x_config, x_system, x_dataset, x_split, x_model, x_alpha;
    double x_dt = 0.0;
    CLI::App* c_exp = app.add_subcommand("experiment", "Multi-run training + evaluation row");
    c_exp->add_option("--config", x_config, "JSON config; flags override its values");
    c_exp->add_option("--system", x_system, "ro | pg (synthetic data)");
    c_exp->add_option("--dataset", x_dataset, "CSV path");
    c_exp->add_option("--data-alpha", x.data_alpha, "generation order for --system");
    c_exp->add_option("--split", x_split, "reconstruction | extrapolation | completion");
    c_exp->add_option("--model", x_model, "nfde | node");
    c_exp->add_option("--alpha", x_alpha, "learn | net | fixed value in (0,1]");
    c_exp->add_option("--iters", x.train.max_iters, "training iterations per run");
    c_exp->add_option("--lr", x.train.lr, "Adam learning rate");
    c_exp->add_option("--dt", x_dt, "solver step (default: observation spacing)");
    c_exp->add_option("--seed", x.train.seed, "base seed; runs use seed, seed+1, ...");
    c_exp->add_option("--runs", x.train.runs, "independent runs");
    c_exp->add_option("--jobs", x.jobs, "worker threads across runs");
    c_exp->add_option("--hidden", x.train.hidden, "hidden layer sizes")->delimiter(',');
    c_exp->add_option("--train-points", x.train_points, "training grid size");
    c_exp->add_option("--train-horizon", x.train_horizon, "training end time");
    c_exp->add_option("--test-points", x.test_points, "extrapolation test grid size");
    c_exp->add_option("--test-horizon", x.test_horizon, "extrapolation test end time");
    c_exp->add_option("--completion-points", x.completion_points, "dense completion grid size");
    c_exp->add_option("--stride", x.holdout_stride, "completion holdout stride");
    c_exp->add_option("--time-column", x.time_column, "CSV time column (name or index)");
    c_exp->add_option("--value-column", x.value_column, "CSV value column (name or index)");
    c_exp->add_option("--out", x.out_dir, "output directory");
    c_exp->callback([&] {
        ExperimentSpec spec;
        if (!x_config.empty()) apply_config_file(x_config, spec);
        // Flags given on the command line override config file values.
        const auto touched = [&](const char* name) { return c_exp->count(name) > 0; };
        if (touched("--system") && touched("--dataset"))
            throw std::invalid_argument("--system and --dataset are mutually exclusive");
        if (touched("--system")) {
            if (x_system != "ro" && x_system != "pg")
                throw std::invalid_argument("--system must be ro or pg");
            spec.dataset = x_system;
        }
        if (touched("--dataset")) spec.dataset = x_dataset;
        if (touched("--data-alpha")) spec.data_alpha = x.data_alpha;
        if (touched("--split")) spec.split = parse_split(x_split);
        if (touched("--model")) spec.model = parse_model(x_model);
        if (touched("--alpha")) apply_alpha_flag(x_alpha, spec.train);
        if (touched("--iters")) spec.train.max_iters = x.train.max_iters;
        if (touched("--lr")) spec.train.lr = x.train.lr;
        if (touched("--dt")) spec.train.solver_dt = x_dt;
        if (touched("--seed")) spec.train.seed = x.train.seed;
        if (touched("--runs")) spec.train.runs = x.train.runs;
        if (touched("--jobs")) spec.jobs = x.jobs;
        if (touched("--hidden")) spec.train.hidden = x.train.hidden;
        if (touched("--train-points")) spec.train_points = x.train_points;
        if (touched("--train-horizon")) spec.train_horizon = x.train_horizon;
        if (touched("--test-points")) spec.test_points = x.test_points;
        if (touched("--test-horizon")) spec.test_horizon = x.test_horizon;
        if (touched("--completion-points")) spec.completion_points = x.completion_points;
        if (touched("--stride")) spec.holdout_stride = x.holdout_stride;
        if (touched("--time-column")) spec.time_column = x.time_column;
        if (touched("--value-column")) spec.value_column = x.value_column;
        if (touched("--out")) spec.out_dir = x.out_dir;
        if (spec.dataset.empty())
            throw std::invalid_argument("one of --system, --dataset or a config dataset "
                                        "is required");
        if (spec.out_dir.empty()) spec.out_dir = "out";
        run_experiment_verb(spec);
    });

    // benchmark
    std::vector<int> b_sizes = {400, 800};
    int b_repeats = 5;
    std::string b_out;
    CLI::App* c_bench = app.add_subcommand("benchmark", "Time both solvers over grid sizes");
    c_bench->add_option("--sizes", b_sizes, "grid sizes (100 is always included)")
        ->delimiter(',');
    c_bench->add_option("--repeats", b_repeats, "samples per size");
    c_bench->add_option("--out", b_out, "also write the table to this path");
    c_bench->callback([&] {
        const nfde::BenchmarkResult r = nfde::benchmark_solvers(b_sizes, b_repeats);
        const std::string text = r.to_text();
        std::fputs(text.c_str(), stdout);
        if (!b_out.empty()) {
            std::ofstream os(b_out);
            if (!os) throw nfde::DataError("cannot open for writing: " + b_out);
            os << text;
        }
    });

    // plot
    std::vector<std::string> pl_files, pl_labels;
    std::string pl_out = "loss.svg";
    CLI::App* c_plot = app.add_subcommand("plot", "Loss curves (log axis) as an SVG");
    c_plot->add_option("files", pl_files, "loss history CSVs")->required();
    c_plot->add_option("--labels", pl_labels, "legend labels (default: file stems)")
        ->delimiter(',');
    c_plot->add_option("--out", pl_out, "output SVG path");
    c_plot->callback([&] {
        std::vector<nfde::LossHistory> histories;
        std::vector<std::string> labels = pl_labels;
        for (const std::string& f : pl_files)
            histories.push_back(nfde::read_loss_history_csv(f));
        if (labels.empty())
            for (const std::string& f : pl_files)
                labels.push_back(std::filesystem::path(f).stem().string());
        if (labels.size() != histories.size())
            throw std::invalid_argument("--labels count must match the file count");
        nfde::emit_loss_plot(histories, labels, pl_out);
        std::printf("wrote %s\n", pl_out.c_str());
    });

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e); // prints help, exits 0
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 1;
    } catch (const nfde::DataError& e) {
        std::fprintf(stderr, "data error: %s\n", e.what());
        return 2;
    } catch (const nfde::NumericalError& e) {
        std::fprintf(stderr, "numerical failure: %s\n", e.what());
        return 3;
    } catch (const std::filesystem::filesystem_error& e) {
        std::fprintf(stderr, "data error: %s\n", e.what());
        return 2;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    return 0;
}
