#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "nfde/data.hpp"
#include "nfde/training.hpp"

namespace nfde {

// One table row's worth of work: a dataset, a split protocol, a model kind,
// and K independently seeded runs.
struct ExperimentSpec {
    // "ro" or "pg" for synthetic systems, otherwise a CSV path.
    std::string dataset;
    double data_alpha = 0.99; // generation order for synthetic systems

    // Synthetic system parameters.
    double ro_x0 = 0.3;
    double pg_r = 0.1, pg_K = 1000.0, pg_p0 = 100.0;

    // Protocol shape. Horizons/counts describe the generated grids; for CSV
    // data the counts select by index.
    SplitSpec::Kind split = SplitSpec::Kind::reconstruction;
    int train_points = 200;
    double train_horizon = 200.0;
    int test_points = 200;
    double test_horizon = 300.0;
    int completion_points = 400; // dense grid size for synthetic completion
    int holdout_stride = 2;
    int gen_refine = 8;

    // CSV ingestion.
    std::string time_column = "0";
    std::string value_column = "1";

    enum class Model { neural_fde, neural_ode } model = Model::neural_fde;
    TrainConfig train;

    std::string out_dir; // per-run artifacts land here
    int jobs = 1;        // worker threads across runs
};

struct RunRecord {
    int run_index = 0;
    std::uint64_t seed = 0;
    double final_train_loss = 0.0;
    double test_mse = 0.0;
    double alpha = 0.0; // realized final order; NaN for the Euler baseline
    double wall_seconds = 0.0;
    bool failed = false;
};

struct RunResult {
    std::string dataset; // e.g. "ro:a0.99" or the CSV path
    std::string model;   // "neural_fde" | "neural_ode"
    std::string split;   // "reconstruction" | "extrapolation" | "completion"
    std::vector<RunRecord> runs;
    double mse_avg = 0.0; // over successful runs
    double mse_std = 0.0; // population std over successful runs
};

// Resolves the dataset, builds the split, then trains `train.runs` models with
// seeds seed, seed+1, ... and evaluates each on the test set. Writes per-run
// model files and loss histories (timing column left empty so reruns are
// byte-identical) into out_dir. Runs are independent; jobs > 1 spreads them
// over threads without changing any output.
RunResult run_experiment(const ExperimentSpec& spec);

// Aggregation used for the result row; exposed for verification.
void aggregate_mse(std::span<const double> values, double& avg, double& std_out);

// Writes <prefix>.csv (machine-readable) and <prefix>.txt (aligned table).
// Columns: dataset,model,split,mse_avg,mse_std,alpha_run1..runK.
void emit_report(std::span<const RunResult> results, const std::string& prefix);

// Scientific format used in reports: 3 significant digits, single-digit
// exponent when possible (0.000395 -> "3.95E-4").
std::string format_sci(double x);

// Loss curves on a log axis, one polyline per history, as a standalone SVG.
void emit_loss_plot(std::span<const LossHistory> histories,
                    std::span<const std::string> labels, const std::string& path);

// Split resolution for a spec, exposed for protocol tests. For synthetic
// extrapolation the train and test series are generated on their own grids.
Split resolve_dataset(const ExperimentSpec& spec);

} // namespace nfde
