#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "nfde/solver.hpp"

namespace nfde {

struct TimeSeries {
    std::vector<double> times;
    std::vector<std::vector<double>> values; // one row per time, d entries each

    int dim() const { return values.empty() ? 0 : static_cast<int>(values[0].size()); }
    std::size_t size() const { return times.size(); }
};

// Per-dimension min/max of the series normalization was fitted on.
struct NormStats {
    std::vector<double> min, max;
};

struct SplitSpec {
    enum class Kind { reconstruction, extrapolation, completion } kind = Kind::reconstruction;
    int train_count = 0;       // extrapolation index mode: first train_count points
    double train_horizon = 0;  // extrapolation time mode: train = points with t <= horizon
    int test_count = 0;        // extrapolation index mode: next test_count points
    int holdout_stride = 2;    // completion: every stride-th point is held out
    bool by_index = false;     // index mode for irregular (e.g. CSV) series
};

struct Split {
    TimeSeries train, test;
};

// Solves the relaxation oscillator D^alpha x = 1 - x, x(t0) = x0, on a grid
// refined `refine`-fold, then subsamples exactly onto the requested nodes.
TimeSeries gen_ro(double alpha, double x0, const TimeGrid& grid, int refine = 8);

// Population growth D^alpha P = r P (1 - P/K), P(t0) = p0, same refinement.
TimeSeries gen_pg(double alpha, double r, double K, double p0, const TimeGrid& grid,
                  int refine = 8);

struct CsvLoadResult {
    TimeSeries series;
    std::size_t skipped_rows = 0;
};

// Loads a two-column slice of a headered CSV. Columns are selected by header
// name or 0-based index (a digits-only selector is an index). The time column
// may hold reals or ISO dates (YYYY-MM-DD), mapped to day offsets from the
// first data row. Unparseable rows are skipped and counted; duplicate times
// keep the first occurrence in file order; the result is sorted ascending.
CsvLoadResult load_csv(const std::string& path, const std::string& time_column,
                       const std::string& value_column);

// Min-max to [0, 1] per dimension. Rejects constant dimensions.
std::pair<TimeSeries, NormStats> normalize(const TimeSeries& s);
TimeSeries apply_norm(const TimeSeries& s, const NormStats& n);
TimeSeries denormalize(const TimeSeries& s, const NormStats& n);

// Carves train/test out of one source series.
//   reconstruction: train and test are the series itself.
//   extrapolation:  index mode: train = first train_count, test = next test_count;
//                   time mode: train = points with t <= train_horizon, test = the
//                   full series (superset convention; test reaches beyond train).
//   completion:     every holdout_stride-th point (1-based within each block) is
//                   held out into test; the rest train. Disjoint by construction.
// Throws DataError when the series cannot satisfy the request.
Split make_split(const TimeSeries& s, const SplitSpec& spec);

// t,y0..y{d-1} with 17 significant digits.
void write_series_csv(const TimeSeries& s, const std::string& path);
TimeSeries read_series_csv(const std::string& path);

// JSON sidecar describing how a dataset file was produced.
void write_generation_manifest(const std::string& dataset_path, const std::string& system,
                               double alpha, const TimeGrid& grid, int refine,
                               const std::vector<std::pair<std::string, double>>& params);

} // namespace nfde
