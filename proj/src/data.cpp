#include "nfde/data.hpp"

#include <algorithm>
#include <cctype>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>

#include <json.hpp>

#include "nfde/errors.hpp"

namespace nfde {

namespace {

TimeSeries subsample(const Trajectory& traj, const TimeGrid& out_grid, int refine) {
    TimeSeries s;
    s.times.reserve(out_grid.n_steps + 1);
    s.values.reserve(out_grid.n_steps + 1);
    for (int m = 0; m <= out_grid.n_steps; ++m) {
        s.times.push_back(out_grid.node(m));
        const std::vector<Var>& row = traj.states[static_cast<std::size_t>(m) * refine];
        std::vector<double> v;
        v.reserve(row.size());
        for (const Var& x : row) v.push_back(x.v);
        s.values.push_back(std::move(v));
    }
    return s;
}

TimeSeries gen_with_rhs(const RhsFn& rhs, double alpha, double y0, const TimeGrid& grid,
                        int refine) {
    if (refine < 1) throw std::invalid_argument("generation refine factor must be >= 1");
    const TimeGrid fine{grid.t0, grid.dt / refine, grid.n_steps * refine};
    const double init[] = {y0};
    const Trajectory traj = fde_solve_pc(rhs, Var(alpha), init, fine);
    return subsample(traj, grid, refine);
}

} // namespace

TimeSeries gen_ro(double alpha, double x0, const TimeGrid& grid, int refine) {
    RhsFn rhs{1, [](double, std::span<const Var> h, std::span<Var> out) {
                  out[0] = 1.0 - h[0];
              }};
    return gen_with_rhs(rhs, alpha, x0, grid, refine);
}

TimeSeries gen_pg(double alpha, double r, double K, double p0, const TimeGrid& grid,
                  int refine) {
    if (!(K > 0.0)) throw std::invalid_argument("gen_pg: carrying capacity must be > 0");
    RhsFn rhs{1, [r, K](double, std::span<const Var> h, std::span<Var> out) {
                  out[0] = r * h[0] * (1.0 - h[0] / K);
              }};
    return gen_with_rhs(rhs, alpha, p0, grid, refine);
}

// --- CSV -------------------------------------------------------------------------

namespace {

std::vector<std::string> split_line(const std::string& line) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : line) {
        if (c == ',') {
            out.push_back(cur);
            cur.clear();
        } else if (c != '\r') {
            cur += c;
        }
    }
    out.push_back(cur);
    return out;
}

std::string trim(const std::string& s) {
    std::size_t a = 0, b = s.size();
    while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
    while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
    return s.substr(a, b - a);
}

bool all_digits(const std::string& s) {
    if (s.empty()) return false;
    return std::all_of(s.begin(), s.end(),
                       [](unsigned char c) { return std::isdigit(c) != 0; });
}

std::size_t resolve_column(const std::vector<std::string>& header, const std::string& sel,
                           const char* what) {
    if (all_digits(sel)) {
        const std::size_t idx = std::stoul(sel);
        if (idx >= header.size())
            throw DataError(std::string(what) + " column index " + sel + " out of range (" +
                            std::to_string(header.size()) + " columns)");
        return idx;
    }
    for (std::size_t i = 0; i < header.size(); ++i)
        if (trim(header[i]) == sel) return i;
    throw DataError(std::string(what) + " column '" + sel + "' not found in header");
}

// YYYY-MM-DD -> days since the civil epoch; nullopt when not a date.
std::optional<long> parse_iso_date(const std::string& s) {
    const std::string t = trim(s);
    if (t.size() != 10 || t[4] != '-' || t[7] != '-') return std::nullopt;
    int y, m, d;
    if (std::sscanf(t.c_str(), "%4d-%2d-%2d", &y, &m, &d) != 3) return std::nullopt;
    using namespace std::chrono;
    const year_month_day ymd{year{y}, month{static_cast<unsigned>(m)},
                             day{static_cast<unsigned>(d)}};
    if (!ymd.ok()) return std::nullopt;
    return sys_days{ymd}.time_since_epoch().count();
}

std::optional<double> parse_real(const std::string& s) {
    const std::string t = trim(s);
    if (t.empty()) return std::nullopt;
    try {
        std::size_t used = 0;
        const double v = std::stod(t, &used);
        if (used != t.size() || !std::isfinite(v)) return std::nullopt;
        return v;
    } catch (const std::exception&) {
        return std::nullopt;
    }
}

} // namespace

CsvLoadResult load_csv(const std::string& path, const std::string& time_column,
                       const std::string& value_column) {
    std::ifstream is(path);
    if (!is) throw DataError("cannot open CSV: " + path);
    std::string line;
    if (!std::getline(is, line)) throw DataError("empty CSV: " + path);
    const std::vector<std::string> header = split_line(line);
    const std::size_t t_idx = resolve_column(header, time_column, "time");
    const std::size_t v_idx = resolve_column(header, value_column, "value");

    struct Row {
        double t, v;
        std::size_t order;
    };
    std::vector<Row> rows;
    std::size_t skipped = 0;
    std::optional<long> first_day;
    std::size_t order = 0;
    while (std::getline(is, line)) {
        if (trim(line).empty()) continue;
        const std::vector<std::string> cells = split_line(line);
        if (cells.size() <= std::max(t_idx, v_idx)) {
            ++skipped;
            continue;
        }
        double t;
        if (const auto day = parse_iso_date(cells[t_idx])) {
            if (!first_day) first_day = *day;
            t = static_cast<double>(*day - *first_day);
        } else if (const auto real = parse_real(cells[t_idx])) {
            t = *real;
        } else {
            ++skipped;
            continue;
        }
        const auto v = parse_real(cells[v_idx]);
        if (!v) {
            ++skipped;
            continue;
        }
        rows.push_back(Row{t, *v, order++});
    }

    // Duplicates keep the first occurrence in file order, then sort by time.
    std::stable_sort(rows.begin(), rows.end(), [](const Row& a, const Row& b) {
        if (a.t != b.t) return a.t < b.t;
        return a.order < b.order;
    });
    CsvLoadResult result;
    result.skipped_rows = skipped;
    for (std::size_t i = 0; i < rows.size(); ++i) {
        if (i > 0 && rows[i].t == rows[i - 1].t) continue;
        result.series.times.push_back(rows[i].t);
        result.series.values.push_back({rows[i].v});
    }
    if (result.series.size() < 2)
        throw DataError("CSV " + path + " yielded fewer than 2 usable rows (" +
                        std::to_string(skipped) + " skipped)");
    return result;
}

// --- Normalization ------------------------------------------------------------

std::pair<TimeSeries, NormStats> normalize(const TimeSeries& s) {
    if (s.size() == 0 || s.dim() == 0) throw DataError("normalize: empty series");
    const int d = s.dim();
    NormStats st;
    st.min.assign(d, std::numeric_limits<double>::infinity());
    st.max.assign(d, -std::numeric_limits<double>::infinity());
    for (const auto& row : s.values)
        for (int k = 0; k < d; ++k) {
            st.min[k] = std::min(st.min[k], row[k]);
            st.max[k] = std::max(st.max[k], row[k]);
        }
    for (int k = 0; k < d; ++k)
        if (!(st.max[k] > st.min[k]))
            throw DataError("normalize: dimension " + std::to_string(k) +
                            " is constant; min-max scaling undefined");
    return {apply_norm(s, st), st};
}

TimeSeries apply_norm(const TimeSeries& s, const NormStats& n) {
    if (s.dim() != static_cast<int>(n.min.size()))
        throw DataError("apply_norm: dimension mismatch");
    TimeSeries out;
    out.times = s.times;
    out.values.reserve(s.values.size());
    for (const auto& row : s.values) {
        std::vector<double> v(row.size());
        for (std::size_t k = 0; k < row.size(); ++k)
            v[k] = (row[k] - n.min[k]) / (n.max[k] - n.min[k]);
        out.values.push_back(std::move(v));
    }
    return out;
}

TimeSeries denormalize(const TimeSeries& s, const NormStats& n) {
    if (s.dim() != static_cast<int>(n.min.size()))
        throw DataError("denormalize: dimension mismatch");
    TimeSeries out;
    out.times = s.times;
    out.values.reserve(s.values.size());
    for (const auto& row : s.values) {
        std::vector<double> v(row.size());
        for (std::size_t k = 0; k < row.size(); ++k)
            v[k] = n.min[k] + row[k] * (n.max[k] - n.min[k]);
        out.values.push_back(std::move(v));
    }
    return out;
}

// --- Splits ------------------------------------------------------------------

Split make_split(const TimeSeries& s, const SplitSpec& spec) {
    if (s.size() < 2) throw DataError("make_split: series needs at least 2 points");
    Split out;
    switch (spec.kind) {
        case SplitSpec::Kind::reconstruction:
            out.train = s;
            out.test = s;
            return out;

        case SplitSpec::Kind::extrapolation: {
            if (spec.by_index) {
                const std::size_t n_train = static_cast<std::size_t>(spec.train_count);
                const std::size_t n_test = static_cast<std::size_t>(spec.test_count);
                if (spec.train_count < 2 || spec.test_count < 1 || n_train + n_test > s.size())
                    throw DataError("make_split: series has " + std::to_string(s.size()) +
                                    " points, need " + std::to_string(n_train + n_test));
                for (std::size_t i = 0; i < n_train; ++i) {
                    out.train.times.push_back(s.times[i]);
                    out.train.values.push_back(s.values[i]);
                }
                for (std::size_t i = n_train; i < n_train + n_test; ++i) {
                    out.test.times.push_back(s.times[i]);
                    out.test.values.push_back(s.values[i]);
                }
            } else {
                if (!(spec.train_horizon > s.times.front()))
                    throw DataError("make_split: train horizon precedes the series start");
                if (s.times.back() <= spec.train_horizon)
                    throw DataError("make_split: series does not extend past the train horizon");
                for (std::size_t i = 0; i < s.size(); ++i)
                    if (s.times[i] <= spec.train_horizon) {
                        out.train.times.push_back(s.times[i]);
                        out.train.values.push_back(s.values[i]);
                    }
                if (out.train.size() < 2)
                    throw DataError("make_split: fewer than 2 points inside the train horizon");
                out.test = s;
            }
            return out;
        }

        case SplitSpec::Kind::completion: {
            if (spec.holdout_stride < 2)
                throw DataError("make_split: completion holdout stride must be >= 2");
            if (s.size() < static_cast<std::size_t>(spec.holdout_stride) + 1)
                throw DataError("make_split: series too short for the holdout stride");
            for (std::size_t i = 0; i < s.size(); ++i) {
                const bool held_out =
                    i % static_cast<std::size_t>(spec.holdout_stride) ==
                    static_cast<std::size_t>(spec.holdout_stride) - 1;
                TimeSeries& dst = held_out ? out.test : out.train;
                dst.times.push_back(s.times[i]);
                dst.values.push_back(s.values[i]);
            }
            if (out.test.size() == 0)
                throw DataError("make_split: completion produced an empty test set");
            return out;
        }
    }
    throw std::logic_error("make_split: unknown kind");
}

// --- Series files ----------------------------------------------------------------

void write_series_csv(const TimeSeries& s, const std::string& path) {
    std::ofstream os(path);
    if (!os) throw DataError("cannot open for writing: " + path);
    os << 't';
    for (int k = 0; k < s.dim(); ++k) os << ",y" << k;
    os << '\n';
    char buf[40];
    for (std::size_t i = 0; i < s.size(); ++i) {
        std::snprintf(buf, sizeof buf, "%.17g", s.times[i]);
        os << buf;
        for (double v : s.values[i]) {
            std::snprintf(buf, sizeof buf, "%.17g", v);
            os << ',' << buf;
        }
        os << '\n';
    }
}

TimeSeries read_series_csv(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw DataError("cannot open CSV: " + path);
    std::string line;
    if (!std::getline(is, line)) throw DataError("empty CSV: " + path);
    TimeSeries s;
    while (std::getline(is, line)) {
        if (trim(line).empty()) continue;
        const std::vector<std::string> cells = split_line(line);
        if (cells.size() < 2) throw DataError("malformed series row in " + path);
        std::vector<double> v;
        v.reserve(cells.size() - 1);
        const auto t = parse_real(cells[0]);
        if (!t) throw DataError("malformed time in " + path + ": '" + cells[0] + "'");
        for (std::size_t k = 1; k < cells.size(); ++k) {
            const auto x = parse_real(cells[k]);
            if (!x) throw DataError("malformed value in " + path + ": '" + cells[k] + "'");
            v.push_back(*x);
        }
        s.times.push_back(*t);
        s.values.push_back(std::move(v));
    }
    if (s.size() < 2) throw DataError("series in " + path + " has fewer than 2 rows");
    return s;
}

void write_generation_manifest(const std::string& dataset_path, const std::string& system,
                               double alpha, const TimeGrid& grid, int refine,
                               const std::vector<std::pair<std::string, double>>& params) {
    nlohmann::json j;
    j["system"] = system;
    j["alpha"] = alpha;
    j["grid"] = {{"t0", grid.t0}, {"dt", grid.dt}, {"n_steps", grid.n_steps}};
    j["refine"] = refine;
    for (const auto& [k, v] : params) j["params"][k] = v;
    const std::string path = dataset_path + ".manifest.json";
    std::ofstream os(path);
    if (!os) throw DataError("cannot open for writing: " + path);
    os << j.dump(2) << '\n';
}

} // namespace nfde
