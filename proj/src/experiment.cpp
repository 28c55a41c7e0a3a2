#include "nfde/experiment.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <thread>

#include "nfde/errors.hpp"

namespace nfde {

namespace {

bool is_synthetic(const std::string& dataset) { return dataset == "ro" || dataset == "pg"; }

TimeGrid linspace_grid(double horizon, int points) {
    if (points < 2) throw std::invalid_argument("experiment: grids need at least 2 points");
    if (!(horizon > 0.0)) throw std::invalid_argument("experiment: horizon must be > 0");
    return TimeGrid{0.0, horizon / (points - 1), points - 1};
}

TimeSeries generate(const ExperimentSpec& spec, const TimeGrid& grid) {
    if (spec.dataset == "ro") return gen_ro(spec.data_alpha, spec.ro_x0, grid, spec.gen_refine);
    return gen_pg(spec.data_alpha, spec.pg_r, spec.pg_K, spec.pg_p0, grid, spec.gen_refine);
}

TimeSeries head(const TimeSeries& s, int n) {
    if (n <= 0 || static_cast<std::size_t>(n) >= s.size()) return s;
    TimeSeries out;
    out.times.assign(s.times.begin(), s.times.begin() + n);
    out.values.assign(s.values.begin(), s.values.begin() + n);
    return out;
}

std::string dataset_label(const ExperimentSpec& spec) {
    if (!is_synthetic(spec.dataset)) return spec.dataset;
    char buf[64];
    std::snprintf(buf, sizeof buf, "%s:a%g", spec.dataset.c_str(), spec.data_alpha);
    return buf;
}

const char* split_name(SplitSpec::Kind k) {
    switch (k) {
        case SplitSpec::Kind::reconstruction: return "reconstruction";
        case SplitSpec::Kind::extrapolation: return "extrapolation";
        case SplitSpec::Kind::completion: return "completion";
    }
    return "?";
}

} // namespace

Split resolve_dataset(const ExperimentSpec& spec) {
    if (is_synthetic(spec.dataset)) {
        switch (spec.split) {
            case SplitSpec::Kind::reconstruction: {
                const TimeSeries s =
                    generate(spec, linspace_grid(spec.train_horizon, spec.train_points));
                SplitSpec ss;
                ss.kind = SplitSpec::Kind::reconstruction;
                return make_split(s, ss);
            }
            case SplitSpec::Kind::extrapolation: {
                // The two grids do not nest, so each series is generated on its
                // own grid; the test range covers the training window and more.
                if (!(spec.test_horizon > spec.train_horizon))
                    throw std::invalid_argument(
                        "experiment: extrapolation needs test_horizon > train_horizon");
                Split out;
                out.train = generate(spec, linspace_grid(spec.train_horizon, spec.train_points));
                out.test = generate(spec, linspace_grid(spec.test_horizon, spec.test_points));
                return out;
            }
            case SplitSpec::Kind::completion: {
                const TimeSeries s =
                    generate(spec, linspace_grid(spec.train_horizon, spec.completion_points));
                SplitSpec ss;
                ss.kind = SplitSpec::Kind::completion;
                ss.holdout_stride = spec.holdout_stride;
                return make_split(s, ss);
            }
        }
        throw std::logic_error("experiment: unknown split");
    }

    const CsvLoadResult loaded = load_csv(spec.dataset, spec.time_column, spec.value_column);
    SplitSpec ss;
    ss.kind = spec.split;
    ss.by_index = true;
    switch (spec.split) {
        case SplitSpec::Kind::reconstruction:
            return make_split(head(loaded.series, spec.train_points), ss);
        case SplitSpec::Kind::extrapolation:
            ss.train_count = spec.train_points;
            ss.test_count = spec.test_points;
            return make_split(loaded.series, ss);
        case SplitSpec::Kind::completion:
            ss.holdout_stride = spec.holdout_stride;
            return make_split(head(loaded.series, spec.completion_points), ss);
    }
    throw std::logic_error("experiment: unknown split");
}

void aggregate_mse(std::span<const double> values, double& avg, double& std_out) {
    if (values.empty()) throw std::invalid_argument("aggregate_mse: no values");
    double mean = 0.0;
    for (double v : values) mean += v;
    mean /= static_cast<double>(values.size());
    double var = 0.0;
    for (double v : values) var += (v - mean) * (v - mean);
    var /= static_cast<double>(values.size()); // population
    avg = mean;
    std_out = std::sqrt(var);
}

RunResult run_experiment(const ExperimentSpec& spec) {
    if (spec.train.runs < 1) throw std::invalid_argument("experiment: runs must be >= 1");
    const Split split = resolve_dataset(spec);

    namespace fs = std::filesystem;
    if (!spec.out_dir.empty()) fs::create_directories(spec.out_dir);
    const auto out_path = [&](const std::string& name) {
        return (fs::path(spec.out_dir.empty() ? "." : spec.out_dir) / name).string();
    };

    write_series_csv(split.train, out_path("train.csv"));
    write_series_csv(split.test, out_path("test.csv"));
    if (is_synthetic(spec.dataset)) {
        std::vector<std::pair<std::string, double>> params;
        if (spec.dataset == "ro") params = {{"x0", spec.ro_x0}};
        else params = {{"r", spec.pg_r}, {"K", spec.pg_K}, {"p0", spec.pg_p0}};
        const TimeGrid grid = linspace_grid(spec.train_horizon,
                                            spec.split == SplitSpec::Kind::completion
                                                ? spec.completion_points
                                                : spec.train_points);
        write_generation_manifest(out_path("train.csv"), spec.dataset, spec.data_alpha, grid,
                                  spec.gen_refine, params);
    }

    const int n_runs = spec.train.runs;
    struct Outcome {
        TrainedModel model;
        LossHistory hist;
        RunRecord rec;
        bool has_model = false;
    };
    std::vector<Outcome> outcomes(static_cast<std::size_t>(n_runs));

    auto do_run = [&](int r) {
        TrainConfig cfg = spec.train;
        cfg.seed = spec.train.seed + static_cast<std::uint64_t>(r);
        cfg.solver = spec.model == ExperimentSpec::Model::neural_ode
                         ? TrainConfig::Solver::euler_ode
                         : TrainConfig::Solver::pc_fractional;
        const auto t_start = std::chrono::steady_clock::now();
        auto [model, hist] = train(split.train, cfg);
        Outcome& o = outcomes[static_cast<std::size_t>(r)];
        o.rec.run_index = r;
        o.rec.seed = cfg.seed;
        o.rec.failed = hist.failed;
        o.rec.final_train_loss = hist.final_loss;
        o.rec.alpha = model.alpha ? alpha_value(*model.alpha, nullptr).v
                                  : std::numeric_limits<double>::quiet_NaN();
        o.rec.test_mse = hist.failed ? std::numeric_limits<double>::quiet_NaN()
                                     : evaluate(model, split.test, model.train_dt);
        const std::chrono::duration<double> el = std::chrono::steady_clock::now() - t_start;
        o.rec.wall_seconds = el.count();
        o.model = std::move(model);
        o.hist = std::move(hist);
        o.has_model = true;
    };

    const int workers = std::max(1, std::min(spec.jobs, n_runs));
    if (workers == 1) {
        for (int r = 0; r < n_runs; ++r) do_run(r);
    } else {
        std::vector<std::thread> pool;
        pool.reserve(static_cast<std::size_t>(workers));
        for (int w = 0; w < workers; ++w)
            pool.emplace_back([&, w] {
                for (int r = w; r < n_runs; r += workers) do_run(r);
            });
        for (auto& t : pool) t.join();
    }

    RunResult result;
    result.dataset = dataset_label(spec);
    result.model = spec.model == ExperimentSpec::Model::neural_ode ? "neural_ode" : "neural_fde";
    result.split = split_name(spec.split);

    std::vector<double> ok_mse;
    for (int r = 0; r < n_runs; ++r) {
        Outcome& o = outcomes[static_cast<std::size_t>(r)];
        char name[64];
        std::snprintf(name, sizeof name, "run%d", r);
        // Timing is run-dependent; keep the artifact bytes reproducible.
        write_loss_history_csv(o.hist, out_path(std::string(name) + "_loss.csv"), false);
        if (!o.rec.failed) {
            save_model(o.model, out_path(std::string(name) + "_model.txt"));
            ok_mse.push_back(o.rec.test_mse);
        }
        result.runs.push_back(o.rec);
    }
    if (ok_mse.empty())
        throw NumericalError("experiment: every run diverged; nothing to aggregate");
    aggregate_mse(ok_mse, result.mse_avg, result.mse_std);
    return result;
}

// --- Report ------------------------------------------------------------------------

std::string format_sci(double x) {
    if (std::isnan(x)) return "nan";
    if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.2E", x);
    // 3.95E-04 -> 3.95E-4: single-digit exponents read like the tables.
    std::string s = buf;
    const std::size_t e = s.find('E');
    if (e != std::string::npos && e + 2 < s.size()) {
        std::size_t d = e + 2; // first exponent digit
        while (d + 1 < s.size() && s[d] == '0') s.erase(d, 1);
    }
    return s;
}

void emit_report(std::span<const RunResult> results, const std::string& prefix) {
    std::size_t max_runs = 0;
    for (const RunResult& r : results) max_runs = std::max(max_runs, r.runs.size());

    std::ofstream csv(prefix + ".csv");
    if (!csv) throw DataError("cannot open for writing: " + prefix + ".csv");
    csv << "dataset,model,split,mse_avg,mse_std";
    for (std::size_t k = 1; k <= max_runs; ++k) csv << ",alpha_run" << k;
    csv << '\n';
    char buf[160];
    for (const RunResult& r : results) {
        csv << r.dataset << ',' << r.model << ',' << r.split << ',' << format_sci(r.mse_avg)
            << ',' << format_sci(r.mse_std);
        for (std::size_t k = 0; k < max_runs; ++k) {
            csv << ',';
            if (k < r.runs.size() && std::isfinite(r.runs[k].alpha)) {
                std::snprintf(buf, sizeof buf, "%.4f", r.runs[k].alpha);
                csv << buf;
            }
        }
        csv << '\n';
    }

    std::ofstream txt(prefix + ".txt");
    if (!txt) throw DataError("cannot open for writing: " + prefix + ".txt");
    txt << "dataset               model       split           mse_avg    mse_std    alpha per run\n";
    for (const RunResult& r : results) {
        std::snprintf(buf, sizeof buf, "%-21s %-11s %-15s %-10s %-10s", r.dataset.c_str(),
                      r.model.c_str(), r.split.c_str(), format_sci(r.mse_avg).c_str(),
                      format_sci(r.mse_std).c_str());
        txt << buf;
        for (const RunRecord& run : r.runs) {
            if (std::isfinite(run.alpha)) {
                std::snprintf(buf, sizeof buf, " %.4f", run.alpha);
                txt << buf;
            } else {
                txt << (run.failed ? " failed" : " -");
            }
        }
        txt << '\n';
    }
    txt << "mse_std is the population standard deviation over successful runs.\n";
}

// --- Loss plot -----------------------------------------------------------------------

void emit_loss_plot(std::span<const LossHistory> histories,
                    std::span<const std::string> labels, const std::string& path) {
    if (histories.empty()) throw std::invalid_argument("emit_loss_plot: no histories");
    if (labels.size() != histories.size())
        throw std::invalid_argument("emit_loss_plot: label count mismatch");

    // Data ranges; only positive finite losses are drawable on a log axis.
    std::size_t max_len = 0;
    double lo = std::numeric_limits<double>::infinity(), hi = 0.0;
    for (const LossHistory& h : histories) {
        max_len = std::max(max_len, h.loss.size());
        for (double v : h.loss)
            if (std::isfinite(v) && v > 0.0) {
                lo = std::min(lo, v);
                hi = std::max(hi, v);
            }
    }
    if (!(hi > 0.0)) throw std::invalid_argument("emit_loss_plot: no positive losses to draw");
    if (max_len < 2) throw std::invalid_argument("emit_loss_plot: histories too short");

    int dec_lo = static_cast<int>(std::floor(std::log10(lo)));
    int dec_hi = static_cast<int>(std::ceil(std::log10(hi)));
    if (dec_hi <= dec_lo) dec_hi = dec_lo + 1;

    const double W = 900, H = 560, ml = 80, mr = 24, mt = 24, mb = 56;
    const double pw = W - ml - mr, ph = H - mt - mb;
    const auto X = [&](double iter) {
        return ml + pw * (iter / static_cast<double>(max_len - 1));
    };
    const auto Y = [&](double v) {
        const double f = (std::log10(v) - dec_lo) / static_cast<double>(dec_hi - dec_lo);
        return mt + ph * (1.0 - f);
    };

    static const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c",
                                     "#ff7f0e", "#9467bd", "#8c564b"};
    constexpr int kPaletteSize = 6;

    std::ofstream os(path);
    if (!os) throw DataError("cannot open for writing: " + path);
    char buf[160];
    std::snprintf(buf, sizeof buf,
                  "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"%g\" height=\"%g\" "
                  "viewBox=\"0 0 %g %g\">\n",
                  W, H, W, H);
    os << buf << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";

    // Frame and decade grid.
    std::snprintf(buf, sizeof buf,
                  "<rect x=\"%g\" y=\"%g\" width=\"%g\" height=\"%g\" fill=\"none\" "
                  "stroke=\"#444\"/>\n",
                  ml, mt, pw, ph);
    os << buf;
    for (int dec = dec_lo; dec <= dec_hi; ++dec) {
        const double y = Y(std::pow(10.0, dec));
        std::snprintf(buf, sizeof buf,
                      "<line x1=\"%g\" y1=\"%.2f\" x2=\"%g\" y2=\"%.2f\" stroke=\"#ccc\"/>\n",
                      ml, y, ml + pw, y);
        os << buf;
        std::snprintf(buf, sizeof buf,
                      "<text x=\"%g\" y=\"%.2f\" font-size=\"13\" text-anchor=\"end\" "
                      "font-family=\"sans-serif\">1e%d</text>\n",
                      ml - 8, y + 4, dec);
        os << buf;
    }
    const int x_ticks = 5;
    for (int i = 0; i <= x_ticks; ++i) {
        const double iter = (max_len - 1) * static_cast<double>(i) / x_ticks;
        std::snprintf(buf, sizeof buf,
                      "<text x=\"%.2f\" y=\"%g\" font-size=\"13\" text-anchor=\"middle\" "
                      "font-family=\"sans-serif\">%d</text>\n",
                      X(iter), mt + ph + 20, static_cast<int>(iter));
        os << buf;
    }
    std::snprintf(buf, sizeof buf,
                  "<text x=\"%g\" y=\"%g\" font-size=\"14\" text-anchor=\"middle\" "
                  "font-family=\"sans-serif\">iteration</text>\n",
                  ml + pw / 2, H - 12);
    os << buf;
    std::snprintf(buf, sizeof buf,
                  "<text x=\"18\" y=\"%g\" font-size=\"14\" text-anchor=\"middle\" "
                  "font-family=\"sans-serif\" transform=\"rotate(-90 18 %g)\">loss</text>\n",
                  mt + ph / 2, mt + ph / 2);
    os << buf;

    for (std::size_t hidx = 0; hidx < histories.size(); ++hidx) {
        const LossHistory& h = histories[hidx];
        std::string pts;
        for (std::size_t i = 0; i < h.loss.size(); ++i) {
            const double v = h.loss[i];
            if (!std::isfinite(v) || v <= 0.0) continue;
            std::snprintf(buf, sizeof buf, "%.2f,%.2f ", X(static_cast<double>(i)), Y(v));
            pts += buf;
        }
        if (pts.empty()) continue;
        os << "<polyline fill=\"none\" stroke=\"" << kPalette[hidx % kPaletteSize]
           << "\" stroke-width=\"1.6\" points=\"" << pts << "\"/>\n";
        // Legend entry.
        const double ly = mt + 18 + 20 * static_cast<double>(hidx);
        std::snprintf(buf, sizeof buf,
                      "<line x1=\"%g\" y1=\"%.2f\" x2=\"%g\" y2=\"%.2f\" stroke=\"%s\" "
                      "stroke-width=\"2\"/>\n",
                      ml + pw - 150, ly, ml + pw - 120, ly, kPalette[hidx % kPaletteSize]);
        os << buf;
        std::snprintf(buf, sizeof buf,
                      "<text x=\"%g\" y=\"%.2f\" font-size=\"13\" "
                      "font-family=\"sans-serif\">%s</text>\n",
                      ml + pw - 112, ly + 4, labels[hidx].c_str());
        os << buf;
    }
    os << "</svg>\n";
}

} // namespace nfde
