#include "nfde/nn.hpp"

#include <cmath>
#include <cstdio>
#include <istream>
#include <ostream>
#include <random>
#include <stdexcept>
#include <string>

#include "nfde/errors.hpp"

namespace nfde {

namespace {

void check_config(const MlpConfig& cfg) {
    if (cfg.layer_sizes.size() < 2)
        throw std::invalid_argument("Mlp: need at least input and output layers");
    for (int s : cfg.layer_sizes)
        if (s <= 0) throw std::invalid_argument("Mlp: layer sizes must be positive");
}

// 53-bit uniform in [0, 1) from the raw engine stream; avoids the
// implementation-defined std::uniform_real_distribution mapping.
double next_uniform(std::mt19937_64& rng) {
    return static_cast<double>(rng() >> 11) * 0x1p-53;
}

} // namespace

std::size_t mlp_param_count(const MlpConfig& cfg) {
    check_config(cfg);
    std::size_t n = 0;
    for (std::size_t l = 0; l + 1 < cfg.layer_sizes.size(); ++l)
        n += static_cast<std::size_t>(cfg.layer_sizes[l]) * cfg.layer_sizes[l + 1] +
             cfg.layer_sizes[l + 1];
    return n;
}

std::size_t Mlp::weight_offset(int layer) const {
    std::size_t off = 0;
    for (int l = 0; l < layer; ++l)
        off += static_cast<std::size_t>(config.layer_sizes[l]) * config.layer_sizes[l + 1] +
               config.layer_sizes[l + 1];
    return off;
}

std::size_t Mlp::bias_offset(int layer) const {
    return weight_offset(layer) +
           static_cast<std::size_t>(config.layer_sizes[layer]) * config.layer_sizes[layer + 1];
}

double& Mlp::weight(int layer, int row, int col) {
    return params[weight_offset(layer) +
                  static_cast<std::size_t>(row) * config.layer_sizes[layer] + col];
}
double Mlp::weight(int layer, int row, int col) const {
    return params[weight_offset(layer) +
                  static_cast<std::size_t>(row) * config.layer_sizes[layer] + col];
}
double& Mlp::bias(int layer, int row) { return params[bias_offset(layer) + row]; }
double Mlp::bias(int layer, int row) const { return params[bias_offset(layer) + row]; }

Mlp mlp_init(const MlpConfig& cfg) {
    check_config(cfg);
    Mlp net;
    net.config = cfg;
    net.params.assign(mlp_param_count(cfg), 0.0);

    std::mt19937_64 rng(cfg.seed);
    for (std::size_t l = 0; l + 1 < cfg.layer_sizes.size(); ++l) {
        const int fan_in = cfg.layer_sizes[l];
        const int fan_out = cfg.layer_sizes[l + 1];
        const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
        const std::size_t w0 = net.weight_offset(static_cast<int>(l));
        for (std::size_t i = 0; i < static_cast<std::size_t>(fan_in) * fan_out; ++i)
            net.params[w0 + i] = (2.0 * next_uniform(rng) - 1.0) * bound;
        // biases stay zero
    }
    return net;
}

BoundMlp bind_mlp(const Mlp& net, std::span<const double> params, Tape* tape) {
    if (params.size() != mlp_param_count(net.config))
        throw std::invalid_argument("bind_mlp: parameter count mismatch");
    BoundMlp b;
    b.shape = &net;
    b.pvars.reserve(params.size());
    for (double p : params)
        b.pvars.push_back(tape ? tape->input(p) : Var(p));
    return b;
}

std::vector<Var> BoundMlp::forward(std::span<const Var> input) const {
    const MlpConfig& cfg = shape->config;
    if (input.size() != static_cast<std::size_t>(cfg.layer_sizes.front()))
        throw std::invalid_argument("Mlp forward: input dimension mismatch");

    std::vector<Var> act(input.begin(), input.end());
    const int n_layers = static_cast<int>(cfg.layer_sizes.size()) - 1;
    for (int l = 0; l < n_layers; ++l) {
        const int in = cfg.layer_sizes[l];
        const int out = cfg.layer_sizes[l + 1];
        const std::size_t w0 = shape->weight_offset(l);
        const std::size_t b0 = shape->bias_offset(l);
        std::vector<Var> next;
        next.reserve(out);
        for (int r = 0; r < out; ++r) {
            Var acc = pvars[b0 + r];
            const std::size_t row = w0 + static_cast<std::size_t>(r) * in;
            for (int c = 0; c < in; ++c)
                acc = acc + pvars[row + c] * act[c];
            if (l + 1 < n_layers) {
                acc = tanh(acc);
            } else if (cfg.output == MlpConfig::Output::sigmoid) {
                acc = sigmoid(acc);
            }
            next.push_back(acc);
        }
        act = std::move(next);
    }
    return act;
}

std::vector<Var> mlp_forward(const Mlp& net, std::span<const Var> input, Tape* tape) {
    return bind_mlp(net, net.params, tape).forward(input);
}

std::vector<double> mlp_forward(const Mlp& net, std::span<const double> input) {
    std::vector<Var> in;
    in.reserve(input.size());
    for (double x : input) in.push_back(Var(x));
    const std::vector<Var> out = bind_mlp(net, net.params, nullptr).forward(in);
    std::vector<double> r;
    r.reserve(out.size());
    for (const Var& v : out) r.push_back(v.v);
    return r;
}

// --- AlphaParam ----------------------------------------------------------------

namespace {

double logit_of(double p) {
    if (!(p > 0.0 && p < 1.0))
        throw std::invalid_argument("alpha init must lie in (0, 1), got " + std::to_string(p));
    return std::log(p / (1.0 - p));
}

} // namespace

std::size_t AlphaParam::param_count() const {
    switch (mode) {
        case Mode::scalar_logit: return 1;
        case Mode::tiny_net: return net.param_count();
        case Mode::fixed: return 0;
    }
    return 0;
}

std::span<const double> AlphaParam::param_values() const {
    switch (mode) {
        case Mode::scalar_logit: return {&logit, 1};
        case Mode::tiny_net: return net.params;
        case Mode::fixed: return {};
    }
    return {};
}

std::span<double> AlphaParam::param_values() {
    switch (mode) {
        case Mode::scalar_logit: return {&logit, 1};
        case Mode::tiny_net: return net.params;
        case Mode::fixed: return {};
    }
    return {};
}

AlphaParam make_alpha_scalar(double alpha_init) {
    AlphaParam a;
    a.mode = AlphaParam::Mode::scalar_logit;
    a.logit = logit_of(alpha_init);
    return a;
}

AlphaParam make_alpha_tiny_net(double alpha_init, std::uint64_t seed) {
    AlphaParam a;
    a.mode = AlphaParam::Mode::tiny_net;
    MlpConfig cfg;
    cfg.layer_sizes = {1, 32, 1};
    cfg.output = MlpConfig::Output::sigmoid;
    cfg.seed = seed;
    a.net = mlp_init(cfg);
    // Zero-init biases put the initial output near 0.5; preset the output bias
    // so the first realized order sits at alpha_init as the protocol expects.
    a.net.bias(1, 0) = logit_of(alpha_init);
    a.alpha_in = alpha_init;
    return a;
}

AlphaParam make_alpha_fixed(double alpha) {
    if (!(alpha > 0.0 && alpha <= 1.0))
        throw std::invalid_argument("fixed alpha must lie in (0, 1], got " + std::to_string(alpha));
    AlphaParam a;
    a.mode = AlphaParam::Mode::fixed;
    a.fixed_value = alpha;
    return a;
}

Var alpha_value(const AlphaParam& a, std::span<const Var> pvars, Tape* tape) {
    switch (a.mode) {
        case AlphaParam::Mode::scalar_logit: {
            if (pvars.size() != 1)
                throw std::invalid_argument("alpha_value: scalar mode expects one bound parameter");
            return sigmoid(pvars[0]);
        }
        case AlphaParam::Mode::tiny_net: {
            if (pvars.size() != a.net.param_count())
                throw std::invalid_argument("alpha_value: bound parameter count mismatch");
            BoundMlp b;
            b.shape = &a.net;
            b.pvars.assign(pvars.begin(), pvars.end());
            const Var in = tape ? tape->constant(a.alpha_in) : Var(a.alpha_in);
            return b.forward(std::span<const Var>(&in, 1))[0];
        }
        case AlphaParam::Mode::fixed:
            return tape ? tape->constant(a.fixed_value) : Var(a.fixed_value);
    }
    throw std::logic_error("alpha_value: unknown mode");
}

Var alpha_value(const AlphaParam& a, Tape* tape) {
    std::vector<Var> pv;
    const auto vals = a.param_values();
    pv.reserve(vals.size());
    for (double v : vals) pv.push_back(tape ? tape->input(v) : Var(v));
    return alpha_value(a, pv, tape);
}

// --- Loss ----------------------------------------------------------------------

Var mse_loss(std::span<const Var> pred, std::span<const double> target) {
    if (pred.size() != target.size() || pred.empty())
        throw std::invalid_argument("mse_loss: prediction/target size mismatch or empty");
    Var acc = 0.0;
    for (std::size_t i = 0; i < pred.size(); ++i) {
        const Var d = pred[i] - target[i];
        acc = acc + d * d;
    }
    return acc * (1.0 / static_cast<double>(pred.size()));
}

double mse_loss(std::span<const double> pred, std::span<const double> target) {
    if (pred.size() != target.size() || pred.empty())
        throw std::invalid_argument("mse_loss: prediction/target size mismatch or empty");
    double acc = 0.0;
    for (std::size_t i = 0; i < pred.size(); ++i) {
        const double d = pred[i] - target[i];
        acc += d * d;
    }
    return acc / static_cast<double>(pred.size());
}

// --- Adam ---------------------------------------------------------------------

AdamState make_adam(std::size_t n_params, double lr) {
    AdamState s;
    s.m.assign(n_params, 0.0);
    s.v.assign(n_params, 0.0);
    s.lr = lr;
    return s;
}

void adam_step(AdamState& s, std::span<double> params, std::span<const double> grads) {
    if (params.size() != grads.size() || params.size() != s.m.size())
        throw std::invalid_argument("adam_step: size mismatch");
    for (double g : grads)
        if (!std::isfinite(g)) throw NumericalError("adam_step: non-finite gradient");

    s.step_count += 1;
    const double bc1 = 1.0 - std::pow(s.beta1, static_cast<double>(s.step_count));
    const double bc2 = 1.0 - std::pow(s.beta2, static_cast<double>(s.step_count));
    for (std::size_t i = 0; i < params.size(); ++i) {
        s.m[i] = s.beta1 * s.m[i] + (1.0 - s.beta1) * grads[i];
        s.v[i] = s.beta2 * s.v[i] + (1.0 - s.beta2) * grads[i] * grads[i];
        const double mhat = s.m[i] / bc1;
        const double vhat = s.v[i] / bc2;
        params[i] -= s.lr * (mhat / (std::sqrt(vhat) + s.epsilon));
    }
}

// --- Serialization ---------------------------------------------------------------

namespace {

std::string fmt17(double x) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

} // namespace

void write_mlp(std::ostream& os, const Mlp& net, const std::string& tag) {
    os << tag << "_layers";
    for (int s : net.config.layer_sizes) os << ' ' << s;
    os << '\n';
    os << tag << "_output "
       << (net.config.output == MlpConfig::Output::sigmoid ? "sigmoid" : "identity") << '\n';
    os << tag << "_params";
    for (double p : net.params) os << ' ' << fmt17(p);
    os << '\n';
}

Mlp read_mlp(std::istream& is, const std::string& tag) {
    std::string key;
    Mlp net;
    if (!(is >> key) || key != tag + "_layers")
        throw DataError("model file: expected " + tag + "_layers, got '" + key + "'");
    // Layer list runs to the next key, which always starts with the tag.
    net.config.layer_sizes.clear();
    while (true) {
        const auto pos = is.tellg();
        std::string tok;
        if (!(is >> tok)) throw DataError("model file: truncated layer list");
        if (tok == tag + "_output") {
            is.seekg(pos);
            break;
        }
        try {
            net.config.layer_sizes.push_back(std::stoi(tok));
        } catch (const std::exception&) {
            throw DataError("model file: bad layer size '" + tok + "'");
        }
    }
    check_config(net.config);
    std::string act;
    if (!(is >> key >> act) || key != tag + "_output")
        throw DataError("model file: expected " + tag + "_output");
    if (act == "sigmoid") net.config.output = MlpConfig::Output::sigmoid;
    else if (act == "identity") net.config.output = MlpConfig::Output::identity;
    else throw DataError("model file: unknown output activation '" + act + "'");

    if (!(is >> key) || key != tag + "_params")
        throw DataError("model file: expected " + tag + "_params");
    const std::size_t n = mlp_param_count(net.config);
    net.params.resize(n);
    for (std::size_t i = 0; i < n; ++i)
        if (!(is >> net.params[i]))
            throw DataError("model file: truncated parameter block for " + tag);
    return net;
}

} // namespace nfde
