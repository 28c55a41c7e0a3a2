#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <vector>

#include "nfde/tape.hpp"

namespace nfde {

struct MlpConfig {
    std::vector<int> layer_sizes;              // e.g. {1, 64, 64, 1}
    enum class Hidden { tanh } hidden = Hidden::tanh;
    enum class Output { identity, sigmoid } output = Output::identity;
    std::uint64_t seed = 0;
};

// Fully connected net with flat row-major parameter storage: for each layer,
// the weight matrix rows then the bias vector, layers in order.
struct Mlp {
    MlpConfig config;
    std::vector<double> params;

    std::size_t param_count() const { return params.size(); }
    int input_dim() const { return config.layer_sizes.front(); }
    int output_dim() const { return config.layer_sizes.back(); }

    // Flat offsets; layer l maps layer_sizes[l] -> layer_sizes[l+1].
    std::size_t weight_offset(int layer) const;
    std::size_t bias_offset(int layer) const;

    double& weight(int layer, int row, int col);
    double weight(int layer, int row, int col) const;
    double& bias(int layer, int row);
    double bias(int layer, int row) const;
};

std::size_t mlp_param_count(const MlpConfig& cfg);

// Weights uniform on [-1/sqrt(fan_in), +1/sqrt(fan_in)], biases zero, drawn
// from a seeded mt19937_64 layer by layer, row-major. Deterministic across
// platforms (the uniform is built from the raw 64-bit stream directly).
Mlp mlp_init(const MlpConfig& cfg);

// Per-tape view of a net: parameters registered once as inputs (or lifted as
// plain values when tape is null) so every forward in one iteration shares the
// same leaves. Values are read from `params`, which must match the net shape.
struct BoundMlp {
    const Mlp* shape = nullptr;
    std::vector<Var> pvars;

    std::vector<Var> forward(std::span<const Var> input) const;
};

BoundMlp bind_mlp(const Mlp& net, std::span<const double> params, Tape* tape);
inline BoundMlp bind_mlp(const Mlp& net, Tape* tape) { return bind_mlp(net, net.params, tape); }

// Convenience single-shot forward; registers its own inputs when taped.
std::vector<Var> mlp_forward(const Mlp& net, std::span<const Var> input, Tape* tape);
std::vector<double> mlp_forward(const Mlp& net, std::span<const double> input);

// --- Learned derivative order -----------------------------------------------

struct AlphaParam {
    enum class Mode { scalar_logit, tiny_net, fixed };
    Mode mode = Mode::scalar_logit;
    double logit = 0.0;       // scalar_logit
    double fixed_value = 1.0; // fixed
    Mlp net;                  // tiny_net: {1, 32, 1}, tanh hidden, sigmoid out
    double alpha_in = 0.99;   // tiny_net input, fed back across iterations

    std::size_t param_count() const;
    std::span<const double> param_values() const;
    std::span<double> param_values();
};

// scalar_logit head with sigmoid(logit) == alpha_init.
AlphaParam make_alpha_scalar(double alpha_init);
// tiny_net head; output bias preset so the initial realized value ~= alpha_init.
AlphaParam make_alpha_tiny_net(double alpha_init, std::uint64_t seed);
AlphaParam make_alpha_fixed(double alpha);

// Realized order for the current iteration. `pvars` are the head's parameters
// bound on the active tape (empty for fixed mode). Strictly inside (0,1) for
// the trainable modes; fixed mode passes its value through.
Var alpha_value(const AlphaParam& a, std::span<const Var> pvars, Tape* tape);
// Standalone form: registers its own inputs.
Var alpha_value(const AlphaParam& a, Tape* tape);

// --- Loss ---------------------------------------------------------------------

// Mean of squared componentwise differences; prediction stays differentiable.
Var mse_loss(std::span<const Var> pred, std::span<const double> target);
double mse_loss(std::span<const double> pred, std::span<const double> target);

// --- Optimizer ------------------------------------------------------------------

struct AdamState {
    std::vector<double> m, v;
    long step_count = 0;
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
};

AdamState make_adam(std::size_t n_params, double lr = 1e-3);

// One bias-corrected update, in place. Throws NumericalError on non-finite
// gradients; parameters are untouched in that case.
void adam_step(AdamState& s, std::span<double> params, std::span<const double> grads);

// --- Serialization -----------------------------------------------------------

// Flat text blocks used by the model file format; 17 significant digits so
// doubles round-trip exactly.
void write_mlp(std::ostream& os, const Mlp& net, const std::string& tag);
Mlp read_mlp(std::istream& is, const std::string& tag);

} // namespace nfde
