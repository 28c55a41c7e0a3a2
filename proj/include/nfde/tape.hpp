#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

namespace nfde {

class Tape;

enum class OpKind : std::uint8_t {
    input,     // trainable leaf, registered in the tape's parameter index
    constant,  // literal leaf
    add,
    sub,
    mul,
    div,
    pow_const, // x^c, c fixed at record time
    tanh,
    sigmoid,   // saturates away from exact 0/1 so downstream (0,1) bounds hold
    ln,
    exp,
    gamma_fn,  // Gamma(x); local grad Gamma(x)*psi(x) via the Lanczos kernel
};

struct Node {
    double value;
    double g0, g1;        // partials wrt parents, fixed at forward time
    std::int32_t p0, p1;  // parent ids, -1 when absent
    OpKind kind;
};

// Scalar handle: a value plus (optionally) the node that produced it. With a
// null tape it behaves as a plain double through the same code path, which is
// what makes taped and untaped solves bit-identical.
struct Var {
    double v = 0.0;
    std::int32_t id = -1;
    Tape* tape = nullptr;

    Var() = default;
    Var(double value) : v(value) {} // NOLINT: implicit lift of plain scalars
    Var(double value, std::int32_t node, Tape* t) : v(value), id(node), tape(t) {}
    bool on_tape() const { return tape != nullptr && id >= 0; }
};

// Append-only record of one forward evaluation. Cleared and refilled each
// training iteration; capacity is retained across clears.
class Tape {
public:
    // Low-level append. Parents must be earlier node ids (or -1); local grads
    // must be finite except for the documented pow_const clamp, which is
    // applied by the pow_const wrapper before calling record.
    std::int32_t record(OpKind kind, std::int32_t p0, std::int32_t p1,
                        double value, double g0, double g1);

    // Trainable leaf; consecutive calls get parameter ids 0, 1, 2, ...
    Var input(double value);
    // Literal leaf.
    Var constant(double value);

    void clear();
    std::size_t size() const { return nodes_.size(); }
    std::span<const Node> nodes() const { return nodes_; }
    const Node& node(std::int32_t id) const { return nodes_[static_cast<std::size_t>(id)]; }

    // Parameter id -> node id, in registration order.
    std::span<const std::int32_t> parameter_index() const { return param_nodes_; }

    // Diagnostic: how many pow_const gradients were clamped at x=0 with c<1.
    std::size_t pow_clamp_count() const { return pow_clamps_; }
    void note_pow_clamp() { ++pow_clamps_; }

    void reserve(std::size_t n) { nodes_.reserve(n); }

private:
    std::vector<Node> nodes_;
    std::vector<std::int32_t> param_nodes_;
    std::size_t pow_clamps_ = 0;
};

// Adjoints of every node at or before the seeded output.
struct Gradients {
    std::vector<double> adjoints;
    double at(std::int32_t node_id) const;
};

// Reverse sweep from output. The output's adjoint is exactly 1. Throws
// NumericalError naming the first node whose adjoint goes non-finite.
Gradients backward(const Tape& tape, std::int32_t output_id);

// Adjoints of the registered parameters, in parameter-id order.
std::vector<double> parameter_gradients(const Tape& tape, const Gradients& g);

// --- Var arithmetic -------------------------------------------------------

Var operator+(Var a, Var b);
Var operator-(Var a, Var b);
Var operator*(Var a, Var b);
Var operator/(Var a, Var b);
Var operator-(Var a);

Var tanh(Var x);
Var sigmoid(Var x);
Var exp(Var x);
Var log(Var x);
Var pow_const(Var x, double c);
Var gamma(Var x); // overloads nfde::gamma(double)

// --- Verification helper ---------------------------------------------------

// eval must register its parameters as tape inputs (in order) when handed a
// tape, and run the identical computation on plain values when handed null.
// Returns max_i |ad_i - fd_i| / max(1, |fd_i|) against central differences.
// eps must lie in [1e-7, 1e-3].
double grad_check(const std::function<Var(std::span<const double>, Tape*)>& eval,
                  std::span<const double> params, double eps);

} // namespace nfde
