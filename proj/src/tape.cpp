#include "nfde/tape.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

#include "nfde/errors.hpp"
#include "nfde/numerics.hpp"

namespace nfde {

namespace {

bool leaf_kind(OpKind k) { return k == OpKind::input || k == OpKind::constant; }

// Both operands on the same tape (or liftable constants). Returns the tape,
// null when neither side is taped.
Tape* join_tapes(const Var& a, const Var& b) {
    if (a.tape && b.tape && a.tape != b.tape)
        throw std::invalid_argument("Var arithmetic: operands recorded on different tapes");
    return a.tape ? a.tape : b.tape;
}

std::int32_t ensure_on(Tape& t, const Var& x) {
    if (x.tape == &t && x.id >= 0) return x.id;
    if (x.tape && x.tape != &t)
        throw std::invalid_argument("Var arithmetic: operand belongs to another tape");
    return t.constant(x.v).id;
}

Var binary(OpKind kind, Var a, Var b, double value, double ga, double gb) {
    Tape* t = join_tapes(a, b);
    if (!t) return Var(value);
    const std::int32_t pa = ensure_on(*t, a);
    const std::int32_t pb = ensure_on(*t, b);
    return Var(value, t->record(kind, pa, pb, value, ga, gb), t);
}

Var unary(OpKind kind, Var x, double value, double g) {
    if (!x.tape) return Var(value);
    const std::int32_t p = ensure_on(*x.tape, x);
    return Var(value, x.tape->record(kind, p, -1, value, g, 0.0), x.tape);
}

// Sigmoid that never returns exactly 0 or 1 in double precision; the raw form
// rounds to 1.0 for x >= ~37 which would let a learned order escape (0,1).
double sigmoid_saturating(double x) {
    double y;
    if (x >= 0.0) {
        y = 1.0 / (1.0 + std::exp(-x));
    } else {
        const double e = std::exp(x);
        y = e / (1.0 + e);
    }
    constexpr double lo = 1e-300;
    constexpr double hi = 1.0 - 0x1p-53;
    if (y < lo) y = lo;
    if (y > hi) y = hi;
    return y;
}

} // namespace

std::int32_t Tape::record(OpKind kind, std::int32_t p0, std::int32_t p1,
                          double value, double g0, double g1) {
    const auto next = static_cast<std::int32_t>(nodes_.size());
    if (!leaf_kind(kind)) {
        if (p0 < 0 || p0 >= next)
            throw std::invalid_argument("Tape::record: parent 0 id " + std::to_string(p0) +
                                        " does not precede node " + std::to_string(next));
        if (p1 >= next)
            throw std::invalid_argument("Tape::record: parent 1 id " + std::to_string(p1) +
                                        " does not precede node " + std::to_string(next));
        if (!std::isfinite(g0) || (p1 >= 0 && !std::isfinite(g1)))
            throw NumericalError("Tape::record: non-finite local gradient at node " +
                                 std::to_string(next));
    }
    nodes_.push_back(Node{value, g0, g1, p0, p1, kind});
    if (kind == OpKind::input) param_nodes_.push_back(next);
    return next;
}

Var Tape::input(double value) {
    const std::int32_t id = record(OpKind::input, -1, -1, value, 0.0, 0.0);
    return Var(value, id, this);
}

Var Tape::constant(double value) {
    const std::int32_t id = record(OpKind::constant, -1, -1, value, 0.0, 0.0);
    return Var(value, id, this);
}

void Tape::clear() {
    nodes_.clear();
    param_nodes_.clear();
    pow_clamps_ = 0;
}

double Gradients::at(std::int32_t node_id) const {
    if (node_id < 0 || static_cast<std::size_t>(node_id) >= adjoints.size())
        throw std::invalid_argument("Gradients::at: node id " + std::to_string(node_id) +
                                    " outside recorded range");
    return adjoints[static_cast<std::size_t>(node_id)];
}

Gradients backward(const Tape& tape, std::int32_t output_id) {
    if (output_id < 0 || static_cast<std::size_t>(output_id) >= tape.size())
        throw std::invalid_argument("backward: output node id out of range");

    Gradients g;
    g.adjoints.assign(static_cast<std::size_t>(output_id) + 1, 0.0);
    g.adjoints[static_cast<std::size_t>(output_id)] = 1.0;

    const auto nodes = tape.nodes();
    for (std::int32_t n = output_id; n >= 0; --n) {
        const double a = g.adjoints[static_cast<std::size_t>(n)];
        if (a == 0.0) continue;
        if (!std::isfinite(a))
            throw NumericalError("backward: non-finite adjoint at node " + std::to_string(n));
        const Node& node = nodes[static_cast<std::size_t>(n)];
        if (node.p0 >= 0) g.adjoints[static_cast<std::size_t>(node.p0)] += a * node.g0;
        if (node.p1 >= 0) g.adjoints[static_cast<std::size_t>(node.p1)] += a * node.g1;
    }
    return g;
}

std::vector<double> parameter_gradients(const Tape& tape, const Gradients& g) {
    const auto idx = tape.parameter_index();
    std::vector<double> out(idx.size(), 0.0);
    for (std::size_t i = 0; i < idx.size(); ++i) {
        const auto id = static_cast<std::size_t>(idx[i]);
        out[i] = id < g.adjoints.size() ? g.adjoints[id] : 0.0;
    }
    return out;
}

// --- Var arithmetic ---------------------------------------------------------

Var operator+(Var a, Var b) { return binary(OpKind::add, a, b, a.v + b.v, 1.0, 1.0); }
Var operator-(Var a, Var b) { return binary(OpKind::sub, a, b, a.v - b.v, 1.0, -1.0); }
Var operator*(Var a, Var b) { return binary(OpKind::mul, a, b, a.v * b.v, b.v, a.v); }

Var operator/(Var a, Var b) {
    if (b.v == 0.0) throw NumericalError("Var division by zero");
    return binary(OpKind::div, a, b, a.v / b.v, 1.0 / b.v, -a.v / (b.v * b.v));
}

Var operator-(Var a) { return Var(0.0) - a; }

Var tanh(Var x) {
    const double y = std::tanh(x.v);
    return unary(OpKind::tanh, x, y, 1.0 - y * y);
}

Var sigmoid(Var x) {
    const double y = sigmoid_saturating(x.v);
    return unary(OpKind::sigmoid, x, y, y * (1.0 - y));
}

Var exp(Var x) {
    const double y = std::exp(x.v);
    if (!std::isfinite(y))
        throw NumericalError("Var exp: overflow for argument " + std::to_string(x.v));
    return unary(OpKind::exp, x, y, y);
}

Var log(Var x) {
    if (!(x.v > 0.0)) throw NumericalError("Var log: argument must be > 0");
    return unary(OpKind::ln, x, std::log(x.v), 1.0 / x.v);
}

Var pow_const(Var x, double c) {
    const double y = std::pow(x.v, c);
    if (!std::isfinite(y))
        throw NumericalError("pow_const: non-finite value for base " + std::to_string(x.v) +
                             ", exponent " + std::to_string(c));
    double g = c == 0.0 ? 0.0 : c * std::pow(x.v, c - 1.0);
    if (x.v == 0.0 && c < 1.0 && c != 0.0) {
        // d/dx x^c is unbounded at 0 for c < 1; clamp so the tape stays finite.
        g = (c > 0.0 ? 1.0 : -1.0) * 1e30;
        if (x.tape) x.tape->note_pow_clamp();
    }
    if (!std::isfinite(g))
        throw NumericalError("pow_const: non-finite gradient for base " + std::to_string(x.v) +
                             ", exponent " + std::to_string(c));
    return unary(OpKind::pow_const, x, y, g);
}

Var gamma(Var x) {
    const double y = nfde::gamma(x.v); // throws for x <= 0
    const double g = y * digamma(x.v);
    if (!std::isfinite(y) || !std::isfinite(g))
        throw NumericalError("Var gamma: overflow for argument " + std::to_string(x.v));
    return unary(OpKind::gamma_fn, x, y, g);
}

// --- grad_check --------------------------------------------------------------

double grad_check(const std::function<Var(std::span<const double>, Tape*)>& eval,
                  std::span<const double> params, double eps) {
    if (!(eps >= 1e-7 && eps <= 1e-3))
        throw std::invalid_argument("grad_check: eps must lie in [1e-7, 1e-3]");

    Tape tape;
    const Var out = eval(params, &tape);
    if (!out.on_tape() || out.tape != &tape)
        throw std::invalid_argument("grad_check: eval did not return a node on the given tape");
    const Gradients g = backward(tape, out.id);
    const std::vector<double> ad = parameter_gradients(tape, g);
    if (ad.size() != params.size())
        throw std::invalid_argument("grad_check: eval registered " + std::to_string(ad.size()) +
                                    " inputs for " + std::to_string(params.size()) + " parameters");

    std::vector<double> p(params.begin(), params.end());
    double worst = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) {
        const double saved = p[i];
        p[i] = saved + eps;
        const double up = eval(p, nullptr).v;
        p[i] = saved - eps;
        const double dn = eval(p, nullptr).v;
        p[i] = saved;
        const double fd = (up - dn) / (2.0 * eps);
        const double rel = std::abs(ad[i] - fd) / std::max(1.0, std::abs(fd));
        if (rel > worst) worst = rel;
    }
    return worst;
}

} // namespace nfde
