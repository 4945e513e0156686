#include "ecn/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <utility>

namespace ecn {

std::size_t numel(const Shape& shape) {
    std::size_t n = 1;
    for (std::size_t d : shape) n *= d;
    return n;
}

std::string shape_str(const Shape& shape) {
    std::ostringstream os;
    os << "[";
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i) os << "x";
        os << shape[i];
    }
    os << "]";
    return os.str();
}

Tensor::Tensor(Shape shape, std::vector<double> data, bool requires_grad) {
    if (numel(shape) != data.size()) {
        throw ShapeError("tensor shape " + shape_str(shape) + " does not match data length " +
                         std::to_string(data.size()));
    }
    impl_ = std::make_shared<Impl>();
    impl_->shape = std::move(shape);
    impl_->data = std::move(data);
    impl_->requires_grad = requires_grad;
}

Tensor Tensor::zeros(Shape shape, bool requires_grad) {
    std::vector<double> d(numel(shape), 0.0);
    return Tensor(std::move(shape), std::move(d), requires_grad);
}

Tensor Tensor::full(Shape shape, double value, bool requires_grad) {
    std::vector<double> d(numel(shape), value);
    return Tensor(std::move(shape), std::move(d), requires_grad);
}

Tensor Tensor::scalar(double value, bool requires_grad) {
    return Tensor({1}, {value}, requires_grad);
}

Tensor Tensor::row(std::vector<double> data, bool requires_grad) {
    Shape s{data.size()};
    return Tensor(std::move(s), std::move(data), requires_grad);
}

double Tensor::at(std::size_t r, std::size_t c) const {
    if (impl_->shape.size() != 2) throw ContractError("at(r,c) requires a rank-2 tensor");
    return impl_->data[r * impl_->shape[1] + c];
}

double Tensor::item() const {
    if (size() != 1) throw ContractError("item() requires a single-element tensor, got " + shape_str(shape()));
    return impl_->data[0];
}

std::span<const double> Tensor::grad() const {
    if (impl_->grad.empty()) impl_->grad.assign(impl_->data.size(), 0.0);
    return impl_->grad;
}

std::span<double> Tensor::mutable_grad() const {
    if (impl_->grad.empty()) impl_->grad.assign(impl_->data.size(), 0.0);
    return impl_->grad;
}

void Tensor::zero_grad() {
    std::fill(impl_->grad.begin(), impl_->grad.end(), 0.0);
}

namespace {
thread_local Tape* g_active_tape = nullptr;
}

Tape* active_tape() { return g_active_tape; }

TapeScope::TapeScope(Tape& tape) : previous_(g_active_tape) { g_active_tape = &tape; }
TapeScope::~TapeScope() { g_active_tape = previous_; }

void Tape::record(Tensor out, std::function<void()> backprop) {
    nodes_.push_back(Node{std::move(out), std::move(backprop)});
}

void Tape::backward(const Tensor& root) {
    if (root.size() != 1) {
        throw ContractError("backward root must be scalar, got shape " + shape_str(root.shape()));
    }
    root.mutable_grad()[0] += 1.0;
    for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) {
        if (it->backprop) it->backprop();
    }
}

void backward(const Tensor& root) {
    Tape* t = active_tape();
    if (!t) throw ContractError("backward called with no active tape");
    t->backward(root);
}

namespace {

bool grad_needed(const Tensor& a) { return g_active_tape && a.requires_grad(); }
bool grad_needed(const Tensor& a, const Tensor& b) {
    return g_active_tape && (a.requires_grad() || b.requires_grad());
}

Tensor make_out(Shape shape, std::vector<double> data, bool track) {
    return Tensor(std::move(shape), std::move(data), track);
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
    if (a.shape() != b.shape()) {
        throw ShapeError(std::string(op) + ": operand shapes " + shape_str(a.shape()) + " and " +
                         shape_str(b.shape()) + " differ");
    }
}

// Shared skeleton for elementwise binary ops.
template <typename Fwd, typename Bwd>
Tensor binary_op(const char* name, const Tensor& a, const Tensor& b, Fwd fwd, Bwd bwd) {
    require_same_shape(a, b, name);
    std::vector<double> out(a.size());
    auto ad = a.data();
    auto bd = b.data();
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = fwd(ad[i], bd[i]);
    bool track = grad_needed(a, b);
    Tensor r = make_out(a.shape(), std::move(out), track);
    if (track) {
        g_active_tape->record(r, [a, b, r, bwd]() {
            auto g = r.grad();
            auto ad2 = a.data();
            auto bd2 = b.data();
            std::span<double> ga = a.requires_grad() ? a.mutable_grad() : std::span<double>{};
            std::span<double> gb = b.requires_grad() ? b.mutable_grad() : std::span<double>{};
            for (std::size_t i = 0; i < g.size(); ++i) {
                auto [da, db] = bwd(ad2[i], bd2[i]);
                if (!ga.empty()) ga[i] += g[i] * da;
                if (!gb.empty()) gb[i] += g[i] * db;
            }
        });
    }
    return r;
}

template <typename Fwd, typename Bwd>
Tensor unary_op(const Tensor& a, Fwd fwd, Bwd bwd) {
    std::vector<double> out(a.size());
    auto ad = a.data();
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = fwd(ad[i]);
    bool track = grad_needed(a);
    Tensor r = make_out(a.shape(), std::move(out), track);
    if (track) {
        g_active_tape->record(r, [a, r, bwd]() {
            auto g = r.grad();
            auto ad2 = a.data();
            auto od = r.data();
            auto ga = a.mutable_grad();
            for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * bwd(ad2[i], od[i]);
        });
    }
    return r;
}

constexpr double kInvLn2 = 1.4426950408889634074;  // 1/ln(2)

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) {
    return binary_op("add", a, b, [](double x, double y) { return x + y; },
                     [](double, double) { return std::pair{1.0, 1.0}; });
}

Tensor sub(const Tensor& a, const Tensor& b) {
    return binary_op("sub", a, b, [](double x, double y) { return x - y; },
                     [](double, double) { return std::pair{1.0, -1.0}; });
}

Tensor mul(const Tensor& a, const Tensor& b) {
    return binary_op("mul", a, b, [](double x, double y) { return x * y; },
                     [](double x, double y) { return std::pair{y, x}; });
}

Tensor div(const Tensor& a, const Tensor& b) {
    for (double y : b.data()) {
        if (y == 0.0) throw NumericDomainError("div: division by zero");
    }
    return binary_op("div", a, b, [](double x, double y) { return x / y; },
                     [](double x, double y) { return std::pair{1.0 / y, -x / (y * y)}; });
}

Tensor exp(const Tensor& a) {
    return unary_op(a, [](double x) { return std::exp(x); },
                    [](double, double out) { return out; });
}

Tensor log2(const Tensor& a) {
    for (double x : a.data()) {
        if (x <= 0.0) throw NumericDomainError("log2: input " + std::to_string(x) + " is not positive");
    }
    return unary_op(a, [](double x) { return std::log2(x); },
                    [](double x, double) { return kInvLn2 / x; });
}

Tensor sqrt(const Tensor& a) {
    for (double x : a.data()) {
        if (x < 0.0) throw NumericDomainError("sqrt: input " + std::to_string(x) + " is negative");
    }
    // Subgradient 0 at x == 0 so a zero-variance path stays NaN-free.
    return unary_op(a, [](double x) { return std::sqrt(x); },
                    [](double, double out) { return out > 0.0 ? 0.5 / out : 0.0; });
}

Tensor square(const Tensor& a) {
    return unary_op(a, [](double x) { return x * x; },
                    [](double x, double) { return 2.0 * x; });
}

Tensor relu(const Tensor& a) {
    return unary_op(a, [](double x) { return x > 0.0 ? x : 0.0; },
                    [](double x, double) { return x > 0.0 ? 1.0 : 0.0; });
}

Tensor negate(const Tensor& a) {
    return unary_op(a, [](double x) { return -x; }, [](double, double) { return -1.0; });
}

Tensor scale(const Tensor& a, double c) {
    return unary_op(a, [c](double x) { return x * c; }, [c](double, double) { return c; });
}

Tensor add_scalar(const Tensor& a, double c) {
    return unary_op(a, [c](double x) { return x + c; }, [](double, double) { return 1.0; });
}

void matmul_raw(std::span<const double> a, std::span<const double> b, std::span<double> out,
                std::size_t m, std::size_t k, std::size_t n) {
    std::fill(out.begin(), out.end(), 0.0);
    for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t p = 0; p < k; ++p) {
            const double av = a[i * k + p];
            const double* brow = &b[p * n];
            double* orow = &out[i * n];
            for (std::size_t j = 0; j < n; ++j) orow[j] += av * brow[j];
        }
    }
}

Tensor matmul(const Tensor& a, const Tensor& b) {
    if (a.shape().size() != 2 || b.shape().size() != 2 || a.shape()[1] != b.shape()[0]) {
        throw ShapeError("matmul: incompatible shapes " + shape_str(a.shape()) + " and " +
                         shape_str(b.shape()));
    }
    const std::size_t m = a.shape()[0], k = a.shape()[1], n = b.shape()[1];
    std::vector<double> out(m * n);
    matmul_raw(a.data(), b.data(), out, m, k, n);
    bool track = grad_needed(a, b);
    Tensor r = make_out({m, n}, std::move(out), track);
    if (track) {
        g_active_tape->record(r, [a, b, r, m, k, n]() {
            auto g = r.grad();
            if (a.requires_grad()) {
                auto ga = a.mutable_grad();
                auto bd = b.data();
                // ga += g . b^T
                for (std::size_t i = 0; i < m; ++i)
                    for (std::size_t p = 0; p < k; ++p) {
                        double acc = 0.0;
                        for (std::size_t j = 0; j < n; ++j) acc += g[i * n + j] * bd[p * n + j];
                        ga[i * k + p] += acc;
                    }
            }
            if (b.requires_grad()) {
                auto gb = b.mutable_grad();
                auto ad = a.data();
                // gb += a^T . g
                for (std::size_t i = 0; i < m; ++i)
                    for (std::size_t p = 0; p < k; ++p) {
                        const double av = ad[i * k + p];
                        for (std::size_t j = 0; j < n; ++j) gb[p * n + j] += av * g[i * n + j];
                    }
            }
        });
    }
    return r;
}

Tensor reshape(const Tensor& a, Shape shape) {
    if (numel(shape) != a.size()) {
        throw ShapeError("reshape: cannot view " + shape_str(a.shape()) + " as " + shape_str(shape));
    }
    std::vector<double> out(a.data().begin(), a.data().end());
    bool track = grad_needed(a);
    Tensor r = make_out(std::move(shape), std::move(out), track);
    if (track) {
        g_active_tape->record(r, [a, r]() {
            auto g = r.grad();
            auto ga = a.mutable_grad();
            for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
        });
    }
    return r;
}

Tensor add_rowvec(const Tensor& x, const Tensor& v) {
    if (x.shape().size() != 2 || v.shape().size() != 1 || x.shape()[1] != v.shape()[0]) {
        throw ShapeError("add_rowvec: shapes " + shape_str(x.shape()) + " and " + shape_str(v.shape()) +
                         " do not align");
    }
    const std::size_t m = x.shape()[0], n = x.shape()[1];
    std::vector<double> out(m * n);
    auto xd = x.data();
    auto vd = v.data();
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) out[i * n + j] = xd[i * n + j] + vd[j];
    bool track = grad_needed(x, v);
    Tensor r = make_out({m, n}, std::move(out), track);
    if (track) {
        g_active_tape->record(r, [x, v, r, m, n]() {
            auto g = r.grad();
            if (x.requires_grad()) {
                auto gx = x.mutable_grad();
                for (std::size_t i = 0; i < m * n; ++i) gx[i] += g[i];
            }
            if (v.requires_grad()) {
                auto gv = v.mutable_grad();
                for (std::size_t i = 0; i < m; ++i)
                    for (std::size_t j = 0; j < n; ++j) gv[j] += g[i * n + j];
            }
        });
    }
    return r;
}

Tensor outer_diff(const Tensor& w, const Tensor& v) {
    if (w.shape().size() != 1 || v.shape().size() != 1) {
        throw ShapeError("outer_diff: expects rank-1 operands, got " + shape_str(w.shape()) + " and " +
                         shape_str(v.shape()));
    }
    const std::size_t m = w.shape()[0], n = v.shape()[0];
    std::vector<double> out(m * n);
    auto wd = w.data();
    auto vd = v.data();
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t k = 0; k < n; ++k) out[i * n + k] = wd[i] - vd[k];
    bool track = grad_needed(w, v);
    Tensor r = make_out({m, n}, std::move(out), track);
    if (track) {
        g_active_tape->record(r, [w, v, r, m, n]() {
            auto g = r.grad();
            if (w.requires_grad()) {
                auto gw = w.mutable_grad();
                for (std::size_t i = 0; i < m; ++i) {
                    double acc = 0.0;
                    for (std::size_t k = 0; k < n; ++k) acc += g[i * n + k];
                    gw[i] += acc;
                }
            }
            if (v.requires_grad()) {
                auto gv = v.mutable_grad();
                for (std::size_t i = 0; i < m; ++i)
                    for (std::size_t k = 0; k < n; ++k) gv[k] -= g[i * n + k];
            }
        });
    }
    return r;
}

Tensor row_scale(const Tensor& x, const Tensor& s) {
    if (x.shape().size() != 2 || s.shape().size() != 1 || x.shape()[0] != s.shape()[0]) {
        throw ShapeError("row_scale: shapes " + shape_str(x.shape()) + " and " + shape_str(s.shape()) +
                         " do not align");
    }
    const std::size_t m = x.shape()[0], n = x.shape()[1];
    std::vector<double> out(m * n);
    auto xd = x.data();
    auto sd = s.data();
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) out[i * n + j] = xd[i * n + j] * sd[i];
    bool track = grad_needed(x, s);
    Tensor r = make_out({m, n}, std::move(out), track);
    if (track) {
        g_active_tape->record(r, [x, s, r, m, n]() {
            auto g = r.grad();
            auto xd2 = x.data();
            auto sd2 = s.data();
            if (x.requires_grad()) {
                auto gx = x.mutable_grad();
                for (std::size_t i = 0; i < m; ++i)
                    for (std::size_t j = 0; j < n; ++j) gx[i * n + j] += g[i * n + j] * sd2[i];
            }
            if (s.requires_grad()) {
                auto gs = s.mutable_grad();
                for (std::size_t i = 0; i < m; ++i) {
                    double acc = 0.0;
                    for (std::size_t j = 0; j < n; ++j) acc += g[i * n + j] * xd2[i * n + j];
                    gs[i] += acc;
                }
            }
        });
    }
    return r;
}

Tensor row_softmax(const Tensor& x) {
    if (x.shape().size() != 2) {
        throw ShapeError("row_softmax: expects rank-2 input, got " + shape_str(x.shape()));
    }
    const std::size_t m = x.shape()[0], n = x.shape()[1];
    std::vector<double> out(m * n);
    auto xd = x.data();
    for (std::size_t i = 0; i < m; ++i) {
        double mx = xd[i * n];
        for (std::size_t j = 1; j < n; ++j) mx = std::max(mx, xd[i * n + j]);
        double z = 0.0;
        for (std::size_t j = 0; j < n; ++j) {
            out[i * n + j] = std::exp(xd[i * n + j] - mx);
            z += out[i * n + j];
        }
        for (std::size_t j = 0; j < n; ++j) out[i * n + j] /= z;
    }
    bool track = grad_needed(x);
    Tensor r = make_out({m, n}, std::move(out), track);
    if (track) {
        g_active_tape->record(r, [x, r, m, n]() {
            auto g = r.grad();
            auto od = r.data();
            auto gx = x.mutable_grad();
            for (std::size_t i = 0; i < m; ++i) {
                double dot = 0.0;
                for (std::size_t j = 0; j < n; ++j) dot += g[i * n + j] * od[i * n + j];
                for (std::size_t j = 0; j < n; ++j)
                    gx[i * n + j] += od[i * n + j] * (g[i * n + j] - dot);
            }
        });
    }
    return r;
}

Tensor col_mean(const Tensor& x) {
    if (x.shape().size() != 2) {
        throw ShapeError("col_mean: expects rank-2 input, got " + shape_str(x.shape()));
    }
    const std::size_t m = x.shape()[0], n = x.shape()[1];
    if (m == 0) throw ContractError("col_mean: empty input");
    std::vector<double> out(n, 0.0);
    auto xd = x.data();
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) out[j] += xd[i * n + j];
    for (std::size_t j = 0; j < n; ++j) out[j] /= static_cast<double>(m);
    bool track = grad_needed(x);
    Tensor r = make_out({n}, std::move(out), track);
    if (track) {
        g_active_tape->record(r, [x, r, m, n]() {
            auto g = r.grad();
            auto gx = x.mutable_grad();
            const double inv = 1.0 / static_cast<double>(m);
            for (std::size_t i = 0; i < m; ++i)
                for (std::size_t j = 0; j < n; ++j) gx[i * n + j] += g[j] * inv;
        });
    }
    return r;
}

Tensor sum(const Tensor& a) {
    double acc = 0.0;
    for (double x : a.data()) acc += x;
    bool track = grad_needed(a);
    Tensor r = make_out({1}, {acc}, track);
    if (track) {
        g_active_tape->record(r, [a, r]() {
            const double g = r.grad()[0];
            auto ga = a.mutable_grad();
            for (double& v : ga) v += g;
        });
    }
    return r;
}

Tensor mean(const Tensor& a) {
    return scale(sum(a), 1.0 / static_cast<double>(a.size()));
}

Tensor entropy_bits(const Tensor& p) {
    double h = 0.0;
    for (double x : p.data()) {
        if (x > 0.0) h -= x * std::log2(x);
    }
    bool track = grad_needed(p);
    Tensor r = make_out({1}, {h}, track);
    if (track) {
        g_active_tape->record(r, [p, r]() {
            const double g = r.grad()[0];
            auto pd = p.data();
            auto gp = p.mutable_grad();
            for (std::size_t i = 0; i < pd.size(); ++i) {
                if (pd[i] > 0.0) gp[i] += g * (-(std::log2(pd[i]) + kInvLn2));
            }
        });
    }
    return r;
}

Tensor softmax_cross_entropy(const Tensor& logits, std::span<const int> labels) {
    if (logits.shape().size() != 2) {
        throw ShapeError("softmax_cross_entropy: logits must be rank-2, got " + shape_str(logits.shape()));
    }
    const std::size_t batch = logits.shape()[0], classes = logits.shape()[1];
    if (batch == 0) throw ContractError("softmax_cross_entropy: empty batch");
    if (labels.size() != batch) {
        throw ShapeError("softmax_cross_entropy: " + std::to_string(labels.size()) + " labels for batch " +
                         std::to_string(batch));
    }
    for (int y : labels) {
        if (y < 0 || static_cast<std::size_t>(y) >= classes) {
            throw IndexError("softmax_cross_entropy: label " + std::to_string(y) + " outside [0," +
                             std::to_string(classes) + ")");
        }
    }
    auto xd = logits.data();
    std::vector<double> probs(batch * classes);
    double loss_bits = 0.0;
    for (std::size_t i = 0; i < batch; ++i) {
        double mx = xd[i * classes];
        for (std::size_t j = 1; j < classes; ++j) mx = std::max(mx, xd[i * classes + j]);
        double z = 0.0;
        for (std::size_t j = 0; j < classes; ++j) {
            probs[i * classes + j] = std::exp(xd[i * classes + j] - mx);
            z += probs[i * classes + j];
        }
        for (std::size_t j = 0; j < classes; ++j) probs[i * classes + j] /= z;
        const double logit_y = xd[i * classes + labels[i]];
        // -log2 p = (logsumexp - logit_y) / ln 2
        loss_bits += (std::log(z) + mx - logit_y) * kInvLn2;
    }
    loss_bits /= static_cast<double>(batch);
    bool track = grad_needed(logits);
    Tensor r = make_out({1}, {loss_bits}, track);
    if (track) {
        std::vector<int> labels_copy(labels.begin(), labels.end());
        g_active_tape->record(r, [logits, r, probs = std::move(probs),
                                  labels_copy = std::move(labels_copy), batch, classes]() {
            const double g = r.grad()[0];
            auto gx = logits.mutable_grad();
            const double c = g * kInvLn2 / static_cast<double>(batch);
            for (std::size_t i = 0; i < batch; ++i)
                for (std::size_t j = 0; j < classes; ++j) {
                    double ind = (static_cast<std::size_t>(labels_copy[i]) == j) ? 1.0 : 0.0;
                    gx[i * classes + j] += c * (probs[i * classes + j] - ind);
                }
        });
    }
    return r;
}

}  // namespace ecn
