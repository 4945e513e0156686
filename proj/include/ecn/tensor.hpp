#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "ecn/error.hpp"

namespace ecn {

using Shape = std::vector<std::size_t>;

std::size_t numel(const Shape& shape);
std::string shape_str(const Shape& shape);

// Dense row-major f64 tensor. Values are immutable after creation as far as
// the graph is concerned; only grad accumulates. Copying a Tensor copies the
// handle, not the buffer.
class Tensor {
  public:
    Tensor() = default;
    Tensor(Shape shape, std::vector<double> data, bool requires_grad = false);

    static Tensor zeros(Shape shape, bool requires_grad = false);
    static Tensor full(Shape shape, double value, bool requires_grad = false);
    static Tensor scalar(double value, bool requires_grad = false);
    static Tensor row(std::vector<double> data, bool requires_grad = false);

    bool defined() const { return impl_ != nullptr; }
    const Shape& shape() const { return impl_->shape; }
    std::size_t size() const { return impl_->data.size(); }
    bool requires_grad() const { return impl_->requires_grad; }

    std::span<const double> data() const { return impl_->data; }
    std::span<double> mutable_data() { return impl_->data; }
    double operator[](std::size_t i) const { return impl_->data[i]; }
    double at(std::size_t r, std::size_t c) const;
    double item() const;

    // Gradient buffer; allocated lazily, accumulated by backward().
    std::span<const double> grad() const;
    std::span<double> mutable_grad() const;
    bool has_grad() const { return !impl_->grad.empty(); }
    void zero_grad();

    bool same_impl(const Tensor& other) const { return impl_ == other.impl_; }

  private:
    struct Impl {
        Shape shape;
        std::vector<double> data;
        bool requires_grad = false;
        mutable std::vector<double> grad;
    };
    std::shared_ptr<Impl> impl_;
};

// Append-only record of operations. Nodes are pushed in creation order, so
// iterating in reverse is a valid topological order for backpropagation.
class Tape {
  public:
    struct Node {
        Tensor out;
        std::function<void()> backprop;  // reads out.grad, accumulates into inputs
    };

    void record(Tensor out, std::function<void()> backprop);
    std::size_t size() const { return nodes_.size(); }
    void clear() { nodes_.clear(); }

    // Seeds d(root)/d(root)=1 and runs every recorded backward rule exactly
    // once in reverse order. Repeated calls without zero_grad accumulate.
    void backward(const Tensor& root);

  private:
    std::vector<Node> nodes_;
};

// Scoped activation of a tape. Ops record themselves onto the innermost
// active tape when any input requires grad; with no active tape they are
// plain evaluations.
class TapeScope {
  public:
    explicit TapeScope(Tape& tape);
    ~TapeScope();
    TapeScope(const TapeScope&) = delete;
    TapeScope& operator=(const TapeScope&) = delete;

  private:
    Tape* previous_;
};

Tape* active_tape();

// --- elementwise and matrix operations --------------------------------------

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor div(const Tensor& a, const Tensor& b);
Tensor exp(const Tensor& a);
Tensor log2(const Tensor& a);
Tensor sqrt(const Tensor& a);
Tensor square(const Tensor& a);
Tensor relu(const Tensor& a);
Tensor negate(const Tensor& a);
Tensor scale(const Tensor& a, double c);      // a * c
Tensor add_scalar(const Tensor& a, double c); // a + c

inline Tensor operator+(const Tensor& a, const Tensor& b) { return add(a, b); }
inline Tensor operator-(const Tensor& a, const Tensor& b) { return sub(a, b); }
inline Tensor operator*(const Tensor& a, const Tensor& b) { return mul(a, b); }
inline Tensor operator*(const Tensor& a, double c) { return scale(a, c); }
inline Tensor operator*(double c, const Tensor& a) { return scale(a, c); }

Tensor matmul(const Tensor& a, const Tensor& b);

// Structured helpers used to assemble the loss graph without silent
// broadcasting. Each has an exact backward rule.
Tensor reshape(const Tensor& a, Shape shape);
Tensor add_rowvec(const Tensor& x, const Tensor& v);   // x[m,n] + v[n] per row
Tensor outer_diff(const Tensor& w, const Tensor& v);   // D[i,k] = w[i] - v[k]
Tensor row_scale(const Tensor& x, const Tensor& s);    // X[i,k] * s[i]
Tensor row_softmax(const Tensor& x);                   // softmax along rows
Tensor col_mean(const Tensor& x);                      // [m,n] -> [n]
Tensor sum(const Tensor& a);
Tensor mean(const Tensor& a);

// Shannon entropy in bits of a probability vector, differentiable.
// Entries equal to zero contribute 0 (and receive zero gradient).
Tensor entropy_bits(const Tensor& p);

// Mean over the batch of -log2 softmax(logits)[label], max-stabilized.
Tensor softmax_cross_entropy(const Tensor& logits, std::span<const int> labels);

void backward(const Tensor& root);

// --- non-graph conveniences --------------------------------------------------

// Plain a[m,k] x b[k,n] on raw buffers, row-major accumulation over k.
void matmul_raw(std::span<const double> a, std::span<const double> b,
                std::span<double> out, std::size_t m, std::size_t k, std::size_t n);

}  // namespace ecn
