#pragma once

#include <cstdint>
#include <memory>
#include <utility>
#include <vector>

#include "ecn/tensor.hpp"

namespace ecn {

// Floor below which kernel scales are clamped during probability evaluation.
inline constexpr double kSigmaFloor = 1e-12;

// Per-layer ordered set of representable weight values plus the bit width
// each value is charged/stored at. Values are snapped to that width on
// construction so container round-trips are bit-exact.
class Codebook {
  public:
    Codebook() = default;
    // values must end up strictly ascending, finite and distinct after the
    // precision snap; bits must be one of 16/32/64.
    Codebook(std::vector<double> values, std::uint8_t bits);

    const std::vector<double>& values() const { return values_; }
    std::size_t cardinality() const { return values_.size(); }
    std::uint8_t bit_precision() const { return bits_; }

    // Smallest gap between adjacent values (1.0 for a singleton book).
    double min_gap() const;

    static double snap_value(double v, std::uint8_t bits);

  private:
    std::vector<double> values_;
    std::uint8_t bits_ = 64;
};

// Evenly spaced K values spanning [-max|w|, +max|w|] of the given weights,
// with 0 substituted for the nearest value when absent.
std::vector<double> initial_codebook_values(std::span<const double> weights, std::size_t k);

// Continuous per-weight posterior over a shared learnable codebook. w and
// log_sigma are leaf parameters shaped like the layer's weight tensor;
// codebook_values is the layer's learnable omega vector (ascending at init,
// free to move during training).
struct WeightPosterior {
    Tensor w;
    Tensor log_sigma;
    Tensor codebook_values;
    std::uint8_t codebook_bits = 32;
    // Count of sigma evaluations clamped at the floor; read through run
    // diagnostics, never thrown.
    std::shared_ptr<std::uint64_t> sigma_clamp_events = std::make_shared<std::uint64_t>(0);

    std::size_t weight_count() const { return w.size(); }
    std::size_t cardinality() const { return codebook_values.size(); }
};

WeightPosterior make_posterior(Tensor w, Tensor log_sigma, Tensor codebook_values,
                               std::uint8_t codebook_bits = 32);

// Uniform per-layer initial scale: a quarter of the smallest codebook gap.
double initial_sigma(const std::vector<double>& codebook_values);

// Normalized Gaussian-kernel probabilities P[i,k] that weight i takes
// codebook value k. Rows sum to 1; differentiable w.r.t. w, log_sigma and
// the codebook. Scales below kSigmaFloor are clamped and counted.
Tensor kernel_probs(const WeightPosterior& post);

// Per-weight mean and variance of the induced discrete distribution.
// variance = E[omega^2] - E[omega]^2 with tiny rounding negatives clamped.
std::pair<Tensor, Tensor> moments(const WeightPosterior& post);
std::pair<Tensor, Tensor> moments(const Tensor& probs, const Tensor& codebook_values);

// Column means of the probability rows (Eq. "P_k = mean_i P_ik").
struct AggregatePmd {
    Tensor probs;  // [K], nonnegative, sums to 1
};

AggregatePmd aggregate_pmd(const Tensor& probs);

// Shannon entropy in bits. The tensor overload is the differentiable path.
double entropy(const AggregatePmd& pmd);
double entropy(std::span<const double> probs);

// Most probable codebook value per weight. Under the Gaussian kernel this is
// the nearest codebook value to w (sigma cancels in the argmax); ties go to
// the smaller index. Order-agnostic over the codebook.
std::vector<double> map_quantize(const WeightPosterior& post);
std::vector<double> map_quantize(std::span<const double> w, std::span<const double> codebook_values);
std::vector<std::size_t> map_quantize_indices(std::span<const double> w,
                                              std::span<const double> codebook_values);

// Two algebraic routes to the same cross-entropy: lhs = n * H(aggregate),
// rhs = sum_i sum_k P_ik * (-log2 P_k). Agreement is a correctness contract.
std::pair<double, double> cross_entropy_identity_check(const WeightPosterior& post);

// Diagnostic only: sum over weights of per-row entropies H(P_i).
double per_element_entropy_sum(const Tensor& probs);

}  // namespace ecn
