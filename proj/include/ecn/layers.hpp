#pragma once

#include <cstdint>
#include <memory>
#include <span>
#include <vector>

#include "ecn/rng.hpp"
#include "ecn/tensor.hpp"
#include "ecn/weight_dist.hpp"

namespace ecn {

// Stream of standard-normal draws keyed by (seed, step, layer). Identical
// keys must reproduce identical draws bit for bit.
class NoiseSource {
  public:
    virtual ~NoiseSource() = default;
    virtual void fill(std::span<double> out, std::uint64_t step, std::uint32_t layer) = 0;
};

class SeededNoise final : public NoiseSource {
  public:
    explicit SeededNoise(std::uint64_t seed, std::uint64_t salt = 0) : seed_(seed), salt_(salt) {}
    void fill(std::span<double> out, std::uint64_t step, std::uint32_t layer) override {
        Rng rng(mix_key(seed_, step, layer, salt_));
        rng.fill_normal(out);
    }

  private:
    std::uint64_t seed_;
    std::uint64_t salt_;
};

// For the zero-noise limit and fixed-epsilon gradient checks.
class ZeroNoise final : public NoiseSource {
  public:
    void fill(std::span<double> out, std::uint64_t, std::uint32_t) override {
        std::fill(out.begin(), out.end(), 0.0);
    }
};

// Fully-connected layer under a discrete weight posterior. The forward pass
// samples preactivations Z = nu_z + sigma_z * eps instead of weights.
struct StochasticDense {
    std::size_t in = 0;
    std::size_t out = 0;
    WeightPosterior posterior;  // w/log_sigma shaped [in x out]
    Tensor bias;                // [out], continuous, excluded from the entropy term
    std::uint32_t layer_index = 0;
    std::shared_ptr<NoiseSource> noise;

    std::size_t weight_count() const { return in * out; }
};

StochasticDense make_stochastic_dense(std::size_t in, std::size_t out, Tensor w, Tensor log_sigma,
                                      Tensor codebook_values, Tensor bias, std::uint32_t layer_index,
                                      std::shared_ptr<NoiseSource> noise, std::uint8_t codebook_bits = 32);

// nu_z = a.nu_W + bias, sigma_z = sqrt(a^2 . var_W), returns nu_z + sigma_z * eps
// with eps drawn fresh per call/batch item. Differentiable w.r.t. posterior
// parameters and bias via the pathwise (fixed-eps) route.
Tensor forward_stochastic(const StochasticDense& layer, const Tensor& a, std::uint64_t step);

// Same but with the probability matrix precomputed (shared with the entropy
// term so both loss pieces differentiate through one kernel evaluation).
Tensor forward_stochastic(const StochasticDense& layer, const Tensor& a, std::uint64_t step,
                          const Tensor& probs);

// Deterministic layer after MAP quantization. Every weight is a codebook
// value, bit-equal; biases are snapped to float32-representable doubles.
struct QuantizedDense {
    std::size_t in = 0;
    std::size_t out = 0;
    std::vector<double> weights;       // [in x out]
    std::vector<std::size_t> indices;  // codebook index per weight
    std::vector<double> bias;          // [out]
    Codebook codebook;
};

// Plain a.W* + bias; no sampling, no tape, fixed summation order.
std::vector<double> forward_quantized(const QuantizedDense& layer, std::span<const double> a,
                                      std::size_t batch);

// MAP quantization of a trained layer. The codebook is finalized first
// (sorted, precision-snapped, duplicates merged), then each weight maps to
// its nearest codebook value.
QuantizedDense quantize(const StochasticDense& layer);

// Deterministic dense layer used for pretraining and mean-continuous evaluation.
struct Dense {
    std::size_t in = 0;
    std::size_t out = 0;
    Tensor weights;  // [in x out]
    Tensor bias;     // [out]
};

Tensor forward_dense(const Dense& layer, const Tensor& a);

double snap_to_float32(double v);

}  // namespace ecn
