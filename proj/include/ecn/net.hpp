#pragma once

#include <cstdint>
#include <memory>
#include <vector>

#include "ecn/layers.hpp"
#include "ecn/tensor.hpp"

namespace ecn {

// Widths including input and output, e.g. {784, 300, 100, 10}.
using Architecture = std::vector<std::size_t>;

struct DenseNet {
    Architecture arch;
    std::vector<Dense> layers;
};

struct StochasticNet {
    Architecture arch;
    std::vector<StochasticDense> layers;
};

struct QuantizedNet {
    Architecture arch;
    std::vector<QuantizedDense> layers;

    std::size_t weight_count() const {
        std::size_t n = 0;
        for (const auto& l : layers) n += l.weights.size();
        return n;
    }
    std::size_t bias_count() const {
        std::size_t n = 0;
        for (const auto& l : layers) n += l.bias.size();
        return n;
    }
};

// ReLU between layers, raw logits at the end.
Tensor dense_logits(const DenseNet& net, const Tensor& x);
Tensor stochastic_logits(const StochasticNet& net, const Tensor& x, std::uint64_t step);
Tensor stochastic_logits(const StochasticNet& net, const Tensor& x, std::uint64_t step,
                         const std::vector<Tensor>& layer_probs);
std::vector<double> quantized_logits(const QuantizedNet& net, std::span<const double> x,
                                     std::size_t batch);

// Deterministic dense view with weights = posterior means (nu_W).
DenseNet mean_net(const StochasticNet& net);

QuantizedNet quantize(const StochasticNet& net);

DenseNet init_dense_net(const Architecture& arch, std::uint64_t seed);

// Wraps a pretrained dense net into stochastic layers: per-layer codebooks
// spanning the pretrained weight range with the requested cardinalities, a
// uniform initial sigma of a quarter codebook gap, w/bias copied.
StochasticNet init_stochastic_net(const DenseNet& pretrained, const std::vector<std::size_t>& cardinalities,
                                  std::uint8_t codebook_bits, double sigma_init_scale,
                                  std::shared_ptr<NoiseSource> noise);

// All trainable leaves in a fixed order: per layer w, log_sigma, codebook, bias.
std::vector<Tensor> parameters(const StochasticNet& net);
std::vector<Tensor> parameters(const DenseNet& net);

}  // namespace ecn
