#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "ecn/net.hpp"
#include "ecn/tensor.hpp"

namespace ecn {

// Entropy-constrained loss: task bits plus alpha times the summed per-layer
// aggregate entropies, each weighted by the layer's weight count.
struct EcoLoss {
    Tensor total;            // scalar on the tape
    double task_bits = 0;    // Monte-Carlo estimate, mean bits per example
    double entropy_bits = 0; // sum_l n_l * H(P^l)
    double alpha = 0;        // coefficient applied to entropy_bits
    std::vector<double> layer_entropy_bits;  // H(P^l) per layer, in bits
};

EcoLoss eco_loss(const StochasticNet& net, const Tensor& x, std::span<const int> labels, double alpha,
                 std::uint64_t step);

// Discrete counterpart: deterministic cross-entropy of the quantized net plus
// alpha * sum_l n_l * H(mu^l) with mu the empirical PMD of each layer.
struct QuantizedLoss {
    double total = 0;
    double task_bits = 0;
    double entropy_bits = 0;
    std::vector<double> layer_entropy_bits;  // H(mu^l) per layer, in bits
};

QuantizedLoss quantized_loss(const QuantizedNet& net, std::span<const double> x,
                             std::span<const int> labels, std::size_t batch, double alpha);

struct Schedule {
    enum class Kind { LinearRamp, LinearDecay };
    Kind kind = Kind::LinearRamp;
    double start_value = 0;
    double end_value = 0;
    std::uint64_t total_steps = 1;
};

// Piecewise-linear interpolation, clamped beyond total_steps.
double schedule_value(const Schedule& s, std::uint64_t step);

}  // namespace ecn
