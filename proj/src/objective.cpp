#include "ecn/objective.hpp"

#include <cmath>

#include "ecn/codec.hpp"
#include "ecn/error.hpp"
#include "ecn/weight_dist.hpp"

namespace ecn {

EcoLoss eco_loss(const StochasticNet& net, const Tensor& x, std::span<const int> labels, double alpha,
                 std::uint64_t step) {
    if (alpha < 0) throw ContractError("eco_loss: alpha must be nonnegative");
    if (x.shape().size() != 2 || x.shape()[0] == 0) {
        throw ContractError("eco_loss: batch must be nonempty, got " + shape_str(x.shape()));
    }

    // One kernel evaluation per layer feeds both the sampled forward pass and
    // the entropy term.
    std::vector<Tensor> layer_probs;
    layer_probs.reserve(net.layers.size());
    for (const auto& layer : net.layers) layer_probs.push_back(kernel_probs(layer.posterior));

    Tensor logits = stochastic_logits(net, x, step, layer_probs);
    Tensor task = softmax_cross_entropy(logits, labels);

    EcoLoss result;
    Tensor entropy_term = Tensor::scalar(0.0);
    for (std::size_t l = 0; l < net.layers.size(); ++l) {
        Tensor h = entropy_bits(aggregate_pmd(layer_probs[l]).probs);
        result.layer_entropy_bits.push_back(h.item());
        entropy_term = add(entropy_term, scale(h, static_cast<double>(net.layers[l].weight_count())));
    }

    result.total = add(task, scale(entropy_term, alpha));
    result.task_bits = task.item();
    result.entropy_bits = entropy_term.item();
    result.alpha = alpha;
    return result;
}

QuantizedLoss quantized_loss(const QuantizedNet& net, std::span<const double> x,
                             std::span<const int> labels, std::size_t batch, double alpha) {
    if (alpha < 0) throw ContractError("quantized_loss: alpha must be nonnegative");
    if (batch == 0) throw ContractError("quantized_loss: batch must be nonempty");

    std::vector<double> logits = quantized_logits(net, x, batch);
    const std::size_t classes = net.arch.back();
    constexpr double inv_ln2 = 1.4426950408889634074;
    double task = 0.0;
    for (std::size_t i = 0; i < batch; ++i) {
        const double* row = &logits[i * classes];
        double mx = row[0];
        for (std::size_t j = 1; j < classes; ++j) mx = std::max(mx, row[j]);
        double z = 0.0;
        for (std::size_t j = 0; j < classes; ++j) z += std::exp(row[j] - mx);
        task += (std::log(z) + mx - row[labels[i]]) * inv_ln2;
    }
    task /= static_cast<double>(batch);

    QuantizedLoss result;
    result.task_bits = task;
    for (const auto& layer : net.layers) {
        EmpiricalPmd mu = empirical_pmd(layer.weights, layer.codebook);
        const double h = entropy(mu.probs);
        result.layer_entropy_bits.push_back(h);
        result.entropy_bits += h * static_cast<double>(layer.weights.size());
    }
    result.total = task + alpha * result.entropy_bits;
    return result;
}

double schedule_value(const Schedule& s, std::uint64_t step) {
    if (s.total_steps == 0) return s.end_value;
    if (step >= s.total_steps) return s.end_value;
    const double t = static_cast<double>(step) / static_cast<double>(s.total_steps);
    return s.start_value + (s.end_value - s.start_value) * t;
}

}  // namespace ecn
