#include "ecn/net.hpp"

#include <cmath>

#include "ecn/error.hpp"
#include "ecn/rng.hpp"

namespace ecn {

Tensor dense_logits(const DenseNet& net, const Tensor& x) {
    Tensor a = x;
    for (std::size_t l = 0; l < net.layers.size(); ++l) {
        Tensor z = forward_dense(net.layers[l], a);
        a = (l + 1 < net.layers.size()) ? relu(z) : z;
    }
    return a;
}

Tensor stochastic_logits(const StochasticNet& net, const Tensor& x, std::uint64_t step,
                         const std::vector<Tensor>& layer_probs) {
    Tensor a = x;
    for (std::size_t l = 0; l < net.layers.size(); ++l) {
        Tensor z = forward_stochastic(net.layers[l], a, step, layer_probs[l]);
        a = (l + 1 < net.layers.size()) ? relu(z) : z;
    }
    return a;
}

Tensor stochastic_logits(const StochasticNet& net, const Tensor& x, std::uint64_t step) {
    std::vector<Tensor> probs;
    probs.reserve(net.layers.size());
    for (const auto& layer : net.layers) probs.push_back(kernel_probs(layer.posterior));
    return stochastic_logits(net, x, step, probs);
}

std::vector<double> quantized_logits(const QuantizedNet& net, std::span<const double> x,
                                     std::size_t batch) {
    std::vector<double> a(x.begin(), x.end());
    for (std::size_t l = 0; l < net.layers.size(); ++l) {
        std::vector<double> z = forward_quantized(net.layers[l], a, batch);
        if (l + 1 < net.layers.size()) {
            for (double& v : z) v = v > 0.0 ? v : 0.0;
        }
        a = std::move(z);
    }
    return a;
}

DenseNet mean_net(const StochasticNet& net) {
    DenseNet d;
    d.arch = net.arch;
    for (const auto& layer : net.layers) {
        auto [nu, var] = moments(layer.posterior);
        (void)var;
        Dense dl;
        dl.in = layer.in;
        dl.out = layer.out;
        dl.weights = reshape(nu, {layer.in, layer.out});
        dl.bias = layer.bias;
        d.layers.push_back(std::move(dl));
    }
    return d;
}

QuantizedNet quantize(const StochasticNet& net) {
    QuantizedNet q;
    q.arch = net.arch;
    for (const auto& layer : net.layers) q.layers.push_back(quantize(layer));
    return q;
}

DenseNet init_dense_net(const Architecture& arch, std::uint64_t seed) {
    if (arch.size() < 2) throw ContractError("architecture needs at least input and output widths");
    DenseNet net;
    net.arch = arch;
    for (std::size_t l = 0; l + 1 < arch.size(); ++l) {
        const std::size_t in = arch[l], out = arch[l + 1];
        Rng rng(mix_key(seed, 0xD0, l));
        std::vector<double> w(in * out);
        const double stddev = std::sqrt(2.0 / static_cast<double>(in));
        for (double& v : w) v = rng.normal(0.0, stddev);
        Dense layer;
        layer.in = in;
        layer.out = out;
        layer.weights = Tensor({in, out}, std::move(w), true);
        layer.bias = Tensor::zeros({out}, true);
        net.layers.push_back(std::move(layer));
    }
    return net;
}

StochasticNet init_stochastic_net(const DenseNet& pretrained, const std::vector<std::size_t>& cardinalities,
                                  std::uint8_t codebook_bits, double sigma_init_scale,
                                  std::shared_ptr<NoiseSource> noise) {
    if (cardinalities.size() != pretrained.layers.size()) {
        throw ContractError("cardinality list has " + std::to_string(cardinalities.size()) +
                            " entries for " + std::to_string(pretrained.layers.size()) + " weight layers");
    }
    StochasticNet net;
    net.arch = pretrained.arch;
    for (std::size_t l = 0; l < pretrained.layers.size(); ++l) {
        const Dense& src = pretrained.layers[l];
        std::vector<double> book = initial_codebook_values(src.weights.data(), cardinalities[l]);
        for (double& v : book) v = Codebook::snap_value(v, codebook_bits);
        double sigma0 = initial_sigma(book) * sigma_init_scale / 0.25;
        if (sigma0 < kSigmaFloor) sigma0 = kSigmaFloor;

        std::vector<double> w(src.weights.data().begin(), src.weights.data().end());
        std::vector<double> bias(src.bias.data().begin(), src.bias.data().end());
        Tensor wt({src.in, src.out}, std::move(w), true);
        Tensor ls = Tensor::full({src.in, src.out}, std::log(sigma0), true);
        Tensor cb = Tensor::row(std::move(book), true);
        Tensor bt({src.out}, std::move(bias), true);
        net.layers.push_back(make_stochastic_dense(src.in, src.out, std::move(wt), std::move(ls),
                                                   std::move(cb), std::move(bt),
                                                   static_cast<std::uint32_t>(l), noise, codebook_bits));
    }
    return net;
}

std::vector<Tensor> parameters(const StochasticNet& net) {
    std::vector<Tensor> params;
    for (const auto& layer : net.layers) {
        params.push_back(layer.posterior.w);
        params.push_back(layer.posterior.log_sigma);
        params.push_back(layer.posterior.codebook_values);
        params.push_back(layer.bias);
    }
    return params;
}

std::vector<Tensor> parameters(const DenseNet& net) {
    std::vector<Tensor> params;
    for (const auto& layer : net.layers) {
        params.push_back(layer.weights);
        params.push_back(layer.bias);
    }
    return params;
}

}  // namespace ecn
