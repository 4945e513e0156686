#include "ecn/layers.hpp"

#include <algorithm>
#include <cmath>

#include "ecn/error.hpp"

namespace ecn {

double snap_to_float32(double v) { return static_cast<double>(static_cast<float>(v)); }

StochasticDense make_stochastic_dense(std::size_t in, std::size_t out, Tensor w, Tensor log_sigma,
                                      Tensor codebook_values, Tensor bias, std::uint32_t layer_index,
                                      std::shared_ptr<NoiseSource> noise, std::uint8_t codebook_bits) {
    if (w.shape() != Shape{in, out}) {
        throw ShapeError("stochastic dense weights " + shape_str(w.shape()) + " do not match [" +
                         std::to_string(in) + "x" + std::to_string(out) + "]");
    }
    if (bias.shape() != Shape{out}) {
        throw ShapeError("stochastic dense bias " + shape_str(bias.shape()) + " does not match [" +
                         std::to_string(out) + "]");
    }
    StochasticDense layer;
    layer.in = in;
    layer.out = out;
    layer.posterior = make_posterior(std::move(w), std::move(log_sigma), std::move(codebook_values),
                                     codebook_bits);
    layer.bias = std::move(bias);
    layer.layer_index = layer_index;
    layer.noise = std::move(noise);
    return layer;
}

Tensor forward_stochastic(const StochasticDense& layer, const Tensor& a, std::uint64_t step,
                          const Tensor& probs) {
    if (a.shape().size() != 2 || a.shape()[1] != layer.in) {
        throw ShapeError("forward_stochastic: activations " + shape_str(a.shape()) +
                         " do not match layer input width " + std::to_string(layer.in));
    }
    const std::size_t batch = a.shape()[0];
    auto [nu_w_flat, var_w_flat] = moments(probs, layer.posterior.codebook_values);
    Tensor nu_w = reshape(nu_w_flat, {layer.in, layer.out});
    Tensor var_w = reshape(var_w_flat, {layer.in, layer.out});

    Tensor nu_z = add_rowvec(matmul(a, nu_w), layer.bias);
    Tensor var_z = matmul(square(a), var_w);
    Tensor sigma_z = sqrt(var_z);

    std::vector<double> eps(batch * layer.out);
    layer.noise->fill(eps, step, layer.layer_index);
    Tensor eps_t({batch, layer.out}, std::move(eps));  // constant w.r.t. the tape
    return add(nu_z, mul(sigma_z, eps_t));
}

Tensor forward_stochastic(const StochasticDense& layer, const Tensor& a, std::uint64_t step) {
    return forward_stochastic(layer, a, step, kernel_probs(layer.posterior));
}

std::vector<double> forward_quantized(const QuantizedDense& layer, std::span<const double> a,
                                      std::size_t batch) {
    if (a.size() != batch * layer.in) {
        throw ShapeError("forward_quantized: " + std::to_string(a.size()) +
                         " activations do not form [" + std::to_string(batch) + "x" +
                         std::to_string(layer.in) + "]");
    }
    std::vector<double> z(batch * layer.out);
    matmul_raw(a, layer.weights, z, batch, layer.in, layer.out);
    for (std::size_t i = 0; i < batch; ++i)
        for (std::size_t j = 0; j < layer.out; ++j) z[i * layer.out + j] += layer.bias[j];
    return z;
}

QuantizedDense quantize(const StochasticDense& layer) {
    // Finalize the learned codebook: snap to the declared precision, sort,
    // merge values that collide after the snap.
    std::vector<double> vals(layer.posterior.codebook_values.data().begin(),
                             layer.posterior.codebook_values.data().end());
    for (double& v : vals) v = Codebook::snap_value(v, layer.posterior.codebook_bits);
    std::sort(vals.begin(), vals.end());
    vals.erase(std::unique(vals.begin(), vals.end()), vals.end());
    Codebook book(vals, layer.posterior.codebook_bits);

    QuantizedDense q;
    q.in = layer.in;
    q.out = layer.out;
    q.codebook = book;
    q.indices = map_quantize_indices(layer.posterior.w.data(), book.values());
    q.weights.resize(q.indices.size());
    for (std::size_t i = 0; i < q.indices.size(); ++i) q.weights[i] = book.values()[q.indices[i]];
    q.bias.resize(layer.out);
    for (std::size_t j = 0; j < layer.out; ++j) q.bias[j] = snap_to_float32(layer.bias[j]);
    return q;
}

Tensor forward_dense(const Dense& layer, const Tensor& a) {
    if (a.shape().size() != 2 || a.shape()[1] != layer.in) {
        throw ShapeError("forward_dense: activations " + shape_str(a.shape()) +
                         " do not match layer input width " + std::to_string(layer.in));
    }
    return add_rowvec(matmul(a, layer.weights), layer.bias);
}

}  // namespace ecn
