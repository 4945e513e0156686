#include "ecn/weight_dist.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <limits>

#include "ecn/error.hpp"

namespace ecn {

namespace {

// Round-trip through IEEE binary16. Only used for codebook storage widths.
double snap_to_half(double v) {
    const float f = static_cast<float>(v);
    std::uint32_t bits;
    std::memcpy(&bits, &f, 4);
    const std::uint32_t sign = (bits >> 16) & 0x8000u;
    const std::int32_t expo = static_cast<std::int32_t>((bits >> 23) & 0xFF) - 127 + 15;
    std::uint32_t mant = bits & 0x7FFFFFu;
    std::uint16_t h;
    if (expo >= 31) {
        h = static_cast<std::uint16_t>(sign | 0x7C00u);  // overflow -> inf
    } else if (expo <= 0) {
        if (expo < -10) {
            h = static_cast<std::uint16_t>(sign);  // underflow -> signed zero
        } else {
            mant |= 0x800000u;
            std::uint32_t shift = static_cast<std::uint32_t>(14 - expo);
            std::uint32_t rounded = (mant + (1u << (shift - 1))) >> shift;
            h = static_cast<std::uint16_t>(sign | rounded);
        }
    } else {
        std::uint32_t rounded = (mant + 0x1000u) >> 13;
        if (rounded & 0x400u) {  // mantissa carry bumps the exponent
            rounded = 0;
            ++*(&expo);
        }
        h = static_cast<std::uint16_t>(sign | (static_cast<std::uint32_t>(expo) << 10) | (rounded & 0x3FFu));
    }
    // decode
    const std::uint32_t hsign = (h >> 15) & 1u;
    const std::uint32_t hexp = (h >> 10) & 0x1Fu;
    const std::uint32_t hman = h & 0x3FFu;
    double out;
    if (hexp == 0) {
        out = std::ldexp(static_cast<double>(hman), -24);
    } else if (hexp == 31) {
        out = hman ? std::numeric_limits<double>::quiet_NaN() : std::numeric_limits<double>::infinity();
    } else {
        out = std::ldexp(static_cast<double>(hman | 0x400u), static_cast<int>(hexp) - 25);
    }
    return hsign ? -out : out;
}

}  // namespace

double Codebook::snap_value(double v, std::uint8_t bits) {
    switch (bits) {
        case 16: return snap_to_half(v);
        case 32: return static_cast<double>(static_cast<float>(v));
        case 64: return v;
        default:
            throw ContractError("codebook bit precision must be one of 16/32/64, got " +
                                std::to_string(bits));
    }
}

Codebook::Codebook(std::vector<double> values, std::uint8_t bits) : bits_(bits) {
    if (values.empty()) throw ContractError("codebook needs at least one value");
    for (double& v : values) v = snap_value(v, bits);
    for (double v : values) {
        if (!std::isfinite(v)) throw ContractError("codebook values must be finite");
    }
    for (std::size_t i = 1; i < values.size(); ++i) {
        if (!(values[i - 1] < values[i])) {
            throw ContractError("codebook values must be strictly ascending at precision " +
                                std::to_string(bits));
        }
    }
    values_ = std::move(values);
}

double Codebook::min_gap() const {
    if (values_.size() < 2) return 1.0;
    double g = std::numeric_limits<double>::infinity();
    for (std::size_t i = 1; i < values_.size(); ++i) g = std::min(g, values_[i] - values_[i - 1]);
    return g;
}

std::vector<double> initial_codebook_values(std::span<const double> weights, std::size_t k) {
    if (k == 0) throw ContractError("codebook cardinality must be >= 1");
    if (k == 1) return {0.0};
    double m = 0.0;
    for (double w : weights) m = std::max(m, std::abs(w));
    if (m < 1e-8) m = 1e-3;  // degenerate all-zero layer still gets a usable span
    std::vector<double> vals(k);
    for (std::size_t i = 0; i < k; ++i) {
        vals[i] = -m + 2.0 * m * static_cast<double>(i) / static_cast<double>(k - 1);
    }
    bool has_zero = false;
    for (double v : vals) has_zero |= (v == 0.0);
    if (!has_zero) {
        std::size_t nearest = 0;
        for (std::size_t i = 1; i < k; ++i) {
            if (std::abs(vals[i]) < std::abs(vals[nearest])) nearest = i;
        }
        vals[nearest] = 0.0;
    }
    return vals;
}

double initial_sigma(const std::vector<double>& codebook_values) {
    if (codebook_values.size() < 2) return 0.25;
    double g = std::numeric_limits<double>::infinity();
    std::vector<double> sorted(codebook_values);
    std::sort(sorted.begin(), sorted.end());
    for (std::size_t i = 1; i < sorted.size(); ++i) g = std::min(g, sorted[i] - sorted[i - 1]);
    return 0.25 * g;
}

WeightPosterior make_posterior(Tensor w, Tensor log_sigma, Tensor codebook_values,
                               std::uint8_t codebook_bits) {
    if (w.size() != log_sigma.size()) {
        throw ShapeError("posterior w " + shape_str(w.shape()) + " and log_sigma " +
                         shape_str(log_sigma.shape()) + " differ in element count");
    }
    if (codebook_values.shape().size() != 1 || codebook_values.size() == 0) {
        throw ContractError("posterior codebook must be a nonempty rank-1 tensor");
    }
    WeightPosterior p;
    p.w = std::move(w);
    p.log_sigma = std::move(log_sigma);
    p.codebook_values = std::move(codebook_values);
    p.codebook_bits = codebook_bits;
    return p;
}

Tensor kernel_probs(const WeightPosterior& post) {
    // The Gaussian prefactor 1/(sigma sqrt(2pi)) is shared within a row and
    // cancels in the normalization, so the rows reduce to a softmax over
    // -(w_i - omega_k)^2 / (2 sigma_i^2).
    const std::size_t n = post.w.size();
    const double log_floor = std::log(kSigmaFloor);
    std::uint64_t clamped = 0;
    for (double ls : post.log_sigma.data()) {
        if (ls < log_floor) ++clamped;
    }
    if (clamped && post.sigma_clamp_events) *post.sigma_clamp_events += clamped;

    Tensor w_flat = post.w.shape().size() == 1 ? post.w : reshape(post.w, {n});
    Tensor ls_flat = post.log_sigma.shape().size() == 1 ? post.log_sigma : reshape(post.log_sigma, {n});
    // max(log sigma, floor), written with relu so the clamp stays on the tape
    Tensor ls_eff = add_scalar(relu(add_scalar(ls_flat, -log_floor)), log_floor);
    Tensor inv_two_var = scale(exp(scale(ls_eff, -2.0)), 0.5);
    Tensor diff_sq = square(outer_diff(w_flat, post.codebook_values));
    Tensor logits = negate(row_scale(diff_sq, inv_two_var));
    return row_softmax(logits);
}

std::pair<Tensor, Tensor> moments(const Tensor& probs, const Tensor& codebook_values) {
    const std::size_t k = codebook_values.size();
    Tensor omega_col = reshape(codebook_values, {k, 1});
    Tensor omega_sq_col = reshape(square(codebook_values), {k, 1});
    const std::size_t n = probs.shape()[0];
    Tensor nu = reshape(matmul(probs, omega_col), {n});
    Tensor second = reshape(matmul(probs, omega_sq_col), {n});
    Tensor var = relu(sub(second, square(nu)));  // clamps tiny rounding negatives
    return {nu, var};
}

std::pair<Tensor, Tensor> moments(const WeightPosterior& post) {
    return moments(kernel_probs(post), post.codebook_values);
}

AggregatePmd aggregate_pmd(const Tensor& probs) {
    if (probs.shape().size() != 2 || probs.shape()[0] == 0) {
        throw ContractError("aggregate_pmd: probability matrix must be [n x K] with n >= 1");
    }
    return AggregatePmd{col_mean(probs)};
}

double entropy(std::span<const double> probs) {
    double h = 0.0;
    for (double p : probs) {
        if (p > 0.0) h -= p * std::log2(p);
    }
    return h;
}

double entropy(const AggregatePmd& pmd) { return entropy(pmd.probs.data()); }

std::vector<std::size_t> map_quantize_indices(std::span<const double> w,
                                              std::span<const double> codebook_values) {
    std::vector<std::size_t> idx(w.size());
    for (std::size_t i = 0; i < w.size(); ++i) {
        std::size_t best = 0;
        double best_d = std::abs(w[i] - codebook_values[0]);
        for (std::size_t k = 1; k < codebook_values.size(); ++k) {
            const double d = std::abs(w[i] - codebook_values[k]);
            if (d < best_d) {  // strict: ties keep the smaller index
                best_d = d;
                best = k;
            }
        }
        idx[i] = best;
    }
    return idx;
}

std::vector<double> map_quantize(std::span<const double> w, std::span<const double> codebook_values) {
    auto idx = map_quantize_indices(w, codebook_values);
    std::vector<double> out(w.size());
    for (std::size_t i = 0; i < w.size(); ++i) out[i] = codebook_values[idx[i]];
    return out;
}

std::vector<double> map_quantize(const WeightPosterior& post) {
    return map_quantize(post.w.data(), post.codebook_values.data());
}

std::pair<double, double> cross_entropy_identity_check(const WeightPosterior& post) {
    Tensor probs = kernel_probs(post);
    const std::size_t n = probs.shape()[0];
    const std::size_t k = probs.shape()[1];
    AggregatePmd agg = aggregate_pmd(probs);
    const double lhs = static_cast<double>(n) * entropy(agg);
    auto pd = probs.data();
    auto ad = agg.probs.data();
    double rhs = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < k; ++j) {
            if (pd[i * k + j] > 0.0 && ad[j] > 0.0) rhs -= pd[i * k + j] * std::log2(ad[j]);
        }
    }
    return {lhs, rhs};
}

double per_element_entropy_sum(const Tensor& probs) {
    const std::size_t n = probs.shape()[0];
    const std::size_t k = probs.shape()[1];
    auto pd = probs.data();
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) total += entropy(pd.subspan(i * k, k));
    return total;
}

}  // namespace ecn
