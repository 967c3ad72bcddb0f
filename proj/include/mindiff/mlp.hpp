// Single-hidden-layer multi-head MLP over sparse features: forward pass,
// analytic backward pass, SGD update. No framework, doubles throughout.
#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "mindiff/errors.hpp"
#include "mindiff/features.hpp"
#include "mindiff/rng.hpp"

namespace mindiff {

// Parameters of sigmoid(W2 * relu(W1 x + b1) + b2). W1 is [hidden x dim],
// W2 is [num_heads x hidden], both row-major.
struct MlpParams {
    std::size_t dim = 0;
    std::size_t hidden = 0;
    std::size_t num_heads = 0;
    std::vector<double> w1;
    std::vector<double> b1;
    std::vector<double> w2;
    std::vector<double> b2;
};

struct Gradients {
    std::vector<double> w1;
    std::vector<double> b1;
    std::vector<double> w2;
    std::vector<double> b2;
};

struct ForwardCache {
    std::vector<double> hidden_pre;
    std::vector<double> hidden_act;
    std::vector<double> logits;
    std::vector<double> probs;
};

inline double sigmoid(double z) {
    if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
    const double e = std::exp(z);
    return e / (1.0 + e);
}

// Uniform init in [-1/sqrt(fan_in), +1/sqrt(fan_in)] per layer, weights and
// biases alike, drawn in a fixed order from the run's generator.
inline MlpParams init_mlp(std::size_t dim, std::size_t hidden, std::size_t num_heads, Rng& rng) {
    MlpParams p;
    p.dim = dim;
    p.hidden = hidden;
    p.num_heads = num_heads;
    const double lim1 = 1.0 / std::sqrt(static_cast<double>(dim));
    const double lim2 = 1.0 / std::sqrt(static_cast<double>(hidden));
    p.w1.resize(hidden * dim);
    p.b1.resize(hidden);
    p.w2.resize(num_heads * hidden);
    p.b2.resize(num_heads);
    for (auto& v : p.w1) v = rng.uniform(-lim1, lim1);
    for (auto& v : p.b1) v = rng.uniform(-lim1, lim1);
    for (auto& v : p.w2) v = rng.uniform(-lim2, lim2);
    for (auto& v : p.b2) v = rng.uniform(-lim2, lim2);
    return p;
}

inline Gradients zero_gradients(const MlpParams& p) {
    Gradients g;
    g.w1.assign(p.w1.size(), 0.0);
    g.b1.assign(p.b1.size(), 0.0);
    g.w2.assign(p.w2.size(), 0.0);
    g.b2.assign(p.b2.size(), 0.0);
    return g;
}

// In-place forward pass reusing the cache's buffers; the hot path of the
// training loop.
inline void forward_into(const MlpParams& p, const SparseFeatures& x, ForwardCache& c) {
    if (x.dim != p.dim)
        throw ConfigError("forward: feature dim " + std::to_string(x.dim) +
                          " does not match model dim " + std::to_string(p.dim));
    c.hidden_pre.assign(p.b1.begin(), p.b1.end());
    for (std::size_t h = 0; h < p.hidden; ++h) {
        const double* row = p.w1.data() + h * p.dim;
        double acc = c.hidden_pre[h];
        for (const auto& e : x.entries) acc += row[e.bucket] * e.count;
        c.hidden_pre[h] = acc;
    }
    c.hidden_act.resize(p.hidden);
    for (std::size_t h = 0; h < p.hidden; ++h)
        c.hidden_act[h] = c.hidden_pre[h] > 0.0 ? c.hidden_pre[h] : 0.0;

    c.logits.assign(p.b2.begin(), p.b2.end());
    for (std::size_t k = 0; k < p.num_heads; ++k) {
        const double* row = p.w2.data() + k * p.hidden;
        double acc = c.logits[k];
        for (std::size_t h = 0; h < p.hidden; ++h) acc += row[h] * c.hidden_act[h];
        c.logits[k] = acc;
    }
    c.probs.resize(p.num_heads);
    for (std::size_t k = 0; k < p.num_heads; ++k) c.probs[k] = sigmoid(c.logits[k]);
}

inline ForwardCache forward(const MlpParams& p, const SparseFeatures& x) {
    ForwardCache c;
    forward_into(p, x, c);
    return c;
}

// Accumulates d(loss)/d(params) into `acc` given d(loss)/d(probs) for one
// example. Chain rule through sigmoid, affine, ReLU (subgradient 0 at 0),
// affine. The sigmoid derivative uses probs clamped away from exact 0/1 so
// callers can form dL/dprobs with the same clamp without overflow.
inline void backward_into(const MlpParams& p, const SparseFeatures& x, const ForwardCache& c,
                          std::span<const double> dl_dprobs, Gradients& acc) {
    constexpr double kProbClamp = 1e-12;
    std::vector<double> dl_dlogits(p.num_heads);
    for (std::size_t k = 0; k < p.num_heads; ++k) {
        double pr = c.probs[k];
        if (pr < kProbClamp) pr = kProbClamp;
        if (pr > 1.0 - kProbClamp) pr = 1.0 - kProbClamp;
        dl_dlogits[k] = dl_dprobs[k] * pr * (1.0 - pr);
    }

    std::vector<double> dl_dhidden(p.hidden, 0.0);
    for (std::size_t k = 0; k < p.num_heads; ++k) {
        const double dk = dl_dlogits[k];
        if (dk == 0.0) continue;
        acc.b2[k] += dk;
        double* gw2 = acc.w2.data() + k * p.hidden;
        const double* w2 = p.w2.data() + k * p.hidden;
        for (std::size_t h = 0; h < p.hidden; ++h) {
            gw2[h] += dk * c.hidden_act[h];
            dl_dhidden[h] += dk * w2[h];
        }
    }
    for (std::size_t h = 0; h < p.hidden; ++h) {
        const double dh = c.hidden_pre[h] > 0.0 ? dl_dhidden[h] : 0.0;
        if (dh == 0.0) continue;
        acc.b1[h] += dh;
        double* gw1 = acc.w1.data() + h * p.dim;
        for (const auto& e : x.entries) gw1[e.bucket] += dh * e.count;
    }
}

inline Gradients backward(const MlpParams& p, const SparseFeatures& x, const ForwardCache& c,
                          std::span<const double> dl_dprobs) {
    Gradients g = zero_gradients(p);
    backward_into(p, x, c, dl_dprobs, g);
    return g;
}

// params <- params - lr * grads. Aborts with a diagnostic if any gradient
// entry is non-finite.
inline void sgd_step(MlpParams& p, const Gradients& g, double lr) {
    auto apply = [lr](std::vector<double>& w, const std::vector<double>& gw, const char* name) {
        for (std::size_t i = 0; i < w.size(); ++i) {
            if (!std::isfinite(gw[i]))
                throw TrainingError(std::string("sgd_step: non-finite gradient in ") + name +
                                    " at index " + std::to_string(i));
            w[i] -= lr * gw[i];
        }
    };
    apply(p.w1, g.w1, "w1");
    apply(p.b1, g.b1, "b1");
    apply(p.w2, g.w2, "w2");
    apply(p.b2, g.b2, "b2");
}

}  // namespace mindiff
