#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "opfdual/completion.hpp"
#include "opfdual/dual.hpp"
#include "opfdual/grid.hpp"

namespace opfdual {

struct AdamState {
    std::vector<std::vector<double>> m_w, v_w;  // per layer, aligned to weights
    std::vector<std::vector<double>> m_b, v_b;
    std::int64_t step = 0;
};

// Dense feed-forward predictor: (p_d, q_d) -> raw dual prediction.
// Hidden layers use softplus; the output layer is linear and is split into
// the six prediction blocks.
struct MlpModel {
    std::size_t n_buses = 0, n_branches = 0;
    std::vector<std::size_t> layer_sizes;            // input, hidden..., output
    std::string activation = "softplus";
    std::vector<double> norm_mean, norm_scale;       // frozen input statistics
    std::vector<std::vector<double>> weights;        // [layer][out * in]
    std::vector<std::vector<double>> biases;         // [layer][out]
    AdamState adam;

    std::size_t n_layers() const { return weights.size(); }
};

struct ParamGrads {
    std::vector<std::vector<double>> d_weights;
    std::vector<std::vector<double>> d_biases;
};

inline MlpModel make_mlp(std::size_t n_buses, std::size_t n_branches,
                         const std::vector<std::size_t>& hidden, std::uint64_t seed) {
    MlpModel model;
    model.n_buses = n_buses;
    model.n_branches = n_branches;
    model.layer_sizes.push_back(2 * n_buses);
    for (std::size_t h : hidden) model.layer_sizes.push_back(h);
    model.layer_sizes.push_back(2 * n_buses + 4 * n_branches);
    model.norm_mean.assign(2 * n_buses, 0.0);
    model.norm_scale.assign(2 * n_buses, 1.0);

    std::mt19937_64 rng(seed);
    for (std::size_t l = 0; l + 1 < model.layer_sizes.size(); ++l) {
        const std::size_t fan_in = model.layer_sizes[l];
        const std::size_t fan_out = model.layer_sizes[l + 1];
        const double a = std::sqrt(1.0 / static_cast<double>(fan_in));
        std::uniform_real_distribution<double> dist(-a, a);
        std::vector<double> w(fan_out * fan_in);
        for (double& x : w) x = dist(rng);
        model.weights.push_back(std::move(w));
        model.biases.emplace_back(fan_out, 0.0);
    }
    model.adam.m_w.resize(model.n_layers());
    model.adam.v_w.resize(model.n_layers());
    model.adam.m_b.resize(model.n_layers());
    model.adam.v_b.resize(model.n_layers());
    for (std::size_t l = 0; l < model.n_layers(); ++l) {
        model.adam.m_w[l].assign(model.weights[l].size(), 0.0);
        model.adam.v_w[l].assign(model.weights[l].size(), 0.0);
        model.adam.m_b[l].assign(model.biases[l].size(), 0.0);
        model.adam.v_b[l].assign(model.biases[l].size(), 0.0);
    }
    return model;
}

// Default width per the sizing rule max(64, 4 * n_buses), two hidden layers.
inline MlpModel make_default_mlp(const Network& net, std::uint64_t seed) {
    const std::size_t h = std::max<std::size_t>(64, 4 * net.n_buses());
    return make_mlp(net.n_buses(), net.n_branches(), {h, h}, seed);
}

// Freeze input normalization statistics from a set of training instances.
inline void fit_normalization(MlpModel& model, const std::vector<LoadInstance>& insts) {
    if (insts.empty()) return;
    const std::size_t dim = 2 * model.n_buses;
    std::vector<double> mean(dim, 0.0), var(dim, 0.0);
    for (const LoadInstance& inst : insts)
        for (std::size_t i = 0; i < model.n_buses; ++i) {
            mean[i] += inst.p_d[i];
            mean[model.n_buses + i] += inst.q_d[i];
        }
    for (double& x : mean) x /= static_cast<double>(insts.size());
    for (const LoadInstance& inst : insts)
        for (std::size_t i = 0; i < model.n_buses; ++i) {
            const double dp = inst.p_d[i] - mean[i];
            const double dq = inst.q_d[i] - mean[model.n_buses + i];
            var[i] += dp * dp;
            var[model.n_buses + i] += dq * dq;
        }
    model.norm_mean = mean;
    for (std::size_t i = 0; i < dim; ++i) {
        const double sd = std::sqrt(var[i] / static_cast<double>(insts.size()));
        model.norm_scale[i] = sd > 1e-12 ? sd : 1.0;
    }
}

namespace detail {

inline double softplus(double x) {
    if (x > 30) return x;
    if (x < -30) return std::exp(x);
    return std::log1p(std::exp(x));
}
inline double sigmoid(double x) {
    return x >= 0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x));
}

struct ForwardTape {
    std::vector<std::vector<double>> activations;  // per layer incl. input
    std::vector<std::vector<double>> pre;          // pre-activation per layer
};

inline std::vector<double> mlp_eval(const MlpModel& model, const LoadInstance& inst,
                                    ForwardTape* tape) {
    const std::size_t n = model.n_buses;
    if (inst.p_d.size() != n || inst.q_d.size() != n)
        throw std::invalid_argument("instance dimension does not match model");
    std::vector<double> x(2 * n);
    for (std::size_t i = 0; i < n; ++i) {
        x[i] = (inst.p_d[i] - model.norm_mean[i]) / model.norm_scale[i];
        x[n + i] = (inst.q_d[i] - model.norm_mean[n + i]) / model.norm_scale[n + i];
    }
    if (tape) tape->activations.push_back(x);
    for (std::size_t l = 0; l < model.n_layers(); ++l) {
        const std::size_t in = model.layer_sizes[l], out = model.layer_sizes[l + 1];
        std::vector<double> z(out);
        for (std::size_t o = 0; o < out; ++o) {
            double s = model.biases[l][o];
            const double* row = model.weights[l].data() + o * in;
            for (std::size_t k = 0; k < in; ++k) s += row[k] * x[k];
            z[o] = s;
        }
        if (tape) tape->pre.push_back(z);
        const bool last = l + 1 == model.n_layers();
        if (!last)
            for (double& v : z) v = softplus(v);
        x = std::move(z);
        if (tape && !last) tape->activations.push_back(x);
    }
    return x;
}

}  // namespace detail

inline Prediction split_output(const MlpModel& model, const std::vector<double>& y) {
    const std::size_t n = model.n_buses, m = model.n_branches;
    Prediction p = Prediction::zeros(n, m);
    std::size_t k = 0;
    for (std::size_t i = 0; i < n; ++i) p.lam_p[i] = y[k++];
    for (std::size_t i = 0; i < n; ++i) p.lam_q[i] = y[k++];
    for (std::size_t e = 0; e < m; ++e) p.nu_p_fwd[e] = y[k++];
    for (std::size_t e = 0; e < m; ++e) p.nu_q_fwd[e] = y[k++];
    for (std::size_t e = 0; e < m; ++e) p.nu_p_rev[e] = y[k++];
    for (std::size_t e = 0; e < m; ++e) p.nu_q_rev[e] = y[k++];
    return p;
}

inline std::vector<double> flatten_prediction(const Prediction& p) {
    std::vector<double> y;
    y.reserve(p.size());
    for (const auto* block : {&p.lam_p, &p.lam_q, &p.nu_p_fwd, &p.nu_q_fwd,
                              &p.nu_p_rev, &p.nu_q_rev})
        y.insert(y.end(), block->begin(), block->end());
    return y;
}

inline Prediction mlp_forward(const MlpModel& model, const LoadInstance& inst) {
    return split_output(model, detail::mlp_eval(model, inst, nullptr));
}

// Reverse-mode gradients of the scalar loss with respect to every parameter,
// given the upstream gradient with respect to the prediction.
inline ParamGrads mlp_backprop(const MlpModel& model, const LoadInstance& inst,
                               const Prediction& upstream) {
    detail::ForwardTape tape;
    detail::mlp_eval(model, inst, &tape);

    ParamGrads grads;
    grads.d_weights.resize(model.n_layers());
    grads.d_biases.resize(model.n_layers());

    std::vector<double> delta = flatten_prediction(upstream);
    for (std::size_t li = model.n_layers(); li-- > 0;) {
        const std::size_t in = model.layer_sizes[li], out = model.layer_sizes[li + 1];
        const bool last = li + 1 == model.n_layers();
        if (!last)
            for (std::size_t o = 0; o < out; ++o)
                delta[o] *= detail::sigmoid(tape.pre[li][o]);

        const std::vector<double>& act = tape.activations[li];
        grads.d_weights[li].assign(out * in, 0.0);
        grads.d_biases[li].assign(out, 0.0);
        for (std::size_t o = 0; o < out; ++o) {
            grads.d_biases[li][o] = delta[o];
            double* row = grads.d_weights[li].data() + o * in;
            for (std::size_t k = 0; k < in; ++k) row[k] = delta[o] * act[k];
        }
        if (li > 0) {
            std::vector<double> prev(in, 0.0);
            for (std::size_t o = 0; o < out; ++o) {
                const double* row = model.weights[li].data() + o * in;
                for (std::size_t k = 0; k < in; ++k) prev[k] += delta[o] * row[k];
            }
            delta = std::move(prev);
        }
    }
    return grads;
}

inline void accumulate_grads(ParamGrads& into, const ParamGrads& from, double scale = 1.0) {
    if (into.d_weights.empty()) {
        into = from;
        for (auto& w : into.d_weights)
            for (double& x : w) x *= scale;
        for (auto& b : into.d_biases)
            for (double& x : b) x *= scale;
        return;
    }
    for (std::size_t l = 0; l < from.d_weights.size(); ++l) {
        for (std::size_t k = 0; k < from.d_weights[l].size(); ++k)
            into.d_weights[l][k] += scale * from.d_weights[l][k];
        for (std::size_t k = 0; k < from.d_biases[l].size(); ++k)
            into.d_biases[l][k] += scale * from.d_biases[l][k];
    }
}

inline void adam_step(MlpModel& model, const ParamGrads& grads, double lr,
                      double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8) {
    AdamState& st = model.adam;
    st.step += 1;
    const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(st.step));
    const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(st.step));
    auto update = [&](std::vector<double>& param, const std::vector<double>& g,
                      std::vector<double>& m, std::vector<double>& v) {
        for (std::size_t k = 0; k < param.size(); ++k) {
            m[k] = beta1 * m[k] + (1 - beta1) * g[k];
            v[k] = beta2 * v[k] + (1 - beta2) * g[k] * g[k];
            param[k] -= lr * (m[k] / bc1) / (std::sqrt(v[k] / bc2) + eps);
        }
    };
    for (std::size_t l = 0; l < model.n_layers(); ++l) {
        update(model.weights[l], grads.d_weights[l], st.m_w[l], st.v_w[l]);
        update(model.biases[l], grads.d_biases[l], st.m_b[l], st.v_b[l]);
    }
}

}  // namespace opfdual
