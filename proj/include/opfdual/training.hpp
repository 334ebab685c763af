#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "opfdual/completion.hpp"
#include "opfdual/dual.hpp"
#include "opfdual/grid.hpp"
#include "opfdual/mlp.hpp"
#include "opfdual/serialize.hpp"

namespace opfdual {

struct PerturbationConfig {
    double alpha_min = 0.8, alpha_max = 1.2;  // global demand factor
    double eta_min = 0.95, eta_max = 1.05;    // per-bus factor
};

struct InstanceSet {
    std::vector<TaggedInstance> instances;
    std::uint64_t seed = 0;
    PerturbationConfig cfg;

    std::vector<const TaggedInstance*> split(const std::string& name) const {
        std::vector<const TaggedInstance*> out;
        for (const TaggedInstance& t : instances)
            if (t.split == name) out.push_back(&t);
        return out;
    }
};

// Instance k scales the reference load by a global factor and independent
// per-bus factors, applied identically to p and q so power factors are kept.
// Split sizes: floor(5%) each for val and test, remainder to train; assignment
// is by index order (train block, then val, then test).
inline InstanceSet generate_instances(const Network& net, std::size_t n,
                                      std::uint64_t seed, PerturbationConfig cfg = {}) {
    if (n < 1) throw std::invalid_argument("need at least one instance");
    InstanceSet set;
    set.seed = seed;
    set.cfg = cfg;
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> alpha(cfg.alpha_min, cfg.alpha_max);
    std::uniform_real_distribution<double> eta(cfg.eta_min, cfg.eta_max);

    const std::size_t n_val = n / 20, n_test = n / 20;
    const std::size_t n_train = n - n_val - n_test;

    for (std::size_t k = 0; k < n; ++k) {
        TaggedInstance t;
        t.id = "inst_" + std::to_string(k);
        const double a = alpha(rng);
        t.load.p_d.resize(net.n_buses());
        t.load.q_d.resize(net.n_buses());
        for (std::size_t i = 0; i < net.n_buses(); ++i) {
            const double f = a * eta(rng);
            t.load.p_d[i] = f * net.ref_p[i];
            t.load.q_d[i] = f * net.ref_q[i];
        }
        t.split = k < n_train ? "train" : (k < n_train + n_val ? "val" : "test");
        set.instances.push_back(std::move(t));
    }
    return set;
}

struct TrainOptions {
    std::size_t epochs = 200;
    std::size_t batch = 64;
    double lr = 1e-3;
    std::size_t patience = 20;
    std::uint64_t seed = 0;     // shuffling
    double weight_decay = 0.0;  // off by default
};

struct EpochRecord {
    std::size_t epoch = 0;
    double train_loss = 0;  // mean of -objective over the train split
    double val_bound = 0;   // mean completed bound over the val split
};

struct TrainResult {
    MlpModel model;  // best-on-validation parameters
    std::vector<EpochRecord> history;
    double best_val_bound = 0;
};

inline double mean_bound(const Network& net, const MlpModel& model,
                         const std::vector<const TaggedInstance*>& insts) {
    double s = 0;
    for (const TaggedInstance* t : insts) {
        const Prediction pred = mlp_forward(model, t->load);
        s += complete_with_objective(net, t->load, pred).dual.objective;
    }
    return s / static_cast<double>(insts.size());
}

// Self-supervised loop: loss per instance is the negated completed dual
// objective, so minimizing the loss maximizes the produced lower bound.
inline TrainResult train(const Network& net, MlpModel model, const InstanceSet& set,
                         TrainOptions opts = {}) {
    const auto train_split = set.split("train");
    const auto val_split = set.split("val");
    if (train_split.empty() || val_split.empty())
        throw std::invalid_argument("train/val splits must be nonempty");

    TrainResult result;
    result.model = model;
    result.best_val_bound = mean_bound(net, model, val_split);

    std::mt19937_64 rng(opts.seed);
    std::vector<std::size_t> order(train_split.size());
    std::iota(order.begin(), order.end(), 0);

    std::size_t stale = 0;
    for (std::size_t epoch = 1; epoch <= opts.epochs; ++epoch) {
        std::shuffle(order.begin(), order.end(), rng);
        double epoch_loss = 0;
        for (std::size_t start = 0; start < order.size(); start += opts.batch) {
            const std::size_t stop = std::min(start + opts.batch, order.size());
            ParamGrads batch_grads;
            for (std::size_t k = start; k < stop; ++k) {
                const TaggedInstance& t = *train_split[order[k]];
                const Prediction pred = mlp_forward(model, t.load);
                CompletionResult cr = complete_with_objective(net, t.load, pred);
                epoch_loss += -cr.dual.objective;
                // Loss gradient: d(-J)/dpred = -backward().
                Prediction up = backward(net, t.load, cr.tape, cr.dual);
                for (auto* block : {&up.lam_p, &up.lam_q, &up.nu_p_fwd, &up.nu_q_fwd,
                                    &up.nu_p_rev, &up.nu_q_rev})
                    for (double& x : *block) x = -x;
                accumulate_grads(batch_grads, mlp_backprop(model, t.load, up),
                                 1.0 / static_cast<double>(stop - start));
            }
            if (opts.weight_decay > 0)
                for (std::size_t l = 0; l < model.n_layers(); ++l)
                    for (std::size_t k = 0; k < model.weights[l].size(); ++k)
                        batch_grads.d_weights[l][k] +=
                            opts.weight_decay * model.weights[l][k];
            adam_step(model, batch_grads, opts.lr);
        }
        epoch_loss /= static_cast<double>(order.size());
        if (!std::isfinite(epoch_loss))
            throw std::runtime_error("training diverged at epoch " +
                                     std::to_string(epoch) + ": non-finite loss");

        EpochRecord rec;
        rec.epoch = epoch;
        rec.train_loss = epoch_loss;
        rec.val_bound = mean_bound(net, model, val_split);
        result.history.push_back(rec);

        if (rec.val_bound > result.best_val_bound) {
            result.best_val_bound = rec.val_bound;
            result.model = model;
            stale = 0;
        } else if (++stale >= opts.patience) {
            break;
        }
    }
    return result;
}

struct EvalRow {
    std::string instance_id;
    double bound = 0;
    double wall_time_ms = 0;
    std::optional<double> gap;
    std::optional<double> gap_closed;
    bool feasible = false;
};

struct EvalResult {
    std::vector<EvalRow> rows;
    std::optional<double> geo_mean_gap, std_gap;
    std::optional<double> mean_gap_closed, std_gap_closed;
};

// Per-instance completed bounds on the test split; gap metrics where external
// reference values are supplied. Every reported bound is re-verified.
inline EvalResult evaluate(const Network& net, const MlpModel& model,
                           const std::vector<const TaggedInstance*>& insts,
                           const std::map<std::string, ReferenceValues>& refs = {},
                           VerifyTolerances tol = {}) {
    EvalResult result;
    std::vector<double> gaps, gaps_closed;
    for (const TaggedInstance* t : insts) {
        EvalRow row;
        row.instance_id = t->id;
        const auto t0 = std::chrono::steady_clock::now();
        const Prediction pred = mlp_forward(model, t->load);
        CompletionResult cr = complete_with_objective(net, t->load, pred);
        const auto t1 = std::chrono::steady_clock::now();
        row.wall_time_ms =
            std::chrono::duration<double, std::milli>(t1 - t0).count();
        row.bound = cr.dual.objective;
        row.feasible = verify_dual(net, t->load, cr.dual, tol).pass;

        auto it = refs.find(t->id);
        if (it != refs.end()) {
            const GapMetrics m = duality_gap_metrics(it->second.z_ac_star,
                                                     it->second.z_sdp_star, row.bound,
                                                     it->second.z_hat_soc);
            row.gap = m.gap;
            row.gap_closed = m.gap_closed;
            if (m.gap) gaps.push_back(std::max(*m.gap, 0.0));
            if (m.gap_closed) gaps_closed.push_back(*m.gap_closed);
        }
        result.rows.push_back(std::move(row));
    }
    if (!gaps.empty()) {
        result.geo_mean_gap = geometric_mean(gaps);
        result.std_gap = population_stddev(gaps);
    }
    if (!gaps_closed.empty()) {
        result.mean_gap_closed = arithmetic_mean(gaps_closed);
        result.std_gap_closed = population_stddev(gaps_closed);
    }
    return result;
}

inline std::string history_to_csv(const std::vector<EpochRecord>& history) {
    std::string out = "epoch,train_loss,val_bound\n";
    char buf[128];
    for (const EpochRecord& r : history) {
        std::snprintf(buf, sizeof buf, "%zu,%.17g,%.17g\n", r.epoch, r.train_loss,
                      r.val_bound);
        out += buf;
    }
    return out;
}

inline std::string eval_to_csv(const EvalResult& result, bool with_refs) {
    std::string out;
    char buf[256];
    if (with_refs) {
        out = "instance_id,bound,gap_pct,wall_time_ms\n";
        for (const EvalRow& r : result.rows) {
            std::snprintf(buf, sizeof buf, "%s,%.17g,%s,%.3f\n", r.instance_id.c_str(),
                          r.bound,
                          r.gap ? std::to_string(*r.gap * 100.0).c_str() : "",
                          r.wall_time_ms);
            out += buf;
        }
        if (result.geo_mean_gap) {
            std::snprintf(buf, sizeof buf, "summary,,%.17g,\n",
                          *result.geo_mean_gap * 100.0);
            out += buf;
        }
    } else {
        out = "instance_id,bound,wall_time_ms\n";
        for (const EvalRow& r : result.rows) {
            std::snprintf(buf, sizeof buf, "%s,%.17g,%.3f\n", r.instance_id.c_str(),
                          r.bound, r.wall_time_ms);
            out += buf;
        }
    }
    return out;
}

}  // namespace opfdual
