// Command-line front end: parse grid cases, generate load instances, train
// the dual predictor, produce verified lower bounds, check dual solutions,
// run the tiny-system brute-force optimizer, and evaluate models.
//
// Output contract: machine-readable JSON/CSV on stdout, human logs on stderr.
// Exit codes: 0 ok, 1 verification failure, 2 I/O, 3 validation, 4 numerical.

#include <chrono>
#include <iostream>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "opfdual/completion.hpp"
#include "opfdual/dual.hpp"
#include "opfdual/grid.hpp"
#include "opfdual/hermitian.hpp"
#include "opfdual/matpower.hpp"
#include "opfdual/mlp.hpp"
#include "opfdual/oracle.hpp"
#include "opfdual/serialize.hpp"
#include "opfdual/training.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitVerification = 1;
constexpr int kExitIo = 2;
constexpr int kExitValidation = 3;
constexpr int kExitNumerical = 4;

opfdual::Network load_network(const std::string& path) {
    return opfdual::parse_network(opfdual::read_file(path));
}

std::vector<opfdual::TaggedInstance> load_instances(const std::string& path) {
    auto insts = opfdual::instances_from_jsonl(opfdual::read_file(path));
    if (insts.empty()) throw opfdual::IoError("no instances in " + path);
    return insts;
}

int cmd_parse(const std::string& case_path) {
    const opfdual::RawCase rc = opfdual::parse_case(opfdual::read_file(case_path));
    const opfdual::Network net = opfdual::lower_case(rc);
    const auto violations = opfdual::validate_network(net);
    opfdual::json j;
    j["base_mva"] = net.base_mva;
    j["n_buses"] = net.n_buses();
    j["n_branches"] = net.n_branches();
    std::size_t physical = 0;
    for (const opfdual::Generator& g : net.generators)
        if (g.p_max > 0 || g.q_max > 0 || g.q_min < 0) ++physical;
    j["n_generators"] = physical;
    j["valid"] = violations.empty();
    j["violations"] = violations;
    std::cout << j.dump(2) << "\n";
    return violations.empty() ? kExitOk : kExitValidation;
}

int cmd_datagen(const std::string& case_path, std::size_t n, std::uint64_t seed,
                const std::string& out_path) {
    const opfdual::Network net = load_network(case_path);
    const opfdual::InstanceSet set = opfdual::generate_instances(net, n, seed);
    opfdual::write_file(out_path, opfdual::instances_to_jsonl(set.instances));
    std::cerr << "wrote " << set.instances.size() << " instances ("
              << set.split("train").size() << " train, " << set.split("val").size()
              << " val, " << set.split("test").size() << " test) to " << out_path
              << "\n";
    return kExitOk;
}

int cmd_train(const std::string& case_path, const std::string& data_path,
              const std::string& out_path, const opfdual::TrainOptions& opts,
              std::uint64_t model_seed) {
    const opfdual::Network net = load_network(case_path);
    opfdual::InstanceSet set;
    set.instances = load_instances(data_path);

    opfdual::MlpModel model = opfdual::make_default_mlp(net, model_seed);
    std::vector<opfdual::LoadInstance> train_loads;
    for (const opfdual::TaggedInstance* t : set.split("train"))
        train_loads.push_back(t->load);
    opfdual::fit_normalization(model, train_loads);

    const opfdual::TrainResult result = opfdual::train(net, model, set, opts);
    opfdual::write_file(out_path, opfdual::save_model(result.model));
    std::cerr << "trained " << result.history.size() << " epochs, best val bound "
              << result.best_val_bound << ", model written to " << out_path << "\n";
    std::cout << opfdual::history_to_csv(result.history);
    return kExitOk;
}

int cmd_bound(const std::string& case_path, const std::string& model_path,
              const std::string& data_path, opfdual::VerifyTolerances tol) {
    const opfdual::Network net = load_network(case_path);
    const opfdual::MlpModel model = opfdual::load_model(opfdual::read_file(model_path));
    const auto insts = load_instances(data_path);

    opfdual::json out = opfdual::json::array();
    bool all_pass = true;
    for (const opfdual::TaggedInstance& t : insts) {
        const auto t0 = std::chrono::steady_clock::now();
        const opfdual::Prediction pred = opfdual::mlp_forward(model, t.load);
        const opfdual::CompletionResult cr =
            opfdual::complete_with_objective(net, t.load, pred);
        const opfdual::FeasibilityReport rep =
            opfdual::verify_dual(net, t.load, cr.dual, tol);
        const auto t1 = std::chrono::steady_clock::now();

        opfdual::json row;
        row["instance_id"] = t.id;
        row["feasibility_report"] = opfdual::report_to_json(rep);
        row["wall_time_ms"] =
            std::chrono::duration<double, std::milli>(t1 - t0).count();
        // hard guard: a bound is only ever emitted alongside a passing report
        if (rep.pass) {
            row["bound"] = cr.dual.objective;
        } else {
            all_pass = false;
            std::cerr << "instance " << t.id
                      << ": completed dual failed verification (family "
                      << rep.worst_family << ")\n";
        }
        out.push_back(std::move(row));
    }
    std::cout << out.dump(2) << "\n";
    return all_pass ? kExitOk : kExitVerification;
}

int cmd_verify(const std::string& case_path, const std::string& dual_path,
               opfdual::VerifyTolerances tol) {
    const opfdual::Network net = load_network(case_path);
    opfdual::json j;
    try {
        j = opfdual::json::parse(opfdual::read_file(dual_path));
    } catch (const opfdual::json::exception& ex) {
        throw opfdual::IoError(std::string("malformed dual solution file: ") + ex.what());
    }
    const opfdual::DualSolution d = opfdual::dual_from_json(j);
    const opfdual::LoadInstance inst{net.ref_p, net.ref_q};
    const opfdual::FeasibilityReport rep = opfdual::verify_dual(net, inst, d, tol);
    std::cout << opfdual::report_to_json(rep).dump(2) << "\n";
    return rep.pass ? kExitOk : kExitVerification;
}

int cmd_oracle(const std::string& case_path, const std::string& data_path,
               std::size_t grid_steps) {
    const opfdual::Network net = load_network(case_path);
    std::vector<opfdual::TaggedInstance> insts;
    if (data_path.empty()) {
        insts.push_back({"reference", {net.ref_p, net.ref_q}, "test"});
    } else {
        insts = load_instances(data_path);
    }
    opfdual::GridConfig cfg;
    if (grid_steps > 0) {
        cfg.v_steps = grid_steps;
        cfg.theta_steps = grid_steps;
    }
    opfdual::json out = opfdual::json::array();
    for (const opfdual::TaggedInstance& t : insts) {
        const opfdual::OracleResult res = opfdual::brute_force_opf(net, t.load, cfg);
        opfdual::json row;
        row["instance_id"] = t.id;
        row["feasible"] = res.feasible;
        if (res.feasible) {
            row["best_cost"] = res.best_cost;
            row["tolerance"] = res.tolerance;
            row["v"] = res.best_point.v;
            row["theta"] = res.best_point.theta;
            row["p_g"] = res.best_point.p_g;
            row["q_g"] = res.best_point.q_g;
        }
        out.push_back(std::move(row));
    }
    std::cout << out.dump(2) << "\n";
    return kExitOk;
}

int cmd_eval(const std::string& case_path, const std::string& model_path,
             const std::string& data_path, const std::string& refs_path,
             const std::string& out_path, opfdual::VerifyTolerances tol) {
    const opfdual::Network net = load_network(case_path);
    const opfdual::MlpModel model = opfdual::load_model(opfdual::read_file(model_path));
    opfdual::InstanceSet set;
    set.instances = load_instances(data_path);
    auto split = set.split("test");
    if (split.empty())
        for (const opfdual::TaggedInstance& t : set.instances) split.push_back(&t);

    std::map<std::string, opfdual::ReferenceValues> refs;
    if (!refs_path.empty()) refs = opfdual::refs_from_csv(opfdual::read_file(refs_path));

    const opfdual::EvalResult result = opfdual::evaluate(net, model, split, refs, tol);
    bool all_pass = true;
    for (const opfdual::EvalRow& row : result.rows)
        if (!row.feasible) {
            all_pass = false;
            std::cerr << "instance " << row.instance_id
                      << ": bound failed verification\n";
        }
    const std::string csv = opfdual::eval_to_csv(result, !refs.empty());
    if (!out_path.empty()) {
        opfdual::write_file(out_path, csv);
        std::cerr << "wrote metrics CSV to " << out_path << "\n";
    } else {
        std::cout << csv;
    }
    return all_pass ? kExitOk : kExitVerification;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Dual lower-bound toolkit for AC optimal power flow"};
    app.require_subcommand(1);

    std::string case_path, data_path, model_path, refs_path, out_path, dual_path;
    std::size_t n_instances = 100, epochs = 200, batch = 64, grid_steps = 0;
    std::uint64_t seed = 0;
    double lr = 1e-3;
    opfdual::VerifyTolerances tol;

    auto add_case = [&](CLI::App* sub) {
        sub->add_option("--case", case_path, "MATPOWER-style case file")->required();
    };
    auto add_tols = [&](CLI::App* sub) {
        sub->add_option("--tol-eq", tol.eq, "equality residual tolerance");
        sub->add_option("--tol-cone", tol.cone, "cone violation tolerance");
        sub->add_option("--tol-psd", tol.psd, "PSD eigenvalue tolerance");
    };

    CLI::App* parse = app.add_subcommand("parse", "parse and validate a case file");
    add_case(parse);

    CLI::App* datagen = app.add_subcommand("datagen", "generate load instances");
    add_case(datagen);
    datagen->add_option("--n", n_instances, "number of instances");
    datagen->add_option("--seed", seed, "RNG seed");
    datagen->add_option("--out", out_path, "output JSONL path")->required();

    CLI::App* train = app.add_subcommand("train", "train the dual predictor");
    add_case(train);
    train->add_option("--data", data_path, "instance JSONL path")->required();
    train->add_option("--out", out_path, "output model JSON path")->required();
    train->add_option("--epochs", epochs, "max epochs");
    train->add_option("--batch", batch, "minibatch size");
    train->add_option("--lr", lr, "learning rate");
    train->add_option("--seed", seed, "model init / shuffling seed");

    CLI::App* bound = app.add_subcommand("bound", "verified lower bounds from a model");
    add_case(bound);
    bound->add_option("--model", model_path, "model JSON path")->required();
    bound->add_option("--data", data_path, "instance JSONL path")->required();
    add_tols(bound);

    CLI::App* verify = app.add_subcommand("verify", "check a dual solution JSON file");
    add_case(verify);
    verify->add_option("dual_json", dual_path, "dual solution JSON path")->required();
    add_tols(verify);

    CLI::App* oracle = app.add_subcommand("oracle", "brute-force optimum (<= 3 buses)");
    add_case(oracle);
    oracle->add_option("--data", data_path, "instance JSONL path (default: reference load)");
    oracle->add_option("--grid-steps", grid_steps, "grid points per axis");

    CLI::App* eval = app.add_subcommand("eval", "evaluate a model on the test split");
    add_case(eval);
    eval->add_option("--model", model_path, "model JSON path")->required();
    eval->add_option("--data", data_path, "instance JSONL path")->required();
    eval->add_option("--refs", refs_path, "reference values CSV");
    eval->add_option("--out", out_path, "output CSV path (default: stdout)");
    add_tols(eval);

    CLI11_PARSE(app, argc, argv);

    try {
        if (parse->parsed()) return cmd_parse(case_path);
        if (datagen->parsed()) return cmd_datagen(case_path, n_instances, seed, out_path);
        if (train->parsed()) {
            opfdual::TrainOptions opts;
            opts.epochs = epochs;
            opts.batch = batch;
            opts.lr = lr;
            opts.seed = seed;
            return cmd_train(case_path, data_path, out_path, opts, seed);
        }
        if (bound->parsed()) return cmd_bound(case_path, model_path, data_path, tol);
        if (verify->parsed()) return cmd_verify(case_path, dual_path, tol);
        if (oracle->parsed()) return cmd_oracle(case_path, data_path, grid_steps);
        if (eval->parsed())
            return cmd_eval(case_path, model_path, data_path, refs_path, out_path, tol);
    } catch (const opfdual::IoError& ex) {
        std::cerr << "I/O error: " << ex.what() << "\n";
        return kExitIo;
    } catch (const opfdual::ParseError& ex) {
        std::cerr << "validation error: " << ex.what() << "\n";
        return kExitValidation;
    } catch (const std::invalid_argument& ex) {
        std::cerr << "validation error: " << ex.what() << "\n";
        return kExitValidation;
    } catch (const opfdual::EigError& ex) {
        std::cerr << "numerical error: " << ex.what() << "\n";
        return kExitNumerical;
    } catch (const std::exception& ex) {
        std::cerr << "numerical error: " << ex.what() << "\n";
        return kExitNumerical;
    }
    return kExitOk;
}
