// mfbsde: command-line front end for the experiments.
//
// Exit codes: 0 pass, 1 a pass/fail criterion failed, 2 usage or config
// error, 3 numerical divergence.

#include <CLI11.hpp>

#include <mfbsde/acceptance.hpp>
#include <mfbsde/config.hpp>
#include <mfbsde/experiment.hpp>

#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace {

enum Exit { kPass = 0, kFail = 1, kUsage = 2, kDiverged = 3 };

struct Overrides {
    std::string config;
    std::string out;
    std::optional<std::uint64_t> seed;
    std::optional<std::size_t> paths, steps;
    std::optional<double> horizon;
};

void add_common(CLI::App* sub, Overrides& o) {
    sub->add_option("--config", o.config, "JSON experiment config");
    sub->add_option("--out", o.out, "CSV output file (default: stdout)");
    sub->add_option("--seed", o.seed, "master seed");
    sub->add_option("--paths", o.paths, "number of paths");
    sub->add_option("--steps", o.steps, "number of time steps");
    sub->add_option("--horizon", o.horizon, "time horizon");
}

std::vector<double> split_numbers(const std::string& s, const std::string& what) {
    std::vector<double> v;
    std::stringstream ss(s);
    std::string tok;
    while (std::getline(ss, tok, ',')) {
        try {
            std::size_t used = 0;
            v.push_back(std::stod(tok, &used));
            if (used != tok.size()) throw std::invalid_argument(tok);
        } catch (const std::exception&) {
            throw mfbsde::ConfigError("'" + what + "' expects comma-separated numbers, got '" + tok + "'", what);
        }
    }
    return v;
}

// Reads size,error pairs from a CSV with a header row.
void read_rate_csv(const std::string& path, mfbsde::ExperimentConfig& c) {
    std::ifstream in(path);
    if (!in) throw mfbsde::ConfigError("cannot read '" + path + "'");
    std::string line;
    std::getline(in, line);
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        const auto v = split_numbers(line, "rate input");
        if (v.size() < 2) throw mfbsde::ConfigError("rate input rows need size,error");
        c.sizes.push_back(v[0]);
        c.errors.push_back(v[1]);
    }
}

int emit(const mfbsde::ExperimentResult& r, const std::string& out) {
    if (out.empty()) {
        std::cout << r.csv;
    } else {
        std::ofstream f(out, std::ios::binary);
        if (!f) {
            std::cerr << "error: cannot write '" << out << "'\n";
            return kUsage;
        }
        f << r.csv;
    }
    for (const auto& l : r.summary) std::cerr << l << '\n';
    std::cerr << (r.passed ? "result=pass" : "result=fail") << '\n';
    return r.passed ? kPass : kFail;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Mean-field quadratic BSDE experiments"};
    app.require_subcommand(1);
    Overrides o;

    struct BoundsArgs {
        std::optional<double> K1, K2, K3, K, gamma, gamma0, alpha, beta, beta0, gamma_tilde;
    } ba;
    std::string rate_in, n_list, problem;
    std::optional<std::size_t> cases;
    std::optional<std::uint64_t> acc_seed;

    std::vector<CLI::App*> subs;
    for (const auto& kind : mfbsde::experiment_kinds()) {
        auto* s = app.add_subcommand(kind, "run the " + kind + " experiment");
        add_common(s, o);
        subs.push_back(s);
        if (kind == "rate-fit") s->add_option("--in", rate_in, "CSV with size,error columns");
        if (kind == "bounds") {
            s->add_option("--k1", ba.K1);
            s->add_option("--k2", ba.K2);
            s->add_option("--k3", ba.K3);
            s->add_option("--k", ba.K);
            s->add_option("--gamma", ba.gamma);
            s->add_option("--gamma0", ba.gamma0);
            s->add_option("--alpha", ba.alpha);
            s->add_option("--beta", ba.beta);
            s->add_option("--beta0", ba.beta0);
            s->add_option("--gamma-tilde", ba.gamma_tilde);
        }
        if (kind == "compare") s->add_option("--seeds", cases, "number of generated cases");
        if (kind == "particles") s->add_option("--n-list", n_list, "comma-separated ensemble sizes");
        if (kind == "pde" || kind == "fk-check") s->add_option("--problem", problem, "heat-cosine or quadratic-bump");
    }
    auto* acc = app.add_subcommand("acceptance", "run the acceptance criteria");
    acc->add_option("--seed", acc_seed, "master seed");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kUsage;
    }

    if (acc->parsed()) {
        bool ok = true;
        mfbsde::acceptance_suite(acc_seed.value_or(20240601), [&](const mfbsde::CriterionResult& r) {
            std::cout << mfbsde::format_criterion(r) << std::endl;
            ok = ok && r.passed;
        });
        return ok ? kPass : kFail;
    }

    try {
        CLI::App* sub = nullptr;
        for (auto* s : subs)
            if (s->parsed()) sub = s;
        const std::string kind = sub->get_name();
        mfbsde::ExperimentConfig c = o.config.empty() ? mfbsde::ExperimentConfig{} : mfbsde::load_config(o.config);
        if (!c.experiment.empty() && c.experiment != kind)
            throw mfbsde::ConfigError("config is for '" + c.experiment + "' but '" + kind + "' was requested",
                                      "experiment");
        c.experiment = kind;
        if (o.seed) c.seed = *o.seed;
        if (o.paths) c.paths = *o.paths;
        if (o.steps) c.steps = *o.steps;
        if (o.horizon) c.horizon = *o.horizon;
        if (!rate_in.empty()) read_rate_csv(rate_in, c);
        auto setp = [&](const std::optional<double>& v, double& dst) {
            if (v) {
                dst = *v;
                c.profile_given = true;
            }
        };
        setp(ba.K1, c.profile.K1);
        setp(ba.K2, c.profile.K2);
        setp(ba.K3, c.profile.K3);
        setp(ba.K, c.profile.K);
        setp(ba.gamma, c.profile.gamma);
        setp(ba.gamma0, c.profile.gamma0);
        setp(ba.alpha, c.profile.alpha);
        setp(ba.beta, c.profile.beta);
        setp(ba.beta0, c.profile.beta0);
        setp(ba.gamma_tilde, c.profile.gamma_tilde);
        if (cases) c.cases = *cases;
        if (!n_list.empty()) {
            c.n_list.clear();
            for (double v : split_numbers(n_list, "--n-list")) {
                if (!(v >= 2.0) || v != static_cast<double>(static_cast<std::size_t>(v)))
                    throw mfbsde::ConfigError("ensemble sizes must be integers of at least two", "--n-list");
                c.n_list.push_back(static_cast<std::size_t>(v));
            }
        }
        if (!problem.empty()) c.problem = problem;
        const std::string out = o.out.empty() ? c.output : o.out;
        return emit(mfbsde::run_experiment(c), out);
    } catch (const mfbsde::ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return kUsage;
    } catch (const mfbsde::InvalidArgument& e) {
        std::cerr << "invalid argument: " << e.what() << '\n';
        return kUsage;
    } catch (const mfbsde::CapacityError& e) {
        std::cerr << "capacity error: " << e.what() << '\n';
        return kUsage;
    } catch (const mfbsde::DivergenceError& e) {
        std::cerr << "diverged: " << e.what() << '\n';
        return kDiverged;
    } catch (const mfbsde::SingularSystemError& e) {
        std::cerr << "diverged: " << e.what() << '\n';
        return kDiverged;
    }
}
