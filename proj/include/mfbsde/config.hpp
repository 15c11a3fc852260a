#pragma once

#include <json.hpp>

#include <cmath>
#include <cstdint>
#include <fstream>
#include <limits>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "catalog.hpp"
#include "errors.hpp"
#include "pde.hpp"
#include "picard.hpp"
#include "regression.hpp"

namespace mfbsde {

struct NamedSpec {
    std::string name;
    Params params;
};

struct ExperimentConfig {
    std::string experiment;
    std::uint64_t seed = 1;
    double horizon = 1.0;
    std::size_t steps = 50;
    std::size_t paths = 4096;
    std::size_t dim = 1;
    NamedSpec driver{"zero", {}};
    NamedSpec terminal{"constant", {{"c", 0.0}}};
    GrowthProfile profile;
    bool profile_given = false;
    RegressionConfig regression;
    PicardConfig picard;
    std::vector<std::size_t> n_list{64, 128, 256, 512};
    double max_slope = -0.15;
    // forward
    std::string forward_drift = "zero";
    double drift_rate = 1.0;
    double sigma = 1.0;
    double x0 = 0.0;
    double moment_order = 2.0;
    // pde
    std::string problem = "heat-cosine";
    SpaceGrid space;
    std::size_t pde_steps = 1000;
    // compare
    std::size_t cases = 20;
    // rate-fit
    std::vector<double> sizes;
    std::vector<double> errors;
    // pass/fail
    std::optional<double> expect_y0;
    double tolerance = 5e-2;
    std::string output;
};

inline const std::vector<std::string>& experiment_kinds() {
    static const std::vector<std::string> k = {"brownian-check", "rate-fit", "forward", "solve",     "bounds",
                                               "picard",         "compare",  "particles", "pde", "fk-check"};
    return k;
}

namespace detail {

using json = nlohmann::json;

inline std::string where(const std::string& path, const std::string& key) {
    return path.empty() ? key : path + "." + key;
}

inline void only_keys(const json& obj, const std::set<std::string>& allowed, const std::string& path) {
    if (!obj.is_object()) throw ConfigError("'" + (path.empty() ? std::string("<root>") : path) + "' must be an object", path);
    for (auto it = obj.begin(); it != obj.end(); ++it)
        if (!allowed.count(it.key()))
            throw ConfigError("unknown key '" + where(path, it.key()) + "'", where(path, it.key()));
}

inline double num(const json& v, const std::string& key, double lo = -std::numeric_limits<double>::infinity(),
                  double hi = std::numeric_limits<double>::infinity()) {
    if (!v.is_number()) throw ConfigError("'" + key + "' must be a number", key);
    const double x = v.get<double>();
    if (!std::isfinite(x) || x < lo || x > hi) {
        std::ostringstream os;
        os << "'" << key << "' = " << x << " is outside [" << lo << ", " << hi << "]";
        throw ConfigError(os.str(), key);
    }
    return x;
}

inline std::size_t count(const json& v, const std::string& key, std::size_t lo, std::size_t hi) {
    if (!v.is_number_integer() && !v.is_number_unsigned())
        throw ConfigError("'" + key + "' must be an integer", key);
    const long long x = v.get<long long>();
    if (x < static_cast<long long>(lo) || x > static_cast<long long>(hi))
        throw ConfigError("'" + key + "' = " + std::to_string(x) + " is outside [" + std::to_string(lo) + ", " +
                              std::to_string(hi) + "]",
                          key);
    return static_cast<std::size_t>(x);
}

inline std::string str(const json& v, const std::string& key) {
    if (!v.is_string()) throw ConfigError("'" + key + "' must be a string", key);
    return v.get<std::string>();
}

inline NamedSpec named(const json& v, const std::string& key,
                       const std::map<std::string, std::vector<std::string>>& catalog) {
    if (!v.is_object() || !v.contains("name")) throw ConfigError("'" + key + "' needs a 'name'", key);
    NamedSpec s;
    s.name = str(v["name"], key + ".name");
    auto it = catalog.find(s.name);
    if (it == catalog.end()) throw ConfigError("unknown " + key + " '" + s.name + "'", key + ".name");
    std::set<std::string> allowed(it->second.begin(), it->second.end());
    allowed.insert("name");
    only_keys(v, allowed, key);
    for (auto p = v.begin(); p != v.end(); ++p)
        if (p.key() != "name") s.params[p.key()] = num(p.value(), where(key, p.key()));
    return s;
}

inline std::pair<std::size_t, std::size_t> line_col(const std::string& text, std::size_t byte) {
    std::size_t line = 1, col = 1;
    for (std::size_t i = 0; i + 1 < byte && i < text.size(); ++i) {
        if (text[i] == '\n') {
            ++line;
            col = 1;
        } else {
            ++col;
        }
    }
    return {line, col};
}

} // namespace detail

inline ExperimentConfig parse_config(const std::string& text) {
    using detail::json;
    json j;
    try {
        j = json::parse(text);
    } catch (const json::parse_error& e) {
        const auto [line, col] = detail::line_col(text, e.byte);
        throw ConfigError("malformed JSON at line " + std::to_string(line) + ", column " + std::to_string(col));
    }
    detail::only_keys(j,
                      {"experiment", "seed", "horizon", "steps", "paths", "dim", "driver", "terminal", "profile",
                       "regression", "picard", "particles", "forward", "pde", "compare", "rate", "expect", "output"},
                      "");
    ExperimentConfig c;
    using detail::count;
    using detail::num;
    using detail::str;
    if (j.contains("experiment")) {
        c.experiment = str(j["experiment"], "experiment");
        bool ok = false;
        for (const auto& k : experiment_kinds()) ok = ok || k == c.experiment;
        if (!ok) throw ConfigError("unknown experiment '" + c.experiment + "'", "experiment");
    }
    if (j.contains("seed")) c.seed = count(j["seed"], "seed", 0, std::numeric_limits<std::uint32_t>::max());
    if (j.contains("horizon")) c.horizon = num(j["horizon"], "horizon", 1e-6, 100.0);
    if (j.contains("steps")) c.steps = count(j["steps"], "steps", 1, 100000);
    if (j.contains("paths")) c.paths = count(j["paths"], "paths", 2, 1u << 22);
    if (j.contains("dim")) c.dim = count(j["dim"], "dim", 1, 64);
    if (j.contains("driver")) c.driver = detail::named(j["driver"], "driver", driver_catalog());
    if (j.contains("terminal")) c.terminal = detail::named(j["terminal"], "terminal", terminal_catalog());
    if (j.contains("profile")) {
        const auto& p = j["profile"];
        detail::only_keys(p, {"K1", "K2", "K3", "K", "gamma", "gamma0", "alpha", "beta", "beta0", "gamma_tilde"},
                          "profile");
        auto set = [&](const char* k, double& dst, double lo, double hi) {
            if (p.contains(k)) dst = num(p[k], std::string("profile.") + k, lo, hi);
        };
        const double tiny = 1e-12, big = 1e6;
        set("K1", c.profile.K1, tiny, big);
        set("K2", c.profile.K2, tiny, big);
        set("K3", c.profile.K3, tiny, big);
        set("K", c.profile.K, tiny, big);
        set("gamma", c.profile.gamma, tiny, big);
        set("gamma0", c.profile.gamma0, tiny, big);
        set("alpha", c.profile.alpha, 0.0, 1.0 - 1e-9);
        set("beta", c.profile.beta, tiny, big);
        set("beta0", c.profile.beta0, tiny, big);
        set("gamma_tilde", c.profile.gamma_tilde, tiny, big);
        c.profile_given = true;
    }
    if (j.contains("regression")) {
        const auto& r = j["regression"];
        detail::only_keys(r, {"basis", "degree", "cells", "ridge", "z_max"}, "regression");
        if (r.contains("basis")) {
            const std::string b = str(r["basis"], "regression.basis");
            if (b == "polynomial") c.regression.basis = BasisKind::polynomial;
            else if (b == "piecewise-linear") c.regression.basis = BasisKind::piecewise_linear;
            else throw ConfigError("unknown basis '" + b + "'", "regression.basis");
        }
        if (r.contains("degree")) c.regression.degree = static_cast<int>(count(r["degree"], "regression.degree", 0, 12));
        if (r.contains("cells")) c.regression.cells = static_cast<int>(count(r["cells"], "regression.cells", 1, 4096));
        if (r.contains("ridge")) c.regression.ridge = num(r["ridge"], "regression.ridge", 0.0, 1.0);
        if (r.contains("z_max")) c.regression.z_max = num(r["z_max"], "regression.z_max", 1e-9, 1e12);
    }
    if (j.contains("picard")) {
        const auto& p = j["picard"];
        detail::only_keys(p, {"tol", "max_iter", "relaxation"}, "picard");
        if (p.contains("tol")) c.picard.tol = num(p["tol"], "picard.tol", 1e-15, 1e3);
        if (p.contains("max_iter")) c.picard.max_iter = count(p["max_iter"], "picard.max_iter", 1, 1000);
        if (p.contains("relaxation")) c.picard.relaxation = num(p["relaxation"], "picard.relaxation", 1e-6, 1.0);
    }
    if (j.contains("particles")) {
        const auto& p = j["particles"];
        detail::only_keys(p, {"n_list", "max_slope"}, "particles");
        if (p.contains("n_list")) {
            if (!p["n_list"].is_array() || p["n_list"].size() < 2)
                throw ConfigError("'particles.n_list' must list at least two sizes", "particles.n_list");
            c.n_list.clear();
            for (const auto& v : p["n_list"]) c.n_list.push_back(count(v, "particles.n_list", 2, 1u << 16));
            for (std::size_t i = 1; i < c.n_list.size(); ++i)
                if (c.n_list[i] <= c.n_list[i - 1])
                    throw ConfigError("'particles.n_list' must increase", "particles.n_list");
        }
        if (p.contains("max_slope")) c.max_slope = num(p["max_slope"], "particles.max_slope");
    }
    if (j.contains("forward")) {
        const auto& f = j["forward"];
        detail::only_keys(f, {"drift", "rate", "sigma", "x0", "moment_order"}, "forward");
        if (f.contains("drift")) {
            c.forward_drift = str(f["drift"], "forward.drift");
            if (c.forward_drift != "zero" && c.forward_drift != "reference-mean" && c.forward_drift != "mean-reverting")
                throw ConfigError("unknown forward drift '" + c.forward_drift + "'", "forward.drift");
        }
        if (f.contains("rate")) c.drift_rate = num(f["rate"], "forward.rate", -100.0, 100.0);
        if (f.contains("sigma")) c.sigma = num(f["sigma"], "forward.sigma", 0.0, 100.0);
        if (f.contains("x0")) c.x0 = num(f["x0"], "forward.x0", -1e6, 1e6);
        if (f.contains("moment_order")) c.moment_order = num(f["moment_order"], "forward.moment_order", 1.0, 16.0);
    }
    if (j.contains("pde")) {
        const auto& p = j["pde"];
        detail::only_keys(p, {"problem", "x_min", "x_max", "n_x", "pde_steps"}, "pde");
        if (p.contains("problem")) {
            c.problem = str(p["problem"], "pde.problem");
            if (c.problem != "heat-cosine" && c.problem != "quadratic-bump")
                throw ConfigError("unknown nonlocal problem '" + c.problem + "'", "pde.problem");
        }
        if (p.contains("x_min")) c.space.x_min = num(p["x_min"], "pde.x_min", -1e4, 1e4);
        if (p.contains("x_max")) c.space.x_max = num(p["x_max"], "pde.x_max", -1e4, 1e4);
        if (p.contains("n_x")) c.space.n_x = count(p["n_x"], "pde.n_x", 3, 100000);
        if (p.contains("pde_steps")) c.pde_steps = count(p["pde_steps"], "pde.pde_steps", 1, 10000000);
        if (!(c.space.x_min < c.space.x_max)) throw ConfigError("'pde.x_min' must be below 'pde.x_max'", "pde.x_min");
    }
    if (j.contains("compare")) {
        detail::only_keys(j["compare"], {"cases"}, "compare");
        if (j["compare"].contains("cases")) c.cases = count(j["compare"]["cases"], "compare.cases", 1, 10000);
    }
    if (j.contains("rate")) {
        const auto& r = j["rate"];
        detail::only_keys(r, {"sizes", "errors"}, "rate");
        auto arr = [&](const char* k, std::vector<double>& dst) {
            if (!r.contains(k)) return;
            if (!r[k].is_array()) throw ConfigError(std::string("'rate.") + k + "' must be an array", std::string("rate.") + k);
            for (const auto& v : r[k]) dst.push_back(num(v, std::string("rate.") + k, 1e-300));
        };
        arr("sizes", c.sizes);
        arr("errors", c.errors);
    }
    if (j.contains("expect")) {
        const auto& e = j["expect"];
        detail::only_keys(e, {"y0", "tolerance"}, "expect");
        if (e.contains("y0")) c.expect_y0 = num(e["y0"], "expect.y0");
        if (e.contains("tolerance")) c.tolerance = num(e["tolerance"], "expect.tolerance", 0.0);
    }
    if (j.contains("output")) c.output = str(j["output"], "output");
    return c;
}

inline ExperimentConfig load_config(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot read config file '" + path + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_config(ss.str());
}

} // namespace mfbsde
