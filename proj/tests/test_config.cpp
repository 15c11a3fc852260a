#include <gtest/gtest.h>

#include <mfbsde/config.hpp>
#include <mfbsde/experiment.hpp>

#include <cctype>
#include <string>

using namespace mfbsde;

namespace {

std::string key_of(const std::string& text) {
    try {
        parse_config(text);
    } catch (const ConfigError& e) {
        return e.key();
    }
    return "<accepted>";
}

std::string message_of(const std::string& text) {
    try {
        parse_config(text);
    } catch (const ConfigError& e) {
        return e.what();
    }
    return "<accepted>";
}

} // namespace

TEST(Config, DefaultsFromEmptyObject) {
    const ExperimentConfig c = parse_config("{}");
    EXPECT_EQ(c.steps, 50u);
    EXPECT_EQ(c.driver.name, "zero");
    EXPECT_FALSE(c.profile_given);
    EXPECT_FALSE(c.expect_y0.has_value());
}

TEST(Config, FullDocument) {
    const ExperimentConfig c = parse_config(R"({
        "experiment": "picard", "seed": 9, "horizon": 0.5, "steps": 20, "paths": 512,
        "driver": {"name": "affine-mean", "a": 0.5, "b": -0.5, "gamma": 1},
        "terminal": {"name": "tanh", "scale": 0.8},
        "profile": {"K1": 2, "gamma0": 0.01},
        "regression": {"basis": "piecewise-linear", "cells": 16, "ridge": 0},
        "picard": {"tol": 1e-6, "max_iter": 30, "relaxation": 0.5},
        "particles": {"n_list": [8, 16, 32]},
        "expect": {"y0": 0.1, "tolerance": 0.01}
    })");
    EXPECT_EQ(c.experiment, "picard");
    EXPECT_EQ(c.seed, 9u);
    EXPECT_DOUBLE_EQ(c.horizon, 0.5);
    EXPECT_DOUBLE_EQ(c.driver.params.at("b"), -0.5);
    EXPECT_DOUBLE_EQ(c.terminal.params.at("scale"), 0.8);
    EXPECT_TRUE(c.profile_given);
    EXPECT_DOUBLE_EQ(c.profile.K1, 2.0);
    EXPECT_DOUBLE_EQ(c.profile.K2, GrowthProfile{}.K2);
    EXPECT_EQ(c.regression.basis, BasisKind::piecewise_linear);
    EXPECT_EQ(c.regression.cells, 16);
    EXPECT_EQ(c.picard.max_iter, 30u);
    EXPECT_EQ(c.n_list, (std::vector<std::size_t>{8, 16, 32}));
    EXPECT_DOUBLE_EQ(*c.expect_y0, 0.1);
}

TEST(Config, RejectsUnknownKeysEverywhere) {
    EXPECT_EQ(key_of(R"({"stepz": 3})"), "stepz");
    EXPECT_EQ(key_of(R"({"picard": {"tolerance": 1}})"), "picard.tolerance");
    EXPECT_EQ(key_of(R"({"driver": {"name": "constant", "d": 1}})"), "driver.d");
    EXPECT_EQ(key_of(R"({"profile": {"K4": 1}})"), "profile.K4");
}

TEST(Config, RejectsUnknownNames) {
    EXPECT_EQ(key_of(R"({"experiment": "nope"})"), "experiment");
    EXPECT_EQ(key_of(R"({"driver": {"name": "cubic"}})"), "driver.name");
    EXPECT_EQ(key_of(R"({"regression": {"basis": "fourier"}})"), "regression.basis");
    EXPECT_EQ(key_of(R"({"pde": {"problem": "wave"}})"), "pde.problem");
}

TEST(Config, RangeAndTypeChecks) {
    EXPECT_EQ(key_of(R"({"steps": 0})"), "steps");
    EXPECT_EQ(key_of(R"({"steps": 2.5})"), "steps");
    EXPECT_EQ(key_of(R"({"paths": -3})"), "paths");
    EXPECT_EQ(key_of(R"({"horizon": "one"})"), "horizon");
    EXPECT_EQ(key_of(R"({"profile": {"alpha": 1}})"), "profile.alpha");
    EXPECT_EQ(key_of(R"({"profile": {"K": 0}})"), "profile.K");
    EXPECT_EQ(key_of(R"({"picard": {"relaxation": 2}})"), "picard.relaxation");
    EXPECT_EQ(key_of(R"({"particles": {"n_list": [16, 8]}})"), "particles.n_list");
    EXPECT_EQ(key_of(R"({"pde": {"x_min": 1, "x_max": 0}})"), "pde.x_min");
}

TEST(Config, MalformedJsonReportsPosition) {
    const std::string m = message_of("{\n  \"steps\": 10,\n  \"paths\": ]\n}");
    EXPECT_NE(m.find("line 3"), std::string::npos) << m;
    EXPECT_NE(m.find("column"), std::string::npos) << m;
    EXPECT_NE(message_of("").find("line 1"), std::string::npos);
}

TEST(Config, MissingFile) {
    EXPECT_THROW(load_config("/nonexistent/config.json"), ConfigError);
}

TEST(Experiment, CsvUsesSeventeenDigits) {
    EXPECT_EQ(fmt17(0.1), "0.10000000000000001");
    CsvTable t({"a", "b"});
    t.row({1.0, 1.0 / 3.0});
    EXPECT_EQ(t.str(), "a,b\n1,0.33333333333333331\n");
    EXPECT_THROW(t.row({1.0}), InvalidArgument);
}

TEST(Experiment, SolveMeetsItsExpectation) {
    ExperimentConfig c = parse_config(R"({"experiment": "solve", "steps": 10, "paths": 256,
        "driver": {"name": "constant", "c": 2}, "terminal": {"name": "constant", "c": 1},
        "expect": {"y0": 3, "tolerance": 1e-9}})");
    ExperimentResult r = run_experiment(c);
    EXPECT_TRUE(r.passed);
    EXPECT_FALSE(std::isdigit(static_cast<unsigned char>(r.csv.front())));
    c.expect_y0 = 2.5;
    EXPECT_FALSE(run_experiment(c).passed);
}

TEST(Experiment, EveryKindRunsOnSmallInputs) {
    for (const auto& kind : experiment_kinds()) {
        ExperimentConfig c = parse_config(R"({"steps": 10, "paths": 128,
            "rate": {"sizes": [1, 2, 4], "errors": [1, 0.5, 0.25]},
            "particles": {"n_list": [8, 16]}, "compare": {"cases": 2},
            "pde": {"n_x": 101, "pde_steps": 200}})");
        c.experiment = kind;
        const ExperimentResult r = run_experiment(c);
        EXPECT_FALSE(r.csv.empty()) << kind;
        EXPECT_EQ(r.csv.back(), '\n') << kind;
    }
}
