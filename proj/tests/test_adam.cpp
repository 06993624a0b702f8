// Copyright Contributors to the hdrsplat Project
// SPDX-License-Identifier: Apache-2.0

#include "hdrsplat/adam.hpp"

#include "hdrsplat/common.hpp"

#include <doctest.h>

#include <cmath>
#include <limits>

using namespace hdrsplat;

TEST_CASE("zero gradient from a fresh state leaves parameters unchanged") {
    std::vector<float> p = {1.0f, -2.0f};
    AdamState st;
    std::vector<float> g = {0.0f, 0.0f};
    const auto status = adam_step(p, g, st, 0.1);
    CHECK(status == StepStatus::kOk);
    CHECK(p[0] == 1.0f);
    CHECK(p[1] == -2.0f);
}

TEST_CASE("zero gradient decays existing moments by the beta factors") {
    std::vector<float> p = {1.0f};
    AdamState st;
    st.ensure(1);
    st.m = {0.5f};
    st.v = {0.25f};
    st.step = 3;
    std::vector<float> g = {0.0f};
    adam_step(p, g, st, 0.1);
    CHECK(st.m[0] == doctest::Approx(0.5f * 0.9f));
    CHECK(st.v[0] == doctest::Approx(0.25f * 0.999f));
}

TEST_CASE("first step moves by lr times the gradient sign") {
    AdamParams ap;
    ap.eps = 1e-30;
    for (double g0 : {3.7, -0.004, 120.0}) {
        std::vector<float> p = {0.0f};
        std::vector<float> g = {static_cast<float>(g0)};
        AdamState st;
        adam_step(p, g, st, 0.1, ap);
        CHECK(p[0] == doctest::Approx(-0.1 * (g0 > 0 ? 1.0 : -1.0)).epsilon(1e-5));
    }
}

TEST_CASE("optimizes a quadratic to near zero") {
    std::vector<float> x = {1.0f};
    AdamState st;
    for (int i = 0; i < 100; ++i) {
        std::vector<float> g = {2.0f * x[0]};
        adam_step(x, g, st, 0.1);
    }
    CHECK(std::abs(x[0]) < 0.05);
}

TEST_CASE("non-finite gradients skip the step entirely") {
    std::vector<float> p = {1.0f, 2.0f};
    AdamState st;
    st.ensure(2);
    std::vector<float> g = {0.5f, std::numeric_limits<float>::quiet_NaN()};
    const auto status = adam_step(p, g, st, 0.1);
    CHECK(status == StepStatus::kSkippedNonFinite);
    CHECK(p[0] == 1.0f);
    CHECK(p[1] == 2.0f);
    CHECK(st.m[0] == 0.0f);
    CHECK(st.step == 0);

    g[1] = std::numeric_limits<float>::infinity();
    CHECK(adam_step(p, g, st, 0.1) == StepStatus::kSkippedNonFinite);
}

TEST_CASE("size mismatch is a contract violation") {
    std::vector<float> p = {1.0f};
    std::vector<float> g = {1.0f, 2.0f};
    AdamState st;
    CHECK_THROWS_AS(adam_step(p, g, st, 0.1), ContractViolation);
}
