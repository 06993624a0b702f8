// Copyright Contributors to the hdrsplat Project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace hdrsplat {

struct GradCheckOptions {
    int n_gaussians = 5;
    int image_size = 8;
    int sh_degree = 1;
    int fourier_degree = 1;
    int tone_hidden = 16;
    int window_k = 4;
    int context_dim = 2;
    std::string cell = "gru";
    unsigned seed = 1234;
    double fd_step = 1e-4;
    double tolerance = 1e-3;
    std::string inject_wrong_sign; // flips one group's analytic gradient (harness self-test)
};

struct GradCheckReport {
    struct Group {
        std::string name;
        double max_rel_err = 0.0;
        int count = 0;
    };
    std::vector<Group> groups;
    double tolerance = 1e-3;
    double seconds = 0.0;

    bool passed() const {
        for (const Group& g : groups)
            if (!(g.max_rel_err < tolerance))
                return false;
        return true;
    }

    void print(std::ostream& os) const;
};

/// Central finite differences (64-bit) against the analytic gradients of the
/// full training pipeline, per parameter group.
GradCheckReport run_gradcheck(const GradCheckOptions& opt = {});

} // namespace hdrsplat
