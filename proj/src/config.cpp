// Copyright Contributors to the hdrsplat Project
// SPDX-License-Identifier: Apache-2.0

#include "hdrsplat/config.hpp"

#include "hdrsplat/tonemap.hpp"

#include <fstream>
#include <functional>
#include <sstream>
#include <vector>

namespace hdrsplat {

namespace {

struct Field {
    std::string name;
    std::function<std::string(const TrainConfig&)> get;
    std::function<void(TrainConfig&, const std::string&)> set;
};

std::string fmt_double(double v) {
    std::ostringstream os;
    os.precision(17);
    os << v;
    return os.str();
}

bool parse_bool(const std::string& s) {
    if (s == "true" || s == "1" || s == "on")
        return true;
    if (s == "false" || s == "0" || s == "off")
        return false;
    throw ContractViolation("not a boolean: " + s);
}

const std::vector<Field>& fields() {
    static const std::vector<Field> f = {
        {"iterations", [](const TrainConfig& c) { return std::to_string(c.iterations); },
         [](TrainConfig& c, const std::string& v) { c.iterations = std::stoi(v); }},
        {"n_init", [](const TrainConfig& c) { return std::to_string(c.n_init); },
         [](TrainConfig& c, const std::string& v) { c.n_init = std::stoi(v); }},
        {"lr_position", [](const TrainConfig& c) { return fmt_double(c.lr_position); },
         [](TrainConfig& c, const std::string& v) { c.lr_position = std::stod(v); }},
        {"lr_position_final", [](const TrainConfig& c) { return fmt_double(c.lr_position_final); },
         [](TrainConfig& c, const std::string& v) { c.lr_position_final = std::stod(v); }},
        {"lr_sh", [](const TrainConfig& c) { return fmt_double(c.lr_sh); },
         [](TrainConfig& c, const std::string& v) { c.lr_sh = std::stod(v); }},
        {"lr_opacity", [](const TrainConfig& c) { return fmt_double(c.lr_opacity); },
         [](TrainConfig& c, const std::string& v) { c.lr_opacity = std::stod(v); }},
        {"lr_scaling", [](const TrainConfig& c) { return fmt_double(c.lr_scaling); },
         [](TrainConfig& c, const std::string& v) { c.lr_scaling = std::stod(v); }},
        {"lr_rotation", [](const TrainConfig& c) { return fmt_double(c.lr_rotation); },
         [](TrainConfig& c, const std::string& v) { c.lr_rotation = std::stod(v); }},
        {"lr_tone", [](const TrainConfig& c) { return fmt_double(c.lr_tone); },
         [](TrainConfig& c, const std::string& v) { c.lr_tone = std::stod(v); }},
        {"beta1", [](const TrainConfig& c) { return fmt_double(c.beta1); },
         [](TrainConfig& c, const std::string& v) { c.beta1 = std::stod(v); }},
        {"beta2", [](const TrainConfig& c) { return fmt_double(c.beta2); },
         [](TrainConfig& c, const std::string& v) { c.beta2 = std::stod(v); }},
        {"adam_eps", [](const TrainConfig& c) { return fmt_double(c.adam_eps); },
         [](TrainConfig& c, const std::string& v) { c.adam_eps = std::stod(v); }},
        {"lambda", [](const TrainConfig& c) { return fmt_double(c.lambda); },
         [](TrainConfig& c, const std::string& v) { c.lambda = std::stod(v); }},
        {"alpha", [](const TrainConfig& c) { return fmt_double(c.alpha); },
         [](TrainConfig& c, const std::string& v) { c.alpha = std::stod(v); }},
        {"mu", [](const TrainConfig& c) { return fmt_double(c.mu); },
         [](TrainConfig& c, const std::string& v) { c.mu = std::stod(v); }},
        {"window_k", [](const TrainConfig& c) { return std::to_string(c.window_k); },
         [](TrainConfig& c, const std::string& v) { c.window_k = std::stoi(v); }},
        {"context_dim", [](const TrainConfig& c) { return std::to_string(c.context_dim); },
         [](TrainConfig& c, const std::string& v) { c.context_dim = std::stoi(v); }},
        {"tone_hidden", [](const TrainConfig& c) { return std::to_string(c.tone_hidden); },
         [](TrainConfig& c, const std::string& v) { c.tone_hidden = std::stoi(v); }},
        {"cell", [](const TrainConfig& c) { return c.cell; },
         [](TrainConfig& c, const std::string& v) { c.cell = v; }},
        {"pixel_level", [](const TrainConfig& c) { return c.pixel_level ? std::string("true") : std::string("false"); },
         [](TrainConfig& c, const std::string& v) { c.pixel_level = parse_bool(v); }},
        {"sh_degree", [](const TrainConfig& c) { return std::to_string(c.sh_degree); },
         [](TrainConfig& c, const std::string& v) { c.sh_degree = std::stoi(v); }},
        {"fourier_degree", [](const TrainConfig& c) { return std::to_string(c.fourier_degree); },
         [](TrainConfig& c, const std::string& v) { c.fourier_degree = std::stoi(v); }},
        {"scene_extent", [](const TrainConfig& c) { return fmt_double(c.scene_extent); },
         [](TrainConfig& c, const std::string& v) { c.scene_extent = std::stod(v); }},
        {"seed", [](const TrainConfig& c) { return std::to_string(c.seed); },
         [](TrainConfig& c, const std::string& v) { c.seed = std::stoull(v); }},
        {"log_every", [](const TrainConfig& c) { return std::to_string(c.log_every); },
         [](TrainConfig& c, const std::string& v) { c.log_every = std::stoi(v); }},
        {"checkpoint_every", [](const TrainConfig& c) { return std::to_string(c.checkpoint_every); },
         [](TrainConfig& c, const std::string& v) { c.checkpoint_every = std::stoi(v); }},
        {"data_dir", [](const TrainConfig& c) { return c.data_dir; },
         [](TrainConfig& c, const std::string& v) { c.data_dir = v; }},
        {"out_dir", [](const TrainConfig& c) { return c.out_dir; },
         [](TrainConfig& c, const std::string& v) { c.out_dir = v; }},
    };
    return f;
}

std::string strip(const std::string& s) {
    const auto a = s.find_first_not_of(" \t\r\n");
    if (a == std::string::npos)
        return "";
    const auto b = s.find_last_not_of(" \t\r\n");
    std::string out = s.substr(a, b - a + 1);
    if (out.size() >= 2 && out.front() == '"' && out.back() == '"')
        out = out.substr(1, out.size() - 2);
    return out;
}

} // namespace

void TrainConfig::validate() const {
    if (iterations < 1)
        throw ContractViolation("iterations must be at least 1");
    if (n_init < 1)
        throw ContractViolation("n_init must be at least 1");
    for (double lr : {lr_position, lr_position_final, lr_sh, lr_opacity, lr_scaling, lr_rotation, lr_tone})
        if (!(lr > 0.0))
            throw ContractViolation("learning rates must be positive");
    if (lambda < 0.0 || lambda > 1.0)
        throw ContractViolation("lambda must be in [0,1]");
    if (alpha < 0.0)
        throw ContractViolation("alpha must be non-negative");
    if (!(mu > 0.0))
        throw ContractViolation("mu must be positive");
    if (window_k < 0)
        throw ContractViolation("window_k must be non-negative");
    if (context_dim < 1 || tone_hidden < 1)
        throw ContractViolation("network sizes must be positive");
    if (sh_degree < 0 || sh_degree > 2)
        throw ContractViolation("sh_degree must be 0..2");
    if (fourier_degree < 0)
        throw ContractViolation("fourier_degree must be non-negative");
    (void)cell_kind_from_string(cell);
}

void TrainConfig::apply(const std::string& key, const std::string& value) {
    for (const Field& f : fields()) {
        if (f.name == key) {
            f.set(*this, value);
            return;
        }
    }
    throw ContractViolation("unknown config key: " + key);
}

void TrainConfig::apply_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in)
        throw IoError("cannot open config: " + path.string());
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const auto hash_pos = line.find('#');
        if (hash_pos != std::string::npos)
            line = line.substr(0, hash_pos);
        const std::string stripped = strip(line);
        if (stripped.empty())
            continue;
        const auto eq = stripped.find('=');
        if (eq == std::string::npos)
            throw ContractViolation("config line " + std::to_string(line_no) + " is not key = value");
        apply(strip(stripped.substr(0, eq)), strip(stripped.substr(eq + 1)));
    }
}

std::string TrainConfig::serialize() const {
    std::ostringstream os;
    for (const Field& f : fields())
        os << f.name << " = " << f.get(*this) << "\n";
    return os.str();
}

} // namespace hdrsplat
