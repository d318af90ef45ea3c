#include "epls/config.hpp"

#include <cstdio>
#include <fstream>
#include <functional>
#include <sstream>
#include <stdexcept>

namespace epls {

namespace {

struct Field {
    const char* key;
    std::function<void(RunConfig&, const std::string&)> set;
    std::function<std::string(const RunConfig&)> get;
};

std::string fmt_float(float v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.9g", static_cast<double>(v));
    return buf;
}

int parse_int(const std::string& s) {
    std::size_t pos = 0;
    int v = std::stoi(s, &pos);
    if (pos != s.size()) throw std::invalid_argument("trailing characters in integer '" + s + "'");
    return v;
}

float parse_float(const std::string& s) {
    std::size_t pos = 0;
    float v = std::stof(s, &pos);
    if (pos != s.size()) throw std::invalid_argument("trailing characters in number '" + s + "'");
    return v;
}

bool parse_bool(const std::string& s) {
    if (s == "1" || s == "true") return true;
    if (s == "0" || s == "false") return false;
    throw std::invalid_argument("expected boolean 0/1/true/false, got '" + s + "'");
}

#define INT_FIELD(name) \
    {#name, [](RunConfig& c, const std::string& v) { c.name = parse_int(v); }, \
     [](const RunConfig& c) { return std::to_string(c.name); }}
#define FLOAT_FIELD(name) \
    {#name, [](RunConfig& c, const std::string& v) { c.name = parse_float(v); }, \
     [](const RunConfig& c) { return fmt_float(c.name); }}
#define BOOL_FIELD(name) \
    {#name, [](RunConfig& c, const std::string& v) { c.name = parse_bool(v); }, \
     [](const RunConfig& c) { return std::string(c.name ? "1" : "0"); }}

const std::vector<Field>& fields() {
    static const std::vector<Field> f = {
        INT_FIELD(tiles), FLOAT_FIELD(tile_len), FLOAT_FIELD(half_width), FLOAT_FIELD(max_curvature),
        FLOAT_FIELD(curvature_noise), FLOAT_FIELD(curvature_smoothing), FLOAT_FIELD(turn_bias),
        FLOAT_FIELD(dt), FLOAT_FIELD(v_max), FLOAT_FIELD(a_max), FLOAT_FIELD(b_max), FLOAT_FIELD(drag),
        FLOAT_FIELD(omega_max), INT_FIELD(t_max), FLOAT_FIELD(pixel_size),
        INT_FIELD(latent_dim), INT_FIELD(vae_hidden1), INT_FIELD(vae_hidden2), FLOAT_FIELD(beta),
        INT_FIELD(hidden_dim), INT_FIELD(mixtures),
        INT_FIELD(vae_epochs), FLOAT_FIELD(vae_lr), INT_FIELD(vae_batch),
        INT_FIELD(mdrnn_epochs), FLOAT_FIELD(mdrnn_lr), INT_FIELD(mdrnn_batch), INT_FIELD(bptt_len),
        INT_FIELD(mdrnn_iter_epochs),
        INT_FIELD(rollouts), INT_FIELD(rollout_steps), INT_FIELD(eval_tracks), INT_FIELD(iterations),
        INT_FIELD(iter_rollouts), INT_FIELD(buffer_capacity),
        INT_FIELD(horizon), INT_FIELD(generations), FLOAT_FIELD(p_mut), FLOAT_FIELD(sigma_mut),
        FLOAT_FIELD(terminal_threshold), BOOL_FIELD(sample_latents), INT_FIELD(oracle_generations),
        {"seed", [](RunConfig& c, const std::string& v) { c.seed = std::stoull(v); },
         [](const RunConfig& c) { return std::to_string(c.seed); }},
        {"out_dir", [](RunConfig& c, const std::string& v) { c.out_dir = v; },
         [](const RunConfig& c) { return c.out_dir; }},
    };
    return f;
}

#undef INT_FIELD
#undef FLOAT_FIELD
#undef BOOL_FIELD

std::string trim(const std::string& s) {
    std::size_t b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return "";
    std::size_t e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

} // namespace

EnvConfig RunConfig::env() const {
    EnvConfig e;
    e.tiles = tiles;
    e.tile_len = tile_len;
    e.half_width = half_width;
    e.max_curvature = max_curvature;
    e.curvature_noise = curvature_noise;
    e.curvature_smoothing = curvature_smoothing;
    e.turn_bias = turn_bias;
    e.dt = dt;
    e.v_max = v_max;
    e.a_max = a_max;
    e.b_max = b_max;
    e.drag = drag;
    e.omega_max = omega_max;
    e.t_max = t_max;
    e.pixel_size = pixel_size;
    return e;
}

VaeConfig RunConfig::vae() const {
    VaeConfig v;
    v.obs_dim = kObsDim;
    v.hidden1 = vae_hidden1;
    v.hidden2 = vae_hidden2;
    v.latent = latent_dim;
    v.beta = beta;
    return v;
}

MdrnnConfig RunConfig::mdrnn() const {
    MdrnnConfig m;
    m.latent = latent_dim;
    m.action_dim = kActionDim;
    m.hidden = hidden_dim;
    m.mixtures = mixtures;
    return m;
}

PlannerConfig RunConfig::planner() const {
    PlannerConfig p;
    p.horizon = horizon;
    p.generations = generations;
    p.p_mut = p_mut;
    p.sigma_mut = sigma_mut;
    p.terminal_threshold = terminal_threshold;
    p.sample_latents = sample_latents;
    return p;
}

PlannerConfig RunConfig::oracle_planner() const {
    PlannerConfig p = planner();
    p.generations = oracle_generations;
    return p;
}

std::string RunConfig::to_text() const {
    std::string out;
    for (const auto& f : fields()) {
        out += f.key;
        out += '=';
        out += f.get(*this);
        out += '\n';
    }
    return out;
}

RunConfig parse_config(const std::string& text) {
    RunConfig cfg;
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const std::string t = trim(line);
        if (t.empty() || t[0] == '#') continue;
        const auto eq = t.find('=');
        if (eq == std::string::npos)
            throw std::invalid_argument("config line " + std::to_string(lineno) + ": expected key=value");
        const std::string key = trim(t.substr(0, eq));
        const std::string value = trim(t.substr(eq + 1));
        bool found = false;
        for (const auto& f : fields()) {
            if (key == f.key) {
                try {
                    f.set(cfg, value);
                } catch (const std::exception& e) {
                    throw std::invalid_argument("config line " + std::to_string(lineno) + " (" + key +
                                                "): " + e.what());
                }
                found = true;
                break;
            }
        }
        if (!found)
            throw std::invalid_argument("config line " + std::to_string(lineno) + ": unknown key '" + key + "'");
    }
    return cfg;
}

RunConfig load_config(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot read " + path);
    std::ostringstream ss;
    ss << f.rdbuf();
    return parse_config(ss.str());
}

} // namespace epls
