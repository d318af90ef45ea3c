#include "epls/env.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace epls {

Action Action::clamped(float steer, float accel, float brake) {
    Action a;
    a.steer = std::clamp(steer, -1.0f, 1.0f);
    a.accel = std::clamp(accel, 0.0f, 1.0f);
    a.brake = std::clamp(brake, 0.0f, 1.0f);
    return a;
}

int CarState::visited_count() const {
    int n = 0;
    for (auto v : visited) n += v ? 1 : 0;
    return n;
}

namespace {

TrackSpec build_track(std::uint64_t seed, const EnvConfig& cfg) {
    Rng rng = derive_rng(seed, "track");
    TrackSpec spec;
    spec.tile_len = cfg.tile_len;
    spec.half_width = cfg.half_width;
    spec.xs.reserve(cfg.tiles + 1);
    spec.ys.reserve(cfg.tiles + 1);
    double x = 0.0, y = 0.0, heading = 0.0;
    double kappa = 0.0;
    spec.xs.push_back(0.0f);
    spec.ys.push_back(0.0f);
    const double alpha = cfg.curvature_smoothing;
    for (int i = 0; i < cfg.tiles; ++i) {
        double target = cfg.curvature_noise * rng.normal() + cfg.turn_bias;
        kappa = alpha * kappa + (1.0 - alpha) * target;
        double k = std::clamp(kappa, -static_cast<double>(cfg.max_curvature), static_cast<double>(cfg.max_curvature));
        x += cfg.tile_len * std::cos(heading);
        y += cfg.tile_len * std::sin(heading);
        heading += k * cfg.tile_len;
        spec.xs.push_back(static_cast<float>(x));
        spec.ys.push_back(static_cast<float>(y));
    }
    return spec;
}

// A track whose distant parts pass close to each other makes nearest-tile
// lookups ambiguous; such draws are rejected.
bool well_separated(const TrackSpec& spec) {
    const int n = spec.tiles();
    const float min_sep = 2.4f * spec.half_width + spec.tile_len;
    for (int i = 0; i < n; ++i)
        for (int j = i + 4; j < n; ++j) {
            float dx = spec.xs[i] - spec.xs[j];
            float dy = spec.ys[i] - spec.ys[j];
            if (dx * dx + dy * dy < min_sep * min_sep) return false;
        }
    return true;
}

} // namespace

TrackSpec generate_track(std::uint64_t seed, const EnvConfig& cfg) {
    if (cfg.tiles < 10) throw std::invalid_argument("generate_track: need at least 10 tiles");
    for (std::uint64_t attempt = 0;; ++attempt) {
        TrackSpec spec = build_track(derive_seed(seed, "track-attempt", attempt), cfg);
        if (well_separated(spec) || attempt == 31) return spec;
    }
}

TrackQuery nearest_on_track(const TrackSpec& spec, float x, float y) {
    TrackQuery best;
    float best_d2 = std::numeric_limits<float>::max();
    const int n = spec.tiles();
    for (int i = 0; i < n; ++i) {
        float ax = spec.xs[i], ay = spec.ys[i];
        float bx = spec.xs[i + 1], by = spec.ys[i + 1];
        float ux = bx - ax, uy = by - ay;
        float len2 = ux * ux + uy * uy;
        float t = len2 > 0 ? ((x - ax) * ux + (y - ay) * uy) / len2 : 0.0f;
        t = std::clamp(t, 0.0f, 1.0f);
        float dx = x - (ax + t * ux), dy = y - (ay + t * uy);
        float d2 = dx * dx + dy * dy;
        if (d2 < best_d2 - 1e-12f) {
            best_d2 = d2;
            best.tile = i;
        }
    }
    best.lateral = std::sqrt(best_d2);
    return best;
}

OracleStep oracle_dynamics(const EnvConfig& cfg, const TrackSpec& spec, const CarState& state, const Action& raw) {
    if (state.terminal) throw std::logic_error("step: episode already terminal");
    Action a = Action::clamped(raw.steer, raw.accel, raw.brake);

    OracleStep out;
    CarState& s = out.state;
    s = state;
    s.speed = std::clamp(s.speed + (a.accel * cfg.a_max - a.brake * cfg.b_max - cfg.drag * s.speed) * cfg.dt,
                         0.0f, cfg.v_max);
    s.heading += a.steer * cfg.omega_max * cfg.dt * (s.speed / cfg.v_max);
    s.x += s.speed * cfg.dt * std::cos(s.heading);
    s.y += s.speed * cfg.dt * std::sin(s.heading);
    s.t += 1;

    TrackQuery q = nearest_on_track(spec, s.x, s.y);
    bool off_track = q.lateral > spec.half_width;
    if (!off_track) s.visited[q.tile] = 1;

    int visited = s.visited_count();
    int newly = visited - s.rewarded;
    s.rewarded = visited;
    out.reward = -0.1f + (1000.0f / static_cast<float>(spec.tiles())) * static_cast<float>(newly);

    bool done = off_track || visited == spec.tiles() || s.t >= cfg.t_max;
    s.terminal = done;
    out.terminal = done;
    return out;
}

Observation render_observation(const EnvConfig& cfg, const TrackSpec& spec, const CarState& state) {
    Observation obs(kObsDim, 0.0f);
    const float px = cfg.pixel_size;
    const float fx = std::cos(state.heading), fy = std::sin(state.heading);
    const float rx = std::sin(state.heading), ry = -std::cos(state.heading);

    // Only segments near the window can contribute.
    const float window_radius = 8.0f * px * 1.4143f + spec.half_width + spec.tile_len;
    std::vector<int> nearby;
    for (int i = 0; i < spec.tiles(); ++i) {
        float dx = spec.xs[i] - state.x, dy = spec.ys[i] - state.y;
        if (dx * dx + dy * dy <= window_radius * window_radius) nearby.push_back(i);
    }

    for (int r = 0; r < kObsPixels - 1; ++r) {
        for (int c = 0; c < kObsPixels; ++c) {
            float forward = (7.5f - static_cast<float>(r)) * px;
            float right = (static_cast<float>(c) - 7.5f) * px;
            float wx = state.x + forward * fx + right * rx;
            float wy = state.y + forward * fy + right * ry;
            float best_d2 = std::numeric_limits<float>::max();
            for (int i : nearby) {
                float ax = spec.xs[i], ay = spec.ys[i];
                float bx = spec.xs[i + 1], by = spec.ys[i + 1];
                float ux = bx - ax, uy = by - ay;
                float len2 = ux * ux + uy * uy;
                float t = len2 > 0 ? ((wx - ax) * ux + (wy - ay) * uy) / len2 : 0.0f;
                t = std::clamp(t, 0.0f, 1.0f);
                float dx = wx - (ax + t * ux), dy = wy - (ay + t * uy);
                best_d2 = std::min(best_d2, dx * dx + dy * dy);
            }
            if (best_d2 <= spec.half_width * spec.half_width) obs[r * kObsPixels + c] = 1.0f;
        }
    }

    int bar = static_cast<int>(std::floor(static_cast<float>(kObsPixels) * state.speed / cfg.v_max));
    bar = std::min(bar, kObsPixels);
    for (int c = 0; c < bar; ++c) obs[(kObsPixels - 1) * kObsPixels + c] = 1.0f;
    return obs;
}

CarState initial_car_state(const TrackSpec& spec) {
    CarState s;
    s.x = spec.xs[0];
    s.y = spec.ys[0];
    s.heading = std::atan2(spec.ys[1] - spec.ys[0], spec.xs[1] - spec.xs[0]);
    s.speed = 0.0f;
    s.visited.assign(spec.tiles(), 0);
    s.visited[0] = 1;
    s.rewarded = 0;
    s.t = 0;
    s.terminal = false;
    return s;
}

Observation Environment::reset() {
    state_ = initial_car_state(spec_);
    episode_open_ = true;
    return render_observation(cfg_, spec_, state_);
}

StepResult Environment::step(const Action& a) {
    if (!episode_open_) throw std::logic_error("Environment::step: call reset() first");
    OracleStep o = oracle_dynamics(cfg_, spec_, state_, a);
    state_ = std::move(o.state);
    StepResult r;
    r.obs = render_observation(cfg_, spec_, state_);
    r.reward = o.reward;
    r.terminal = o.terminal;
    return r;
}

} // namespace epls
