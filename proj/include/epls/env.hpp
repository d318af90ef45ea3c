#pragma once

#include <cstdint>
#include <vector>

#include "epls/rng.hpp"

namespace epls {

// 16x16 grayscale raster, row-major, values in [0,1]. Row 15 is the speed
// bar; rows 0..14 show the local track window.
constexpr int kObsPixels = 16;
constexpr int kObsDim = kObsPixels * kObsPixels;
using Observation = std::vector<float>;

constexpr int kActionDim = 3;

struct Action {
    float steer = 0.0f; // [-1, 1]
    float accel = 0.0f; // [0, 1]
    float brake = 0.0f; // [0, 1]

    static Action clamped(float steer, float accel, float brake);
};

struct EnvConfig {
    int tiles = 100;
    float tile_len = 0.3f;
    float half_width = 0.5f;
    float max_curvature = 0.3f;       // rad per unit arc length
    float curvature_noise = 0.4f;     // std of raw curvature draws
    float curvature_smoothing = 0.7f; // AR(1) low-pass coefficient
    float turn_bias = 0.0f;           // curvature prior mean; >0 favors left turns
    float dt = 0.1f;
    float v_max = 2.0f;
    float a_max = 1.0f;
    float b_max = 2.0f;
    float drag = 0.05f;
    float omega_max = 1.0f;
    int t_max = 200;
    float pixel_size = 0.25f; // world units per raster pixel
};

// Open centerline of tiles+1 points; every tile spans the same arc length.
struct TrackSpec {
    std::vector<float> xs, ys;
    float tile_len = 0.0f;
    float half_width = 0.0f;
    int tiles() const { return static_cast<int>(xs.size()) - 1; }
};

TrackSpec generate_track(std::uint64_t seed, const EnvConfig& cfg = {});

struct CarState {
    float x = 0.0f, y = 0.0f;
    float heading = 0.0f;
    float speed = 0.0f;
    std::vector<std::uint8_t> visited; // per tile
    int rewarded = 0;                  // tiles already paid out
    int t = 0;
    bool terminal = false;

    int visited_count() const;
};

// Nearest point on the centerline polyline.
struct TrackQuery {
    int tile = 0;      // segment index, ties broken toward lower index
    float lateral = 0; // distance from the centerline
};
TrackQuery nearest_on_track(const TrackSpec& spec, float x, float y);

// Ground-truth forward model: one dynamics step plus reward/terminal
// bookkeeping, no rendering. step() below is exactly this plus the renderer.
struct OracleStep {
    CarState state;
    float reward = 0.0f;
    bool terminal = false;
};
OracleStep oracle_dynamics(const EnvConfig& cfg, const TrackSpec& spec, const CarState& state, const Action& a);

Observation render_observation(const EnvConfig& cfg, const TrackSpec& spec, const CarState& state);

struct StepResult {
    Observation obs;
    float reward = 0.0f;
    bool terminal = false;
};

// Single-owner episode runner. Reward structure: -0.1 per step plus
// 1000/tiles for every newly credited tile; terminal on leaving the track,
// on visiting every tile, or at t_max.
class Environment {
public:
    Environment(EnvConfig cfg, TrackSpec spec) : cfg_(cfg), spec_(std::move(spec)) {}

    Observation reset();
    StepResult step(const Action& a); // throws std::logic_error after terminal

    const CarState& car() const { return state_; }
    const TrackSpec& track() const { return spec_; }
    const EnvConfig& config() const { return cfg_; }

private:
    EnvConfig cfg_;
    TrackSpec spec_;
    CarState state_;
    bool episode_open_ = false;
};

CarState initial_car_state(const TrackSpec& spec);

} // namespace epls
