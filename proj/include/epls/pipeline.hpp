#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "epls/config.hpp"
#include "epls/mdrnn.hpp"
#include "epls/planner.hpp"
#include "epls/rollout.hpp"
#include "epls/vae.hpp"

namespace epls {

enum class Policy { random, plan, oracle };
Policy parse_policy(const std::string& name); // throws std::invalid_argument
std::string policy_name(Policy p);

// Sticky uniform driver used for data collection and as the evaluation
// baseline: each sampled action is held for a geometric number of steps
// (resample probability 0.15) and braking bursts are rare, so episodes
// actually cover speed, steering, and off-track outcomes.
class RandomDriver {
public:
    explicit RandomDriver(std::uint64_t seed) : rng_(seed) {}
    Action act();

private:
    Rng rng_;
    Action current_;
    bool have_ = false;
};

// n episodes on tracks seeded seed, seed+1, ...; each truncated at max_steps
// or terminal. `plan` policy needs both nets; `oracle` plans on ground truth.
std::vector<Rollout> collect_rollouts(const RunConfig& cfg, Policy policy, int n, int max_steps,
                                      std::uint64_t seed, const Vae* vae = nullptr,
                                      const Mdrnn* mdrnn = nullptr);

// Writes ep_XXXX.roll files plus manifest.txt into dir (created if needed).
void save_rollout_dir(const std::string& dir, const std::vector<Rollout>& rollouts,
                      const std::vector<std::string>& policies);
std::vector<Rollout> load_rollout_dir(const std::string& dir);

struct TrainTrace {
    std::vector<float> epoch_loss; // mean per-sample (VAE) or per-step (dynamics) loss
};

Vae train_vae(const std::vector<Rollout>& data, const RunConfig& cfg, TrainTrace* trace = nullptr);

struct LatentRollout {
    std::vector<LatentVector> z; // encoder mean of each observation
    std::vector<Action> actions;
    std::vector<float> rewards;
    std::vector<std::uint8_t> terminals;

    int steps() const { return static_cast<int>(actions.size()); }
};

std::vector<LatentRollout> encode_rollouts(const Vae& vae, const std::vector<Rollout>& data);

Mdrnn train_mdrnn(const std::vector<LatentRollout>& data, const RunConfig& cfg, TrainTrace* trace = nullptr);
// Continues training an existing model (used by the iterative procedure).
void train_mdrnn_more(Mdrnn& model, const std::vector<LatentRollout>& data, const RunConfig& cfg,
                      int epochs, std::uint64_t seed, TrainTrace* trace = nullptr);

struct EvalReport {
    std::vector<float> scores; // one episode score per track
    float mean = 0.0f;
    float stddev = 0.0f;        // population standard deviation
    std::string config_text;    // resolved config echo
    double wall_clock_sec = 0;  // not serialized: reports stay byte-stable
};

EvalReport evaluate(const RunConfig& cfg, const Vae& vae, const Mdrnn& model, int n_tracks,
                    std::uint64_t seed);
EvalReport evaluate_random(const RunConfig& cfg, int n_tracks, std::uint64_t seed);
EvalReport evaluate_oracle(const RunConfig& cfg, int n_tracks, std::uint64_t seed);

// Teacher-forced one-step metrics on held-out episodes, with the unit
// Gaussian persistence predictor (next latent == current) as the baseline.
struct HeldOutMetrics {
    float gmm_nll = 0.0f;
    float persistence_nll = 0.0f;
    float reward_mse = 0.0f;
    float reward_var = 0.0f; // variance of held-out rewards (predict-the-mean error)
};
HeldOutMetrics held_out_metrics(const Vae& vae, const Mdrnn& model, const std::vector<Rollout>& held);

struct NoniterativeResult {
    Vae vae;
    Mdrnn mdrnn;
    EvalReport report;
};
// Random collection -> VAE -> dynamics -> evaluation; persists rollouts,
// checkpoint, loss traces, and the report under out_dir.
NoniterativeResult run_noniterative(const RunConfig& cfg, const std::string& out_dir);

struct IterativeResult {
    Vae vae;
    Mdrnn mdrnn;
    std::vector<EvalReport> reports; // iteration 0 baseline + one per refinement
};
// Baseline then cfg.iterations rounds of plan-policy collection into the
// replay buffer and continued dynamics training; the encoder stays frozen.
// Artifacts are flushed at the end of every iteration.
IterativeResult run_iterative(const RunConfig& cfg, const std::string& out_dir);

struct ExpertMixResult {
    Vae vae;
    Mdrnn mdrnn;
    EvalReport report;
};
// 50/50 random and oracle-planner rollouts; the world model trains on the mix.
ExpertMixResult run_expert_mix(const RunConfig& cfg, const std::string& out_dir);

// One evaluation per value with everything else fixed.
enum class SweepParam { horizon, generations };
std::vector<std::pair<int, EvalReport>> sweep(const RunConfig& cfg, const Vae& vae, const Mdrnn& model,
                                              SweepParam param, const std::vector<int>& values,
                                              int n_tracks, std::uint64_t seed);

// ---- persistence ---------------------------------------------------------

void save_model(const std::string& path, const Vae& vae, const Mdrnn& mdrnn);
struct LoadedModel {
    Vae vae;
    Mdrnn mdrnn;
};
// Dimensions are inferred from the stored tensor shapes.
LoadedModel load_model(const std::string& path);

// CSV emitters. Reports embed the resolved config as "# key=value" lines.
void write_eval_report(const std::string& path, const EvalReport& rep);
EvalReport read_eval_report(const std::string& path);
void write_loss_csv(const std::string& path, const TrainTrace& trace);
void write_iterations_csv(const std::string& path, const std::vector<EvalReport>& reports);
void write_sweep_csv(const std::string& path, const std::string& param,
                     const std::vector<std::pair<int, EvalReport>>& rows);

} // namespace epls
