// Command-line surface for the latent world-model planner: data collection,
// training, evaluation, the iterative loop, parameter sweeps, and SVG
// trajectory rendering. Exit codes: 0 success, 1 runtime/IO failure,
// 2 usage/validation error.
#include <cstdio>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "epls/checkpoint.hpp"
#include "epls/config.hpp"
#include "epls/pipeline.hpp"
#include "epls/svg.hpp"

namespace fs = std::filesystem;
using namespace epls;

namespace {

RunConfig config_from(const std::string& path) {
    return path.empty() ? RunConfig{} : load_config(path);
}

// Checkpoints written by `train --component vae` hold only encoder/decoder
// tensors, so model loading happens in two flavors.
Vae load_vae_only(const std::string& path) {
    const auto loaded = load_checkpoint(path);
    const Tensor* enc1 = find_tensor(loaded, "vae.enc1.w");
    const Tensor* enc2 = find_tensor(loaded, "vae.enc2.w");
    const Tensor* mu = find_tensor(loaded, "vae.mu.w");
    if (!enc1 || !enc2 || !mu || enc1->rank() != 2 || enc2->rank() != 2 || mu->rank() != 2)
        throw std::runtime_error("checkpoint " + path + " does not contain a complete encoder/decoder");
    VaeConfig cfg;
    cfg.obs_dim = enc1->shape[0];
    cfg.hidden1 = enc1->shape[1];
    cfg.hidden2 = enc2->shape[1];
    cfg.latent = mu->shape[1];
    Vae vae(cfg);
    fill_from_checkpoint(loaded, vae.named());
    return vae;
}

int cmd_collect(const std::string& policy_name, int episodes, int steps, std::uint64_t seed,
                const std::string& model_path, const std::string& out_dir, const std::string& config_path) {
    if (episodes < 1) {
        std::fprintf(stderr, "error: episodes must be >= 1\n");
        return 2;
    }
    Policy policy = parse_policy(policy_name);
    if (policy == Policy::plan && model_path.empty()) {
        std::fprintf(stderr, "error: --policy plan requires --model\n");
        return 2;
    }
    RunConfig cfg = config_from(config_path);
    cfg.seed = seed;

    std::optional<LoadedModel> model;
    if (policy == Policy::plan) model = load_model(model_path);
    const auto rollouts =
        collect_rollouts(cfg, policy, episodes, steps, seed, model ? &model->vae : nullptr,
                         model ? &model->mdrnn : nullptr);
    save_rollout_dir(out_dir, rollouts, std::vector<std::string>(rollouts.size(), policy_name));

    double total = 0;
    for (std::size_t i = 0; i < rollouts.size(); ++i) {
        std::printf("episode %zu: reward %.2f over %d steps\n", i, rollouts[i].total_reward(),
                    rollouts[i].steps());
        total += rollouts[i].total_reward();
    }
    std::printf("mean reward %.2f over %zu episodes\n", total / rollouts.size(), rollouts.size());
    return 0;
}

int cmd_train(const std::string& component, const std::string& data_dir, const std::string& config_path,
              const std::string& out_path) {
    if (component != "vae" && component != "mdrnn") {
        std::fprintf(stderr, "error: --component must be vae or mdrnn\n");
        return 2;
    }
    RunConfig cfg = config_from(config_path);
    const auto rollouts = load_rollout_dir(data_dir);
    TrainTrace trace;
    if (component == "vae") {
        Vae vae = train_vae(rollouts, cfg, &trace);
        save_checkpoint(out_path, static_cast<const Vae&>(vae).named());
    } else {
        // The encoder comes from the checkpoint being extended; dynamics
        // training appends its tensors alongside.
        Vae vae = load_vae_only(out_path);
        cfg.latent_dim = vae.cfg.latent;
        Mdrnn model = train_mdrnn(encode_rollouts(vae, rollouts), cfg, &trace);
        save_model(out_path, vae, model);
    }
    write_loss_csv(out_path + ".loss.csv", trace);
    std::printf("%s training: %zu epochs, final loss %.6f\n", component.c_str(), trace.epoch_loss.size(),
                trace.epoch_loss.empty() ? 0.0f : trace.epoch_loss.back());
    return 0;
}

int cmd_evaluate(const std::string& model_path, int tracks, int horizon, int generations,
                 std::uint64_t seed, const std::string& report_path, const std::string& config_path) {
    if (tracks < 1) {
        std::fprintf(stderr, "error: tracks must be >= 1\n");
        return 2;
    }
    RunConfig cfg = config_from(config_path);
    cfg.seed = seed;
    if (horizon > 0) cfg.horizon = horizon;
    if (generations > 0) cfg.generations = generations;
    LoadedModel model = load_model(model_path);
    EvalReport rep = evaluate(cfg, model.vae, model.mdrnn, tracks, seed);
    if (!report_path.empty()) write_eval_report(report_path, rep);
    std::printf("%.2f \xc2\xb1 %.2f over %d tracks (%.1fs)\n", rep.mean, rep.stddev, tracks,
                rep.wall_clock_sec);
    return 0;
}

int cmd_iterate(const std::string& config_path, int iterations, const std::string& out_dir) {
    RunConfig cfg = config_from(config_path);
    if (iterations >= 0) cfg.iterations = iterations;
    if (cfg.iterations < 1) {
        std::fprintf(stderr, "error: iterations must be >= 1\n");
        return 2;
    }
    IterativeResult result = run_iterative(cfg, out_dir);
    for (std::size_t i = 0; i < result.reports.size(); ++i)
        std::printf("iteration %zu: %.2f \xc2\xb1 %.2f\n", i, result.reports[i].mean,
                    result.reports[i].stddev);
    return 0;
}

int cmd_sweep(const std::string& model_path, const std::string& param, const std::string& values_list,
              int tracks, std::uint64_t seed, const std::string& out_csv, const std::string& config_path) {
    if (param != "horizon" && param != "generations") {
        std::fprintf(stderr, "error: --param must be horizon or generations\n");
        return 2;
    }
    std::vector<int> values;
    std::istringstream ss(values_list);
    std::string item;
    while (std::getline(ss, item, ','))
        if (!item.empty()) values.push_back(std::stoi(item));
    if (values.empty()) {
        std::fprintf(stderr, "error: --values must name at least one value\n");
        return 2;
    }
    RunConfig cfg = config_from(config_path);
    cfg.seed = seed;
    LoadedModel model = load_model(model_path);
    const auto rows = sweep(cfg, model.vae, model.mdrnn,
                            param == "horizon" ? SweepParam::horizon : SweepParam::generations, values,
                            tracks, seed);
    write_sweep_csv(out_csv, param, rows);
    for (const auto& [value, rep] : rows)
        std::printf("%s=%d: %.2f \xc2\xb1 %.2f\n", param.c_str(), value, rep.mean, rep.stddev);
    return 0;
}

int cmd_viz(const std::string& model_path, std::uint64_t track_seed, const std::string& out_svg,
            bool show_plans, int plan_every, const std::string& config_path) {
    if (plan_every < 1) {
        std::fprintf(stderr, "error: --plan-every must be >= 1\n");
        return 2;
    }
    RunConfig cfg = config_from(config_path);
    LoadedModel model = load_model(model_path);
    const EnvConfig ecfg = cfg.env();
    TrackSpec track = generate_track(track_seed, ecfg);
    Environment env(ecfg, track);
    PlanningAgent agent(model.vae, model.mdrnn, cfg.planner(), derive_seed(track_seed, "viz-agent"));
    agent.begin_episode();

    std::vector<WorldPoint> executed;
    std::vector<std::vector<WorldPoint>> plans;
    Observation obs = env.reset();
    executed.push_back({env.car().x, env.car().y});
    double total = 0;
    for (int t = 0;; ++t) {
        const Action a = agent.act(obs);
        if (show_plans && t % plan_every == 0) {
            // The refined plan starts with the chosen action; the buffer holds
            // its tail (the shift already appended a fresh random action).
            Plan plan{a};
            const Plan& buf = agent.buffer();
            plan.insert(plan.end(), buf.begin(), buf.end() - 1);
            std::vector<WorldPoint> poly{{env.car().x, env.car().y}};
            CarState sim = env.car();
            for (const Action& pa : plan) {
                OracleStep os = oracle_dynamics(ecfg, track, sim, pa);
                sim = os.state;
                poly.push_back({sim.x, sim.y});
                if (os.terminal) break;
            }
            plans.push_back(std::move(poly));
        }
        StepResult s = env.step(a);
        total += s.reward;
        executed.push_back({env.car().x, env.car().y});
        obs = std::move(s.obs);
        if (s.terminal) break;
    }

    std::ofstream f(out_svg, std::ios::binary);
    if (!f) throw std::runtime_error("cannot write " + out_svg);
    f << trajectory_svg(track, executed, show_plans ? plans : std::vector<std::vector<WorldPoint>>{});
    std::printf("episode reward %.2f over %zu steps -> %s\n", total, executed.size() - 1,
                out_svg.c_str());
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"latent world-model planning on a desk-scale track environment"};
    app.require_subcommand(1);

    std::string policy = "random", model_path, out_path, config_path, data_dir, component;
    std::string report_path, param, values_list, out_csv, out_svg;
    int episodes = 10, steps = 100, tracks = 20, horizon = 0, generations = 0, iterations = -1;
    int plan_every = 5;
    std::uint64_t seed = 1, track_seed = 1;
    bool show_plans = false;

    auto* collect = app.add_subcommand("collect", "record environment episodes");
    collect->add_option("--policy", policy, "random|plan|oracle");
    collect->add_option("--episodes", episodes, "episode count");
    collect->add_option("--steps", steps, "max steps per episode");
    collect->add_option("--seed", seed, "master seed");
    collect->add_option("--model", model_path, "checkpoint (required for plan policy)");
    collect->add_option("--out", out_path, "output directory")->required();
    collect->add_option("--config", config_path, "key=value config file");

    auto* train = app.add_subcommand("train", "train the encoder/decoder or the dynamics model");
    train->add_option("--component", component, "vae|mdrnn")->required();
    train->add_option("--data", data_dir, "rollout directory")->required();
    train->add_option("--config", config_path, "key=value config file");
    train->add_option("--out", out_path, "checkpoint path")->required();

    auto* evaluate = app.add_subcommand("evaluate", "score the planning agent on seeded tracks");
    evaluate->add_option("--model", model_path, "checkpoint")->required();
    evaluate->add_option("--tracks", tracks, "track count");
    evaluate->add_option("--horizon", horizon, "planning horizon override");
    evaluate->add_option("--generations", generations, "hill-climb generations override");
    evaluate->add_option("--seed", seed, "master seed");
    evaluate->add_option("--report", report_path, "report CSV path");
    evaluate->add_option("--config", config_path, "key=value config file");

    auto* iterate = app.add_subcommand("iterate", "alternate collection and dynamics training");
    iterate->add_option("--config", config_path, "key=value config file");
    iterate->add_option("--iterations", iterations, "refinement iterations");
    iterate->add_option("--out", out_path, "output directory")->required();

    auto* sweep_cmd = app.add_subcommand("sweep", "evaluate across planner parameter values");
    sweep_cmd->add_option("--model", model_path, "checkpoint")->required();
    sweep_cmd->add_option("--param", param, "horizon|generations")->required();
    sweep_cmd->add_option("--values", values_list, "comma-separated values");
    sweep_cmd->add_option("--tracks", tracks, "track count");
    sweep_cmd->add_option("--seed", seed, "master seed");
    sweep_cmd->add_option("--out", out_csv, "output CSV path")->required();
    sweep_cmd->add_option("--config", config_path, "key=value config file");

    auto* viz = app.add_subcommand("viz", "render one planning episode as SVG");
    viz->add_option("--model", model_path, "checkpoint")->required();
    viz->add_option("--track-seed", track_seed, "track seed");
    viz->add_option("--out", out_svg, "output SVG path")->required();
    viz->add_flag("--show-plans", show_plans, "overlay imagined plan trajectories");
    viz->add_option("--plan-every", plan_every, "overlay every k-th step's plan");
    viz->add_option("--config", config_path, "key=value config file");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    try {
        if (collect->parsed())
            return cmd_collect(policy, episodes, steps, seed, model_path, out_path, config_path);
        if (train->parsed()) return cmd_train(component, data_dir, config_path, out_path);
        if (evaluate->parsed())
            return cmd_evaluate(model_path, tracks, horizon, generations, seed, report_path, config_path);
        if (iterate->parsed()) return cmd_iterate(config_path, iterations, out_path);
        if (sweep_cmd->parsed())
            return cmd_sweep(model_path, param, values_list, tracks, seed, out_csv, config_path);
        if (viz->parsed())
            return cmd_viz(model_path, track_seed, out_svg, show_plans, plan_every, config_path);
    } catch (const std::invalid_argument& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    return 2;
}
