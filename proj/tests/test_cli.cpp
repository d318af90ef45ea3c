// Black-box tests that spawn the real command-line binary. The binary's path
// arrives as the first program argument; the remaining arguments go to the
// test framework.
#define DOCTEST_CONFIG_IMPLEMENT

#include <sys/wait.h>
#include <unistd.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "doctest.h"
#include "epls/checkpoint.hpp"
#include "epls/pipeline.hpp"
#include "epls/serial.hpp"

using namespace epls;
namespace fs = std::filesystem;

static std::string g_cli;

namespace {

struct CmdResult {
    int code = -1;
    std::string out;
    std::string err;
};

struct Workspace {
    fs::path root;
    std::string config;    // tiny run configuration
    std::string rolls;     // collected rollout directory
    std::string model;     // full checkpoint (encoder + dynamics)
    std::string vae_ckpt;  // encoder-only checkpoint kept aside

    static Workspace& get() {
        static Workspace w;
        return w;
    }

    std::string path(const std::string& name) const { return (root / name).string(); }

    ~Workspace() { fs::remove_all(root); }

private:
    Workspace();
};

CmdResult run_cli(const std::string& args) {
    static int call = 0;
    const std::string errfile = (fs::temp_directory_path() /
                                 ("epls_cli_err_" + std::to_string(::getpid()) + "_" +
                                  std::to_string(call++) + ".txt"))
                                    .string();
    const std::string cmd = g_cli + " " + args + " 2>" + errfile;
    FILE* p = popen(cmd.c_str(), "r");
    REQUIRE(p != nullptr);
    CmdResult r;
    char buf[4096];
    std::size_t n;
    while ((n = fread(buf, 1, sizeof buf, p)) > 0) r.out.append(buf, n);
    const int status = pclose(p);
    r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    {
        std::ifstream ef(errfile, std::ios::binary);
        r.err.assign(std::istreambuf_iterator<char>(ef), std::istreambuf_iterator<char>());
    }
    fs::remove(errfile);
    return r;
}

Workspace::Workspace() {
    root = fs::temp_directory_path() / ("epls_cli_" + std::to_string(::getpid()));
    fs::create_directories(root);
    config = path("tiny.cfg");
    std::ofstream f(config, std::ios::binary);
    f << "tiles=20\nt_max=60\n"
         "latent_dim=4\nvae_hidden1=16\nvae_hidden2=8\nhidden_dim=8\nmixtures=2\n"
         "vae_epochs=3\nvae_lr=1e-3\nvae_batch=32\n"
         "mdrnn_epochs=3\nmdrnn_lr=1e-3\nmdrnn_batch=16\nbptt_len=8\nmdrnn_iter_epochs=2\n"
         "rollouts=4\nrollout_steps=30\neval_tracks=2\niterations=1\niter_rollouts=2\n"
         "buffer_capacity=20\nhorizon=5\ngenerations=3\noracle_generations=10\nseed=5\n";
    f.close();

    rolls = path("rolls");
    model = path("model.ckpt");
    vae_ckpt = path("vae_only.ckpt");

    CmdResult c = run_cli("collect --policy random --episodes 8 --steps 30 --seed 5 --out " + rolls +
                          " --config " + config);
    REQUIRE(c.code == 0);
    c = run_cli("train --component vae --data " + rolls + " --config " + config + " --out " + model);
    REQUIRE(c.code == 0);
    fs::copy_file(model, vae_ckpt);
    c = run_cli("train --component mdrnn --data " + rolls + " --config " + config + " --out " + model);
    REQUIRE(c.code == 0);
}

int count_lines(const std::string& file) {
    std::ifstream f(file, std::ios::binary);
    REQUIRE(f.good());
    int n = 0;
    std::string line;
    while (std::getline(f, line)) ++n;
    return n;
}

std::size_t count_occurrences(const std::string& hay, const std::string& needle) {
    std::size_t n = 0;
    for (std::size_t pos = hay.find(needle); pos != std::string::npos; pos = hay.find(needle, pos + 1)) ++n;
    return n;
}

std::string slurp(const std::string& file) {
    std::ifstream f(file, std::ios::binary);
    REQUIRE(f.good());
    return {std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>()};
}

} // namespace

TEST_CASE("collect: writes episodes plus manifest, reruns are byte-identical") {
    Workspace& ws = Workspace::get();
    const std::string out_a = ws.path("c_a"), out_b = ws.path("c_b");
    CmdResult a = run_cli("collect --policy random --episodes 2 --steps 20 --seed 9 --out " + out_a +
                          " --config " + ws.config);
    CHECK(a.code == 0);
    CHECK(a.out.find("mean reward") != std::string::npos);
    CHECK(fs::exists(out_a + "/ep_0000.roll"));
    CHECK(fs::exists(out_a + "/ep_0001.roll"));
    CHECK(!fs::exists(out_a + "/ep_0002.roll"));
    CHECK(fs::exists(out_a + "/manifest.txt"));

    CmdResult b = run_cli("collect --policy random --episodes 2 --steps 20 --seed 9 --out " + out_b +
                          " --config " + ws.config);
    CHECK(b.code == 0);
    CHECK(b.out == a.out);
    CHECK(read_file(out_a + "/ep_0000.roll") == read_file(out_b + "/ep_0000.roll"));
    CHECK(read_file(out_a + "/ep_0001.roll") == read_file(out_b + "/ep_0001.roll"));
    CHECK(slurp(out_a + "/manifest.txt") == slurp(out_b + "/manifest.txt"));
}

TEST_CASE("collect: validation failures exit 2 with a reason") {
    Workspace& ws = Workspace::get();
    CmdResult r = run_cli("collect --policy random --episodes 0 --out " + ws.path("c_bad"));
    CHECK(r.code == 2);
    CHECK(r.err.find("episodes must be >= 1") != std::string::npos);

    r = run_cli("collect --policy plan --episodes 1 --out " + ws.path("c_bad"));
    CHECK(r.code == 2);
    CHECK(r.err.find("requires --model") != std::string::npos);

    r = run_cli("collect --policy jogging --episodes 1 --out " + ws.path("c_bad"));
    CHECK(r.code == 2);

    r = run_cli("collect --episodes 1"); // missing required --out
    CHECK(r.code == 2);
}

TEST_CASE("train: encoder checkpoint reloads bit-identically; loss csv rows match epochs") {
    Workspace& ws = Workspace::get();
    // re-serialize the trained encoder through the library: same bytes
    auto loaded = load_checkpoint(ws.vae_ckpt);
    ConstNamedTensors named;
    for (const auto& t : loaded) named.push_back({t.name, &t.tensor});
    const std::string resaved = ws.path("vae_resaved.ckpt");
    save_checkpoint(resaved, named);
    CHECK(read_file(resaved) == read_file(ws.vae_ckpt));

    // loss trace: header + one row per epoch (3 in the tiny config)
    CHECK(count_lines(ws.model + ".loss.csv") == 4);

    // full model checkpoint carries both components
    auto full = load_checkpoint(ws.model);
    CHECK(find_tensor(full, "vae.enc1.w") != nullptr);
    CHECK(find_tensor(full, "mdrnn.lstm.wx") != nullptr);
}

TEST_CASE("train: corrupt rollout data exits 1 naming the file; bad component exits 2") {
    Workspace& ws = Workspace::get();
    const std::string bad_dir = ws.path("rolls_bad");
    fs::create_directories(bad_dir);
    for (const auto& entry : fs::directory_iterator(ws.rolls))
        fs::copy_file(entry.path(), fs::path(bad_dir) / entry.path().filename(),
                      fs::copy_options::overwrite_existing);
    auto bytes = read_file(bad_dir + "/ep_0001.roll");
    bytes[bytes.size() / 2] ^= 0x20; // single-bit corruption mid-file
    write_file(bad_dir + "/ep_0001.roll", bytes);

    CmdResult r = run_cli("train --component vae --data " + bad_dir + " --config " + ws.config +
                          " --out " + ws.path("junk.ckpt"));
    CHECK(r.code == 1);
    CHECK(r.err.find("ep_0001.roll") != std::string::npos);

    r = run_cli("train --component transformer --data " + ws.rolls + " --out " + ws.path("junk.ckpt"));
    CHECK(r.code == 2);
    CHECK(r.err.find("vae or mdrnn") != std::string::npos);
}

TEST_CASE("evaluate: degenerate std, row counts, and deterministic reports") {
    Workspace& ws = Workspace::get();
    CmdResult one = run_cli("evaluate --model " + ws.model + " --tracks 1 --seed 4 --config " + ws.config);
    CHECK(one.code == 0);
    CHECK(one.out.find("\xc2\xb1 0.00 over 1 tracks") != std::string::npos);

    const std::string rep_a = ws.path("rep_a.csv"), rep_b = ws.path("rep_b.csv");
    CmdResult a = run_cli("evaluate --model " + ws.model + " --tracks 3 --seed 4 --report " + rep_a +
                          " --config " + ws.config);
    CHECK(a.code == 0);
    EvalReport rep = read_eval_report(rep_a);
    CHECK(rep.scores.size() == 3);
    CHECK(rep.config_text.find("tiles=20") != std::string::npos); // echoes the resolved config

    CmdResult b = run_cli("evaluate --model " + ws.model + " --tracks 3 --seed 4 --report " + rep_b +
                          " --config " + ws.config);
    CHECK(b.code == 0);
    CHECK(read_file(rep_a) == read_file(rep_b));
    CHECK(a.out == b.out);

    CHECK(run_cli("evaluate --model " + ws.model + " --tracks 0").code == 2);
    CmdResult missing = run_cli("evaluate --model " + ws.path("ghost.ckpt") + " --tracks 1");
    CHECK(missing.code == 1);
}

TEST_CASE("iterate: baseline plus one refinement, csv in iteration/mean/std shape") {
    Workspace& ws = Workspace::get();
    const std::string out = ws.path("iter_run");
    CmdResult r = run_cli("iterate --config " + ws.config + " --iterations 1 --out " + out);
    CHECK(r.code == 0);
    CHECK(r.out.find("iteration 0:") != std::string::npos);
    CHECK(r.out.find("iteration 1:") != std::string::npos);
    CHECK(r.out.find("iteration 2:") == std::string::npos);

    const std::string csv = slurp(out + "/iterations.csv");
    CHECK(csv.rfind("iteration,mean,std\n", 0) == 0);
    CHECK(count_lines(out + "/iterations.csv") == 3); // header + iterations 0 and 1

    CHECK(run_cli("iterate --config " + ws.config + " --iterations 0 --out " + out).code == 2);
}

TEST_CASE("sweep: one row per value, duplicates kept, empty list refused") {
    Workspace& ws = Workspace::get();
    const std::string csv3 = ws.path("sweep3.csv");
    CmdResult r = run_cli("sweep --model " + ws.model + " --param horizon --values 1,2,3 --tracks 2" +
                          " --seed 4 --out " + csv3 + " --config " + ws.config);
    CHECK(r.code == 0);
    const std::string body = slurp(csv3);
    CHECK(body.rfind("horizon,mean,std\n", 0) == 0);
    CHECK(count_lines(csv3) == 4);
    CHECK(body.find("\n1,") != std::string::npos);
    CHECK(body.find("\n2,") != std::string::npos);
    CHECK(body.find("\n3,") != std::string::npos);

    const std::string csvd = ws.path("sweepd.csv");
    r = run_cli("sweep --model " + ws.model + " --param generations --values 2,2 --tracks 1 --seed 4" +
                " --out " + csvd + " --config " + ws.config);
    CHECK(r.code == 0);
    CHECK(count_lines(csvd) == 3); // both duplicate rows present
    CHECK(count_occurrences(slurp(csvd), "\n2,") == 2);

    r = run_cli("sweep --model " + ws.model + " --param horizon --values , --tracks 1 --out " +
                ws.path("junk.csv"));
    CHECK(r.code == 2);
    CHECK(r.err.find("at least one value") != std::string::npos);

    r = run_cli("sweep --model " + ws.model + " --param mutation --values 1 --out " + ws.path("junk.csv"));
    CHECK(r.code == 2);
}

TEST_CASE("viz: layered svg, deterministic bytes, plan overlay optional") {
    Workspace& ws = Workspace::get();
    const std::string svg_a = ws.path("a.svg"), svg_b = ws.path("b.svg"), svg_p = ws.path("p.svg");
    CmdResult a = run_cli("viz --model " + ws.model + " --track-seed 6 --out " + svg_a + " --config " +
                          ws.config);
    CHECK(a.code == 0);
    const std::string doc = slurp(svg_a);
    CHECK(doc.rfind("<?xml", 0) == 0);
    CHECK(count_occurrences(doc, "<g id=") == 2); // track + executed only
    CHECK(doc.find("<g id=\"track\">") != std::string::npos);
    CHECK(doc.find("<g id=\"executed\">") != std::string::npos);

    CmdResult b = run_cli("viz --model " + ws.model + " --track-seed 6 --out " + svg_b + " --config " +
                          ws.config);
    CHECK(b.code == 0);
    CHECK(read_file(svg_a) == read_file(svg_b));

    CmdResult p = run_cli("viz --model " + ws.model + " --track-seed 6 --out " + svg_p +
                          " --show-plans --plan-every 4 --config " + ws.config);
    CHECK(p.code == 0);
    const std::string pdoc = slurp(svg_p);
    CHECK(count_occurrences(pdoc, "<g id=") == 3);
    CHECK(pdoc.find("<g id=\"plans\">") != std::string::npos);

    CHECK(run_cli("viz --model " + ws.model + " --plan-every 0 --out " + ws.path("x.svg")).code == 2);
}

TEST_CASE("global command surface: usage errors and help") {
    Workspace& ws = Workspace::get();
    CHECK(run_cli("").code == 2);                       // a subcommand is required
    CHECK(run_cli("teleport --out /tmp/x").code == 2);  // unknown subcommand
    CHECK(run_cli("collect --frobnicate 1 --out " + ws.path("x")).code == 2);
    CHECK(run_cli("--help").code == 0);
    CmdResult help = run_cli("--help");
    CHECK(help.out.find("collect") != std::string::npos);
    CHECK(help.out.find("evaluate") != std::string::npos);
}

int main(int argc, char** argv) {
    if (argc < 2) {
        std::fprintf(stderr, "usage: %s <path-to-cli-binary> [test options]\n", argv[0]);
        return 1;
    }
    g_cli = argv[1];
    doctest::Context ctx;
    ctx.applyCommandLine(argc - 1, argv + 1);
    return ctx.run();
}
