#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sys/wait.h>

namespace fs = std::filesystem;

namespace {

const fs::path kWork = fs::temp_directory_path() / "sgad_cli_test";

struct Run {
  int code;
  std::string output;
};

Run run(const std::string& args) {
  const auto log = kWork / "last.log";
  const std::string cmd = std::string(SGAD_CLI_PATH) + " " + args + " > " + log.string() + " 2>&1";
  const int status = std::system(cmd.c_str());
  std::ifstream in(log);
  return {WIFEXITED(status) ? WEXITSTATUS(status) : -1,
          std::string(std::istreambuf_iterator<char>(in), {})};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

struct Workspace {
  Workspace() {
    fs::remove_all(kWork);
    fs::create_directories(kWork);
  }
};

std::string at(const std::string& name) { return (kWork / name).string(); }

}  // namespace

TEST_CASE("cli pipeline") {
  Workspace ws;

  SUBCASE("unknown flag exits 2 with usage") {
    const auto r = run("gen-data --bogus 1");
    CHECK(r.code == 2);
    CHECK(r.output.find("Usage") != std::string::npos);
    CHECK(run("frobnicate").code == 2);
  }

  SUBCASE("config errors exit 2 naming the key") {
    auto r = run("gen-data --env maze --n 5 --out " + at("d.bin") + " --set strategy.bogus=1");
    CHECK(r.code == 2);
    CHECK(r.output.find("strategy.bogus") != std::string::npos);
    r = run("eval --ckpt x --beta nope");
    CHECK(r.code == 2);
    CHECK(r.output.find("strategy.beta") != std::string::npos);
    r = run("gen-data --n 5");
    CHECK(r.code == 2);
    CHECK(r.output.find("run.out") != std::string::npos);
  }

  SUBCASE("gen-data, train, eval and plot with manifests that reproduce") {
    REQUIRE(run("gen-data --env maze --preset low --n 12 --seed 7 --out " + at("d.bin")).code == 0);
    CHECK(fs::exists(at("d.bin.manifest.ini")));
    const auto data = slurp(at("d.bin"));
    fs::rename(at("d.bin"), at("d0.bin"));
    REQUIRE(run("gen-data --config " + at("d.bin.manifest.ini")).code == 0);
    CHECK(slurp(at("d.bin")) == data);

    REQUIRE(run("train --data " + at("d.bin") + " --out " + at("c.ckpt") +
                " --steps 30 --seed 1 --set model.hidden=16,16 --set train.eval_interval=10")
                .code == 0);
    const auto ckpt = slurp(at("c.ckpt"));
    fs::remove(at("c.ckpt"));
    REQUIRE(run("train --config " + at("c.ckpt.manifest.ini")).code == 0);
    CHECK(slurp(at("c.ckpt")) == ckpt);

    const std::string common = "--ckpt " + at("c.ckpt") +
                               " --env maze --episodes 6 --seed 3 --set schedule.n_steps=4"
                               " --set env.max_steps=20";
    REQUIRE(run("eval " + common + " --strategy selfgad --beta 0 --out " + at("g.csv")).code == 0);
    REQUIRE(run("eval " + common + " --strategy random --out " + at("r.csv")).code == 0);
    const auto g = slurp(at("g.csv")), r = slurp(at("r.csv"));
    // Identical apart from the strategy column.
    CHECK(g.substr(g.find("\n")).find(",selfgad,") != std::string::npos);
    CHECK(g.substr(g.find(",0,0,6,")) == r.substr(r.find(",0,0,6,")));

    fs::remove(at("g.csv"));
    REQUIRE(run("eval --config " + at("g.csv.manifest.ini")).code == 0);
    CHECK(slurp(at("g.csv")) == g);

    REQUIRE(run("tune-beta " + common + " --betas 0,0.1 --out " + at("t.csv")).code == 0);
    REQUIRE(run("sweep --config " + at("g.csv.manifest.ini") + " --set sweep.checkpoints=low:" +
                at("c.ckpt") + " --set sweep.horizons=1,2 --out " + at("s.csv"))
                .code == 0);
    const auto sweep_csv = slurp(at("s.csv"));
    CHECK(std::count(sweep_csv.begin(), sweep_csv.end(), '\n') == 3);
    fs::remove(at("s.csv"));
    REQUIRE(run("sweep --config " + at("s.csv.manifest.ini")).code == 0);
    CHECK(slurp(at("s.csv")) == sweep_csv);

    REQUIRE(run("plot --csv " + at("s.csv") + " --out-dir " + at("plots")).code == 0);
    CHECK(fs::exists(at("plots/success_vs_horizon.svg")));
    CHECK(fs::exists(at("plots/plots.manifest.ini")));
  }

  SUBCASE("plot on an empty csv warns") {
    std::ofstream(at("empty.csv")) << "env_id,preset,goal_speed,h,n_samples,strategy,beta,obs_noise_sigma,"
                                      "n_episodes,successes,success_rate,wilson_lo,wilson_hi,mean_steps,"
                                      "mean_mode_switches\n";
    const auto r = run("plot --csv " + at("empty.csv") + " --out-dir " + at("none"));
    CHECK(r.code == 0);
    CHECK(r.output.find("warning") != std::string::npos);
  }
}
