// End-to-end checks of the command-line tool. The binary path arrives as
// argv[1] from ctest; every invocation runs against a scratch directory.
#define DOCTEST_CONFIG_IMPLEMENT
#include <doctest.h>

#include <cstdio>
#include <cstdlib>
#include <sys/wait.h>
#include <filesystem>
#include <fstream>
#include <string>

#include <json.hpp>

#include "dcd/checkpoint.hpp"
#include "dcd/io.hpp"
#include "dcd/mixture.hpp"
#include "dcd/rng.hpp"

using namespace dcd;
namespace fs = std::filesystem;

namespace {

std::string g_cli;
fs::path g_work;

struct CliResult {
    int exit_code;
    std::string err;
};

CliResult run_cli(const std::string& args) {
    const fs::path err_file = g_work / "stderr.txt";
    const std::string cmd = g_cli + " " + args + " >/dev/null 2>" + err_file.string();
    const int rc = std::system(cmd.c_str());
    std::ifstream in(err_file);
    std::string err(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>{});
    return {rc == -1 ? -1 : WEXITSTATUS(rc), err};
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>{});
}

fs::path write_config(const std::string& name, int train_iters, int dcd_iters, int chain_steps) {
    nlohmann::json j = {
        {"seed", 11},
        {"dataset", "ring8"},
        {"out_dir", (g_work / "out").string()},
        {"train", {{"iters", train_iters}, {"hidden", 16}, {"batch_size", 16}}},
        {"dcd",
         {{"iters", dcd_iters},
          {"batch", 16},
          {"chain", {{"steps", chain_steps}, {"eps", 0.2}, {"noise", 0.1}, {"space", "latent"}}}}},
    };
    const fs::path p = g_work / name;
    std::ofstream out(p);
    out << j.dump(2);
    return p;
}

}  // namespace

TEST_CASE("train writes checkpoints and a log, and reruns are byte-identical") {
    const fs::path cfg = write_config("cfg.json", 25, 4, 3);
    const fs::path out1 = g_work / "run1";
    const fs::path out2 = g_work / "run2";

    CliResult r1 = run_cli("train --config " + cfg.string() + " --out " + out1.string());
    CHECK(r1.exit_code == 0);
    CHECK(fs::exists(out1 / "generator.json"));
    CHECK(fs::exists(out1 / "critic.json"));
    CHECK(fs::exists(out1 / "train_log.csv"));

    CliResult r2 = run_cli("train --config " + cfg.string() + " --out " + out2.string());
    CHECK(r2.exit_code == 0);
    CHECK(slurp(out1 / "generator.json") == slurp(out2 / "generator.json"));
    CHECK(slurp(out1 / "critic.json") == slurp(out2 / "critic.json"));
    CHECK(slurp(out1 / "train_log.csv") == slurp(out2 / "train_log.csv"));
}

TEST_CASE("missing seed is a validation error naming the field") {
    const fs::path p = g_work / "noseed.json";
    {
        std::ofstream out(p);
        out << R"({"dataset": "ring8"})";
    }
    CliResult r = run_cli("train --config " + p.string() + " --out " + (g_work / "x").string());
    CHECK(r.exit_code != 0);
    CHECK(r.err.find("\"seed\"") != std::string::npos);
}

TEST_CASE("finetune with zero iterations preserves the critic weights") {
    const fs::path cfg0 = write_config("cfg_t0.json", 25, 0, 3);
    const fs::path out = g_work / "run1";  // artifacts from the train test
    REQUIRE(fs::exists(out / "critic.json"));
    const fs::path fout = g_work / "ft0";
    CliResult r = run_cli("finetune --config " + cfg0.string() + " --critic " +
                          (out / "critic.json").string() + " --generator " +
                          (out / "generator.json").string() + " --out " + fout.string());
    CHECK(r.exit_code == 0);
    MlpCritic before = load_critic(out / "critic.json");
    MlpCritic after = load_critic(fout / "critic_dcd.json");
    for (std::size_t l = 0; l < 4; ++l) {
        CHECK(before.net.layers[l].w == after.net.layers[l].w);
        CHECK(before.net.layers[l].b == after.net.layers[l].b);
    }
    // original inputs untouched
    CHECK(fs::exists(out / "critic.json"));

    // a dcd log with exactly T rows (header + T lines)
    const fs::path cfgT = write_config("cfg_t6.json", 25, 6, 2);
    const fs::path fout2 = g_work / "ft6";
    CliResult r2 = run_cli("finetune --config " + cfgT.string() + " --critic " +
                           (out / "critic.json").string() + " --generator " +
                           (out / "generator.json").string() + " --out " + fout2.string());
    CHECK(r2.exit_code == 0);
    const std::string log = slurp(fout2 / "dcd_log.csv");
    std::size_t lines = 0;
    for (char c : log) lines += c == '\n';
    CHECK(lines == 1 + 6);
}

TEST_CASE("corrupted checkpoints are rejected with a nonzero exit") {
    const fs::path out = g_work / "run1";
    const fs::path broken = g_work / "broken.json";
    const std::string text = slurp(out / "critic.json");
    {
        std::ofstream o(broken, std::ios::binary);
        o << text.substr(0, text.size() / 3);
    }
    const fs::path cfg = write_config("cfg_b.json", 5, 2, 2);
    CliResult r = run_cli("finetune --config " + cfg.string() + " --critic " + broken.string() +
                          " --generator " + (out / "generator.json").string() + " --out " +
                          (g_work / "ftb").string());
    CHECK(r.exit_code != 0);
    CHECK(r.err.find("error") != std::string::npos);
}

TEST_CASE("sampling with the raw preset reproduces the generator output") {
    const fs::path out = g_work / "run1";
    const fs::path samples = g_work / "raw_samples.csv";
    CliResult r = run_cli("sample --generator " + (out / "generator.json").string() + " --critic " +
                          (out / "critic.json").string() + " --preset raw --n 50 --seed 11" +
                          " --samples-out " + samples.string());
    CHECK(r.exit_code == 0);

    const MlpGenerator gen = load_generator(out / "generator.json");
    Rng rng_z = Rng(11).sub(streams::kSampleLatent);
    const Tensor z = gaussian(rng_z, {50, 2});
    const Tensor expect = gen.forward(z);
    const Tensor got = read_samples_csv(samples);
    CHECK(got == expect);
}

TEST_CASE("sampling zero points yields a header-only csv") {
    const fs::path out = g_work / "run1";
    const fs::path samples = g_work / "none.csv";
    CliResult r = run_cli("sample --generator " + (out / "generator.json").string() + " --critic " +
                          (out / "critic.json").string() + " --preset raw --n 0 --samples-out " +
                          samples.string());
    CHECK(r.exit_code == 0);
    CHECK(slurp(samples) == "x0,x1\n");
}

TEST_CASE("latent-preset sampling emits finite samples and a full trajectory") {
    const fs::path out = g_work / "run1";
    const fs::path samples = g_work / "lat_samples.csv";
    const fs::path traj = g_work / "lat_traj.csv";
    CliResult r = run_cli("sample --generator " + (out / "generator.json").string() + " --critic " +
                          (out / "critic.json").string() + " --preset latent --n 8 --seed 5" +
                          " --samples-out " + samples.string() + " --trajectory-out " + traj.string());
    CHECK(r.exit_code == 0);
    const Tensor got = read_samples_csv(samples);
    CHECK(got.rows() == 8);
    CHECK(got.all_finite());
    const std::string t = slurp(traj);
    std::size_t lines = 0;
    for (char c : t) lines += c == '\n';
    CHECK(lines == 1 + 51 * 8);  // header + (K+1) snapshots per chain
}

TEST_CASE("documentation presets are refused for sampling") {
    const fs::path out = g_work / "run1";
    CliResult r = run_cli("sample --generator " + (out / "generator.json").string() + " --critic " +
                          (out / "critic.json").string() + " --preset stl --n 4 --samples-out " +
                          (g_work / "stl.csv").string());
    CHECK(r.exit_code != 0);
    CHECK(r.err.find("documentation") != std::string::npos);
}

TEST_CASE("evaluating true mixture draws reports near-perfect quality") {
    MixtureSpec spec = ring8();
    Rng rng(123);
    Tensor draws = sample(spec, rng, 20000);
    const fs::path samples = g_work / "true_draws.csv";
    write_samples_csv(samples, draws);
    const fs::path report = g_work / "true_report.json";
    CliResult r = run_cli("evaluate --dataset ring8 --samples " + samples.string() +
                          " --report-out " + report.string());
    CHECK(r.exit_code == 0);
    nlohmann::json j;
    {
        std::ifstream in(report);
        in >> j;
    }
    CHECK(j["modes_recovered"].get<int>() == 8);
    CHECK(j["high_quality_fraction"].get<double>() >= 0.999);
}

TEST_CASE("malformed sample rows are reported with their line number") {
    const fs::path bad = g_work / "bad_samples.csv";
    {
        std::ofstream out(bad);
        out << "x0,x1\n0.0,0.0\noops\n";
    }
    CliResult r = run_cli("evaluate --dataset ring8 --samples " + bad.string() + " --report-out " +
                          (g_work / "bad_report.json").string());
    CHECK(r.exit_code != 0);
    CHECK(r.err.find("line 3") != std::string::npos);
}

TEST_CASE("levelset at resolution 2 matches pointwise critic calls") {
    const fs::path out = g_work / "run1";
    const fs::path csv = g_work / "level.csv";
    const fs::path ppm = g_work / "level.ppm";
    CliResult r = run_cli("levelset --critic " + (out / "critic.json").string() +
                          " --xmin -1 --xmax 1 --ymin -1 --ymax 1 --res 2 --csv-out " + csv.string() +
                          " --ppm-out " + ppm.string());
    CHECK(r.exit_code == 0);

    const MlpCritic critic = load_critic(out / "critic.json");
    std::ifstream in(csv);
    std::string line;
    std::getline(in, line);
    CHECK(line == "x0,x1,d");
    int rows = 0;
    while (std::getline(in, line)) {
        const auto c1 = line.find(',');
        const auto c2 = line.find(',', c1 + 1);
        Tensor one({1, 2});
        one.at(0, 0) = std::stod(line.substr(0, c1));
        one.at(0, 1) = std::stod(line.substr(c1 + 1, c2 - c1 - 1));
        const double d = std::stod(line.substr(c2 + 1));
        CHECK(d == doctest::Approx(critic_value(critic, one)[0]).epsilon(1e-15));
        ++rows;
    }
    CHECK(rows == 4);
}

TEST_CASE("reversed levelset ranges are a validation error") {
    const fs::path out = g_work / "run1";
    CliResult r = run_cli("levelset --critic " + (out / "critic.json").string() +
                          " --xmin 2 --xmax -2 --ymin -1 --ymax 1 --res 4 --csv-out " +
                          (g_work / "l.csv").string() + " --ppm-out " + (g_work / "l.ppm").string());
    CHECK(r.exit_code != 0);
    CHECK(r.err.find("min < max") != std::string::npos);
}

int main(int argc, char** argv) {
    if (argc < 2) {
        std::fprintf(stderr, "usage: test_cli <path-to-dcd-binary> [doctest args]\n");
        return 2;
    }
    g_cli = argv[1];
    g_work = fs::temp_directory_path() / "dcd_cli_tests";
    fs::remove_all(g_work);
    fs::create_directories(g_work);

    doctest::Context ctx;
    ctx.applyCommandLine(argc - 1, argv + 1);
    return ctx.run();
}
