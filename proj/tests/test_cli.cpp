#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

// exercises the installed binary end to end: exit codes, artifact staging,
// idempotence, and provenance checks

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>

namespace fs = std::filesystem;

namespace {

std::string binary() {
    const char* env = std::getenv("PODNN_BIN");
    REQUIRE(env != nullptr);
    return env;
}

int run(const std::string& args) {
    const std::string cmd = binary() + " " + args + " > /dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    REQUIRE(status != -1);
    return WEXITSTATUS(status);
}

struct TempDir {
    fs::path path;
    TempDir() {
        path = fs::temp_directory_path() / ("podnn_cli_" + std::to_string(::getpid()));
        fs::remove_all(path);
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
    std::string file(const std::string& name) const { return (path / name).string(); }
};

void write_mini_config(const std::string& path, double beta = 0.01, int max_iter = 20) {
    std::ofstream out(path);
    out << R"({
  "mesh": {"n_elements": 16},
  "time": {"n_t": 6},
  "physics": {"beta": )"
        << beta << R"(},
  "sampling": {"n_p": 6, "n_test": 2, "seed": 3},
  "sqp": {"max_iter": )"
        << max_iter << R"(},
  "pod": {"n_rb": 4},
  "nn": {"hidden_width": 8,
         "train": {"max_epochs": 60, "patience": 60, "batch_size": 4,
                   "learning_rate": 0.003, "validation_fraction": 0.25, "seed": 4}}
})";
}

std::string file_bytes(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    REQUIRE(bool(in));
    return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

}  // namespace

TEST_CASE("missing or malformed configuration exits with code 2") {
    TempDir dir;
    CHECK(run("--config /nonexistent.json --out " + dir.file("a") + " sample") == 2);

    const std::string bad = dir.file("bad.json");
    {
        std::ofstream out(bad);
        out << R"({"mesh": {"n_elementz": 16}})";
    }
    CHECK(run("--config " + bad + " --out " + dir.file("a") + " sample") == 2);

    CHECK(run("definitely-not-a-subcommand") == 2);
}

TEST_CASE("full chain, idempotence, and provenance rejection") {
    TempDir dir;
    const std::string cfg = dir.file("mini.json");
    write_mini_config(cfg);
    const std::string base = "--config " + cfg + " --out " + dir.file("art") + " ";

    REQUIRE(run(base + "sample") == 0);
    REQUIRE(run(base + "--jobs 2 snapshot") == 0);
    REQUIRE(run(base + "pod") == 0);
    REQUIRE(run(base + "train") == 0);
    REQUIRE(run(base + "infer --mu 0.75,0.2,0.05") == 0);
    REQUIRE(run(base + "bench") == 0);
    CHECK(run(base + "check " + dir.file("art/samples.podnn") + " " + dir.file("art/snapshots.podnn") + " " +
              dir.file("art/basis.podnn") + " " + dir.file("art/model.podnn")) == 0);

    CHECK(fs::exists(dir.file("art/eval.csv")));
    {
        std::ifstream in(dir.file("art/eval.csv"));
        std::string header;
        std::getline(in, header);
        CHECK(header == "sample_id,h,omega,epsilon,E,obj_discrepancy,t_online,t_hf");
    }

    // identical inference runs produce byte-identical containers
    const std::string first = file_bytes(dir.file("art/infer_control.podnn"));
    REQUIRE(run(base + "infer --mu 0.75,0.2,0.05") == 0);
    CHECK(file_bytes(dir.file("art/infer_control.podnn")) == first);

    // rerunning a stage with the same config reproduces the artifact bytes
    const std::string basis_bytes = file_bytes(dir.file("art/basis.podnn"));
    REQUIRE(run(base + "pod") == 0);
    CHECK(file_bytes(dir.file("art/basis.podnn")) == basis_bytes);

    // a semantically different config must be rejected against old artifacts
    const std::string cfg2 = dir.file("mini2.json");
    write_mini_config(cfg2, 0.02);
    CHECK(run("--config " + cfg2 + " --out " + dir.file("art") + " pod") == 3);
    CHECK(run("--config " + cfg2 + " --out " + dir.file("art") + " bench") == 3);

    // corrupted container fails the check with the provenance exit code
    {
        std::ofstream out(dir.file("art/samples.podnn"), std::ios::binary | std::ios::trunc);
        out << "garbage";
    }
    CHECK(run(base + "check " + dir.file("art/samples.podnn")) == 3);
}

TEST_CASE("solver failures beyond the budget exit with code 4") {
    TempDir dir;
    const std::string cfg = dir.file("starved.json");
    write_mini_config(cfg, 0.01, 1);  // one Newton step cannot converge
    const std::string base = "--config " + cfg + " --out " + dir.file("art") + " ";
    REQUIRE(run(base + "sample") == 0);
    CHECK(run(base + "snapshot") == 4);
}

TEST_CASE("extrapolation warning is printed for out-of-box parameters") {
    TempDir dir;
    const std::string cfg = dir.file("mini.json");
    write_mini_config(cfg);
    const std::string base = "--config " + cfg + " --out " + dir.file("art") + " ";
    REQUIRE(run(base + "sample") == 0);
    REQUIRE(run(base + "snapshot") == 0);
    REQUIRE(run(base + "pod") == 0);
    REQUIRE(run(base + "train") == 0);

    const std::string cmd = binary() + " " + base + "infer --mu 2.0,0.2,0.05 > " + dir.file("log.txt") + " 2>&1";
    REQUIRE(std::system(cmd.c_str()) != -1);
    const std::string log = file_bytes(dir.file("log.txt"));
    CHECK(log.find("extrapolation") != std::string::npos);
}
