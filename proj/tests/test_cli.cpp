#include <doctest.h>

#include <cstdlib>
#include <fstream>
#include <string>

#include "matchlab/manifest.hpp"
#include "matchlab/rng.hpp"

using namespace matchlab;
namespace fs = std::filesystem;

namespace {

int run_cli(const std::string& args) {
    std::string cmd = std::string(MATCHLAB_CLI_PATH) + " " + args + " >/dev/null 2>&1";
    int status = std::system(cmd.c_str());
    return WEXITSTATUS(status);
}

std::uint64_t tree_hash(const fs::path& dir) {
    std::vector<fs::path> files;
    for (const auto& entry : fs::recursive_directory_iterator(dir)) {
        if (entry.is_regular_file()) files.push_back(entry.path());
    }
    std::sort(files.begin(), files.end());
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (const auto& p : files) {
        h = fnv1a(fs::relative(p, dir).string(), h);
        std::ifstream f(p, std::ios::binary);
        std::string bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
        h = fnv1a(bytes, h);
    }
    return h;
}

fs::path scratch_dir() {
    fs::path dir = fs::temp_directory_path() / "matchlab_cli_test";
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

void write_config(const fs::path& path, const std::string& extra = "") {
    std::ofstream f(path);
    f << "seed = 5\n"
         "[synth]\n"
         "num_classes = 2\n"
         "images_per_class = 6\n"
         "image_size = 32\n"
         "keypoints_per_class = 5\n"
         "labeled_fraction = 0.5\n"
         "val_per_class = 1\n"
         "test_per_class = 2\n"
         "[train]\n"
         "epochs_per_iteration = 2\n"
         "num_iterations = 2\n"
         "steps_per_epoch = 3\n"
         "batch_labeled = 2\n"
         "batch_unlabeled = 3\n"
         "unlabeled_budget_per_class = 4\n"
      << extra;
}

}  // namespace

TEST_CASE("cli: bad usage exits 2, config errors exit 2") {
    CHECK(run_cli("definitely-not-a-subcommand") == 2);
    CHECK(run_cli("synth") == 2);  // missing required --out

    fs::path dir = scratch_dir();
    std::ofstream bad(dir / "bad.cfg");
    bad << "[train]\nnot_a_real_key = 1\n";
    bad.close();
    CHECK(run_cli("synth --config " + (dir / "bad.cfg").string() + " --out " +
                  (dir / "out").string()) == 2);
    fs::remove_all(dir);
}

TEST_CASE("cli: synth is hash-deterministic and mine-pairs exports CSV") {
    fs::path dir = scratch_dir();
    write_config(dir / "c.cfg");

    REQUIRE(run_cli("synth --config " + (dir / "c.cfg").string() + " --out " +
                    (dir / "d1").string() + " --seed 7") == 0);
    REQUIRE(run_cli("synth --config " + (dir / "c.cfg").string() + " --out " +
                    (dir / "d2").string() + " --seed 7") == 0);
    CHECK(tree_hash(dir / "d1") == tree_hash(dir / "d2"));

    REQUIRE(run_cli("synth --config " + (dir / "c.cfg").string() + " --out " +
                    (dir / "d3").string() + " --seed 8") == 0);
    CHECK(tree_hash(dir / "d1") != tree_hash(dir / "d3"));

    // resolved-config snapshot written next to the outputs
    CHECK(fs::exists(dir / "d1" / "resolved.cfg"));

    REQUIRE(run_cli("mine-pairs --manifest " + (dir / "d1" / "manifest.json").string() +
                    " --what universe --out " + (dir / "pairs.csv").string()) == 0);
    std::ifstream csv(dir / "pairs.csv");
    std::string header;
    std::getline(csv, header);
    CHECK(header == "src_id,tgt_id,labeled");
    int rows = 0;
    std::string line;
    while (std::getline(csv, line))
        if (!line.empty()) ++rows;
    CHECK(rows == 2 * 3 * 2);  // 2 classes, 3 train images each, ordered pairs

    fs::remove_all(dir);
}

TEST_CASE("cli: train, eval, annotate, corrupt, robustness pipeline") {
    fs::path dir = scratch_dir();
    write_config(dir / "c.cfg");
    const std::string manifest = (dir / "data" / "manifest.json").string();

    REQUIRE(run_cli("synth --config " + (dir / "c.cfg").string() + " --out " +
                    (dir / "data").string()) == 0);
    REQUIRE(run_cli("train --config " + (dir / "c.cfg").string() + " --manifest " + manifest +
                    " --out " + (dir / "run").string()) == 0);
    CHECK(fs::exists(dir / "run" / "final.ckpt"));
    CHECK(fs::exists(dir / "run" / "metrics.csv"));
    CHECK(fs::exists(dir / "run" / "generations.csv"));
    CHECK(fs::exists(dir / "run" / "gen00.ckpt.meta.txt"));

    REQUIRE(run_cli("eval --checkpoint " + (dir / "run" / "final.ckpt").string() +
                    " --manifest " + manifest + " --out " + (dir / "report").string()) == 0);
    CHECK(fs::exists(dir / "report.csv"));
    CHECK(fs::exists(dir / "report.txt"));

    REQUIRE(run_cli("annotate --checkpoint " + (dir / "run" / "final.ckpt").string() +
                    " --manifest " + manifest + " --tau 0.5 --budget 3 --out " +
                    (dir / "labels").string()) == 0);
    CHECK(fs::exists(dir / "labels" / "index.txt"));

    REQUIRE(run_cli("corrupt --manifest " + manifest + " --out " + (dir / "corr").string() +
                    " --seed 3 --workers 2") == 0);
    // 2 classes x 2 test images x 75 variants
    std::size_t files = 0;
    for (const auto& entry : fs::recursive_directory_iterator(dir / "corr")) {
        if (entry.is_regular_file() && entry.path().extension() != ".json") ++files;
    }
    CHECK(files == 4 * 75);
    CHECK(fs::exists(dir / "corr" / "manifest.json"));

    REQUIRE(run_cli("robustness --checkpoint " + (dir / "run" / "final.ckpt").string() +
                    " --manifest " + manifest + " --corrupted " + (dir / "corr").string() +
                    " --out " + (dir / "robust.csv").string() + " --workers 2") == 0);
    CHECK(fs::exists(dir / "robust.csv"));

    fs::remove_all(dir);
}

TEST_CASE("cli: sweep and ablate emit one row per configuration") {
    fs::path dir = scratch_dir();
    write_config(dir / "c.cfg");
    const std::string manifest = (dir / "data" / "manifest.json").string();
    REQUIRE(run_cli("synth --config " + (dir / "c.cfg").string() + " --out " +
                    (dir / "data").string()) == 0);

    REQUIRE(run_cli("sweep --param tau --values 0.3,0.7 --config " + (dir / "c.cfg").string() +
                    " --manifest " + manifest + " --out " + (dir / "sweep.csv").string()) == 0);
    std::ifstream csv(dir / "sweep.csv");
    std::string line;
    std::getline(csv, line);
    CHECK(line == "param,value,seed,final_pck");
    int rows = 0;
    while (std::getline(csv, line))
        if (!line.empty()) ++rows;
    CHECK(rows == 4);  // 2 values x (1 seed + median row)

    REQUIRE(run_cli("ablate --config " + (dir / "c.cfg").string() + " --manifest " + manifest +
                    " --out " + (dir / "ablate.csv").string()) == 0);
    std::ifstream acsv(dir / "ablate.csv");
    std::getline(acsv, line);
    CHECK(line == "config,seed,final_pck");
    rows = 0;
    while (std::getline(acsv, line))
        if (!line.empty()) ++rows;
    CHECK(rows == 8);  // 4 configs x (1 seed + median row)

    fs::remove_all(dir);
}
