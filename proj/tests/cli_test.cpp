#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "potlab/io.hpp"

using namespace potlab;
namespace fs = std::filesystem;

namespace {

const fs::path kBin = POTLAB_BIN;

fs::path work_dir() {
    auto d = fs::temp_directory_path() / "potlab_cli_test";
    fs::create_directories(d);
    return d;
}

int run(const std::string& args, const fs::path& log) {
    std::string cmd = kBin.string() + " " + args + " >" + log.string() + " 2>&1";
    int rc = std::system(cmd.c_str());
    return rc == -1 ? -1 : WEXITSTATUS(rc);
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_config(const fs::path& p, const std::string& output_dir) {
    std::ofstream out(p);
    out << R"({
  "domain": {"kind": "disk", "radius": 0.5},
  "resolution": 12,
  "V0_fraction": 0.3,
  "seed": 42,
  "output_dir": ")" << output_dir
        << R"(",
  "optimizer": {"n_starts": 2},
  "stability": {"delta_fractions": [0.1, 0.2], "n_per_delta": 4},
  "bathtub": {"n_trials": 25},
  "control": {"T_list": [0.5, 1.0], "nt_per_unit": 8, "max_iter": 3}
})";
}

} // namespace

TEST_CASE("config problems are reported with their field path") {
    auto dir = work_dir();
    auto log = dir / "log.txt";

    std::ofstream(dir / "empty.json") << "{}";
    CHECK(run("--config " + (dir / "empty.json").string() + " optimize", log) == 1);
    CHECK(slurp(log).find("config.resolution") != std::string::npos);

    std::ofstream(dir / "lowres.json")
        << R"({"resolution": 4, "V0_fraction": 0.5, "output_dir": "x"})";
    CHECK(run("--config " + (dir / "lowres.json").string() + " optimize", log) == 1);
    CHECK(slurp(log).find("at least 8") != std::string::npos);

    std::ofstream(dir / "badmass.json")
        << R"({"resolution": 12, "V0_fraction": 1.5, "output_dir": "x"})";
    CHECK(run("--config " + (dir / "badmass.json").string() + " optimize", log) == 1);
    CHECK(slurp(log).find("V0_fraction") != std::string::npos);

    std::ofstream(dir / "notjson.json") << "{nope";
    CHECK(run("--config " + (dir / "notjson.json").string() + " optimize", log) == 1);

    CHECK(run("--config " + (dir / "missing.json").string() + " optimize", log) == 1);
    CHECK(run("--config " + (dir / "empty.json").string(), log) != 0); // no subcommand
}

TEST_CASE("the full pipeline produces the documented artifacts") {
    auto dir = work_dir();
    auto out = dir / "full";
    fs::remove_all(out);
    write_config(dir / "full.json", out.string());

    REQUIRE(run("--config " + (dir / "full.json").string() + " all", dir / "full_log.txt") == 0);

    for (const char* name :
         {"registry.csv", "potential_0.csv", "potential_0.pgm", "eigenfunction_0.csv",
          "stability_samples.csv", "stability_summary.csv", "stability_report.csv",
          "bathtub_ratios.csv", "shape_check.csv", "shape_report.csv", "trajectory.csv",
          "turnpike_report.csv", "turnpike_sweep.csv", "sweep_summary.csv", "manifest.json"})
        CHECK(fs::exists(out / name));

    std::string reg = slurp(out / "registry.csv");
    CHECK(reg.find("entry_id,lambda,mu") == 0);
    CHECK(reg.find("\n0,") != std::string::npos); // at least one entry row

    // the manifest lists every artifact with its current content hash
    std::string man = slurp(out / "manifest.json");
    CHECK(man.find("\"command\": \"all\"") != std::string::npos);
    CHECK(man.find("\"seed\": 42") != std::string::npos);
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx",
                  static_cast<unsigned long long>(hash_file(out / "registry.csv")));
    CHECK(man.find(buf) != std::string::npos);
}

TEST_CASE("reruns with one seed are byte-identical") {
    auto dir = work_dir();
    auto out_a = dir / "rep_a";
    auto out_b = dir / "rep_b";
    fs::remove_all(out_a);
    fs::remove_all(out_b);
    write_config(dir / "rep.json", out_a.string());

    REQUIRE(run("--config " + (dir / "rep.json").string() + " all", dir / "rep_log.txt") == 0);
    REQUIRE(run("--config " + (dir / "rep.json").string() + " --output " + out_b.string() +
                    " all",
                dir / "rep_log.txt") == 0);

    int compared = 0;
    for (const auto& entry : fs::directory_iterator(out_a)) {
        auto ext = entry.path().extension();
        if (ext != ".csv" && ext != ".pgm") continue; // manifest carries wall time
        auto twin = out_b / entry.path().filename();
        REQUIRE(fs::exists(twin));
        CHECK(hash_file(entry.path()) == hash_file(twin));
        ++compared;
    }
    CHECK(compared >= 14);

    // a different seed must change the sampled artifacts
    auto out_c = dir / "rep_c";
    fs::remove_all(out_c);
    REQUIRE(run("--config " + (dir / "rep.json").string() + " --output " + out_c.string() +
                    " --seed 43 all",
                dir / "rep_log.txt") == 0);
    CHECK(hash_file(out_a / "stability_samples.csv") !=
          hash_file(out_c / "stability_samples.csv"));
}

TEST_CASE("numerical failures keep partial outputs and exit with code two") {
    auto dir = work_dir();
    auto out = dir / "partial";
    fs::remove_all(out);
    std::ofstream(dir / "infeasible.json") << R"({
  "domain": {"kind": "disk", "radius": 0.5},
  "resolution": 12,
  "V0_fraction": 0.9,
  "seed": 1,
  "output_dir": ")" << out.string()
                                           << R"(",
  "optimizer": {"n_starts": 1},
  "stability": {"delta_fractions": [1.5], "n_per_delta": 2}
})";
    CHECK(run("--config " + (dir / "infeasible.json").string() + " stability",
              dir / "partial_log.txt") == 2);
    CHECK(fs::exists(out / "registry.csv"));
    std::string man = slurp(out / "manifest.json");
    CHECK(man.find("\"failed\": true") != std::string::npos);
}

TEST_CASE("single commands run standalone") {
    auto dir = work_dir();
    auto out = dir / "solo";
    fs::remove_all(out);
    write_config(dir / "solo.json", out.string());
    auto cfg = (dir / "solo.json").string();

    CHECK(run("--config " + cfg + " bathtub-check", dir / "solo_log.txt") == 0);
    CHECK(fs::exists(out / "bathtub_ratios.csv"));
    CHECK(run("--config " + cfg + " control", dir / "solo_log.txt") == 0);
    CHECK(fs::exists(out / "trajectory.csv"));
}
