#include <filesystem>
#include <sstream>
#include <string>
#include <vector>

#include "doctest.h"
#include "json.hpp"
#include "weakprog/cli.hpp"
#include "weakprog/textio.hpp"

using namespace weakprog;
namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

const fs::path kDemo = fs::path(WEAKPROG_SOURCE_DIR) / "configs" / "demo.ini";

struct Outcome {
    int code = 0;
    std::string out, err;
};

Outcome invoke(std::vector<std::string> args) {
    std::ostringstream out, err;
    Outcome o;
    o.code = weakprog::cli::run(args, out, err);
    o.out = out.str();
    o.err = err.str();
    return o;
}

fs::path scratch(const std::string& name) {
    const auto dir = fs::temp_directory_path() / ("weakprog_cli_" + name);
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

/// simulate -> prepare (two schemes) -> train (two) -> baselines -> evaluate, on a shrunken demo config.
void pipeline(const fs::path& root) {
    const std::string c = kDemo.string();
    const std::vector<std::string> fast{"--quiet", "--set", "train.epochs=2", "--set", "sim.n_glaucoma_subjects=40"};
    auto step = [&](std::vector<std::string> args) {
        args.insert(args.begin(), fast.begin(), fast.end());
        const auto o = invoke(args);
        INFO(o.err);
        REQUIRE(o.code == 0);
    };
    const auto p = [&](const char* n) { return (root / n).string(); };
    step({"simulate", "--config", c, "--out", p("sim")});
    step({"prepare", "--cohort", p("sim"), "--config", c, "--scheme", "noisepu", "--out", p("data_pu")});
    step({"prepare", "--cohort", p("sim"), "--config", c, "--scheme", "regcon", "--out", p("data_rc")});
    step({"train", "--data", p("data_pu"), "--config", c, "--scheme", "noisepu", "--run", p("run_npu")});
    step({"train", "--data", p("data_rc"), "--config", c, "--scheme", "regcon", "--run", p("run_rc")});
    step({"baseline", "--data", p("data_pu"), "--which", "ols", "--run", p("run_ols")});
    step({"baseline", "--data", p("data_pu"), "--which", "gpa", "--run", p("run_gpa")});
    step({"evaluate", "--data", p("data_pu"), "--config", c, "--runs", p("run_npu"), p("run_rc"), p("run_ols"),
          p("run_gpa"), "--out", p("eval")});
}

std::vector<std::string> files_under(const fs::path& root) {
    std::vector<std::string> out;
    for (const auto& e : fs::recursive_directory_iterator(root))
        if (e.is_regular_file()) out.push_back(fs::relative(e.path(), root).generic_string());
    std::sort(out.begin(), out.end());
    return out;
}

json load_json(const fs::path& p) { return json::parse(read_file(p)); }

void check_report_schema(const json& j) {
    CHECK(j.at("format") == "evalreport/1");
    CHECK(j.at("truth_source").is_string());
    CHECK(j.at("metadata").is_object());
    CHECK(j.at("n_windows").is_number_unsigned());
    CHECK(j.at("n_truth_positive").is_number_unsigned());
    REQUIRE(j.at("schemes").is_array());
    for (const auto& s : j.at("schemes")) {
        CHECK(s.at("name").is_string());
        for (const char* k : {"value", "variance", "lo", "hi", "level"}) CHECK(s.at("auc").at(k).is_number());
        CHECK(s.at("auc").at("method") == "delong");
        CHECK(s.at("achieved_specificity").is_number());
        CHECK((s.at("threshold").is_number() || s.at("threshold").is_string()));
        CHECK(s.at("hit_ratio").at("method") == "wilson");
        for (const char* k : {"tp", "fp", "fn", "tn"}) CHECK(s.at("confusion").at(k).is_number_unsigned());
        CHECK(s.at("metrics").at("mcc").is_number());
        CHECK((s.at("slope_comparison").is_null() || s.at("slope_comparison").is_object()));
    }
    for (const auto& t : j.at("mcnemar")) {
        CHECK(t.at("a").is_string());
        CHECK(t.at("b").is_string());
    }
}

}  // namespace

TEST_CASE("cli: full demo pipeline emits a valid report") {
    const auto root = scratch("pipeline");
    pipeline(root);
    const auto report = load_json(root / "eval" / "report.json");
    check_report_schema(report);
    REQUIRE(report.at("schemes").size() == 4);
    for (const auto& s : report.at("schemes")) {
        CAPTURE(s.at("name").get<std::string>());
        CHECK(s.at("achieved_specificity").get<double>() >= 0.95);
    }
    for (const char* f : {"report.md", "scores.csv", "roc.svg", "eval.ini", "manifest.json"})
        CHECK(fs::exists(root / "eval" / f));

    SUBCASE("manifests list every output with its hash") {
        for (const char* dir : {"sim", "data_pu", "run_npu", "run_ols", "eval"}) {
            CAPTURE(dir);
            const auto m = load_json(root / dir / "manifest.json");
            CHECK(m.at("status") == "ok");
            std::vector<std::string> listed;
            for (const auto& o : m.at("outputs")) {
                listed.push_back(o.at("path"));
                CHECK(o.at("hash") == hex64(fnv1a64(read_file(root / dir / o.at("path").get<std::string>()))));
            }
            auto actual = files_under(root / dir);
            actual.erase(std::remove(actual.begin(), actual.end(), "manifest.json"), actual.end());
            CHECK(listed == actual);
        }
    }

    SUBCASE("downstream manifests carry the upstream config hash") {
        const auto sim = load_json(root / "sim" / "manifest.json");
        const auto data = load_json(root / "data_pu" / "manifest.json");
        const auto run = load_json(root / "run_npu" / "manifest.json");
        REQUIRE(data.at("upstream").size() == 1);
        CHECK(data.at("upstream")[0].at("config_hash") == sim.at("config_hash"));
        REQUIRE(run.at("upstream").size() == 1);
        CHECK(run.at("upstream")[0].at("config_hash") == data.at("config_hash"));
        CHECK(fs::exists(root / "run_npu" / "config.ini"));
    }

    SUBCASE("report re-renders the evaluation byte-identically") {
        const auto o = invoke({"--quiet", "report", "--eval", (root / "eval").string(), "--out", (root / "rep").string()});
        REQUIRE(o.code == 0);
        for (const char* f : {"report.json", "report.md", "scores.csv", "roc.svg"})
            CHECK(read_file(root / "rep" / f) == read_file(root / "eval" / f));
        const auto md = invoke({"report", "--eval", (root / "eval").string()});
        CHECK(md.out == read_file(root / "eval" / "report.md"));
    }

    SUBCASE("saliency from the selected checkpoint") {
        const auto o = invoke({"--quiet", "saliency", "--run", (root / "run_npu").string(), "--data",
                            (root / "data_pu").string(), "--index", "3", "--out", (root / "sal").string()});
        INFO(o.err);
        REQUIRE(o.code == 0);
        const auto lines = split(read_file(root / "sal" / "saliency.csv"), '\n');
        CHECK(lines[0] == "visit,time,point,value,saliency");
        CHECK(lines.size() == 1 + 5 * 32 + 1);  // header, tau x P rows, trailing newline
        CHECK(read_file(root / "sal" / "saliency.svg").find("<svg") != std::string::npos);
        const auto bad = invoke({"--quiet", "saliency", "--run", (root / "run_npu").string(), "--data",
                              (root / "data_pu").string(), "--id", "9999/0/0", "--out", (root / "sal2").string()});
        CHECK(bad.code == 3);
    }
}

TEST_CASE("cli: identical inputs give byte-identical outputs") {
    const auto a = scratch("det_a");
    const auto b = scratch("det_b");
    pipeline(a);
    pipeline(b);
    const auto fa = files_under(a);
    REQUIRE(fa == files_under(b));
    for (const auto& f : fa) {
        if (fs::path(f).filename() == "manifest.json") continue;
        CAPTURE(f);
        CHECK(read_file(a / f) == read_file(b / f));
    }
    // Manifests differ only in timestamps and recorded paths.
    const auto ma = load_json(a / "eval" / "manifest.json");
    const auto mb = load_json(b / "eval" / "manifest.json");
    CHECK(ma.at("outputs") == mb.at("outputs"));
    CHECK(ma.at("config_hash") == mb.at("config_hash"));
}

TEST_CASE("cli: seed flag overrides configuration seeds") {
    const auto root = scratch("seed");
    const std::string c = kDemo.string();
    REQUIRE(invoke({"--quiet", "simulate", "--config", c, "--out", (root / "a").string()}).code == 0);
    REQUIRE(invoke({"--quiet", "--seed", "99", "simulate", "--config", c, "--out", (root / "b").string()}).code == 0);
    REQUIRE(invoke({"--quiet", "simulate", "--config", c, "--set", "sim.seed=99", "--out", (root / "c").string()})
                .code == 0);
    CHECK(read_file(root / "a" / "cohort.txt") != read_file(root / "b" / "cohort.txt"));
    CHECK(read_file(root / "b" / "cohort.txt") == read_file(root / "c" / "cohort.txt"));
    CHECK(load_json(root / "b" / "manifest.json").at("seed") == 99);
}

TEST_CASE("cli: exit codes") {
    const auto root = scratch("codes");
    const std::string c = kDemo.string();
    SUBCASE("usage errors are configuration errors") {
        CHECK(invoke({}).code == 2);
        CHECK(invoke({"frobnicate"}).code == 2);
        CHECK(invoke({"simulate"}).code == 2);
        CHECK(invoke({"--help"}).code == 0);
    }
    SUBCASE("bad configuration names the field") {
        const auto o = invoke({"simulate", "--config", c, "--set", "sim.colour=blue", "--out", (root / "x").string()});
        CHECK(o.code == 2);
        CHECK(o.err.find("sim.colour") != std::string::npos);
        const auto m = invoke({"simulate", "--config", (root / "missing.ini").string(), "--out", (root / "y").string()});
        CHECK(m.code == 2);
        CHECK(m.err.find("missing.ini") != std::string::npos);
    }
    SUBCASE("missing or malformed data") {
        const auto o = invoke({"train", "--data", (root / "nowhere").string(), "--run", (root / "r").string()});
        CHECK(o.code == 3);
        CHECK(o.err.find("nowhere") != std::string::npos);
        const auto m = load_json(root / "r" / "manifest.json");
        CHECK(m.at("status") == "failed");
        CHECK(m.at("error").get<std::string>().find("nowhere") != std::string::npos);
        write_file(root / "bad" / "cohort.txt", "not a cohort\n");
        CHECK(invoke({"prepare", "--cohort", (root / "bad").string(), "--scheme", "noisepu", "--out",
                   (root / "d").string()})
                  .code == 3);
    }
    SUBCASE("divergence is a numerical failure") {
        REQUIRE(invoke({"--quiet", "--set", "sim.n_glaucoma_subjects=30", "simulate", "--config", c, "--out",
                     (root / "sim").string()})
                    .code == 0);
        REQUIRE(invoke({"--quiet", "prepare", "--cohort", (root / "sim").string(), "--config", c, "--scheme", "noisepu",
                     "--out", (root / "data").string()})
                    .code == 0);
        const auto o = invoke({"--quiet", "--set", "schedule.base_lr=1e308", "train", "--data", (root / "data").string(),
                            "--config", c, "--run", (root / "run").string()});
        CHECK(o.code == 4);
        CHECK(load_json(root / "run" / "manifest.json").at("status") == "failed");
    }
    SUBCASE("regcon needs endpoint labels that a noisepu dataset withholds") {
        REQUIRE(invoke({"--quiet", "--set", "sim.n_glaucoma_subjects=30", "simulate", "--config", c, "--out",
                     (root / "sim").string()})
                    .code == 0);
        REQUIRE(invoke({"--quiet", "prepare", "--cohort", (root / "sim").string(), "--config", c, "--scheme", "noisepu",
                     "--out", (root / "data").string()})
                    .code == 0);
        CHECK(invoke({"--quiet", "train", "--data", (root / "data").string(), "--config", c, "--scheme", "regcon",
                   "--run", (root / "run").string()})
                  .code == 3);
    }
}
