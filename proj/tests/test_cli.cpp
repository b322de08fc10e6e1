#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <unistd.h>

#include <algorithm>
#include <filesystem>
#include <iostream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "salenc/cli.hpp"
#include "salenc/io.hpp"

using namespace salenc;
namespace fs = std::filesystem;

namespace {

struct CoutCapture {
    std::stringstream ss;
    std::streambuf* old;
    CoutCapture() : old(std::cout.rdbuf(ss.rdbuf())) {}
    ~CoutCapture() { std::cout.rdbuf(old); }
    std::string str() const { return ss.str(); }
};

struct CerrMute {
    std::stringstream ss;
    std::streambuf* old;
    CerrMute() : old(std::cerr.rdbuf(ss.rdbuf())) {}
    ~CerrMute() { std::cerr.rdbuf(old); }
};

struct TempDir {
    fs::path path;
    TempDir() {
        path = fs::temp_directory_path() / ("salenc_cli_" + std::to_string(::getpid()) + "_" +
                                            std::to_string(counter()++));
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
    static int& counter() {
        static int c = 0;
        return c;
    }
    std::string file(const std::string& name) const { return (path / name).string(); }
};

std::set<std::string> listing(const fs::path& dir) {
    std::set<std::string> names;
    for (const auto& e : fs::directory_iterator(dir)) names.insert(e.path().filename().string());
    return names;
}

const char* tiny_config = R"({
  "model": {
    "image_size": 32, "channels": 8, "hidden": 8, "ffn_width": 16,
    "heads": 2, "encoder_layers": 2, "strides": [8, 16, 32],
    "fusion_groups": 2, "gate_reduction": 2,
    "level_ratios": [0.5, 0.5, 1.0], "layer_ratios": [1.0, 0.5],
    "top_k": 10
  },
  "scene": {
    "boxes_per_scene": 3,
    "small_range": [4, 8], "medium_range": [10, 16], "large_range": [18, 28]
  },
  "corpus": {"scenes": 2, "seed": 5},
  "train": {"epochs": 2, "learning_rate": 0.05}
})";

}  // namespace

TEST_CASE("help exits zero and describes the subcommands") {
    CoutCapture out;
    CHECK(run_cli({"--help"}) == 0);
    const std::string text = out.str();
    for (const char* name : {"gen", "train", "select", "cost", "heatmap", "bias-report", "init"})
        CHECK(text.find(name) != std::string::npos);
}

TEST_CASE("an unknown subcommand or none at all is a usage error") {
    CerrMute quiet;
    CoutCapture out;
    CHECK(run_cli({"frobnicate"}) == 1);
    CHECK(run_cli({}) == 1);
}

TEST_CASE("a missing config file exits one") {
    CerrMute quiet;
    CHECK(run_cli({"cost", "--config", "/nonexistent/config.json"}) == 1);
}

TEST_CASE("malformed json and unknown keys exit one") {
    TempDir dir;
    CerrMute quiet;
    write_text_file(dir.file("bad.json"), "{not json");
    CHECK(run_cli({"cost", "--config", dir.file("bad.json")}) == 1);
    write_text_file(dir.file("unknown.json"), R"({"model": {"chanels": 32}})");
    CHECK(run_cli({"cost", "--config", dir.file("unknown.json")}) == 1);
    write_text_file(dir.file("invalid.json"), R"({"model": {"channels": 7}})");
    CHECK(run_cli({"cost", "--config", dir.file("invalid.json")}) == 1);
}

TEST_CASE("cost prints a four-column csv with the documented worked example") {
    TempDir dir;
    // 8x8, 4x4, 2x2, 1x1 pyramid with half level ratios and layer ratios 1, 0.5
    write_text_file(dir.file("cost.json"), R"({
      "model": {
        "image_size": 8, "channels": 32, "strides": [1, 2, 4, 8],
        "heads": 4, "encoder_layers": 2, "sample_points": 4,
        "level_ratios": [0.5, 0.5, 0.5, 0.5], "layer_ratios": [1.0, 0.5]
      },
      "scene": {
        "small_range": [1, 2], "medium_range": [2, 4], "large_range": [4, 6]
      }
    })");
    CoutCapture out;
    REQUIRE(run_cli({"cost", "--config", dir.file("cost.json")}) == 0);
    std::stringstream ss(out.str());
    std::string header, data;
    std::getline(ss, header);
    std::getline(ss, data);
    CHECK(header == "dense_ops,filtered_ops,keep_ratio_counted,keep_ratio_closed_form");
    double dense = 0, filtered = 0, counted = 0, closed = 0;
    char comma = 0;
    std::stringstream row(data);
    row >> dense >> comma >> filtered >> comma >> counted >> comma >> closed;
    CHECK(dense == doctest::Approx(1240320.0).epsilon(1e-12));
    CHECK(filtered == doctest::Approx(465120.0).epsilon(1e-12));
    // ceil keeps at least one cell per level, so the 2x2 and 1x1 levels push
    // the count to 43+22 of 170 slots, above the closed form's 0.375
    CHECK(counted == doctest::Approx(65.0 / 170.0).epsilon(1e-12));
    CHECK(closed == doctest::Approx(0.375).epsilon(1e-12));
}

TEST_CASE("cost with an output directory also writes the csv and config") {
    TempDir dir;
    const fs::path out_dir = dir.path / "out";
    CoutCapture out;
    REQUIRE(run_cli({"cost", "--out", out_dir.string()}) == 0);
    CHECK(fs::exists(out_dir / "cost.csv"));
    CHECK(fs::exists(out_dir / "resolved_config.json"));
    const std::string csv = read_text_file((out_dir / "cost.csv").string());
    CHECK(csv.find("dense_ops") == 0);
}

TEST_CASE("gen writes the corpus only into the output directory") {
    TempDir dir;
    write_text_file(dir.file("config.json"), tiny_config);
    const fs::path out_dir = dir.path / "out";
    const fs::path cwd = fs::current_path();
    const auto before = listing(cwd);
    CoutCapture out;
    REQUIRE(run_cli({"gen", "--config", dir.file("config.json"), "--out",
                     out_dir.string()}) == 0);
    CHECK(listing(cwd) == before);
    CHECK(listing(out_dir) ==
          std::set<std::string>{"corpus.jsonl", "resolved_config.json"});
    // two scenes, one json object per line
    const std::string corpus = read_text_file((out_dir / "corpus.jsonl").string());
    CHECK(std::count(corpus.begin(), corpus.end(), '\n') == 2);
}

TEST_CASE("gen without an output directory is a usage error") {
    TempDir dir;
    write_text_file(dir.file("config.json"), tiny_config);
    CerrMute quiet;
    CHECK(run_cli({"gen", "--config", dir.file("config.json")}) == 1);
}

TEST_CASE("train emits checkpoint, loss curve, and resolved config") {
    TempDir dir;
    write_text_file(dir.file("config.json"), tiny_config);
    const fs::path out_dir = dir.path / "out";
    CoutCapture out;
    REQUIRE(run_cli({"train", "--config", dir.file("config.json"), "--out",
                     out_dir.string()}) == 0);
    CHECK(listing(out_dir) == std::set<std::string>{"checkpoint.bin", "checkpoint.json",
                                                    "loss.csv", "resolved_config.json"});
    const std::string loss = read_text_file((out_dir / "loss.csv").string());
    // header plus one pre-training entry plus one entry per epoch
    CHECK(std::count(loss.begin(), loss.end(), '\n') == 4);
    CHECK(loss.find("epoch,loss") == 0);
    CHECK(out.str().find("final_loss=") != std::string::npos);
}

TEST_CASE("select reuses a trained checkpoint and writes a plan") {
    TempDir dir;
    write_text_file(dir.file("config.json"), tiny_config);
    const fs::path train_dir = dir.path / "train";
    const fs::path select_dir = dir.path / "select";
    CoutCapture out;
    REQUIRE(run_cli({"train", "--config", dir.file("config.json"), "--out",
                     train_dir.string()}) == 0);
    REQUIRE(run_cli({"select", "--config", dir.file("config.json"), "--checkpoint",
                     (train_dir / "checkpoint").string(), "--out", select_dir.string(),
                     "--scene-seed", "9"}) == 0);
    CHECK(fs::exists(select_dir / "plan.json"));
    const std::string plan = read_text_file((select_dir / "plan.json").string());
    CHECK(plan.find("\"omega\"") != std::string::npos);
    CHECK(plan.find("\"per_level\"") != std::string::npos);
}

TEST_CASE("heatmap exports one predicted and one target map per level") {
    TempDir dir;
    write_text_file(dir.file("config.json"), tiny_config);
    const fs::path out_dir = dir.path / "maps";
    CoutCapture out;
    REQUIRE(run_cli({"heatmap", "--config", dir.file("config.json"), "--out",
                     out_dir.string()}) == 0);
    for (int l = 0; l < 3; ++l) {
        CHECK(fs::exists(out_dir / ("pred_level" + std::to_string(l) + ".pgm")));
        CHECK(fs::exists(out_dir / ("target_level" + std::to_string(l) + ".pgm")));
    }
}

TEST_CASE("init writes ranked queries honoring the topk flag") {
    TempDir dir;
    write_text_file(dir.file("config.json"), tiny_config);
    const fs::path out_dir = dir.path / "init";
    CoutCapture out;
    REQUIRE(run_cli({"init", "--config", dir.file("config.json"), "--out", out_dir.string(),
                     "--topk", "5", "--redundancy", "off"}) == 0);
    const std::string queries = read_text_file((out_dir / "queries.json").string());
    CHECK(std::count(queries.begin(), queries.end(), '{') == 5);
}

TEST_CASE("flag overrides land in the resolved config") {
    TempDir dir;
    write_text_file(dir.file("config.json"), tiny_config);
    const fs::path out_dir = dir.path / "out";
    CoutCapture out;
    REQUIRE(run_cli({"cost", "--config", dir.file("config.json"), "--out", out_dir.string(),
                     "--ratios", "1,0.5,0.25:1,1", "--nms-threshold", "0.45", "--embedding",
                     "absolute", "--supervision", "discrete", "--redundancy", "off", "--fusion",
                     "off", "--seed", "99"}) == 0);
    const std::string resolved = read_text_file((out_dir / "resolved_config.json").string());
    CHECK(resolved.find("0.45") != std::string::npos);
    CHECK(resolved.find("\"absolute\"") != std::string::npos);
    CHECK(resolved.find("\"discrete\"") != std::string::npos);
    CHECK(resolved.find("\"redundancy\": false") != std::string::npos);
    CHECK(resolved.find("\"fusion\": false") != std::string::npos);
    CHECK(resolved.find("99") != std::string::npos);
    CHECK(resolved.find("0.25") != std::string::npos);
}

TEST_CASE("bad flag values are usage errors") {
    TempDir dir;
    write_text_file(dir.file("config.json"), tiny_config);
    CerrMute quiet;
    CHECK(run_cli({"cost", "--config", dir.file("config.json"), "--ratios", "junk"}) == 1);
    CHECK(run_cli({"cost", "--config", dir.file("config.json"), "--ratios", "0.5:"}) == 1);
    CHECK(run_cli({"cost", "--config", dir.file("config.json"), "--redundancy", "maybe"}) == 1);
    CHECK(run_cli({"cost", "--config", dir.file("config.json"), "--embedding", "fancy"}) == 1);
    // ratio lists that contradict the architecture are config errors
    CHECK(run_cli({"cost", "--config", dir.file("config.json"), "--ratios", "0.5:1"}) == 1);
}

TEST_CASE("the resolved config round-trips through the parser") {
    TempDir dir;
    write_text_file(dir.file("config.json"), tiny_config);
    const fs::path first = dir.path / "first";
    const fs::path second = dir.path / "second";
    CoutCapture out;
    REQUIRE(run_cli({"cost", "--config", dir.file("config.json"), "--out", first.string()}) ==
            0);
    REQUIRE(run_cli({"cost", "--config", (first / "resolved_config.json").string(), "--out",
                     second.string()}) == 0);
    CHECK(read_text_file((first / "resolved_config.json").string()) ==
          read_text_file((second / "resolved_config.json").string()));
}
