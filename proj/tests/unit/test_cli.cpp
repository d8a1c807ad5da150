#include <doctest.h>

#include "../support/tempdir.hpp"
#include "respvad/cli.hpp"
#include "respvad/config.hpp"
#include "respvad/eval.hpp"

#include <fstream>
#include <iostream>
#include <sstream>

using namespace respvad;

namespace {

struct Run {
    int code;
    std::string err;
};

Run run(std::vector<std::string> args) {
    args.insert(args.begin(), "respvad");
    std::ostringstream out, err;
    auto* old_out = std::cout.rdbuf(out.rdbuf());
    auto* old_err = std::cerr.rdbuf(err.rdbuf());
    const int code = cli_main(args);
    std::cout.rdbuf(old_out);
    std::cerr.rdbuf(old_err);
    return {code, err.str()};
}

std::string slurp(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

std::size_t lines(const std::filesystem::path& p) {
    std::ifstream in(p);
    std::size_t n = 0;
    std::string line;
    while (std::getline(in, line)) ++n;
    return n;
}

std::string s(const std::filesystem::path& p) { return p.string(); }

} // namespace

TEST_CASE("extract-rp writes one row per frame") {
    TempDir dir;
    REQUIRE(run({"synth-video", "--out", s(dir / "v"), "--video.width", "24", "--video.height", "24",
                 "--video.frames", "90"})
                .code == 0);
    CHECK(lines(dir / "v" / "displacement.csv") == 91);
    REQUIRE(run({"extract-rp", "--manifest", s(dir / "v" / "manifest.txt"), "--out", s(dir / "e")}).code == 0);
    CHECK(lines(dir / "e" / "rp.csv") == 91);
    CHECK(slurp(dir / "e" / "diagnostics.txt").find("sigma = ") != std::string::npos);
    CHECK(slurp(dir / "e" / "run_config.txt").find("# derived seed power-iteration = ") != std::string::npos);
}

TEST_CASE("full pipeline and bit-exact rerun") {
    TempDir dir;
    REQUIRE(run({"synth-rp", "--out", s(dir / "s"), "--rp.n_speakers", "4", "--seed", "5"}).code == 0);
    REQUIRE(run({"make-dataset", "--dataset", s(dir / "s" / "dataset.csv"), "--out", s(dir / "d")}).code == 0);
    CHECK(lines(dir / "d" / "splits.txt") == 4);
    const auto ds = s(dir / "d" / "dataset.csv");
    const auto sp = s(dir / "d" / "splits.txt");
    REQUIRE(run({"train", "--dataset", ds, "--splits", sp, "--fold", "1", "--arch", "bilstm", "--w", "40",
                 "--epochs", "2", "--chunks_per_epoch", "32", "--seed", "5", "--out", s(dir / "t")})
                .code == 0);
    CHECK(lines(dir / "t" / "history.csv") == 3);
    REQUIRE(run({"predict", "--model", s(dir / "t" / "model.ckpt"), "--dataset", ds, "--splits", sp, "--fold", "1",
                 "--out", s(dir / "p")})
                .code == 0);
    REQUIRE(run({"eval", "--predictions", s(dir / "p" / "predictions.csv"), "--dataset", ds, "--tag", "run=a",
                 "--out", s(dir / "ev")})
                .code == 0);
    const auto report = read_run_report(dir / "ev" / "report.txt");
    for (const char* k : {"accuracy", "precision", "recall", "f1", "auroc"}) {
        INFO(k);
        CHECK(report.values.count(k) == 1);
    }
    CHECK(report.tags.at("model") == "bilstm");
    CHECK(report.tags.at("split") == "1");
    CHECK(report.tags.at("run") == "a");
    for (const char* f : {"roc.csv", "pr.csv", "transitions.csv"}) {
        CHECK(std::filesystem::exists(dir / "ev" / f));
    }
    REQUIRE(run({"report", "--runs", s(dir / "ev" / "report.txt"), "--out", s(dir / "summary.txt")}).code == 0);
    CHECK(slurp(dir / "summary.txt").find("[model=bilstm split=1 mode=overlap]") != std::string::npos);

    // Replaying the recorded configuration reproduces the checkpoint.
    REQUIRE(run({"train", "--config", s(dir / "t" / "run_config.txt"), "--dataset", ds, "--splits", sp, "--fold",
                 "1", "--out", s(dir / "t2")})
                .code == 0);
    CHECK(slurp(dir / "t2" / "model.ckpt") == slurp(dir / "t" / "model.ckpt"));
    CHECK(slurp(dir / "t2" / "history.csv") == slurp(dir / "t" / "history.csv"));
    REQUIRE(run({"predict", "--model", s(dir / "t2" / "model.ckpt"), "--dataset", ds, "--splits", sp, "--fold",
                 "1", "--out", s(dir / "p2")})
                .code == 0);
    CHECK(slurp(dir / "p2" / "predictions.csv") == slurp(dir / "p" / "predictions.csv"));
}

TEST_CASE("single-class training names the failing stage") {
    TempDir dir;
    REQUIRE(run({"synth-rp", "--out", s(dir / "s"), "--rp.n_speakers", "2"}).code == 0);
    std::ifstream in(dir / "s" / "dataset.csv");
    std::ofstream out(dir / "neg.csv");
    std::string line;
    std::getline(in, line);
    out << line << "\n";
    while (std::getline(in, line)) {
        out << line.substr(0, line.rfind(',')) << ",0\n";
    }
    out.close();
    std::filesystem::copy_file(dir / "s" / "dataset.csv.meta", dir / "neg.csv.meta");
    const auto r = run({"train", "--dataset", s(dir / "neg.csv"), "--arch", "mlp", "--epochs", "1", "--out",
                        s(dir / "t")});
    CHECK(r.code != 0);
    CHECK(r.err.find("class_weights") != std::string::npos);
}

TEST_CASE("usage errors") {
    CHECK(run({"frobnicate"}).code != 0);
    CHECK(run({}).code != 0);
    TempDir dir;
    const auto r = run({"synth-rp", "--out", s(dir / "s"), "--rp.fps", "-1"});
    CHECK(r.code != 0);
    CHECK(r.err.find("stage 'config' failed") != std::string::npos);
    CHECK(run({"synth-rp", "--out", s(dir / "s"), "--no_such_key", "1"}).code != 0);
}

TEST_CASE("flags override the config file") {
    TempDir dir;
    std::filesystem::create_directories(dir.path);
    std::ofstream(dir / "cfg.txt") << "rp.n_speakers = 3\nrp.fps = 5\n";
    REQUIRE(run({"synth-rp", "--config", s(dir / "cfg.txt"), "--rp.n_speakers", "2", "--out", s(dir / "s")}).code ==
            0);
    RunConfig rec;
    rec.load(dir / "s" / "run_config.txt");
    CHECK(rec.rp.n_speakers == 2);
    CHECK(rec.rp.fps == 5.0);
    // header + 2 speakers x 60 s x 5 fps
    CHECK(lines(dir / "s" / "dataset.csv") == 601);
}
