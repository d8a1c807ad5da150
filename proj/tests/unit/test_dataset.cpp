#include <doctest.h>

#include "../support/oracles.hpp"
#include "../support/tempdir.hpp"
#include "respvad/dataset.hpp"
#include "respvad/error.hpp"
#include "respvad/rng.hpp"

#include <algorithm>
#include <set>
#include <sstream>

using namespace respvad;

namespace {

LabeledSequence ramp_sequence(std::size_t n, const std::string& id = "s1") {
    LabeledSequence s;
    s.speaker_id = id;
    s.rp.fps = 30.0;
    for (std::size_t i = 0; i < n; ++i) {
        s.rp.samples.push_back(static_cast<double>(i + 1));
        s.labels.push_back(static_cast<std::uint8_t>(i % 3 == 0));
    }
    return s;
}

std::vector<std::vector<double>> inputs_of(const ChunkSet& set) {
    std::vector<std::vector<double>> v;
    for (const auto& c : set.chunks) {
        v.push_back(c.input);
    }
    return v;
}

} // namespace

TEST_CASE("labels from intervals") {
    CHECK(label_from_intervals({}, 10, 30.0) == Labels(10, 0));
    CHECK(label_from_intervals({{0.0, 3.0}}, 90, 30.0) == Labels(90, 1));
    const auto y = label_from_intervals({{1.0, 2.0}}, 90, 30.0);
    for (std::size_t i = 0; i < 90; ++i) {
        CHECK(y[i] == (i >= 30 && i <= 59 ? 1 : 0));
    }
}

TEST_CASE("N=10, w=4 layouts") {
    const auto seq = ramp_sequence(10);
    const auto no = chunk(seq, 4, ChunkMode::non_overlap);
    REQUIRE(no.size() == 3);
    CHECK(no.pad_count == 2);
    CHECK(no.chunks[2].input == std::vector<double>{9, 10, 0, 0});
    CHECK(no.chunks[2].valid == 2);
    CHECK(no.chunks[2].labels[2] == 0);
    const auto o = chunk(seq, 4, ChunkMode::overlap);
    REQUIRE(o.size() == 7);
    CHECK(o.pad_count == 0);
    for (std::size_t k = 0; k < 7; ++k) {
        CHECK(o.chunks[k].offset == k);
        CHECK(o.chunks[k].input[0] == static_cast<double>(k + 1));
    }
}

TEST_CASE("short sequences give one padded chunk in both modes") {
    const auto seq = ramp_sequence(3);
    for (auto mode : {ChunkMode::overlap, ChunkMode::non_overlap}) {
        const auto set = chunk(seq, 4, mode);
        REQUIRE(set.size() == 1);
        CHECK(set.pad_count == 1);
        CHECK(set.chunks[0].valid == 3);
    }
}

TEST_CASE("chunk then reassemble is the identity") {
    const auto seq = ramp_sequence(23);
    for (auto mode : {ChunkMode::overlap, ChunkMode::non_overlap}) {
        const auto set = chunk(seq, 5, mode);
        CHECK(reassemble(set, inputs_of(set), 23) == seq.rp.samples);
    }
}

TEST_CASE("overlap of constant values stays constant") {
    const auto set = chunk_signal(std::vector<double>(17, 0.0), 6, ChunkMode::overlap);
    const std::vector<std::vector<double>> vals(set.size(), std::vector<double>(6, 0.25));
    for (double v : reassemble(set, vals, 17)) {
        CHECK(v == 0.25);
    }
}

TEST_CASE("overlap averaging matches the coverage oracle") {
    Rng rng(17);
    for (int trial = 0; trial < 20; ++trial) {
        const std::size_t n = 10;
        const std::size_t w = 4;
        const auto set = chunk_signal(std::vector<double>(n, 0.0), w, ChunkMode::overlap);
        std::vector<std::vector<double>> vals(set.size(), std::vector<double>(w));
        for (auto& v : vals) {
            for (double& x : v) {
                x = rng.uniform(-1.0, 1.0);
            }
        }
        const auto got = reassemble(set, vals, n);
        const auto want = oracle::coverage_mean(vals, n, w);
        for (std::size_t i = 0; i < n; ++i) {
            CHECK(std::abs(got[i] - want[i]) <= 1e-12);
        }
    }
}

TEST_CASE("reassemble rejects inconsistent metadata") {
    const auto set = chunk_signal(std::vector<double>(10, 1.0), 4, ChunkMode::non_overlap);
    CHECK_THROWS_AS(reassemble(set, inputs_of(set), 11), Error);
    auto vals = inputs_of(set);
    vals.pop_back();
    CHECK_THROWS_AS(reassemble(set, vals, 10), Error);
}

TEST_CASE("balanced class weights") {
    Labels half(10, 0);
    std::fill(half.begin(), half.begin() + 5, 1);
    auto w = class_weights(half);
    CHECK(w.positive == 1.0);
    CHECK(w.negative == 1.0);
    Labels tenth(100, 0);
    std::fill(tenth.begin(), tenth.begin() + 10, 1);
    w = class_weights(tenth);
    CHECK(w.positive == doctest::Approx(5.0));
    CHECK(w.negative == doctest::Approx(100.0 / 180.0));
    CHECK_THROWS_AS(class_weights(Labels(8, 1)), SingleClassError);
    CHECK_THROWS_AS(class_weights(Labels(8, 0)), SingleClassError);
}

TEST_CASE("speaker splits") {
    const auto one_each = split_speakers(std::vector<std::string>{"a", "b", "c", "d"}, 4, 3);
    for (const auto& s : one_each) {
        CHECK(s.test.size() == 1);
        CHECK(s.train.size() == 3);
    }
    std::vector<std::string> ids;
    for (int i = 0; i < 48; ++i) {
        ids.push_back("spk" + std::to_string(i));
    }
    const auto a = split_speakers(ids, 4, 7);
    const auto b = split_speakers(ids, 4, 7);
    std::set<std::string> tested;
    for (std::size_t k = 0; k < a.size(); ++k) {
        CHECK(a[k].test == b[k].test);
        CHECK(a[k].train == b[k].train);
        CHECK(a[k].test.size() == 12);
        for (const auto& t : a[k].test) {
            CHECK(std::find(a[k].train.begin(), a[k].train.end(), t) == a[k].train.end());
            tested.insert(t);
        }
    }
    CHECK(tested.size() == 48);
    CHECK(split_speakers(ids, 4, 8)[0].test != a[0].test);
    CHECK_THROWS_AS(split_speakers(std::vector<std::string>{"a", "b"}, 3, 0), Error);
}

TEST_CASE("dataset and splits files round-trip") {
    TempDir dir;
    std::vector<LabeledSequence> data = {ramp_sequence(12, "a"), ramp_sequence(7, "b"), ramp_sequence(9, "c")};
    data[1].rp.samples[3] = 0.1234567890123;
    write_dataset_csv(data, dir / "d.csv");
    const auto back = read_dataset_csv(dir / "d.csv", 30.0);
    REQUIRE(back.size() == 3);
    for (std::size_t s = 0; s < 3; ++s) {
        CHECK(back[s].speaker_id == data[s].speaker_id);
        CHECK(back[s].labels == data[s].labels);
        CHECK(back[s].rp.samples == data[s].rp.samples);
    }
    const auto splits = split_speakers(data, 3, 1);
    write_splits(splits, dir / "splits.txt");
    const auto sb = read_splits(dir / "splits.txt", {"a", "b", "c"});
    REQUIRE(sb.size() == 3);
    for (std::size_t k = 0; k < 3; ++k) {
        CHECK(sb[k].test == splits[k].test);
        CHECK(sb[k].train.size() == 2);
    }
    CHECK(select_speakers(data, {"c", "a"}).size() == 2);
}

TEST_CASE("chunk csv lists every position") {
    std::ostringstream out;
    write_chunks_csv("s1", chunk(ramp_sequence(10), 4, ChunkMode::non_overlap), out);
    const std::string text = out.str();
    CHECK(std::count(text.begin(), text.end(), '\n') == 12);
}

TEST_CASE("chunk modes parse") {
    CHECK(parse_chunk_mode("overlap") == ChunkMode::overlap);
    CHECK(parse_chunk_mode("non_overlap") == ChunkMode::non_overlap);
    CHECK_THROWS_AS(parse_chunk_mode("sideways"), Error);
}
