#include <doctest.h>

#include "../support/oracles.hpp"
#include "../support/tempdir.hpp"
#include "respvad/flow.hpp"
#include "respvad/rng.hpp"

#include <cmath>

using namespace respvad;

namespace {

Image random_image(int w, int h, Rng& rng) {
    Image img(w, h);
    for (double& v : img.pixels) {
        v = rng.uniform();
    }
    return img;
}

} // namespace

TEST_CASE("horizontal ramp has unit gradient inside") {
    Image img(6, 5);
    for (int y = 0; y < 5; ++y) {
        for (int x = 0; x < 6; ++x) {
            img(x, y) = x;
        }
    }
    const auto g = spatial_gradient(img);
    for (int y = 0; y < 4; ++y) {
        for (int x = 0; x < 5; ++x) {
            CHECK(g.gx[y * 6 + x] == 1.0);
            CHECK(g.gy[y * 6 + x] == 0.0);
        }
    }
}

TEST_CASE("constant frame has zero gradient") {
    const auto g = spatial_gradient(Image(4, 4, 0.3));
    for (std::size_t i = 0; i < g.gx.size(); ++i) {
        CHECK(g.gx[i] == 0.0);
        CHECK(g.gy[i] == 0.0);
    }
}

TEST_CASE("gradient matches the double loop") {
    Rng rng(3);
    const Image img = random_image(6, 6, rng);
    const auto g = spatial_gradient(img);
    std::vector<double> gx, gy;
    oracle::gradient(img.pixels, 6, 6, gx, gy);
    CHECK(g.gx == gx);
    CHECK(g.gy == gy);
}

TEST_CASE("temporal difference") {
    Rng rng(4);
    const Image a = random_image(5, 4, rng);
    const Image b = random_image(5, 4, rng);
    for (double v : temporal_diff(a, a).pixels) {
        CHECK(v == 0.0);
    }
    Image shifted = a;
    for (double& v : shifted.pixels) {
        v += 0.1;
    }
    for (double v : temporal_diff(shifted, a).pixels) {
        CHECK(v == doctest::Approx(0.1).epsilon(1e-12));
    }
    const Image d = temporal_diff(b, a);
    for (std::size_t i = 0; i < d.pixels.size(); ++i) {
        CHECK(d.pixels[i] == b.pixels[i] - a.pixels[i]);
    }
    CHECK_THROWS(temporal_diff(Image(3, 3), Image(4, 3)));
}

TEST_CASE("normalized flow single pixel cases") {
    GradientField g{2, 1, {1.0, 0.0}, {0.0, 0.0}};
    Image d(2, 1);
    d.pixels = {2.0, 5.0};
    const auto f = normalized_flow(d, g, 1e-8);
    CHECK(f(0) == 2.0);
    CHECK(f(1) == 0.0);
    CHECK(f(2) == 0.0); // zero gradient: no flow regardless of D
    CHECK(f(3) == 0.0);
}

TEST_CASE("normalized flow matches per-pixel recomputation") {
    Rng rng(5);
    for (int trial = 0; trial < 5; ++trial) {
        const Image prev = random_image(7, 6, rng);
        const Image curr = random_image(7, 6, rng);
        const auto f = normalized_flow(temporal_diff(curr, prev), spatial_gradient(curr), 1e-8);
        const auto ref = oracle::flow_column(curr.pixels, prev.pixels, 7, 6, 1e-8);
        REQUIRE(static_cast<std::size_t>(f.size()) == ref.size());
        for (std::size_t i = 0; i < ref.size(); ++i) {
            CHECK(f(static_cast<Eigen::Index>(i)) == doctest::Approx(ref[i]).epsilon(1e-12));
        }
    }
}

TEST_CASE("flow matrix composition") {
    Rng rng(6);
    FrameSequence seq;
    seq.width = seq.height = 4;
    seq.fps = 30.0;
    for (int t = 0; t < 3; ++t) {
        seq.frames.push_back(random_image(4, 4, rng));
    }
    const FlowMatrix f = build_flow_matrix(seq);
    REQUIRE(f.values.rows() == 32);
    REQUIRE(f.values.cols() == 3);
    CHECK(f.values.col(0).isZero(0.0));
    for (int t = 1; t < 3; ++t) {
        const auto ref = oracle::flow_column(seq.frames[t].pixels, seq.frames[t - 1].pixels, 4, 4, 1e-8);
        for (int i = 0; i < 32; ++i) {
            CHECK(f.values(i, t) == doctest::Approx(ref[static_cast<std::size_t>(i)]).epsilon(1e-12));
        }
    }
}

TEST_CASE("identical frames give zero flow") {
    Rng rng(8);
    FrameSequence seq;
    seq.width = seq.height = 5;
    seq.fps = 10.0;
    const Image img = random_image(5, 5, rng);
    seq.frames = {img, img, img};
    CHECK(build_flow_matrix(seq).values.isZero(0.0));
}

TEST_CASE("shifted ramp recovers unit displacement") {
    const int w = 8;
    FrameSequence seq;
    seq.width = w;
    seq.height = 4;
    seq.fps = 30.0;
    Image a(w, 4), b(w, 4);
    for (int y = 0; y < 4; ++y) {
        for (int x = 0; x < w; ++x) {
            a(x, y) = static_cast<double>(x) / w;
            b(x, y) = static_cast<double>(x + 1) / w;
        }
    }
    seq.frames = {a, b};
    const FlowMatrix f = build_flow_matrix(seq);
    for (int y = 0; y < 3; ++y) {
        for (int x = 0; x < w - 1; ++x) {
            const int p = y * w + x;
            CHECK(f.values(2 * p, 1) == doctest::Approx(1.0).epsilon(1e-12));
            CHECK(f.values(2 * p + 1, 1) == 0.0);
        }
    }
}

TEST_CASE("matrix dump round-trips") {
    TempDir dir;
    Eigen::MatrixXd m = Eigen::MatrixXd::Random(5, 3);
    write_matrix(m, dir / "f.bin");
    CHECK(read_matrix(dir / "f.bin") == m);
    CHECK(std::filesystem::file_size(dir / "f.bin") == 64 + 15 * 8);
}
