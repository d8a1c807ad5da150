#include "respvad/flow.hpp"

#include "respvad/binary_io.hpp"
#include "respvad/error.hpp"

#include <fstream>

namespace respvad {

GradientField spatial_gradient(const Image& frame) {
    if (frame.width < 2 || frame.height < 2) {
        throw Error("spatial_gradient: frame must be at least 2x2");
    }
    GradientField g;
    g.width = frame.width;
    g.height = frame.height;
    g.gx.assign(frame.size(), 0.0);
    g.gy.assign(frame.size(), 0.0);
    for (int y = 0; y + 1 < frame.height; ++y) {
        for (int x = 0; x + 1 < frame.width; ++x) {
            const std::size_t i = static_cast<std::size_t>(y) * frame.width + x;
            g.gx[i] = frame(x + 1, y) - frame(x, y);
            g.gy[i] = frame(x, y + 1) - frame(x, y);
        }
    }
    return g;
}

Image temporal_diff(const Image& curr, const Image& prev) {
    if (curr.width != prev.width || curr.height != prev.height) {
        throw Error("temporal_diff: shape mismatch");
    }
    Image d(curr.width, curr.height);
    for (std::size_t i = 0; i < d.size(); ++i) {
        d.pixels[i] = curr.pixels[i] - prev.pixels[i];
    }
    return d;
}

Eigen::VectorXd normalized_flow(const Image& diff, const GradientField& grad, double eps) {
    if (diff.width != grad.width || diff.height != grad.height) {
        throw Error("normalized_flow: shape mismatch");
    }
    const std::size_t p = diff.size();
    Eigen::VectorXd out = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(2 * p));
    for (std::size_t i = 0; i < p; ++i) {
        const double gx = grad.gx[i];
        const double gy = grad.gy[i];
        const double norm2 = gx * gx + gy * gy;
        if (norm2 >= eps) {
            const double s = diff.pixels[i] / norm2;
            out[static_cast<Eigen::Index>(2 * i)] = s * gx;
            out[static_cast<Eigen::Index>(2 * i + 1)] = s * gy;
        }
    }
    return out;
}

FlowMatrix build_flow_matrix(const FrameSequence& seq, double eps) {
    seq.validate();
    if (!(eps > 0.0)) {
        throw Error("build_flow_matrix: eps must be positive");
    }
    FlowMatrix f;
    f.width = seq.width;
    f.height = seq.height;
    f.fps = seq.fps;
    const Eigen::Index rows = 2 * static_cast<Eigen::Index>(seq.width) * seq.height;
    f.values = Eigen::MatrixXd::Zero(rows, static_cast<Eigen::Index>(seq.size()));
    for (std::size_t t = 1; t < seq.size(); ++t) {
        const Image d = temporal_diff(seq.frames[t], seq.frames[t - 1]);
        f.values.col(static_cast<Eigen::Index>(t)) =
            normalized_flow(d, spatial_gradient(seq.frames[t]), eps);
    }
    if (!f.values.allFinite()) {
        throw NumericalError("build_flow_matrix: non-finite flow entry");
    }
    return f;
}

namespace {
constexpr std::int64_t kMatrixMagic = 0x5846524D44565352; // "RSVDMRFX"
constexpr std::int64_t kMatrixVersion = 1;
} // namespace

void write_matrix(const Eigen::MatrixXd& m, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw Error("cannot write " + path.string());
    }
    const std::int64_t header[8] = {kMatrixMagic, kMatrixVersion, m.rows(), m.cols(), 0, 0, 0, 0};
    for (const auto h : header) {
        write_le<std::int64_t>(out, h);
    }
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
        for (Eigen::Index c = 0; c < m.cols(); ++c) {
            write_le<double>(out, m(r, c));
        }
    }
    if (!out) {
        throw Error("I/O failure writing " + path.string());
    }
}

Eigen::MatrixXd read_matrix(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw Error("cannot open " + path.string());
    }
    std::int64_t header[8];
    for (auto& h : header) {
        h = read_le<std::int64_t>(in);
    }
    if (header[0] != kMatrixMagic || header[1] != kMatrixVersion || header[2] < 0 || header[3] < 0) {
        throw Error(path.string() + ": not a matrix dump");
    }
    Eigen::MatrixXd m(header[2], header[3]);
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
        for (Eigen::Index c = 0; c < m.cols(); ++c) {
            m(r, c) = read_le<double>(in);
        }
    }
    return m;
}

} // namespace respvad
