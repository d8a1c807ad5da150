#pragma once

#include "respvad/video_io.hpp"

#include <Eigen/Dense>

#include <filesystem>

namespace respvad {

inline constexpr double kDefaultFlowEps = 1e-8;

// Forward-difference spatial gradient of one frame.
struct GradientField {
    int width = 0;
    int height = 0;
    std::vector<double> gx; // I(x+1,y) - I(x,y)
    std::vector<double> gy; // I(x,y+1) - I(x,y)
};

// The last column has gx = 0 and the last row gy = 0; both components are
// zeroed there, so boundary pixels carry no flow.
GradientField spatial_gradient(const Image& frame);

// curr - prev; throws respvad::Error on shape mismatch.
Image temporal_diff(const Image& curr, const Image& prev);

// Per-pixel D*G/|G|^2, zero where |G|^2 < eps. Output length 2P, pixels in
// row-major order with the horizontal component first.
Eigen::VectorXd normalized_flow(const Image& diff, const GradientField& grad, double eps);

// 2P x N matrix of flattened flow fields; column 0 is zero.
struct FlowMatrix {
    Eigen::MatrixXd values;
    int width = 0;
    int height = 0;
    double fps = 0.0;

    Eigen::Index frames() const { return values.cols(); }
};

FlowMatrix build_flow_matrix(const FrameSequence& seq, double eps = kDefaultFlowEps);

// Debug dump: eight little-endian int64 header words (magic, version, rows,
// cols, 4 reserved) followed by row-major little-endian float64 data.
void write_matrix(const Eigen::MatrixXd& m, const std::filesystem::path& path);
Eigen::MatrixXd read_matrix(const std::filesystem::path& path);

} // namespace respvad
