#pragma once

#include "respvad/flow.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <filesystem>
#include <vector>

namespace respvad {

struct RespirationPattern {
    std::vector<double> samples;
    double fps = 0.0;
    bool filtered = false;

    std::size_t size() const { return samples.size(); }
};

struct SingularTriplet {
    double sigma = 0.0;
    Eigen::VectorXd u; // unit, length rows(F)
    Eigen::VectorXd v; // unit, length cols(F)
    int iterations = 0;
    double residual = 0.0;  // |F'F v - sigma^2 v|
    double gap_ratio = 0.0; // sigma_2 / sigma_1 estimate
};

struct PowerIterationOptions {
    double tol = 1e-10;
    int max_iter = 10000;
    std::uint64_t seed = 0;
};

// Dominant eigenvector of the Gram matrix F'F by power iteration, stopped once
// |F'F v - sigma^2 v| <= tol * sigma^2. Throws DegenerateInputError for a zero
// matrix and ConvergenceError (carrying the last residual) after max_iter.
SingularTriplet top_singular_triplet(const Eigen::MatrixXd& f, const PowerIterationOptions& opts = {});

// Unit-norm top right singular vector of F with a deterministic sign: the
// centred dot product with the cumulative sum of column norms is made
// non-negative, falling back to a positive first nonzero sample.
RespirationPattern extract_rp(const FlowMatrix& f, const PowerIterationOptions& opts = {},
                              SingularTriplet* diagnostics = nullptr);

// Mean-removed running sum. The flow columns measure frame-to-frame
// displacement increments, so this turns the extracted pattern into a
// displacement-like trace.
RespirationPattern integrate_rp(const RespirationPattern& rp);

// Zero-phase band-pass: Butterworth high-pass (low edge) and low-pass (high
// edge) biquads, run forward then backward over an odd-reflected copy padded
// by one period of the low edge. Not renormalized.
RespirationPattern bandpass(const RespirationPattern& rp, double low_bpm = 5.0, double high_bpm = 30.0);

struct RpOptions {
    double eps = kDefaultFlowEps;
    PowerIterationOptions solver;
    bool integrate = true;
    bool filter = true;
    double low_bpm = 5.0;
    double high_bpm = 30.0;
};

RespirationPattern respiration_pattern(const FrameSequence& seq, const RpOptions& opts = {},
                                       SingularTriplet* diagnostics = nullptr);

// CSV `index,time_s,value` with 9 significant digits.
void write_rp_csv(const RespirationPattern& rp, const std::filesystem::path& path);
// fps is recovered from the time column (rounded to 6 significant digits).
RespirationPattern read_rp_csv(const std::filesystem::path& path);

} // namespace respvad
