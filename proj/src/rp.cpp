#include "respvad/rp.hpp"

#include "respvad/error.hpp"
#include "respvad/rng.hpp"
#include "respvad/text.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <numbers>
#include <sstream>

namespace respvad {

namespace {

Eigen::VectorXd random_unit(Eigen::Index n, std::uint64_t seed) {
    Rng rng(seed);
    Eigen::VectorXd v(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        v[i] = rng.normal();
    }
    return v / v.norm();
}

// sigma_2 / sigma_1 from a short power iteration on the deflated Gram matrix.
double estimate_gap_ratio(const Eigen::MatrixXd& gram, const Eigen::VectorXd& v1, double lambda1,
                          std::uint64_t seed) {
    if (gram.rows() < 2 || lambda1 <= 0.0) {
        return 0.0;
    }
    Eigen::VectorXd q = random_unit(gram.rows(), derive_seed(seed, "gap"));
    q -= v1 * v1.dot(q);
    double lambda2 = 0.0;
    for (int it = 0; it < 2000; ++it) {
        const double n = q.norm();
        if (n == 0.0) {
            return 0.0;
        }
        q /= n;
        Eigen::VectorXd w = gram * q;
        w -= v1 * v1.dot(w);
        const double next = q.dot(w);
        q = w;
        if (std::abs(next - lambda2) <= 1e-9 * lambda1) {
            lambda2 = next;
            break;
        }
        lambda2 = next;
    }
    return std::sqrt(std::max(lambda2, 0.0) / lambda1);
}

} // namespace

SingularTriplet top_singular_triplet(const Eigen::MatrixXd& f, const PowerIterationOptions& opts) {
    if (!(opts.tol > 0.0) || opts.max_iter < 1) {
        throw Error("top_singular_triplet: tol must be > 0 and max_iter >= 1");
    }
    if (f.size() == 0 || f.cwiseAbs().maxCoeff() == 0.0) {
        throw DegenerateInputError("top_singular_triplet: flow matrix is all zero");
    }
    Eigen::MatrixXd gram(f.cols(), f.cols());
    gram.noalias() = f.transpose() * f;

    Eigen::VectorXd v = random_unit(f.cols(), opts.seed);
    double lambda = 0.0;
    double residual = 0.0;
    int it = 0;
    bool converged = false;
    while (it < opts.max_iter) {
        ++it;
        Eigen::VectorXd w = gram * v;
        lambda = v.dot(w);
        residual = (w - lambda * v).norm();
        if (lambda > 0.0 && residual <= opts.tol * lambda) {
            converged = true;
            break;
        }
        const double n = w.norm();
        if (n == 0.0) {
            // Start vector fell in the null space; re-seed deterministically.
            v = random_unit(f.cols(), derive_seed(opts.seed, "restart" + std::to_string(it)));
            continue;
        }
        v = w / n;
    }
    if (!converged) {
        std::ostringstream msg;
        msg << "top_singular_triplet: no convergence after " << opts.max_iter
            << " iterations (residual " << residual << ")";
        throw ConvergenceError(msg.str(), residual);
    }

    SingularTriplet out;
    const Eigen::VectorXd fv = f * v;
    out.sigma = fv.norm();
    out.u = fv / out.sigma;
    out.v = v;
    out.iterations = it;
    out.residual = residual;
    out.gap_ratio = estimate_gap_ratio(gram, v, lambda, opts.seed);
    return out;
}

RespirationPattern extract_rp(const FlowMatrix& f, const PowerIterationOptions& opts,
                              SingularTriplet* diagnostics) {
    SingularTriplet triplet = top_singular_triplet(f.values, opts);
    Eigen::VectorXd v = triplet.v;

    const Eigen::Index n = v.size();
    Eigen::VectorXd cum(n);
    double acc = 0.0;
    for (Eigen::Index t = 0; t < n; ++t) {
        acc += f.values.col(t).norm();
        cum[t] = acc;
    }
    const Eigen::VectorXd vc = v.array() - v.mean();
    const Eigen::VectorXd cc = cum.array() - cum.mean();
    const double stat = vc.dot(cc);
    const double scale = vc.norm() * cc.norm();
    if (std::abs(stat) > 1e-12 * scale) {
        if (stat < 0.0) {
            v = -v;
        }
    } else {
        for (Eigen::Index t = 0; t < n; ++t) {
            if (v[t] != 0.0) {
                if (v[t] < 0.0) {
                    v = -v;
                }
                break;
            }
        }
    }
    if (v.dot(triplet.v) < 0.0) {
        triplet.v = -triplet.v;
        triplet.u = -triplet.u;
    }
    if (diagnostics) {
        *diagnostics = triplet;
    }

    RespirationPattern rp;
    rp.samples.assign(v.data(), v.data() + n);
    rp.fps = f.fps;
    rp.filtered = false;
    return rp;
}

RespirationPattern integrate_rp(const RespirationPattern& rp) {
    RespirationPattern out = rp;
    double acc = 0.0;
    for (double& s : out.samples) {
        acc += s;
        s = acc;
    }
    if (!out.samples.empty()) {
        double mean = 0.0;
        for (const double s : out.samples) {
            mean += s;
        }
        mean /= static_cast<double>(out.samples.size());
        for (double& s : out.samples) {
            s -= mean;
        }
    }
    return out;
}

namespace {

// Transposed direct form II second-order section, a0 normalized to 1.
struct Biquad {
    double b0, b1, b2, a1, a2;

    double dc_gain() const { return (b0 + b1 + b2) / (1.0 + a1 + a2); }
};

// Butterworth (Q = 1/sqrt 2) sections via the bilinear transform prewarped at fc.
Biquad butterworth_section(double fc, double fs, bool highpass) {
    const double w0 = 2.0 * std::numbers::pi * fc / fs;
    const double cw = std::cos(w0);
    const double alpha = std::sin(w0) / std::numbers::sqrt2; // sin(w0) / (2Q)
    const double a0 = 1.0 + alpha;
    Biquad q{};
    if (highpass) {
        q.b0 = (1.0 + cw) / 2.0 / a0;
        q.b1 = -(1.0 + cw) / a0;
        q.b2 = q.b0;
    } else {
        q.b0 = (1.0 - cw) / 2.0 / a0;
        q.b1 = (1.0 - cw) / a0;
        q.b2 = q.b0;
    }
    q.a1 = -2.0 * cw / a0;
    q.a2 = (1.0 - alpha) / a0;
    return q;
}

// Runs the cascade in place, starting each section at its steady state for
// a constant input equal to the first sample.
void run_cascade(const std::array<Biquad, 2>& sections, std::vector<double>& x) {
    if (x.empty()) {
        return;
    }
    double level = x.front();
    for (const Biquad& q : sections) {
        const double y0 = q.dc_gain() * level;
        double z2 = q.b2 * level - q.a2 * y0;
        double z1 = y0 - q.b0 * level;
        for (double& s : x) {
            const double in = s;
            const double out = q.b0 * in + z1;
            z1 = q.b1 * in - q.a1 * out + z2;
            z2 = q.b2 * in - q.a2 * out;
            s = out;
        }
        level = y0;
    }
}

} // namespace

RespirationPattern bandpass(const RespirationPattern& rp, double low_bpm, double high_bpm) {
    if (!(low_bpm > 0.0) || !(low_bpm < high_bpm)) {
        throw Error("bandpass: need 0 < low_bpm < high_bpm");
    }
    if (!(rp.fps > 0.0)) {
        throw Error("bandpass: fps must be positive");
    }
    const double low_hz = low_bpm / 60.0;
    const double high_hz = high_bpm / 60.0;
    if (!(high_hz < rp.fps / 2.0)) {
        throw Error("bandpass: passband above Nyquist (" + format_sig9(high_hz) + " Hz >= " +
                    format_sig9(rp.fps / 2.0) + " Hz)");
    }
    const std::array<Biquad, 2> sections = {butterworth_section(low_hz, rp.fps, true),
                                            butterworth_section(high_hz, rp.fps, false)};
    RespirationPattern out = rp;
    out.filtered = true;
    const std::size_t n = rp.samples.size();
    if (n == 0) {
        return out;
    }
    const std::size_t pad =
        std::min<std::size_t>(n - 1, static_cast<std::size_t>(std::ceil(rp.fps / low_hz)));

    // Odd reflection about both end samples.
    std::vector<double> ext;
    ext.reserve(n + 2 * pad);
    const double first = rp.samples.front();
    const double last = rp.samples.back();
    for (std::size_t k = pad; k >= 1; --k) {
        ext.push_back(2.0 * first - rp.samples[k]);
    }
    ext.insert(ext.end(), rp.samples.begin(), rp.samples.end());
    for (std::size_t k = 1; k <= pad; ++k) {
        ext.push_back(2.0 * last - rp.samples[n - 1 - k]);
    }

    run_cascade(sections, ext);
    std::reverse(ext.begin(), ext.end());
    run_cascade(sections, ext);
    std::reverse(ext.begin(), ext.end());

    std::copy(ext.begin() + static_cast<std::ptrdiff_t>(pad),
              ext.begin() + static_cast<std::ptrdiff_t>(pad + n), out.samples.begin());
    return out;
}

RespirationPattern respiration_pattern(const FrameSequence& seq, const RpOptions& opts,
                                       SingularTriplet* diagnostics) {
    const FlowMatrix f = build_flow_matrix(seq, opts.eps);
    RespirationPattern rp = extract_rp(f, opts.solver, diagnostics);
    if (opts.integrate) {
        rp = integrate_rp(rp);
    }
    if (opts.filter) {
        rp = bandpass(rp, opts.low_bpm, opts.high_bpm);
    }
    return rp;
}

void write_rp_csv(const RespirationPattern& rp, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) {
        throw Error("cannot write " + path.string());
    }
    out << "index,time_s,value\n";
    for (std::size_t i = 0; i < rp.samples.size(); ++i) {
        out << i << "," << format_sig9(static_cast<double>(i) / rp.fps) << ","
            << format_sig9(rp.samples[i]) << "\n";
    }
    if (!out) {
        throw Error("I/O failure writing " + path.string());
    }
}

RespirationPattern read_rp_csv(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw Error("cannot open " + path.string());
    }
    std::string line;
    if (!std::getline(in, line) || trim(line) != "index,time_s,value") {
        throw Error(path.string() + ": expected header index,time_s,value");
    }
    RespirationPattern rp;
    double last_index = 0.0, last_time = 0.0;
    int lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (trim(line).empty()) {
            continue;
        }
        const std::string where = path.string() + ":" + std::to_string(lineno);
        const auto cols = split(line, ',');
        if (cols.size() != 3) {
            throw Error(where + ": expected 3 columns");
        }
        const long long idx = parse_int64(cols[0], where);
        if (idx != static_cast<long long>(rp.samples.size())) {
            throw Error(where + ": indices must be consecutive from 0");
        }
        last_index = static_cast<double>(idx);
        last_time = parse_double(cols[1], where);
        rp.samples.push_back(parse_double(cols[2], where));
    }
    if (rp.samples.size() < 2 || !(last_time > 0.0)) {
        throw Error(path.string() + ": need at least 2 samples to recover fps");
    }
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.6g", last_index / last_time);
    rp.fps = std::strtod(buf, nullptr);
    return rp;
}

} // namespace respvad
