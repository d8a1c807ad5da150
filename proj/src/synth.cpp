#include "respvad/synth.hpp"

#include "respvad/error.hpp"
#include "respvad/rng.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>

namespace respvad {

void SynthVideoParams::validate() const {
    if (width < 2 || height < 2 || frames < 2) {
        throw Error("synth_video: need at least 2x2 pixels and 2 frames");
    }
    if (!(fps > 0.0) || !(freq_hz > 0.0) || !(freq_hz < fps / 2.0)) {
        throw Error("synth_video: need 0 < freq < fps / 2");
    }
    if (!(amplitude_px >= 0.0) || !(noise_sigma >= 0.0) || !(smoothness_px > 0.0)) {
        throw Error("synth_video: amplitude, noise and smoothness must be non-negative");
    }
    if (!(ramp >= 0.0 && ramp <= 1.0)) {
        throw Error("synth_video: ramp must be in [0, 1]");
    }
}

namespace {

std::vector<double> gaussian_kernel(double sigma) {
    const int radius = std::max(1, static_cast<int>(std::ceil(3.0 * sigma)));
    std::vector<double> k(static_cast<std::size_t>(2 * radius + 1));
    double sum = 0.0;
    for (int i = -radius; i <= radius; ++i) {
        const double v = std::exp(-0.5 * (i * i) / (sigma * sigma));
        k[static_cast<std::size_t>(i + radius)] = v;
        sum += v;
    }
    for (double& v : k) {
        v /= sum;
    }
    return k;
}

// Vertical brightness ramp (fraction `ramp` of the range) plus blurred white
// noise, spanning [0, 1].
Image make_texture(int width, int height, double sigma, double ramp, Rng& rng) {
    const auto kernel = gaussian_kernel(sigma);
    const int r = static_cast<int>(kernel.size() / 2);
    const int w_ext = width + 2 * r;
    const int h_ext = height + 2 * r;
    Image noise(w_ext, h_ext);
    for (double& v : noise.pixels) {
        v = rng.normal();
    }
    Image rows(width, h_ext);
    for (int y = 0; y < h_ext; ++y) {
        for (int x = 0; x < width; ++x) {
            double acc = 0.0;
            for (int k = -r; k <= r; ++k) {
                acc += kernel[static_cast<std::size_t>(k + r)] * noise(x + r + k, y);
            }
            rows(x, y) = acc;
        }
    }
    Image tex(width, height);
    for (int y = 0; y < height; ++y) {
        for (int x = 0; x < width; ++x) {
            double acc = 0.0;
            for (int k = -r; k <= r; ++k) {
                acc += kernel[static_cast<std::size_t>(k + r)] * rows(x, y + r + k);
            }
            tex(x, y) = acc;
        }
    }
    const auto [lo, hi] = std::minmax_element(tex.pixels.begin(), tex.pixels.end());
    const double lo_v = *lo;
    const double span = std::max(*hi - lo_v, 1e-12);
    for (int y = 0; y < height; ++y) {
        for (int x = 0; x < width; ++x) {
            const double n = (tex(x, y) - lo_v) / span;
            tex(x, y) = ramp * y / (height - 1) + (1.0 - ramp) * n;
        }
    }
    return tex;
}

} // namespace

SynthVideo synth_video(const SynthVideoParams& p) {
    p.validate();
    Rng rng(derive_seed(p.seed, "texture"));
    const int margin = static_cast<int>(std::ceil(p.amplitude_px)) + 2;
    const Image tex = make_texture(p.width, p.height + 2 * margin, p.smoothness_px, p.ramp, rng);
    Rng noise(derive_seed(p.seed, "noise"));

    SynthVideo out;
    out.frames.width = p.width;
    out.frames.height = p.height;
    out.frames.fps = p.fps;
    out.frames.frames.reserve(p.frames);
    out.displacement.reserve(p.frames);
    for (std::size_t t = 0; t < p.frames; ++t) {
        const double d =
            p.amplitude_px * std::sin(2.0 * std::numbers::pi * p.freq_hz * static_cast<double>(t) / p.fps);
        out.displacement.push_back(d);
        Image frame(p.width, p.height);
        for (int y = 0; y < p.height; ++y) {
            const double ys = static_cast<double>(y + margin) + d;
            const int y0 = static_cast<int>(std::floor(ys));
            const double frac = ys - y0;
            for (int x = 0; x < p.width; ++x) {
                double v = (1.0 - frac) * tex(x, y0) + frac * tex(x, y0 + 1);
                if (p.noise_sigma > 0.0) {
                    v += p.noise_sigma * noise.normal();
                }
                frame(x, y) = std::clamp(v, 0.0, 1.0);
            }
        }
        out.frames.frames.push_back(std::move(frame));
    }
    return out;
}

void SynthRPParams::validate() const {
    if (n_speakers < 1 || !(duration_s > 0.0) || !(fps > 0.0)) {
        throw Error("synth_rp_dataset: need speakers, positive duration and fps");
    }
    if (!(freq_min_hz > 0.0) || !(freq_min_hz <= freq_max_hz) || !(freq_max_hz < fps / 2.0)) {
        throw Error("synth_rp_dataset: need 0 < freq_min <= freq_max < fps / 2");
    }
    if (!(episode_min_s > 0.0) || !(episode_min_s <= episode_max_s) || !(min_gap_s >= 0.0)) {
        throw Error("synth_rp_dataset: invalid episode duration range");
    }
    if (static_cast<double>(episodes) * episode_max_s + static_cast<double>(episodes + 1) * min_gap_s > duration_s) {
        throw Error("synth_rp_dataset: episodes do not fit in the recording");
    }
    if (!(distortion >= 0.0) || !(noise_sigma >= 0.0)) {
        throw Error("synth_rp_dataset: distortion and noise must be non-negative");
    }
}

double SynthRPParams::expected_speech_fraction() const {
    return static_cast<double>(episodes) * 0.5 * (episode_min_s + episode_max_s) / duration_s;
}

std::vector<SpeechInterval> synth_episodes(const SynthRPParams& p, std::size_t speaker) {
    p.validate();
    Rng rng(derive_seed(p.seed, "episodes-" + std::to_string(speaker)));
    std::vector<double> lengths(p.episodes);
    double speech = 0.0;
    for (double& l : lengths) {
        l = rng.uniform(p.episode_min_s, p.episode_max_s);
        speech += l;
    }
    // Split the slack into episodes + 1 gaps via sorted uniform cut points.
    const double slack = p.duration_s - speech - static_cast<double>(p.episodes + 1) * p.min_gap_s;
    std::vector<double> cuts(p.episodes);
    for (double& c : cuts) {
        c = rng.uniform();
    }
    std::sort(cuts.begin(), cuts.end());
    std::vector<SpeechInterval> out;
    double t = 0.0;
    double prev_cut = 0.0;
    for (std::size_t k = 0; k < p.episodes; ++k) {
        t += p.min_gap_s + slack * (cuts[k] - prev_cut);
        prev_cut = cuts[k];
        out.push_back({t, t + lengths[k]});
        t += lengths[k];
    }
    return out;
}

namespace {

// Expiration (falling) half of the breath, progress u in [0, 1], reshaped to
// drop to mid level, hold there, then finish the fall.
double plateau_expiration(double u) {
    double g;
    if (u < 0.3) {
        g = 0.5 * u / 0.3;
    } else if (u < 0.7) {
        g = 0.5;
    } else {
        g = 0.5 + 0.5 * (u - 0.7) / 0.3;
    }
    return std::cos(std::numbers::pi * g);
}

constexpr double kRippleHz = 2.0;
constexpr double kRampS = 0.5;

} // namespace

std::vector<LabeledSequence> synth_rp_dataset(const SynthRPParams& p) {
    p.validate();
    const auto n = static_cast<std::size_t>(std::llround(p.duration_s * p.fps));
    const int digits = p.n_speakers >= 100 ? 3 : 2;
    std::vector<LabeledSequence> out;
    for (std::size_t s = 0; s < p.n_speakers; ++s) {
        Rng rng(derive_seed(p.seed, "speaker-" + std::to_string(s)));
        const double freq = rng.uniform(p.freq_min_hz, p.freq_max_hz);
        const double phase = rng.uniform(0.0, 2.0 * std::numbers::pi);
        const auto episodes = synth_episodes(p, s);

        LabeledSequence seq;
        char id[16];
        std::snprintf(id, sizeof id, "s%0*zu", digits, s + 1);
        seq.speaker_id = id;
        seq.rp.fps = p.fps;
        seq.rp.filtered = true;
        seq.labels = label_from_intervals(episodes, n, p.fps);
        seq.rp.samples.resize(n);
        Rng noise(derive_seed(p.seed, "noise-" + std::to_string(s)));
        for (std::size_t i = 0; i < n; ++i) {
            const double t = static_cast<double>(i) / p.fps;
            const double theta = std::fmod(2.0 * std::numbers::pi * freq * t + phase, 2.0 * std::numbers::pi);
            const double base = std::sin(theta);

            // Blend weight: 1 inside an episode, linear ramps of kRampS at the edges.
            double weight = 0.0;
            for (const auto& iv : episodes) {
                const double rise = std::clamp((t - iv.start_s) / kRampS + 1.0, 0.0, 1.0);
                const double fall = std::clamp((iv.end_s - t) / kRampS, 0.0, 1.0);
                weight = std::max(weight, std::min(rise, fall));
            }
            double value = base;
            if (weight > 0.0 && p.distortion > 0.0) {
                const double k = std::min(p.distortion, 1.0);
                double shaped = base;
                if (theta >= 0.5 * std::numbers::pi && theta < 1.5 * std::numbers::pi) {
                    shaped = plateau_expiration((theta - 0.5 * std::numbers::pi) / std::numbers::pi);
                }
                const double distorted = (1.0 - 0.5 * k) * ((1.0 - k) * base + k * shaped) +
                                         0.1 * p.distortion * std::sin(2.0 * std::numbers::pi * kRippleHz * t);
                value = (1.0 - weight) * base + weight * distorted;
            }
            if (p.noise_sigma > 0.0) {
                value += p.noise_sigma * noise.normal();
            }
            seq.rp.samples[i] = value;
        }
        out.push_back(std::move(seq));
    }
    return out;
}

} // namespace respvad
