#pragma once

#include "respvad/dataset.hpp"
#include "respvad/video_io.hpp"

#include <cstdint>
#include <vector>

namespace respvad {

struct SynthVideoParams {
    int width = 64;
    int height = 64;
    std::size_t frames = 900;
    double fps = 30.0;
    double amplitude_px = 1.5; // vertical displacement amplitude, may be sub-pixel
    double freq_hz = 0.2;
    double smoothness_px = 6.0; // Gaussian blur sigma of the texture noise
    double ramp = 0.9;          // share of the intensity range spent on a vertical brightness ramp
    double noise_sigma = 0.005;
    std::uint64_t seed = 0;

    void validate() const;
};

struct SynthVideo {
    FrameSequence frames;
    std::vector<double> displacement; // d(t) in pixels, one per frame
};

// A fixed smooth random texture (blurred noise over a vertical brightness
// ramp, which keeps the vertical gradient away from zero) translated by
// d(t) = A sin(2 pi f t / fps) (linear interpolation between rows) plus
// Gaussian pixel noise.
SynthVideo synth_video(const SynthVideoParams& p);

struct SynthRPParams {
    std::size_t n_speakers = 32;
    double duration_s = 60.0;
    double fps = 10.0;
    double freq_min_hz = 0.15;
    double freq_max_hz = 0.4;
    std::size_t episodes = 2;
    double episode_min_s = 2.0;
    double episode_max_s = 15.0;
    double min_gap_s = 3.0;
    double distortion = 1.0; // 0 disables every speech cue
    double noise_sigma = 0.05;
    std::uint64_t seed = 0;

    void validate() const;
    // Speech fraction implied by the mean episode length.
    double expected_speech_fraction() const;
};

// Per speaker: a unit sinusoid at a seeded frequency and phase. Inside
// speech episodes the waveform is blended (0.5 s ramps) towards a distorted
// version: amplitude scaled by 1 - 0.5 * distortion, the expiration half
// cycle flattened into a plateau, and a 2 Hz ripple of amplitude
// 0.1 * distortion added. Labels are 1 inside episodes.
std::vector<LabeledSequence> synth_rp_dataset(const SynthRPParams& p);

// Speech intervals that synth_rp_dataset used for one speaker.
std::vector<SpeechInterval> synth_episodes(const SynthRPParams& p, std::size_t speaker);

} // namespace respvad
