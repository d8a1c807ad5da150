#pragma once

#include <cstddef>
#include <filesystem>
#include <string>
#include <vector>

namespace respvad {

// Row-major grid of reals; (x, y) is (column, row).
struct Image {
    int width = 0;
    int height = 0;
    std::vector<double> pixels;

    Image() = default;
    Image(int w, int h, double fill = 0.0)
        : width(w), height(h), pixels(static_cast<std::size_t>(w) * h, fill) {}

    double& operator()(int x, int y) { return pixels[static_cast<std::size_t>(y) * width + x]; }
    double operator()(int x, int y) const {
        return pixels[static_cast<std::size_t>(y) * width + x];
    }
    std::size_t size() const { return pixels.size(); }
};

// Grayscale video with intensities in [0, 1].
struct FrameSequence {
    int width = 0;
    int height = 0;
    double fps = 0.0;
    std::vector<Image> frames;

    std::size_t size() const { return frames.size(); }
    double duration_s() const { return static_cast<double>(frames.size()) / fps; }

    // Throws respvad::Error when an invariant is broken.
    void validate() const;
};

struct SpeechInterval {
    double start_s = 0.0;
    double end_s = 0.0;
};

// Key/value manifest binding frame files, geometry, frame rate and labels.
struct Manifest {
    std::string frames; // file or pattern (`*`, `?` in the file name), relative to base_dir
    int width = 0;
    int height = 0;
    double fps = 0.0;
    std::vector<SpeechInterval> speech_intervals;
    std::filesystem::path base_dir;
};

Manifest read_manifest(const std::filesystem::path& path);
void write_manifest(const Manifest& manifest, const std::filesystem::path& path);

// Sorted, non-overlapping, inside [0, duration_s]. Throws respvad::Error.
void validate_intervals(const std::vector<SpeechInterval>& intervals, double duration_s);

// Lexicographically ordered expansion of manifest.frames.
std::vector<std::filesystem::path> expand_frame_pattern(const Manifest& manifest);

FrameSequence load_frames(const Manifest& manifest);

// Writes frame_00000.pgm ... plus manifest.txt into dir and returns the manifest.
Manifest write_frames(const FrameSequence& seq, const std::filesystem::path& dir);

// Binary portable graymap. read_pgm rescales by maxval into [0, 1];
// write_pgm quantizes to 8 bits.
Image read_pgm(const std::filesystem::path& path);
void write_pgm(const Image& image, const std::filesystem::path& path);

} // namespace respvad
