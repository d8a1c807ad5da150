#include "respvad/video_io.hpp"

#include "respvad/error.hpp"
#include "respvad/text.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <sstream>

namespace respvad {

namespace fs = std::filesystem;

void FrameSequence::validate() const {
    if (width < 2 || height < 2) {
        throw Error("frame sequence: dimensions must be at least 2x2");
    }
    if (!(fps > 0.0) || !std::isfinite(fps)) {
        throw Error("frame sequence: fps must be positive");
    }
    if (frames.size() < 2) {
        throw Error("frame sequence: at least 2 frames required");
    }
    for (std::size_t t = 0; t < frames.size(); ++t) {
        const Image& f = frames[t];
        if (f.width != width || f.height != height || f.size() != static_cast<std::size_t>(width) * height) {
            throw FrameError(t + 1, "dimension mismatch");
        }
        for (const double v : f.pixels) {
            if (!(v >= 0.0 && v <= 1.0)) {
                throw FrameError(t + 1, "intensity outside [0, 1]");
            }
        }
    }
}

Manifest read_manifest(const fs::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw Error("cannot open manifest " + path.string());
    }
    Manifest m;
    m.base_dir = path.parent_path();
    bool have_frames = false;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto kv = parse_key_value(line);
        if (!kv) {
            continue;
        }
        const auto& [key, value] = *kv;
        const std::string where = path.string() + ":" + std::to_string(lineno);
        if (key == "frames") {
            m.frames = value;
            have_frames = true;
        } else if (key == "width") {
            m.width = parse_int(value, where);
        } else if (key == "height") {
            m.height = parse_int(value, where);
        } else if (key == "fps") {
            m.fps = parse_double(value, where);
        } else if (key == "speech_interval") {
            const auto parts = split(value, ',');
            if (parts.size() != 2) {
                throw Error(where + ": speech_interval expects start,end");
            }
            m.speech_intervals.push_back({parse_double(parts[0], where), parse_double(parts[1], where)});
        } else {
            throw Error(where + ": unknown manifest key '" + key + "'");
        }
    }
    if (!have_frames) {
        throw Error(path.string() + ": missing 'frames'");
    }
    if (m.width < 2 || m.height < 2) {
        throw Error(path.string() + ": width and height must be >= 2");
    }
    if (!(m.fps > 0.0)) {
        throw Error(path.string() + ": fps must be positive");
    }
    return m;
}

void write_manifest(const Manifest& m, const fs::path& path) {
    std::ofstream out(path);
    if (!out) {
        throw Error("cannot write manifest " + path.string());
    }
    out << "frames = " << m.frames << "\n";
    out << "width = " << m.width << "\n";
    out << "height = " << m.height << "\n";
    out << "fps = " << format_real(m.fps) << "\n";
    for (const auto& iv : m.speech_intervals) {
        out << "speech_interval = " << format_real(iv.start_s) << "," << format_real(iv.end_s) << "\n";
    }
    if (!out) {
        throw Error("I/O failure writing " + path.string());
    }
}

void validate_intervals(const std::vector<SpeechInterval>& intervals, double duration_s) {
    double prev_end = 0.0;
    for (std::size_t i = 0; i < intervals.size(); ++i) {
        const auto& iv = intervals[i];
        if (!(iv.start_s >= 0.0) || !(iv.start_s < iv.end_s) || iv.end_s > duration_s + 1e-9) {
            throw Error("speech interval " + std::to_string(i + 1) + " outside [0, duration] or empty");
        }
        if (i > 0 && iv.start_s < prev_end) {
            throw Error("speech interval " + std::to_string(i + 1) + " overlaps or is out of order");
        }
        prev_end = iv.end_s;
    }
}

namespace {

bool wildcard_match(std::string_view pattern, std::string_view name) {
    std::size_t p = 0, n = 0, star = std::string_view::npos, mark = 0;
    while (n < name.size()) {
        if (p < pattern.size() && (pattern[p] == '?' || pattern[p] == name[n])) {
            ++p;
            ++n;
        } else if (p < pattern.size() && pattern[p] == '*') {
            star = p++;
            mark = n;
        } else if (star != std::string_view::npos) {
            p = star + 1;
            n = ++mark;
        } else {
            return false;
        }
    }
    while (p < pattern.size() && pattern[p] == '*') {
        ++p;
    }
    return p == pattern.size();
}

} // namespace

std::vector<fs::path> expand_frame_pattern(const Manifest& m) {
    const fs::path pattern = m.base_dir / m.frames;
    const std::string name = pattern.filename().string();
    if (name.find_first_of("*?") == std::string::npos) {
        return {pattern};
    }
    const fs::path dir = pattern.parent_path().empty() ? fs::path(".") : pattern.parent_path();
    std::vector<fs::path> out;
    std::error_code ec;
    for (const auto& entry : fs::directory_iterator(dir, ec)) {
        if (entry.is_regular_file() && wildcard_match(name, entry.path().filename().string())) {
            out.push_back(entry.path());
        }
    }
    if (ec) {
        throw Error("cannot list " + dir.string() + ": " + ec.message());
    }
    std::sort(out.begin(), out.end(), [](const fs::path& a, const fs::path& b) {
        return a.filename().string() < b.filename().string();
    });
    return out;
}

FrameSequence load_frames(const Manifest& m) {
    const auto files = expand_frame_pattern(m);
    FrameSequence seq;
    seq.width = m.width;
    seq.height = m.height;
    seq.fps = m.fps;
    seq.frames.reserve(files.size());
    for (std::size_t t = 0; t < files.size(); ++t) {
        if (!fs::exists(files[t])) {
            throw FrameError(t + 1, "missing file " + files[t].string());
        }
        Image img;
        try {
            img = read_pgm(files[t]);
        } catch (const Error& e) {
            throw FrameError(t + 1, e.what());
        }
        if (img.width != m.width || img.height != m.height) {
            std::ostringstream msg;
            msg << "dimension mismatch: " << files[t].string() << " is " << img.width << "x"
                << img.height << ", manifest says " << m.width << "x" << m.height;
            throw FrameError(t + 1, msg.str());
        }
        seq.frames.push_back(std::move(img));
    }
    if (seq.frames.size() < 2) {
        throw Error("manifest '" + m.frames + "' expands to fewer than 2 frames");
    }
    validate_intervals(m.speech_intervals, seq.duration_s());
    return seq;
}

Manifest write_frames(const FrameSequence& seq, const fs::path& dir) {
    seq.validate();
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) {
        throw Error("cannot create " + dir.string() + ": " + ec.message());
    }
    for (std::size_t t = 0; t < seq.size(); ++t) {
        char name[32];
        std::snprintf(name, sizeof name, "frame_%05zu.pgm", t);
        write_pgm(seq.frames[t], dir / name);
    }
    Manifest m;
    m.frames = "frame_*.pgm";
    m.width = seq.width;
    m.height = seq.height;
    m.fps = seq.fps;
    m.base_dir = dir;
    write_manifest(m, dir / "manifest.txt");
    return m;
}

namespace {

// Reads the next header token, skipping whitespace and '#' comments.
std::string next_token(std::istream& in) {
    std::string tok;
    int c;
    while ((c = in.get()) != EOF) {
        if (c == '#') {
            while ((c = in.get()) != EOF && c != '\n') {
            }
            continue;
        }
        if (std::isspace(c)) {
            if (!tok.empty()) {
                return tok;
            }
            continue;
        }
        tok.push_back(static_cast<char>(c));
    }
    return tok;
}

} // namespace

Image read_pgm(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw Error("cannot open " + path.string());
    }
    if (next_token(in) != "P5") {
        throw Error(path.string() + ": not a binary PGM (P5)");
    }
    int w = 0, h = 0, maxval = 0;
    try {
        w = std::stoi(next_token(in));
        h = std::stoi(next_token(in));
        maxval = std::stoi(next_token(in));
    } catch (const std::exception&) {
        throw Error(path.string() + ": malformed PGM header");
    }
    if (w < 1 || h < 1 || maxval < 1 || maxval > 65535) {
        throw Error(path.string() + ": invalid PGM header values");
    }
    // next_token consumed exactly one whitespace byte after maxval.
    Image img(w, h);
    const std::size_t count = img.size();
    const std::size_t bytes_per = maxval < 256 ? 1 : 2;
    std::vector<unsigned char> raw(count * bytes_per);
    in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
    if (static_cast<std::size_t>(in.gcount()) != raw.size()) {
        throw Error(path.string() + ": truncated pixel data");
    }
    const double scale = 1.0 / maxval;
    for (std::size_t i = 0; i < count; ++i) {
        const int v = bytes_per == 1 ? raw[i] : (raw[2 * i] << 8) | raw[2 * i + 1];
        if (v > maxval) {
            throw Error(path.string() + ": pixel value exceeds maxval");
        }
        img.pixels[i] = v * scale;
    }
    return img;
}

void write_pgm(const Image& img, const fs::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw Error("cannot write " + path.string());
    }
    out << "P5\n" << img.width << " " << img.height << "\n255\n";
    std::vector<unsigned char> raw(img.size());
    for (std::size_t i = 0; i < raw.size(); ++i) {
        const double v = std::clamp(img.pixels[i], 0.0, 1.0);
        raw[i] = static_cast<unsigned char>(std::lround(v * 255.0));
    }
    out.write(reinterpret_cast<const char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
    if (!out) {
        throw Error("I/O failure writing " + path.string());
    }
}

} // namespace respvad
