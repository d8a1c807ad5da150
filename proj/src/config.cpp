#include "respvad/config.hpp"

#include "respvad/error.hpp"
#include "respvad/rng.hpp"
#include "respvad/text.hpp"

#include <fstream>
#include <functional>
#include <map>

namespace respvad {

namespace {

struct Entry {
    std::string key;
    std::string help;
    std::function<std::string(const RunConfig&)> get;
    std::function<void(RunConfig&, const std::string&)> set;
};

bool parse_bool(const std::string& v, const std::string& key) {
    if (v == "true" || v == "1" || v == "yes" || v == "on") {
        return true;
    }
    if (v == "false" || v == "0" || v == "no" || v == "off") {
        return false;
    }
    throw Error(key + ": expected a boolean, got '" + v + "'");
}

std::size_t parse_size(const std::string& v, const std::string& key) {
    const long long n = parse_int64(v, key);
    if (n < 0) {
        throw Error(key + ": must be non-negative");
    }
    return static_cast<std::size_t>(n);
}

std::uint64_t parse_u64(const std::string& v, const std::string& key) {
    try {
        std::size_t used = 0;
        const unsigned long long n = std::stoull(v, &used);
        if (used != v.size() || v.starts_with('-')) {
            throw Error(key);
        }
        return n;
    } catch (const std::exception&) {
        throw Error(key + ": expected an unsigned integer, got '" + v + "'");
    }
}

#define REAL(k, field, text)                                                                       \
    Entry{k, text, [](const RunConfig& c) { return format_real(c.field); },                       \
          [](RunConfig& c, const std::string& v) { c.field = parse_double(v, k); }}
#define INT(k, field, text)                                                                        \
    Entry{k, text, [](const RunConfig& c) { return std::to_string(c.field); },                    \
          [](RunConfig& c, const std::string& v) { c.field = parse_int(v, k); }}
#define SIZE(k, field, text)                                                                       \
    Entry{k, text, [](const RunConfig& c) { return std::to_string(c.field); },                    \
          [](RunConfig& c, const std::string& v) { c.field = parse_size(v, k); }}
#define BOOL(k, field, text)                                                                       \
    Entry{k, text, [](const RunConfig& c) { return std::string(c.field ? "true" : "false"); },    \
          [](RunConfig& c, const std::string& v) { c.field = parse_bool(v, k); }}
#define U64(k, field, text)                                                                        \
    Entry{k, text, [](const RunConfig& c) { return std::to_string(c.field); },                    \
          [](RunConfig& c, const std::string& v) { c.field = parse_u64(v, k); }}

const std::vector<Entry>& table() {
    static const std::vector<Entry> entries = {
        U64("seed", seed, "top-level seed; stage seeds are derived from it"),
        REAL("eps", eps, "gradient magnitude guard of the flow"),
        REAL("tol", tol, "power iteration tolerance"),
        INT("max_iter", max_iter, "power iteration cap"),
        BOOL("integrate", integrate, "integrate the extracted pattern before filtering"),
        BOOL("filter", filter, "apply the band-pass"),
        REAL("low_bpm", low_bpm, "band-pass low edge (breaths per minute)"),
        REAL("high_bpm", high_bpm, "band-pass high edge (breaths per minute)"),
        SIZE("w", w, "chunk width in samples"),
        Entry{"mode", "chunk mode: overlap or non_overlap",
              [](const RunConfig& c) { return std::string(to_string(c.mode)); },
              [](RunConfig& c, const std::string& v) { c.mode = parse_chunk_mode(v); }},
        Entry{"arch", "model: mlp, cnn1d, bilstm or convlstm",
              [](const RunConfig& c) { return std::string(to_string(c.arch)); },
              [](RunConfig& c, const std::string& v) { c.arch = parse_arch(v); }},
        INT("n_splits", n_splits, "speaker-disjoint folds"),
        INT("epochs", epochs, "training epochs"),
        INT("batch_size", batch_size, "minibatch size"),
        REAL("lr", lr, "Adam learning rate"),
        SIZE("chunks_per_epoch", chunks_per_epoch, "chunks sampled per epoch, 0 for all"),
        REAL("w_pos", w_pos, "positive class weight, 0 for balanced"),
        REAL("w_neg", w_neg, "negative class weight, 0 for balanced"),
        REAL("threshold", threshold, "decision threshold"),
        REAL("match_window_s", match_window_s, "transition matching window (s)"),
        INT("video.width", video.width, "synthetic video width"),
        INT("video.height", video.height, "synthetic video height"),
        SIZE("video.frames", video.frames, "synthetic video frame count"),
        REAL("video.fps", video.fps, "synthetic video frame rate"),
        REAL("video.amplitude_px", video.amplitude_px, "displacement amplitude (pixels)"),
        REAL("video.freq_hz", video.freq_hz, "respiration frequency (Hz)"),
        REAL("video.smoothness_px", video.smoothness_px, "texture blur sigma (pixels)"),
        REAL("video.ramp", video.ramp, "share of the texture range on a vertical ramp"),
        REAL("video.noise_sigma", video.noise_sigma, "pixel noise sigma"),
        SIZE("rp.n_speakers", rp.n_speakers, "synthetic speakers"),
        REAL("rp.duration_s", rp.duration_s, "recording length per speaker (s)"),
        REAL("rp.fps", rp.fps, "sample rate of the synthetic patterns"),
        REAL("rp.freq_min_hz", rp.freq_min_hz, "lowest respiration frequency (Hz)"),
        REAL("rp.freq_max_hz", rp.freq_max_hz, "highest respiration frequency (Hz)"),
        SIZE("rp.episodes", rp.episodes, "speech episodes per speaker"),
        REAL("rp.episode_min_s", rp.episode_min_s, "shortest speech episode (s)"),
        REAL("rp.episode_max_s", rp.episode_max_s, "longest speech episode (s)"),
        REAL("rp.min_gap_s", rp.min_gap_s, "minimum silence between episodes (s)"),
        REAL("rp.distortion", rp.distortion, "speech distortion strength, 0 for none"),
        REAL("rp.noise_sigma", rp.noise_sigma, "additive noise sigma"),
    };
    return entries;
}

#undef REAL
#undef INT
#undef SIZE
#undef BOOL
#undef U64

const Entry& find(const std::string& key) {
    for (const auto& e : table()) {
        if (e.key == key) {
            return e;
        }
    }
    throw Error("unknown config key '" + key + "'");
}

} // namespace

const std::vector<std::string>& RunConfig::keys() {
    static const std::vector<std::string> names = [] {
        std::vector<std::string> out;
        for (const auto& e : table()) {
            out.push_back(e.key);
        }
        return out;
    }();
    return names;
}

std::string RunConfig::describe(const std::string& key) { return find(key).help; }

std::string RunConfig::get(const std::string& key) const { return find(key).get(*this); }

void RunConfig::set(const std::string& key, const std::string& value) { find(key).set(*this, trim(value)); }

void RunConfig::validate() const {
    if (!(eps > 0.0) || !(tol > 0.0) || max_iter < 1) {
        throw Error("config: eps, tol and max_iter must be positive");
    }
    if (!(low_bpm > 0.0) || !(low_bpm < high_bpm)) {
        throw Error("config: need 0 < low_bpm < high_bpm");
    }
    if (w < 1 || n_splits < 2 || epochs < 1 || batch_size < 1 || !(lr > 0.0)) {
        throw Error("config: w, epochs, batch_size, lr must be positive and n_splits >= 2");
    }
    if (w_pos < 0.0 || w_neg < 0.0 || (w_pos == 0.0) != (w_neg == 0.0)) {
        throw Error("config: set both class weights or neither");
    }
    if (!(threshold >= 0.0 && threshold <= 1.0) || !(match_window_s > 0.0)) {
        throw Error("config: threshold must be in [0, 1] and match_window_s positive");
    }
    video.validate();
    rp.validate();
}

void RunConfig::load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw Error("cannot open config " + path.string());
    }
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto kv = parse_key_value(line);
        if (!kv) {
            continue;
        }
        try {
            set(kv->first, kv->second);
        } catch (const Error& e) {
            throw Error(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
        }
    }
}

void RunConfig::save(const std::filesystem::path& path) const {
    std::ofstream out(path);
    if (!out) {
        throw Error("cannot write " + path.string());
    }
    for (const auto& e : table()) {
        out << e.key << " = " << e.get(*this) << "\n";
    }
}

RpOptions RunConfig::rp_options() const {
    RpOptions o;
    o.eps = eps;
    o.solver.tol = tol;
    o.solver.max_iter = max_iter;
    o.solver.seed = derive_seed(seed, "power-iteration");
    o.integrate = integrate;
    o.filter = filter;
    o.low_bpm = low_bpm;
    o.high_bpm = high_bpm;
    return o;
}

TrainConfig RunConfig::train_config() const {
    TrainConfig t;
    t.epochs = epochs;
    t.batch_size = batch_size;
    t.lr = lr;
    t.seed = derive_seed(seed, "train");
    t.mode = mode;
    t.chunks_per_epoch = chunks_per_epoch;
    t.weights = {w_pos, w_neg};
    return t;
}

} // namespace respvad
