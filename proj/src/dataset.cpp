#include "respvad/dataset.hpp"

#include "respvad/error.hpp"
#include "respvad/rng.hpp"
#include "respvad/text.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

namespace respvad {

void LabeledSequence::validate() const {
    if (labels.size() != rp.samples.size()) {
        throw Error("speaker " + speaker_id + ": label length differs from RP length");
    }
    for (const auto y : labels) {
        if (y > 1) {
            throw Error("speaker " + speaker_id + ": labels must be 0 or 1");
        }
    }
}

Labels label_from_intervals(const std::vector<SpeechInterval>& intervals, std::size_t n, double fps) {
    if (!(fps > 0.0)) {
        throw Error("label_from_intervals: fps must be positive");
    }
    Labels y(n, 0);
    for (std::size_t i = 0; i < n; ++i) {
        const double t = static_cast<double>(i) / fps;
        for (const auto& iv : intervals) {
            if (t >= iv.start_s && t < iv.end_s) {
                y[i] = 1;
                break;
            }
        }
    }
    return y;
}

const char* to_string(ChunkMode mode) {
    return mode == ChunkMode::overlap ? "overlap" : "non_overlap";
}

ChunkMode parse_chunk_mode(const std::string& text) {
    if (text == "overlap" || text == "o" || text == "O") {
        return ChunkMode::overlap;
    }
    if (text == "non_overlap" || text == "non-overlap" || text == "no" || text == "NO") {
        return ChunkMode::non_overlap;
    }
    throw Error("unknown chunk mode '" + text + "' (expected overlap or non_overlap)");
}

namespace {

ChunkSet chunk_impl(std::span<const double> x, const std::uint8_t* labels, std::size_t w, ChunkMode mode) {
    if (w < 1) {
        throw Error("chunk: width must be >= 1");
    }
    const std::size_t n = x.size();
    if (n < 1) {
        throw Error("chunk: empty sequence");
    }
    ChunkSet set;
    set.width = w;
    set.mode = mode;
    set.stride = mode == ChunkMode::overlap ? 1 : w;
    set.source_length = n;

    std::vector<std::size_t> offsets;
    if (mode == ChunkMode::overlap && n >= w) {
        for (std::size_t o = 0; o + w <= n; ++o) {
            offsets.push_back(o);
        }
    } else {
        for (std::size_t o = 0; o < n; o += w) {
            offsets.push_back(o);
        }
    }
    set.chunks.reserve(offsets.size());
    for (const std::size_t o : offsets) {
        Chunk c;
        c.offset = o;
        c.valid = std::min(w, n - o);
        c.input.assign(w, 0.0);
        std::copy_n(x.begin() + static_cast<std::ptrdiff_t>(o), c.valid, c.input.begin());
        if (labels) {
            c.labels.assign(w, 0);
            std::copy_n(labels + o, c.valid, c.labels.begin());
        }
        set.chunks.push_back(std::move(c));
    }
    set.pad_count = w - set.chunks.back().valid;
    return set;
}

} // namespace

ChunkSet chunk(const LabeledSequence& seq, std::size_t w, ChunkMode mode) {
    seq.validate();
    return chunk_impl(seq.rp.samples, seq.labels.data(), w, mode);
}

ChunkSet chunk_signal(std::span<const double> signal, std::size_t w, ChunkMode mode) {
    return chunk_impl(signal, nullptr, w, mode);
}

std::vector<double> reassemble(const ChunkSet& layout, const std::vector<std::vector<double>>& values,
                               std::size_t n) {
    if (n != layout.source_length || values.size() != layout.chunks.size()) {
        throw Error("reassemble: inconsistent metadata (length or chunk count)");
    }
    // Running mean: a value repeated in every covering chunk comes back exactly.
    std::vector<double> mean(n, 0.0);
    std::vector<std::size_t> count(n, 0);
    for (std::size_t k = 0; k < layout.chunks.size(); ++k) {
        const Chunk& c = layout.chunks[k];
        if (values[k].size() != layout.width || c.offset + c.valid > n) {
            throw Error("reassemble: inconsistent metadata (chunk " + std::to_string(k) + ")");
        }
        for (std::size_t j = 0; j < c.valid; ++j) {
            const std::size_t i = c.offset + j;
            ++count[i];
            mean[i] += (values[k][j] - mean[i]) / static_cast<double>(count[i]);
        }
    }
    for (std::size_t i = 0; i < n; ++i) {
        if (count[i] == 0) {
            throw Error("reassemble: index " + std::to_string(i) + " not covered by any chunk");
        }
    }
    return mean;
}

ClassWeights class_weights(std::span<const std::uint8_t> labels) {
    std::size_t pos = 0;
    for (const auto y : labels) {
        pos += y != 0;
    }
    const std::size_t total = labels.size();
    const std::size_t neg = total - pos;
    if (pos == 0 || neg == 0) {
        throw SingleClassError("class_weights: training labels contain a single class");
    }
    const double n = static_cast<double>(total);
    return {n / (2.0 * static_cast<double>(pos)), n / (2.0 * static_cast<double>(neg))};
}

ClassWeights class_weights(const std::vector<LabeledSequence>& sequences) {
    Labels all;
    for (const auto& s : sequences) {
        all.insert(all.end(), s.labels.begin(), s.labels.end());
    }
    return class_weights(all);
}

std::vector<Split> split_speakers(std::vector<std::string> ids, int n_splits, std::uint64_t seed) {
    std::sort(ids.begin(), ids.end());
    ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
    if (n_splits < 2) {
        throw Error("split_speakers: n_splits must be >= 2");
    }
    if (ids.size() < static_cast<std::size_t>(n_splits)) {
        throw Error("split_speakers: " + std::to_string(ids.size()) + " speakers cannot fill " +
                    std::to_string(n_splits) + " folds");
    }
    Rng rng(seed);
    rng.shuffle(ids);
    std::vector<Split> splits(static_cast<std::size_t>(n_splits));
    for (std::size_t i = 0; i < ids.size(); ++i) {
        const std::size_t fold = i % splits.size();
        for (std::size_t s = 0; s < splits.size(); ++s) {
            (s == fold ? splits[s].test : splits[s].train).push_back(ids[i]);
        }
    }
    return splits;
}

std::vector<Split> split_speakers(const std::vector<LabeledSequence>& sequences, int n_splits,
                                  std::uint64_t seed) {
    std::vector<std::string> ids;
    for (const auto& s : sequences) {
        ids.push_back(s.speaker_id);
    }
    return split_speakers(std::move(ids), n_splits, seed);
}

std::vector<LabeledSequence> select_speakers(const std::vector<LabeledSequence>& sequences,
                                             const std::vector<std::string>& ids) {
    const std::set<std::string> wanted(ids.begin(), ids.end());
    std::vector<LabeledSequence> out;
    for (const auto& s : sequences) {
        if (wanted.count(s.speaker_id)) {
            out.push_back(s);
        }
    }
    return out;
}

void write_dataset_csv(const std::vector<LabeledSequence>& sequences, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) {
        throw Error("cannot write " + path.string());
    }
    out << "speaker_id,index,rp_value,label\n";
    for (const auto& s : sequences) {
        s.validate();
        if (s.speaker_id.find_first_of(",\n") != std::string::npos) {
            throw Error("speaker id '" + s.speaker_id + "' contains a separator");
        }
        for (std::size_t i = 0; i < s.size(); ++i) {
            out << s.speaker_id << "," << i << "," << format_real(s.rp.samples[i]) << ","
                << static_cast<int>(s.labels[i]) << "\n";
        }
    }
    if (!out) {
        throw Error("I/O failure writing " + path.string());
    }
}

std::vector<LabeledSequence> read_dataset_csv(const std::filesystem::path& path, double fps) {
    std::ifstream in(path);
    if (!in) {
        throw Error("cannot open " + path.string());
    }
    std::string line;
    if (!std::getline(in, line) || trim(line) != "speaker_id,index,rp_value,label") {
        throw Error(path.string() + ": expected header speaker_id,index,rp_value,label");
    }
    std::vector<LabeledSequence> out;
    std::map<std::string, std::size_t> seen;
    int lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (trim(line).empty()) {
            continue;
        }
        const std::string where = path.string() + ":" + std::to_string(lineno);
        const auto cols = split(line, ',');
        if (cols.size() != 4) {
            throw Error(where + ": expected 4 columns");
        }
        if (out.empty() || out.back().speaker_id != cols[0]) {
            if (seen.count(cols[0])) {
                throw Error(where + ": rows of speaker " + cols[0] + " are not contiguous");
            }
            seen[cols[0]] = out.size();
            LabeledSequence s;
            s.speaker_id = cols[0];
            s.rp.fps = fps;
            s.rp.filtered = true;
            out.push_back(std::move(s));
        }
        LabeledSequence& s = out.back();
        if (parse_int64(cols[1], where) != static_cast<long long>(s.size())) {
            throw Error(where + ": indices must be consecutive from 0 per speaker");
        }
        const int label = parse_int(cols[3], where);
        if (label != 0 && label != 1) {
            throw Error(where + ": label must be 0 or 1");
        }
        s.rp.samples.push_back(parse_double(cols[2], where));
        s.labels.push_back(static_cast<std::uint8_t>(label));
    }
    return out;
}

void write_splits(const std::vector<Split>& splits, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) {
        throw Error("cannot write " + path.string());
    }
    for (std::size_t f = 0; f < splits.size(); ++f) {
        out << f << ":";
        for (const auto& id : splits[f].test) {
            out << " " << id;
        }
        out << "\n";
    }
}

std::vector<Split> read_splits(const std::filesystem::path& path, const std::vector<std::string>& all_ids) {
    std::ifstream in(path);
    if (!in) {
        throw Error("cannot open " + path.string());
    }
    std::vector<Split> splits;
    std::string line;
    while (std::getline(in, line)) {
        const std::string body = trim(line);
        if (body.empty() || body[0] == '#') {
            continue;
        }
        const auto colon = body.find(':');
        if (colon == std::string::npos) {
            throw Error(path.string() + ": expected '<fold>: ids...'");
        }
        if (parse_int(body.substr(0, colon), path.string()) != static_cast<int>(splits.size())) {
            throw Error(path.string() + ": folds must be numbered 0, 1, ...");
        }
        Split s;
        std::istringstream ids(body.substr(colon + 1));
        std::string id;
        while (ids >> id) {
            s.test.push_back(id);
        }
        const std::set<std::string> test(s.test.begin(), s.test.end());
        for (const auto& a : all_ids) {
            if (!test.count(a)) {
                s.train.push_back(a);
            }
        }
        splits.push_back(std::move(s));
    }
    return splits;
}

void write_chunks_csv(const std::string& speaker_id, const ChunkSet& set, std::ostream& out) {
    for (std::size_t k = 0; k < set.chunks.size(); ++k) {
        const Chunk& c = set.chunks[k];
        for (std::size_t j = 0; j < set.width; ++j) {
            out << speaker_id << "," << k << "," << c.offset << "," << j << "," << format_sig9(c.input[j])
                << "," << (c.labels.empty() ? 0 : static_cast<int>(c.labels[j])) << ","
                << (j < c.valid ? 1 : 0) << "\n";
        }
    }
}

} // namespace respvad
