#pragma once

#include "respvad/rp.hpp"
#include "respvad/video_io.hpp"

#include <cstdint>
#include <filesystem>
#include <ostream>
#include <span>
#include <string>
#include <vector>

namespace respvad {

using Labels = std::vector<std::uint8_t>;

struct LabeledSequence {
    std::string speaker_id;
    RespirationPattern rp;
    Labels labels;

    std::size_t size() const { return labels.size(); }
    void validate() const;
};

// y_i = 1 iff i / fps falls in some [start, end).
Labels label_from_intervals(const std::vector<SpeechInterval>& intervals, std::size_t n, double fps);

enum class ChunkMode { overlap, non_overlap };

const char* to_string(ChunkMode mode);
ChunkMode parse_chunk_mode(const std::string& text);

struct Chunk {
    std::vector<double> input;
    Labels labels;
    std::size_t offset = 0;
    std::size_t valid = 0; // leading samples that are real data; the rest is zero padding
};

struct ChunkSet {
    std::vector<Chunk> chunks;
    std::size_t width = 0;
    ChunkMode mode = ChunkMode::non_overlap;
    std::size_t stride = 0;
    std::size_t pad_count = 0;     // zeros appended to the last chunk
    std::size_t source_length = 0; // N

    std::size_t size() const { return chunks.size(); }
};

// non_overlap: ceil(N/w) chunks at 0, w, 2w, ..., last one zero-padded.
// overlap: N-w+1 stride-1 chunks, or one padded chunk when N < w.
ChunkSet chunk(const LabeledSequence& seq, std::size_t w, ChunkMode mode);
// Same layout for an unlabeled signal; labels are left empty.
ChunkSet chunk_signal(std::span<const double> signal, std::size_t w, ChunkMode mode);

// Per-index values from per-chunk values (each of length w): concatenation
// for non_overlap, coverage-count mean for overlap. Output length N.
std::vector<double> reassemble(const ChunkSet& layout, const std::vector<std::vector<double>>& values,
                               std::size_t n);

struct ClassWeights {
    double positive = 1.0;
    double negative = 1.0;
};

// Balanced inverse frequency, w_c = N / (2 N_c). Throws SingleClassError.
ClassWeights class_weights(std::span<const std::uint8_t> labels);
ClassWeights class_weights(const std::vector<LabeledSequence>& sequences);

struct Split {
    std::vector<std::string> train;
    std::vector<std::string> test;
};

// Speaker ids are sorted, shuffled with the seed, and dealt round-robin into
// n_splits test folds; each split trains on the remaining speakers.
std::vector<Split> split_speakers(const std::vector<LabeledSequence>& sequences, int n_splits,
                                  std::uint64_t seed);
std::vector<Split> split_speakers(std::vector<std::string> speaker_ids, int n_splits, std::uint64_t seed);

std::vector<LabeledSequence> select_speakers(const std::vector<LabeledSequence>& sequences,
                                             const std::vector<std::string>& ids);

// CSV `speaker_id,index,rp_value,label`; rows of one speaker are contiguous.
void write_dataset_csv(const std::vector<LabeledSequence>& sequences, const std::filesystem::path& path);
std::vector<LabeledSequence> read_dataset_csv(const std::filesystem::path& path, double fps);

// One line per fold: `<fold>: <test speaker ids...>`.
void write_splits(const std::vector<Split>& splits, const std::filesystem::path& path);
std::vector<Split> read_splits(const std::filesystem::path& path, const std::vector<std::string>& all_ids);

// CSV `speaker_id,chunk,offset,position,input,label,valid` for inspection.
void write_chunks_csv(const std::string& speaker_id, const ChunkSet& chunks, std::ostream& out);

} // namespace respvad
