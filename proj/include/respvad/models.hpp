#pragma once

#include "respvad/dataset.hpp"
#include "respvad/nn.hpp"

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace respvad {

enum class Arch { mlp, cnn1d, bilstm, convlstm };

const char* to_string(Arch arch);
Arch parse_arch(const std::string& text);

struct ModelSpec {
    Arch arch = Arch::convlstm;
    std::size_t w = 100;
};

// Number of copies the 1DCNN makes of each input sample.
inline constexpr std::size_t kCnnRepeat = 30;

// A window-to-window model: w inputs in, w probabilities out.
//   mlp      the whole window through shared FC 128-64-64-64-1, one value
//            broadcast to every step
//   cnn1d    each sample repeated 30 times, two Conv1D(32, 3, 1)+tanh over
//            the repeats, flatten, FC 64-128-1 per step
//   bilstm   BiLSTM(128) x2, FC 32 ReLU, FC 1 per step
//   convlstm Conv1D(16, 5, 3)+tanh x2 along time, BiLSTM(128) x2,
//            FC 32 ReLU, FC 1 per step
// Every head ends in a logistic sigmoid.
class Model {
public:
    static Model build(const ModelSpec& spec, std::uint64_t seed);

    Model(Model&&) noexcept = default;
    Model& operator=(Model&&) noexcept = default;

    const ModelSpec& spec() const { return spec_; }

    // windows: batch x w. Returns batch x w probabilities.
    nn::Matrix forward(const nn::Matrix& windows, bool train = false);
    // d loss / d probability for the last training forward.
    void backward(const nn::Matrix& dprob);

    std::vector<nn::Param*> params() { return net_.params(); }
    std::size_t parameter_count();
    void zero_grad() { nn::zero_grad(params()); }

    // Versioned little-endian checkpoint (magic, version, arch tag, w, then
    // every named tensor).
    void save(const std::filesystem::path& path);
    static Model load(const std::filesystem::path& path);

    // The final dense layer (logit head).
    nn::Dense& head();

private:
    Model(ModelSpec spec, nn::Sequential net) : spec_(spec), net_(std::move(net)) {}

    ModelSpec spec_;
    nn::Sequential net_;
    nn::Matrix last_prob_;
};

struct TrainConfig {
    int epochs = 50;
    int batch_size = 32;
    double lr = 1e-3;
    std::uint64_t seed = 0;
    ClassWeights weights;
    ChunkMode mode = ChunkMode::overlap;
    // Chunks drawn per epoch (without replacement); 0 uses every chunk.
    std::size_t chunks_per_epoch = 0;
};

// Chunks of every sequence, concatenated.
std::vector<Chunk> chunk_all(const std::vector<LabeledSequence>& sequences, std::size_t w, ChunkMode mode);

// Mean masked weighted BCE of one batch of chunks; no gradient.
double evaluate_loss(Model& model, const std::vector<Chunk>& chunks, const ClassWeights& weights);

// Minibatch training with padded samples masked out of the loss. Returns the
// mean loss of every epoch. Throws SingleClassError when the valid labels
// hold only one class.
std::vector<double> train(Model& model, const std::vector<Chunk>& chunks, const TrainConfig& cfg);

// Chunk, run every chunk, reassemble: length-N probabilities.
std::vector<double> predict_sequence(Model& model, std::span<const double> rp, ChunkMode mode,
                                     std::size_t batch_size = 256);

} // namespace respvad
