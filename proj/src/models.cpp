#include "respvad/models.hpp"

#include "respvad/binary_io.hpp"
#include "respvad/error.hpp"
#include "respvad/rng.hpp"

#include <fstream>
#include <cctype>
#include <cmath>
#include <map>

namespace respvad {

using nn::Matrix;
using nn::SeqBatch;

const char* to_string(Arch arch) {
    switch (arch) {
    case Arch::mlp:
        return "mlp";
    case Arch::cnn1d:
        return "cnn1d";
    case Arch::bilstm:
        return "bilstm";
    case Arch::convlstm:
        return "convlstm";
    }
    return "?";
}

Arch parse_arch(const std::string& text) {
    std::string t;
    for (const char c : text) {
        t.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
    }
    if (t == "mlp") {
        return Arch::mlp;
    }
    if (t == "cnn1d" || t == "1dcnn" || t == "cnn") {
        return Arch::cnn1d;
    }
    if (t == "bilstm") {
        return Arch::bilstm;
    }
    if (t == "convlstm") {
        return Arch::convlstm;
    }
    throw Error("unknown architecture '" + text + "' (expected mlp, cnn1d, bilstm or convlstm)");
}

namespace {

template <typename L, typename... Args>
L& push(nn::Sequential& net, Args&&... args) {
    auto layer = std::make_unique<L>(std::forward<Args>(args)...);
    L& ref = *layer;
    net.add(std::move(layer));
    return ref;
}

void dense(nn::Sequential& net, const std::string& name, std::size_t in, std::size_t out, std::uint64_t seed,
           bool relu) {
    nn::init_dense(push<nn::Dense>(net, name, in, out), derive_seed(seed, name));
    if (relu) {
        push<nn::ActivationLayer>(net, nn::Activation::relu);
    }
}

void conv(nn::Sequential& net, const std::string& name, std::size_t in, std::size_t filters, std::size_t k,
          std::size_t d, std::uint64_t seed) {
    nn::init_conv(push<nn::Conv1D>(net, name, in, filters, k, d), derive_seed(seed, name));
    push<nn::ActivationLayer>(net, nn::Activation::tanh);
}

void bilstm(nn::Sequential& net, const std::string& name, std::size_t in, std::size_t units,
            std::uint64_t seed) {
    auto& layer = push<nn::Bidirectional>(net, name, in, units);
    nn::init_lstm(layer.forward_layer(), derive_seed(seed, name + ".fwd"));
    nn::init_lstm(layer.backward_layer(), derive_seed(seed, name + ".bwd"));
}

constexpr std::uint64_t kCheckpointMagic = 0x54504b4344415652ULL; // "RVADCKPT"
constexpr std::uint32_t kCheckpointVersion = 1;

} // namespace

Model Model::build(const ModelSpec& spec, std::uint64_t seed) {
    if (spec.w < 1) {
        throw Error("build_model: window width must be >= 1");
    }
    const std::size_t w = spec.w;
    const auto steps = static_cast<Eigen::Index>(w);
    nn::Sequential net;
    switch (spec.arch) {
    case Arch::mlp:
        push<nn::StepsToFeatures>(net);
        dense(net, "fc1", w, 128, seed, true);
        dense(net, "fc2", 128, 64, seed, true);
        dense(net, "fc3", 64, 64, seed, true);
        dense(net, "fc4", 64, 64, seed, true);
        dense(net, "head", 64, 1, seed, false);
        push<nn::BroadcastSteps>(net, steps);
        break;
    case Arch::cnn1d:
        push<nn::RepeatAsSequence>(net, static_cast<Eigen::Index>(kCnnRepeat));
        conv(net, "conv1", 1, 32, 3, 1, seed);
        conv(net, "conv2", 32, 32, 3, 1, seed);
        push<nn::FlattenSteps>(net);
        dense(net, "fc1", 32 * kCnnRepeat, 64, seed, true);
        dense(net, "fc2", 64, 128, seed, true);
        dense(net, "head", 128, 1, seed, false);
        push<nn::UnfoldBatch>(net, steps);
        break;
    case Arch::bilstm:
        bilstm(net, "bilstm1", 1, 128, seed);
        bilstm(net, "bilstm2", 256, 128, seed);
        dense(net, "fc1", 256, 32, seed, true);
        dense(net, "head", 32, 1, seed, false);
        break;
    case Arch::convlstm:
        conv(net, "conv1", 1, 16, 5, 3, seed);
        conv(net, "conv2", 16, 16, 5, 3, seed);
        bilstm(net, "bilstm1", 16, 128, seed);
        bilstm(net, "bilstm2", 256, 128, seed);
        dense(net, "fc1", 256, 32, seed, true);
        dense(net, "head", 32, 1, seed, false);
        break;
    }
    return Model(spec, std::move(net));
}

nn::Dense& Model::head() {
    for (std::size_t i = net_.size(); i-- > 0;) {
        if (auto* d = dynamic_cast<nn::Dense*>(&net_.at(i))) {
            return *d;
        }
    }
    throw Error("model has no dense layer");
}

std::size_t Model::parameter_count() {
    std::size_t n = 0;
    for (const nn::Param* p : params()) {
        n += p->value.data.size();
    }
    return n;
}

Matrix Model::forward(const Matrix& windows, bool train) {
    const auto w = static_cast<Eigen::Index>(spec_.w);
    if (windows.cols() != w) {
        throw Error("model forward: expected windows of width " + std::to_string(spec_.w));
    }
    const Eigen::Index b = windows.rows();
    SeqBatch x(w, b, 1);
    for (Eigen::Index t = 0; t < w; ++t) {
        x.step(t).col(0) = windows.col(t);
    }
    const SeqBatch logits = net_.forward(x, train);
    Matrix prob(b, w);
    for (Eigen::Index t = 0; t < w; ++t) {
        const auto z = logits.step(t).col(0);
        for (Eigen::Index i = 0; i < b; ++i) {
            const double v = z[i];
            prob(i, t) = v >= 0.0 ? 1.0 / (1.0 + std::exp(-v)) : std::exp(v) / (1.0 + std::exp(v));
        }
    }
    if (train) {
        last_prob_ = prob;
    }
    return prob;
}

void Model::backward(const Matrix& dprob) {
    const auto w = static_cast<Eigen::Index>(spec_.w);
    const Eigen::Index b = dprob.rows();
    if (dprob.cols() != w || last_prob_.rows() != b) {
        throw Error("model backward: gradient shape does not match the last training forward");
    }
    SeqBatch dz(w, b, 1);
    for (Eigen::Index t = 0; t < w; ++t) {
        for (Eigen::Index i = 0; i < b; ++i) {
            const double p = last_prob_(i, t);
            dz.step(t)(i, 0) = dprob(i, t) * p * (1.0 - p);
        }
    }
    net_.backward(dz);
}

void Model::save(const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw Error("cannot write checkpoint " + path.string());
    }
    write_le<std::uint64_t>(out, kCheckpointMagic);
    write_le<std::uint32_t>(out, kCheckpointVersion);
    write_le<std::uint32_t>(out, static_cast<std::uint32_t>(spec_.arch));
    write_le<std::uint64_t>(out, spec_.w);
    const auto ps = params();
    write_le<std::uint64_t>(out, ps.size());
    for (const nn::Param* p : ps) {
        write_le<std::uint32_t>(out, static_cast<std::uint32_t>(p->name.size()));
        out.write(p->name.data(), static_cast<std::streamsize>(p->name.size()));
        write_le<std::uint32_t>(out, static_cast<std::uint32_t>(p->value.shape.size()));
        for (const auto d : p->value.shape) {
            write_le<std::uint64_t>(out, d);
        }
        for (const double v : p->value.data) {
            write_le<double>(out, v);
        }
    }
    if (!out) {
        throw Error("I/O failure writing checkpoint " + path.string());
    }
}

Model Model::load(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw Error("cannot open checkpoint " + path.string());
    }
    if (read_le<std::uint64_t>(in) != kCheckpointMagic) {
        throw Error(path.string() + ": not a checkpoint");
    }
    if (read_le<std::uint32_t>(in) != kCheckpointVersion) {
        throw Error(path.string() + ": unsupported checkpoint version");
    }
    const auto tag = read_le<std::uint32_t>(in);
    if (tag > static_cast<std::uint32_t>(Arch::convlstm)) {
        throw Error(path.string() + ": unknown architecture tag");
    }
    ModelSpec spec;
    spec.arch = static_cast<Arch>(tag);
    spec.w = read_le<std::uint64_t>(in);
    Model model = build(spec, 0);
    std::map<std::string, nn::Param*> by_name;
    for (nn::Param* p : model.params()) {
        by_name[p->name] = p;
    }
    const auto count = read_le<std::uint64_t>(in);
    if (count != by_name.size()) {
        throw Error(path.string() + ": tensor count does not match the architecture");
    }
    for (std::uint64_t k = 0; k < count; ++k) {
        const auto len = read_le<std::uint32_t>(in);
        std::string name(len, '\0');
        in.read(name.data(), len);
        const auto it = by_name.find(name);
        if (!in || it == by_name.end()) {
            throw Error(path.string() + ": unexpected tensor '" + name + "'");
        }
        nn::Param& p = *it->second;
        const auto rank = read_le<std::uint32_t>(in);
        std::vector<std::size_t> dims(rank);
        for (auto& d : dims) {
            d = read_le<std::uint64_t>(in);
        }
        if (dims != p.value.shape) {
            throw Error(path.string() + ": shape mismatch for tensor '" + name + "'");
        }
        for (double& v : p.value.data) {
            v = read_le<double>(in);
        }
        by_name.erase(it);
    }
    return model;
}

std::vector<Chunk> chunk_all(const std::vector<LabeledSequence>& sequences, std::size_t w, ChunkMode mode) {
    std::vector<Chunk> out;
    for (const auto& s : sequences) {
        ChunkSet set = chunk(s, w, mode);
        for (auto& c : set.chunks) {
            out.push_back(std::move(c));
        }
    }
    return out;
}

namespace {

struct Minibatch {
    Matrix inputs;
    std::vector<std::uint8_t> targets; // row-major batch x w
    std::vector<std::uint8_t> mask;
};

Minibatch gather(const std::vector<Chunk>& chunks, std::span<const std::size_t> idx, std::size_t w) {
    Minibatch mb;
    const auto b = static_cast<Eigen::Index>(idx.size());
    mb.inputs.resize(b, static_cast<Eigen::Index>(w));
    mb.targets.assign(idx.size() * w, 0);
    mb.mask.assign(idx.size() * w, 0);
    for (std::size_t r = 0; r < idx.size(); ++r) {
        const Chunk& c = chunks[idx[r]];
        if (c.input.size() != w || c.labels.size() != w) {
            throw Error("train: chunk width does not match the model");
        }
        for (std::size_t j = 0; j < w; ++j) {
            mb.inputs(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(j)) = c.input[j];
            mb.targets[r * w + j] = c.labels[j];
            mb.mask[r * w + j] = j < c.valid ? 1 : 0;
        }
    }
    return mb;
}

} // namespace

double evaluate_loss(Model& model, const std::vector<Chunk>& chunks, const ClassWeights& weights) {
    std::vector<std::size_t> idx(chunks.size());
    for (std::size_t i = 0; i < idx.size(); ++i) {
        idx[i] = i;
    }
    const Minibatch mb = gather(chunks, idx, model.spec().w);
    const Matrix prob = model.forward(mb.inputs, false);
    return nn::weighted_bce({prob.data(), static_cast<std::size_t>(prob.size())}, mb.targets, weights.positive,
                            weights.negative, mb.mask)
        .loss;
}

std::vector<double> train(Model& model, const std::vector<Chunk>& chunks, const TrainConfig& cfg) {
    if (chunks.empty()) {
        throw Error("train: no training chunks");
    }
    if (cfg.epochs < 1 || cfg.batch_size < 1 || !(cfg.lr > 0.0)) {
        throw Error("train: epochs, batch_size and lr must be positive");
    }
    bool has_pos = false, has_neg = false;
    for (const Chunk& c : chunks) {
        for (std::size_t j = 0; j < c.valid; ++j) {
            (c.labels[j] ? has_pos : has_neg) = true;
        }
    }
    if (!has_pos || !has_neg) {
        throw SingleClassError("train: training labels contain a single class");
    }

    const std::size_t w = model.spec().w;
    nn::Adam adam({cfg.lr, 0.9, 0.999, 1e-8});
    const auto params = model.params();
    std::vector<double> history;
    std::vector<std::size_t> order(chunks.size());
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        for (std::size_t i = 0; i < order.size(); ++i) {
            order[i] = i;
        }
        Rng rng(derive_seed(cfg.seed, "epoch-" + std::to_string(epoch)));
        rng.shuffle(order);
        const std::size_t take =
            cfg.chunks_per_epoch == 0 ? order.size() : std::min(order.size(), cfg.chunks_per_epoch);
        double loss_sum = 0.0;
        std::size_t loss_count = 0;
        for (std::size_t start = 0; start < take; start += static_cast<std::size_t>(cfg.batch_size)) {
            const std::size_t end = std::min(take, start + static_cast<std::size_t>(cfg.batch_size));
            const Minibatch mb = gather(chunks, std::span(order).subspan(start, end - start), w);
            const Matrix prob = model.forward(mb.inputs, true);
            const nn::BceResult bce =
                nn::weighted_bce({prob.data(), static_cast<std::size_t>(prob.size())}, mb.targets,
                                 cfg.weights.positive, cfg.weights.negative, mb.mask);
            const Matrix dprob = Eigen::Map<const Matrix>(bce.grad.data(), prob.rows(), prob.cols());
            nn::zero_grad(params);
            model.backward(dprob);
            adam.step(params);
            loss_sum += bce.loss * static_cast<double>(bce.count);
            loss_count += bce.count;
        }
        const double epoch_loss = loss_sum / static_cast<double>(loss_count);
        if (!std::isfinite(epoch_loss)) {
            throw NumericalError("train: non-finite loss in epoch " + std::to_string(epoch + 1));
        }
        history.push_back(epoch_loss);
    }
    return history;
}

std::vector<double> predict_sequence(Model& model, std::span<const double> rp, ChunkMode mode,
                                     std::size_t batch_size) {
    const std::size_t w = model.spec().w;
    const ChunkSet set = chunk_signal(rp, w, mode);
    std::vector<std::vector<double>> values(set.size());
    batch_size = std::max<std::size_t>(1, batch_size);
    for (std::size_t start = 0; start < set.size(); start += batch_size) {
        const std::size_t end = std::min(set.size(), start + batch_size);
        Matrix x(static_cast<Eigen::Index>(end - start), static_cast<Eigen::Index>(w));
        for (std::size_t k = start; k < end; ++k) {
            for (std::size_t j = 0; j < w; ++j) {
                x(static_cast<Eigen::Index>(k - start), static_cast<Eigen::Index>(j)) = set.chunks[k].input[j];
            }
        }
        const Matrix prob = model.forward(x, false);
        for (std::size_t k = start; k < end; ++k) {
            const auto row = prob.row(static_cast<Eigen::Index>(k - start));
            values[k].assign(row.data(), row.data() + w);
        }
    }
    return reassemble(set, values, rp.size());
}

} // namespace respvad
