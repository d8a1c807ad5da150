#pragma once

// Minimal layer toolkit with hand-written backward passes.
//
// Sequences travel as SeqBatch: a (steps * batch) x features matrix whose
// row t * batch + b holds step t of batch element b. Time-distributed layers
// are therefore plain row-wise maps, and a shift of k steps is a shift of
// k * batch rows.

#include <Eigen/Dense>

#include <cstddef>
#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace respvad::nn {

using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using RowVector = Eigen::Matrix<double, 1, Eigen::Dynamic>;

// Aligned so vectorized kernels take the same path on every run.
using Buffer = std::vector<double, Eigen::aligned_allocator<double>>;

// Row-major tensor; matrix() views it as prod(shape[:-1]) x shape.back().
struct Tensor {
    std::vector<std::size_t> shape;
    Buffer data;

    Tensor() = default;
    explicit Tensor(std::vector<std::size_t> dims, double fill = 0.0);

    std::size_t rows() const;
    std::size_t cols() const;
    Eigen::Map<Matrix> matrix();
    Eigen::Map<const Matrix> matrix() const;
    bool all_finite() const;
};

struct Param {
    std::string name;
    Tensor value;
    Tensor grad;

    Param(std::string n, std::vector<std::size_t> shape)
        : name(std::move(n)), value(shape), grad(std::move(shape)) {}
};

struct SeqBatch {
    Eigen::Index steps = 0;
    Eigen::Index batch = 0;
    Matrix data;

    SeqBatch() = default;
    SeqBatch(Eigen::Index t, Eigen::Index b, Eigen::Index features)
        : steps(t), batch(b), data(Matrix::Zero(t * b, features)) {}

    Eigen::Index features() const { return data.cols(); }
    auto step(Eigen::Index t) { return data.middleRows(t * batch, batch); }
    auto step(Eigen::Index t) const { return data.middleRows(t * batch, batch); }
};

// Throws NumericalError naming the stage when m holds NaN or Inf.
void check_finite(const Matrix& m, const char* stage);

class Layer {
public:
    virtual ~Layer() = default;

    // `train` keeps what backward needs; inference skips it.
    virtual SeqBatch forward(const SeqBatch& x, bool train) = 0;
    // Accumulates parameter gradients and returns d loss / d input.
    virtual SeqBatch backward(const SeqBatch& dy) = 0;
    virtual std::vector<Param*> params() { return {}; }
    virtual std::string kind() const = 0;
};

using LayerPtr = std::unique_ptr<Layer>;

// y = W x + b per row; W is out x in.
class Dense : public Layer {
public:
    Dense(std::string name, std::size_t in, std::size_t out);

    SeqBatch forward(const SeqBatch& x, bool train) override;
    SeqBatch backward(const SeqBatch& dy) override;
    std::vector<Param*> params() override { return {&weight_, &bias_}; }
    std::string kind() const override { return "dense"; }

    Param& weight() { return weight_; }
    Param& bias() { return bias_; }

private:
    Param weight_;
    Param bias_;
    SeqBatch input_;
};

enum class Activation { relu, tanh, sigmoid };

class ActivationLayer : public Layer {
public:
    explicit ActivationLayer(Activation a) : act_(a) {}

    SeqBatch forward(const SeqBatch& x, bool train) override;
    SeqBatch backward(const SeqBatch& dy) override;
    std::string kind() const override;

private:
    Activation act_;
    SeqBatch output_;
};

// Same-padded temporal convolution with dilation. The kernel is stored as
// (width, in_channels, filters); output length equals input length and the
// (k-1)*dilation padding is split evenly, extra sample on the right.
class Conv1D : public Layer {
public:
    Conv1D(std::string name, std::size_t in_channels, std::size_t filters, std::size_t kernel,
           std::size_t dilation);

    SeqBatch forward(const SeqBatch& x, bool train) override;
    SeqBatch backward(const SeqBatch& dy) override;
    std::vector<Param*> params() override { return {&kernel_, &bias_}; }
    std::string kind() const override { return "conv1d"; }

    Param& kernel() { return kernel_; }
    Param& bias() { return bias_; }

private:
    // Input step feeding output step t through tap j is t + j*dilation - left.
    Eigen::Index tap_shift(std::size_t j) const;

    std::size_t in_, filters_, width_, dilation_;
    Param kernel_;
    Param bias_;
    SeqBatch input_;
};

// One LSTM direction. Gate blocks are ordered input, forget, cell, output in
// the 4*units rows of the input weight (4u x in), recurrent weight (4u x u)
// and bias. Zero initial hidden and cell state.
class Lstm : public Layer {
public:
    Lstm(std::string name, std::size_t in, std::size_t units, bool reverse = false);

    SeqBatch forward(const SeqBatch& x, bool train) override;
    SeqBatch backward(const SeqBatch& dy) override;
    std::vector<Param*> params() override { return {&w_input_, &w_recurrent_, &bias_}; }
    std::string kind() const override { return "lstm"; }

    std::size_t units() const { return units_; }
    bool reverse() const { return reverse_; }
    Param& input_weight() { return w_input_; }
    Param& recurrent_weight() { return w_recurrent_; }
    Param& bias() { return bias_; }

private:
    std::size_t in_, units_;
    bool reverse_;
    Param w_input_;
    Param w_recurrent_;
    Param bias_;
    // Training cache: activated gates, cell states, hidden states, input.
    SeqBatch input_;
    Matrix gates_, cells_, hidden_;
};

// Forward and reversed LSTMs with independent parameters; output is
// [forward | backward] per step, width 2*units.
class Bidirectional : public Layer {
public:
    Bidirectional(std::string name, std::size_t in, std::size_t units);

    SeqBatch forward(const SeqBatch& x, bool train) override;
    SeqBatch backward(const SeqBatch& dy) override;
    std::vector<Param*> params() override;
    std::string kind() const override { return "bilstm"; }

    Lstm& forward_layer() { return fwd_; }
    Lstm& backward_layer() { return bwd_; }

private:
    Lstm fwd_;
    Lstm bwd_;
};

// (T, B, 1) -> (1, B, T): the whole window becomes one feature vector.
class StepsToFeatures : public Layer {
public:
    SeqBatch forward(const SeqBatch& x, bool train) override;
    SeqBatch backward(const SeqBatch& dy) override;
    std::string kind() const override { return "steps_to_features"; }

private:
    Eigen::Index steps_ = 0;
};

// (1, B, F) -> (T, B, F): the same row at every step; backward sums.
class BroadcastSteps : public Layer {
public:
    explicit BroadcastSteps(Eigen::Index steps) : steps_(steps) {}

    SeqBatch forward(const SeqBatch& x, bool train) override;
    SeqBatch backward(const SeqBatch& dy) override;
    std::string kind() const override { return "broadcast_steps"; }

private:
    Eigen::Index steps_;
};

// (T, B, 1) -> (R, T*B, 1): every scalar becomes its own length-R constant
// sequence (batch index t*B + b). Backward sums over the R copies.
class RepeatAsSequence : public Layer {
public:
    explicit RepeatAsSequence(Eigen::Index repeats) : repeats_(repeats) {}

    SeqBatch forward(const SeqBatch& x, bool train) override;
    SeqBatch backward(const SeqBatch& dy) override;
    std::string kind() const override { return "repeat_as_sequence"; }

private:
    Eigen::Index repeats_;
    Eigen::Index steps_ = 0;
    Eigen::Index batch_ = 0;
};

// (S, B', C) -> (1, B', S*C), feature index s*C + c.
class FlattenSteps : public Layer {
public:
    SeqBatch forward(const SeqBatch& x, bool train) override;
    SeqBatch backward(const SeqBatch& dy) override;
    std::string kind() const override { return "flatten_steps"; }

private:
    Eigen::Index steps_ = 0;
};

// (1, T*B, F) -> (T, B, F); undoes RepeatAsSequence's batch folding.
class UnfoldBatch : public Layer {
public:
    explicit UnfoldBatch(Eigen::Index steps) : steps_(steps) {}

    SeqBatch forward(const SeqBatch& x, bool train) override;
    SeqBatch backward(const SeqBatch& dy) override;
    std::string kind() const override { return "unfold_batch"; }

private:
    Eigen::Index steps_;
};

class Sequential {
public:
    void add(LayerPtr layer) { layers_.push_back(std::move(layer)); }

    SeqBatch forward(const SeqBatch& x, bool train);
    SeqBatch backward(const SeqBatch& dy);
    std::vector<Param*> params();
    std::size_t size() const { return layers_.size(); }
    Layer& at(std::size_t i) { return *layers_.at(i); }

private:
    std::vector<LayerPtr> layers_;
};

struct BceResult {
    double loss = 0.0;
    std::vector<double> grad; // d loss / d pred; zero where masked
    std::size_t count = 0;    // unmasked samples
};

inline constexpr double kProbClamp = 1e-7;

// -mean over unmasked i of [w_pos y ln p + w_neg (1-y) ln(1-p)], p clamped to
// [1e-7, 1-1e-7]. An empty mask means every sample counts; a mask with no
// set entries throws.
BceResult weighted_bce(std::span<const double> pred, std::span<const std::uint8_t> target,
                       double w_pos, double w_neg, std::span<const std::uint8_t> mask = {});

struct AdamOptions {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

class Adam {
public:
    explicit Adam(AdamOptions opts = {}) : opts_(opts) {}

    // One bias-corrected update from the accumulated gradients.
    void step(const std::vector<Param*>& params);
    long long steps() const { return t_; }
    const AdamOptions& options() const { return opts_; }

private:
    AdamOptions opts_;
    long long t_ = 0;
    std::vector<Matrix> m_, v_;
};

void zero_grad(const std::vector<Param*>& params);

// Fan-in uniform U(-sqrt(3/fan_in), sqrt(3/fan_in)) for dense and conv
// weights, U(-1/sqrt(units), 1/sqrt(units)) for LSTM weights; biases zero
// except the LSTM forget gate at 1.
void init_dense(Dense& layer, std::uint64_t seed);
void init_conv(Conv1D& layer, std::uint64_t seed);
void init_lstm(Lstm& layer, std::uint64_t seed);

} // namespace respvad::nn
