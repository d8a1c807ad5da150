#include "respvad/nn.hpp"

#include "respvad/error.hpp"
#include "respvad/rng.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace respvad::nn {

Tensor::Tensor(std::vector<std::size_t> dims, double fill) : shape(std::move(dims)) {
    const std::size_t n =
        std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
    data.assign(n, fill);
}

std::size_t Tensor::cols() const { return shape.empty() ? 1 : shape.back(); }

std::size_t Tensor::rows() const {
    const std::size_t c = cols();
    return c == 0 ? 0 : data.size() / c;
}

Eigen::Map<Matrix> Tensor::matrix() {
    return {data.data(), static_cast<Eigen::Index>(rows()), static_cast<Eigen::Index>(cols())};
}

Eigen::Map<const Matrix> Tensor::matrix() const {
    return {data.data(), static_cast<Eigen::Index>(rows()), static_cast<Eigen::Index>(cols())};
}

bool Tensor::all_finite() const {
    for (const double v : data) {
        if (!std::isfinite(v)) {
            return false;
        }
    }
    return true;
}

void check_finite(const Matrix& m, const char* stage) {
    if (!m.allFinite()) {
        throw NumericalError(std::string("non-finite value after ") + stage);
    }
}

namespace {

void require_features(const SeqBatch& x, Eigen::Index expected, const std::string& who) {
    if (x.features() != expected || x.data.rows() != x.steps * x.batch) {
        throw Error(who + ": shape mismatch (got " + std::to_string(x.features()) + " features, expected " +
                    std::to_string(expected) + ")");
    }
}

SeqBatch like(const SeqBatch& x, Eigen::Index features) {
    SeqBatch y;
    y.steps = x.steps;
    y.batch = x.batch;
    y.data.resize(x.data.rows(), features);
    return y;
}

} // namespace

// ---------------------------------------------------------------- Dense

Dense::Dense(std::string name, std::size_t in, std::size_t out)
    : weight_(name + ".weight", {out, in}), bias_(name + ".bias", {out}) {}

SeqBatch Dense::forward(const SeqBatch& x, bool train) {
    require_features(x, static_cast<Eigen::Index>(weight_.value.cols()), weight_.name);
    SeqBatch y = like(x, static_cast<Eigen::Index>(weight_.value.rows()));
    y.data.noalias() = x.data * weight_.value.matrix().transpose();
    y.data.rowwise() += bias_.value.matrix().row(0);
    if (train) {
        input_ = x;
    }
    return y;
}

SeqBatch Dense::backward(const SeqBatch& dy) {
    weight_.grad.matrix().noalias() += dy.data.transpose() * input_.data;
    bias_.grad.matrix().row(0) += dy.data.colwise().sum();
    SeqBatch dx = like(dy, input_.features());
    dx.data.noalias() = dy.data * weight_.value.matrix();
    return dx;
}

// ---------------------------------------------------------------- activations

std::string ActivationLayer::kind() const {
    switch (act_) {
    case Activation::relu:
        return "relu";
    case Activation::tanh:
        return "tanh";
    case Activation::sigmoid:
        return "sigmoid";
    }
    return "?";
}

namespace {

// Vectorized through Eigen's packet exp; scalar tanh is far slower.
template <class D>
auto sigmoid(const Eigen::ArrayBase<D>& z) {
    return 1.0 / (1.0 + (-z).exp());
}

template <class D>
auto fast_tanh(const Eigen::ArrayBase<D>& z) {
    return 2.0 / (1.0 + (-2.0 * z).exp()) - 1.0;
}

} // namespace

SeqBatch ActivationLayer::forward(const SeqBatch& x, bool train) {
    SeqBatch y = like(x, x.features());
    switch (act_) {
    case Activation::relu:
        y.data = x.data.cwiseMax(0.0);
        break;
    case Activation::tanh:
        y.data = fast_tanh(x.data.array()).matrix();
        break;
    case Activation::sigmoid:
        y.data = sigmoid(x.data.array()).matrix();
        break;
    }
    if (train) {
        output_ = y;
    }
    return y;
}

SeqBatch ActivationLayer::backward(const SeqBatch& dy) {
    SeqBatch dx = like(dy, dy.features());
    const auto y = output_.data.array();
    switch (act_) {
    case Activation::relu:
        dx.data = (y > 0.0).select(dy.data.array(), 0.0);
        break;
    case Activation::tanh:
        dx.data = dy.data.array() * (1.0 - y * y);
        break;
    case Activation::sigmoid:
        dx.data = dy.data.array() * y * (1.0 - y);
        break;
    }
    return dx;
}

// ---------------------------------------------------------------- Conv1D

Conv1D::Conv1D(std::string name, std::size_t in_channels, std::size_t filters, std::size_t kernel,
               std::size_t dilation)
    : in_(in_channels), filters_(filters), width_(kernel), dilation_(dilation),
      kernel_(name + ".kernel", {kernel, in_channels, filters}), bias_(name + ".bias", {filters}) {
    if (kernel < 1 || dilation < 1 || in_channels < 1 || filters < 1) {
        throw Error(name + ": kernel, dilation and channel counts must be >= 1");
    }
}

Eigen::Index Conv1D::tap_shift(std::size_t j) const {
    const auto total = static_cast<Eigen::Index>((width_ - 1) * dilation_);
    const Eigen::Index left = total / 2;
    return static_cast<Eigen::Index>(j * dilation_) - left;
}

SeqBatch Conv1D::forward(const SeqBatch& x, bool train) {
    require_features(x, static_cast<Eigen::Index>(in_), kernel_.name);
    const Eigen::Index t_len = x.steps;
    const Eigen::Index b = x.batch;
    const auto in = static_cast<Eigen::Index>(in_);
    SeqBatch y = like(x, static_cast<Eigen::Index>(filters_));
    y.data.rowwise() = bias_.value.matrix().row(0);
    const auto k = kernel_.value.matrix();
    for (std::size_t j = 0; j < width_; ++j) {
        const Eigen::Index s = tap_shift(j);
        const Eigen::Index t0 = std::max<Eigen::Index>(0, -s);
        const Eigen::Index t1 = std::min<Eigen::Index>(t_len, t_len - s);
        if (t1 <= t0) {
            continue;
        }
        y.data.middleRows(t0 * b, (t1 - t0) * b).noalias() +=
            x.data.middleRows((t0 + s) * b, (t1 - t0) * b) * k.middleRows(static_cast<Eigen::Index>(j) * in, in);
    }
    if (train) {
        input_ = x;
    }
    return y;
}

SeqBatch Conv1D::backward(const SeqBatch& dy) {
    const Eigen::Index t_len = dy.steps;
    const Eigen::Index b = dy.batch;
    const auto in = static_cast<Eigen::Index>(in_);
    SeqBatch dx = like(dy, in);
    dx.data.setZero();
    auto k = kernel_.value.matrix();
    auto dk = kernel_.grad.matrix();
    bias_.grad.matrix().row(0) += dy.data.colwise().sum();
    for (std::size_t j = 0; j < width_; ++j) {
        const Eigen::Index s = tap_shift(j);
        const Eigen::Index t0 = std::max<Eigen::Index>(0, -s);
        const Eigen::Index t1 = std::min<Eigen::Index>(t_len, t_len - s);
        if (t1 <= t0) {
            continue;
        }
        const auto rows = (t1 - t0) * b;
        const auto jrow = static_cast<Eigen::Index>(j) * in;
        dk.middleRows(jrow, in).noalias() +=
            input_.data.middleRows((t0 + s) * b, rows).transpose() * dy.data.middleRows(t0 * b, rows);
        dx.data.middleRows((t0 + s) * b, rows).noalias() +=
            dy.data.middleRows(t0 * b, rows) * k.middleRows(jrow, in).transpose();
    }
    return dx;
}

// ---------------------------------------------------------------- LSTM

Lstm::Lstm(std::string name, std::size_t in, std::size_t units, bool reverse)
    : in_(in), units_(units), reverse_(reverse), w_input_(name + ".w_input", {4 * units, in}),
      w_recurrent_(name + ".w_recurrent", {4 * units, units}), bias_(name + ".bias", {4 * units}) {}

SeqBatch Lstm::forward(const SeqBatch& x, bool train) {
    require_features(x, static_cast<Eigen::Index>(in_), w_input_.name);
    const Eigen::Index t_len = x.steps;
    const Eigen::Index b = x.batch;
    const auto u = static_cast<Eigen::Index>(units_);

    Matrix pre(x.data.rows(), 4 * u);
    pre.noalias() = x.data * w_input_.value.matrix().transpose();
    pre.rowwise() += bias_.value.matrix().row(0);
    const auto wh_t = w_recurrent_.value.matrix().transpose();

    SeqBatch h = like(x, u);
    Matrix cells(x.data.rows(), u);
    Matrix h_prev = Matrix::Zero(b, u);
    Matrix c_prev = Matrix::Zero(b, u);
    for (Eigen::Index k = 0; k < t_len; ++k) {
        const Eigen::Index t = reverse_ ? t_len - 1 - k : k;
        auto zt = pre.middleRows(t * b, b);
        if (k > 0) {
            zt.noalias() += h_prev * wh_t;
        }
        auto a = zt.array();
        a.leftCols(2 * u) = sigmoid(a.leftCols(2 * u));
        a.middleCols(2 * u, u) = fast_tanh(a.middleCols(2 * u, u));
        a.rightCols(u) = sigmoid(a.rightCols(u));
        auto ct = cells.middleRows(t * b, b);
        ct = a.middleCols(u, u) * c_prev.array() + a.leftCols(u) * a.middleCols(2 * u, u);
        auto ht = h.data.middleRows(t * b, b);
        ht = a.rightCols(u) * fast_tanh(ct.array());
        h_prev = ht;
        c_prev = ct;
    }
    if (train) {
        input_ = x;
        gates_ = std::move(pre);
        cells_ = std::move(cells);
        hidden_ = h.data;
    }
    return h;
}

SeqBatch Lstm::backward(const SeqBatch& dy) {
    const Eigen::Index t_len = dy.steps;
    const Eigen::Index b = dy.batch;
    const auto u = static_cast<Eigen::Index>(units_);
    const auto wh = w_recurrent_.value.matrix();

    Matrix dz(dy.data.rows(), 4 * u);
    Matrix h_prev_all = Matrix::Zero(dy.data.rows(), u); // h feeding step t
    Matrix dh_next = Matrix::Zero(b, u);
    Matrix dc_next = Matrix::Zero(b, u);
    for (Eigen::Index k = t_len - 1; k >= 0; --k) {
        const Eigen::Index t = reverse_ ? t_len - 1 - k : k;
        const bool first = k == 0;
        const Eigen::Index tp = reverse_ ? t + 1 : t - 1; // previous step in processing order
        const auto g = gates_.middleRows(t * b, b).array();
        const auto ig = g.leftCols(u);
        const auto fg = g.middleCols(u, u);
        const auto cg = g.middleCols(2 * u, u);
        const auto og = g.rightCols(u);
        const auto c = cells_.middleRows(t * b, b).array();
        const Eigen::ArrayXXd tc = fast_tanh(c);

        const Eigen::ArrayXXd dh = dy.data.middleRows(t * b, b).array() + dh_next.array();
        const Eigen::ArrayXXd dc = dh * og * (1.0 - tc * tc) + dc_next.array();

        auto dzt = dz.middleRows(t * b, b).array();
        dzt.leftCols(u) = dc * cg * ig * (1.0 - ig);
        if (first) {
            dzt.middleCols(u, u).setZero();
        } else {
            const auto cp = cells_.middleRows(tp * b, b).array();
            dzt.middleCols(u, u) = dc * cp * fg * (1.0 - fg);
            h_prev_all.middleRows(t * b, b) = hidden_.middleRows(tp * b, b);
        }
        dzt.middleCols(2 * u, u) = dc * ig * (1.0 - cg * cg);
        dzt.rightCols(u) = dh * tc * og * (1.0 - og);

        dc_next = (dc * fg).matrix();
        dh_next.noalias() = dz.middleRows(t * b, b) * wh;
    }
    w_input_.grad.matrix().noalias() += dz.transpose() * input_.data;
    w_recurrent_.grad.matrix().noalias() += dz.transpose() * h_prev_all;
    bias_.grad.matrix().row(0) += dz.colwise().sum();
    SeqBatch dx = like(dy, static_cast<Eigen::Index>(in_));
    dx.data.noalias() = dz * w_input_.value.matrix();
    return dx;
}

// ---------------------------------------------------------------- Bidirectional

Bidirectional::Bidirectional(std::string name, std::size_t in, std::size_t units)
    : fwd_(name + ".fwd", in, units, false), bwd_(name + ".bwd", in, units, true) {}

SeqBatch Bidirectional::forward(const SeqBatch& x, bool train) {
    const SeqBatch a = fwd_.forward(x, train);
    const SeqBatch c = bwd_.forward(x, train);
    SeqBatch y = like(x, a.features() + c.features());
    y.data.leftCols(a.features()) = a.data;
    y.data.rightCols(c.features()) = c.data;
    return y;
}

SeqBatch Bidirectional::backward(const SeqBatch& dy) {
    const auto u = static_cast<Eigen::Index>(fwd_.units());
    SeqBatch da = like(dy, u);
    SeqBatch dc = like(dy, u);
    da.data = dy.data.leftCols(u);
    dc.data = dy.data.rightCols(u);
    SeqBatch dx = fwd_.backward(da);
    dx.data += bwd_.backward(dc).data;
    return dx;
}

std::vector<Param*> Bidirectional::params() {
    auto p = fwd_.params();
    for (Param* q : bwd_.params()) {
        p.push_back(q);
    }
    return p;
}

// ---------------------------------------------------------------- reshapes

SeqBatch StepsToFeatures::forward(const SeqBatch& x, bool) {
    require_features(x, 1, "steps_to_features");
    steps_ = x.steps;
    SeqBatch y(1, x.batch, x.steps);
    for (Eigen::Index t = 0; t < x.steps; ++t) {
        y.data.col(t) = x.step(t).col(0);
    }
    return y;
}

SeqBatch StepsToFeatures::backward(const SeqBatch& dy) {
    SeqBatch dx(steps_, dy.batch, 1);
    for (Eigen::Index t = 0; t < steps_; ++t) {
        dx.step(t).col(0) = dy.data.col(t);
    }
    return dx;
}

SeqBatch BroadcastSteps::forward(const SeqBatch& x, bool) {
    if (x.steps != 1) {
        throw Error("broadcast_steps: expects a single step");
    }
    SeqBatch y(steps_, x.batch, x.features());
    for (Eigen::Index t = 0; t < steps_; ++t) {
        y.step(t) = x.data;
    }
    return y;
}

SeqBatch BroadcastSteps::backward(const SeqBatch& dy) {
    SeqBatch dx(1, dy.batch, dy.features());
    for (Eigen::Index t = 0; t < steps_; ++t) {
        dx.data += dy.step(t);
    }
    return dx;
}

SeqBatch RepeatAsSequence::forward(const SeqBatch& x, bool) {
    require_features(x, 1, "repeat_as_sequence");
    steps_ = x.steps;
    batch_ = x.batch;
    SeqBatch y(repeats_, x.steps * x.batch, 1);
    for (Eigen::Index r = 0; r < repeats_; ++r) {
        y.step(r) = x.data;
    }
    return y;
}

SeqBatch RepeatAsSequence::backward(const SeqBatch& dy) {
    SeqBatch dx(steps_, batch_, 1);
    for (Eigen::Index r = 0; r < repeats_; ++r) {
        dx.data += dy.step(r);
    }
    return dx;
}

SeqBatch FlattenSteps::forward(const SeqBatch& x, bool) {
    steps_ = x.steps;
    const Eigen::Index c = x.features();
    SeqBatch y(1, x.batch, x.steps * c);
    for (Eigen::Index s = 0; s < x.steps; ++s) {
        y.data.middleCols(s * c, c) = x.step(s);
    }
    return y;
}

SeqBatch FlattenSteps::backward(const SeqBatch& dy) {
    const Eigen::Index c = dy.features() / steps_;
    SeqBatch dx(steps_, dy.batch, c);
    for (Eigen::Index s = 0; s < steps_; ++s) {
        dx.step(s) = dy.data.middleCols(s * c, c);
    }
    return dx;
}

SeqBatch UnfoldBatch::forward(const SeqBatch& x, bool) {
    if (x.steps != 1 || x.batch % steps_ != 0) {
        throw Error("unfold_batch: shape mismatch");
    }
    SeqBatch y = x;
    y.steps = steps_;
    y.batch = x.batch / steps_;
    return y;
}

SeqBatch UnfoldBatch::backward(const SeqBatch& dy) {
    SeqBatch dx = dy;
    dx.steps = 1;
    dx.batch = dy.steps * dy.batch;
    return dx;
}

// ---------------------------------------------------------------- Sequential

SeqBatch Sequential::forward(const SeqBatch& x, bool train) {
    SeqBatch h = x;
    for (auto& layer : layers_) {
        h = layer->forward(h, train);
        check_finite(h.data, layer->kind().c_str());
    }
    return h;
}

SeqBatch Sequential::backward(const SeqBatch& dy) {
    SeqBatch g = dy;
    for (auto it = layers_.rbegin(); it != layers_.rend(); ++it) {
        g = (*it)->backward(g);
    }
    return g;
}

std::vector<Param*> Sequential::params() {
    std::vector<Param*> out;
    for (auto& layer : layers_) {
        for (Param* p : layer->params()) {
            out.push_back(p);
        }
    }
    return out;
}

// ---------------------------------------------------------------- loss

BceResult weighted_bce(std::span<const double> pred, std::span<const std::uint8_t> target, double w_pos,
                       double w_neg, std::span<const std::uint8_t> mask) {
    if (pred.size() != target.size() || (!mask.empty() && mask.size() != pred.size())) {
        throw Error("weighted_bce: shape mismatch");
    }
    BceResult r;
    r.grad.assign(pred.size(), 0.0);
    for (std::size_t i = 0; i < pred.size(); ++i) {
        if (mask.empty() || mask[i]) {
            ++r.count;
        }
    }
    if (r.count == 0) {
        throw Error("weighted_bce: empty mask");
    }
    const double inv = 1.0 / static_cast<double>(r.count);
    double sum = 0.0;
    for (std::size_t i = 0; i < pred.size(); ++i) {
        if (!mask.empty() && !mask[i]) {
            continue;
        }
        const double p = std::clamp(pred[i], kProbClamp, 1.0 - kProbClamp);
        if (target[i]) {
            sum -= w_pos * std::log(p);
            r.grad[i] = -w_pos / p * inv;
        } else {
            sum -= w_neg * std::log(1.0 - p);
            r.grad[i] = w_neg / (1.0 - p) * inv;
        }
    }
    r.loss = sum * inv;
    return r;
}

// ---------------------------------------------------------------- Adam

void Adam::step(const std::vector<Param*>& params) {
    if (m_.empty()) {
        for (const Param* p : params) {
            m_.push_back(Matrix::Zero(static_cast<Eigen::Index>(p->value.rows()),
                                      static_cast<Eigen::Index>(p->value.cols())));
            v_.push_back(m_.back());
        }
    }
    if (m_.size() != params.size()) {
        throw Error("adam: parameter list changed between steps");
    }
    ++t_;
    const double c1 = 1.0 - std::pow(opts_.beta1, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(opts_.beta2, static_cast<double>(t_));
    for (std::size_t i = 0; i < params.size(); ++i) {
        auto g = params[i]->grad.matrix().array();
        auto m = m_[i].array();
        auto v = v_[i].array();
        m = opts_.beta1 * m + (1.0 - opts_.beta1) * g;
        v = opts_.beta2 * v + (1.0 - opts_.beta2) * g * g;
        params[i]->value.matrix().array() -= opts_.lr * (m / c1) / ((v / c2).sqrt() + opts_.eps);
    }
}

void zero_grad(const std::vector<Param*>& params) {
    for (Param* p : params) {
        std::fill(p->grad.data.begin(), p->grad.data.end(), 0.0);
    }
}

// ---------------------------------------------------------------- init

namespace {

void fill_uniform(Tensor& t, double limit, Rng& rng) {
    for (double& v : t.data) {
        v = rng.uniform(-limit, limit);
    }
}

} // namespace

void init_dense(Dense& layer, std::uint64_t seed) {
    Rng rng(seed);
    const double fan_in = static_cast<double>(layer.weight().value.cols());
    fill_uniform(layer.weight().value, std::sqrt(3.0 / fan_in), rng);
    std::fill(layer.bias().value.data.begin(), layer.bias().value.data.end(), 0.0);
}

void init_conv(Conv1D& layer, std::uint64_t seed) {
    Rng rng(seed);
    const auto& shape = layer.kernel().value.shape;
    const double fan_in = static_cast<double>(shape[0] * shape[1]);
    fill_uniform(layer.kernel().value, std::sqrt(3.0 / fan_in), rng);
    std::fill(layer.bias().value.data.begin(), layer.bias().value.data.end(), 0.0);
}

void init_lstm(Lstm& layer, std::uint64_t seed) {
    Rng rng(seed);
    const double limit = 1.0 / std::sqrt(static_cast<double>(layer.units()));
    fill_uniform(layer.input_weight().value, limit, rng);
    fill_uniform(layer.recurrent_weight().value, limit, rng);
    auto& b = layer.bias().value.data;
    std::fill(b.begin(), b.end(), 0.0);
    for (std::size_t i = layer.units(); i < 2 * layer.units(); ++i) {
        b[i] = 1.0;
    }
}

} // namespace respvad::nn
