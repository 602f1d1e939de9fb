#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <functional>
#include <numeric>
#include <random>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "icdh/color.hpp"
#include "icdh/dataset.hpp"
#include "icdh/error.hpp"
#include "icdh/features.hpp"

namespace icdh {

using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;

inline const std::vector<int>& default_layer_dims()
{
    static const std::vector<int> dims = {layout::size, 256, 256, 256, kFamilyCount};
    return dims;
}

/// One affine layer: y = x W + b, W is (fan_in x fan_out).
struct DenseLayer {
    Matrix weights;
    Vector bias;

    friend bool operator==(const DenseLayer& a, const DenseLayer& b)
    {
        return a.weights.rows() == b.weights.rows() && a.weights.cols() == b.weights.cols() &&
               a.bias.size() == b.bias.size() && a.weights == b.weights && a.bias == b.bias;
    }
};

/// Parameter (or gradient, or moment) tensors in layer order.
struct Parameters {
    std::vector<DenseLayer> layers;

    static Parameters zeros_like(const Parameters& p)
    {
        Parameters z;
        for (const auto& l : p.layers) {
            z.layers.push_back({Matrix::Zero(l.weights.rows(), l.weights.cols()), Vector::Zero(l.bias.size())});
        }
        return z;
    }

    std::size_t count() const noexcept
    {
        std::size_t n = 0;
        for (const auto& l : layers) n += static_cast<std::size_t>(l.weights.size() + l.bias.size());
        return n;
    }

    /// Flat view index -> reference, weights (row-major) then bias per layer.
    double& flat(std::size_t i)
    {
        for (auto& l : layers) {
            const auto nw = static_cast<std::size_t>(l.weights.size());
            if (i < nw) return l.weights.data()[i];
            i -= nw;
            const auto nb = static_cast<std::size_t>(l.bias.size());
            if (i < nb) return l.bias.data()[i];
            i -= nb;
        }
        throw RangeError("parameter index out of range");
    }
    double flat(std::size_t i) const { return const_cast<Parameters*>(this)->flat(i); }

    bool all_finite() const
    {
        return std::all_of(layers.begin(), layers.end(),
                           [](const DenseLayer& l) { return l.weights.allFinite() && l.bias.allFinite(); });
    }

    friend bool operator==(const Parameters&, const Parameters&) = default;
};

struct MlpModel {
    Parameters params;
    std::uint64_t init_seed = 0;
    std::uint64_t model_version = 0;

    std::vector<int> dims() const
    {
        std::vector<int> d;
        if (params.layers.empty()) return d;
        d.push_back(static_cast<int>(params.layers.front().weights.rows()));
        for (const auto& l : params.layers) d.push_back(static_cast<int>(l.weights.cols()));
        return d;
    }
    int input_size() const { return static_cast<int>(params.layers.front().weights.rows()); }
    int output_size() const { return static_cast<int>(params.layers.back().weights.cols()); }

    friend bool operator==(const MlpModel&, const MlpModel&) = default;
};

/// He-normal weights (std = sqrt(2 / fan_in)) drawn in layer order, zero biases.
inline MlpModel init_model(std::uint64_t seed, const std::vector<int>& dims = default_layer_dims())
{
    if (dims.size() < 2) throw DomainError("init_model: need at least input and output sizes");
    MlpModel m;
    m.init_seed = seed;
    std::mt19937_64 rng(seed);
    for (std::size_t i = 0; i + 1 < dims.size(); ++i) {
        if (dims[i] <= 0 || dims[i + 1] <= 0) throw DomainError("init_model: layer sizes must be positive");
        std::normal_distribution<double> dist(0.0, std::sqrt(2.0 / dims[i]));
        DenseLayer l{Matrix(dims[i], dims[i + 1]), Vector::Zero(dims[i + 1])};
        for (Eigen::Index k = 0; k < l.weights.size(); ++k) l.weights.data()[k] = dist(rng);
        m.params.layers.push_back(std::move(l));
    }
    return m;
}

struct TrainConfig {
    int epochs = 200;
    double learning_rate = 0.01;
    double dropout_rate = 0.1;
    int batch_size = 32;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
    std::uint64_t seed = 0;

    void validate() const
    {
        if (epochs < 1) throw DomainError("train config: epochs must be >= 1");
        if (!(learning_rate > 0.0)) throw DomainError("train config: learning_rate must be > 0");
        if (!(dropout_rate >= 0.0 && dropout_rate < 1.0)) throw DomainError("train config: dropout_rate must be in [0,1)");
        if (batch_size < 1) throw DomainError("train config: batch_size must be >= 1");
        if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0)) {
            throw DomainError("train config: adam betas must be in [0,1)");
        }
        if (!(epsilon > 0.0)) throw DomainError("train config: epsilon must be > 0");
    }
};

/// Dropout is active only when `training` is set; the mask stream is
/// seeded by `seed`.
struct ForwardMode {
    bool training = false;
    double dropout_rate = 0.0;
    std::uint64_t seed = 0;

    static ForwardMode eval() { return {}; }
    static ForwardMode train(std::uint64_t seed, double dropout_rate) { return {true, dropout_rate, seed}; }
};

struct Prediction {
    std::array<double, kFamilyCount> probabilities{};
};

namespace detail {

inline void softmax_rows(Matrix& z)
{
    for (Eigen::Index r = 0; r < z.rows(); ++r) {
        auto row = z.row(r);
        row.array() -= row.maxCoeff();
        row = row.array().exp().matrix();
        row /= row.sum();
    }
}

/// Activations kept for backprop. `inputs[i]` feeds layer i; `masks[i]` is
/// the (already scaled) dropout multiplier applied after hidden layer i.
struct ForwardTrace {
    std::vector<Matrix> inputs;
    std::vector<Matrix> preacts;
    std::vector<Matrix> masks;
    Matrix logits;
};

inline ForwardTrace forward_batch(const Parameters& p, const Matrix& x, const ForwardMode& mode)
{
    ForwardTrace t;
    std::mt19937_64 rng(mode.seed);
    const bool drop = mode.training && mode.dropout_rate > 0.0;
    std::bernoulli_distribution keep(1.0 - mode.dropout_rate);
    const double scale = drop ? 1.0 / (1.0 - mode.dropout_rate) : 1.0;

    Matrix a = x;
    const std::size_t n = p.layers.size();
    for (std::size_t i = 0; i < n; ++i) {
        const auto& l = p.layers[i];
        Matrix z = a * l.weights;
        z.rowwise() += l.bias.transpose();
        t.inputs.push_back(std::move(a));
        if (i + 1 == n) {
            t.logits = std::move(z);
            break;
        }
        a = z.cwiseMax(0.0);
        t.preacts.push_back(std::move(z));
        if (drop) {
            Matrix m(a.rows(), a.cols());
            for (Eigen::Index k = 0; k < m.size(); ++k) m.data()[k] = keep(rng) ? scale : 0.0;
            a = a.cwiseProduct(m);
            t.masks.push_back(std::move(m));
        }
    }
    return t;
}

inline Matrix to_matrix(std::span<const TrainingRecord> batch, int input_size)
{
    Matrix x(static_cast<Eigen::Index>(batch.size()), input_size);
    for (std::size_t r = 0; r < batch.size(); ++r) {
        for (int c = 0; c < input_size; ++c) x(static_cast<Eigen::Index>(r), c) = batch[r].features[c];
    }
    return x;
}

} // namespace detail

/// Hidden activations of the last hidden layer (after ReLU and, in training
/// mode, dropout). Exposed for dropout-expectation checks.
inline Vector last_hidden(const MlpModel& model, std::span<const double> x, const ForwardMode& mode)
{
    Matrix in = Eigen::Map<const Eigen::RowVectorXd>(x.data(), static_cast<Eigen::Index>(x.size()));
    auto t = detail::forward_batch(model.params, in, mode);
    return t.inputs.back().row(0).transpose();
}

inline Prediction forward(const MlpModel& model, std::span<const double> x, const ForwardMode& mode = ForwardMode::eval())
{
    if (static_cast<int>(x.size()) != model.input_size()) {
        throw DomainError("forward: expected " + std::to_string(model.input_size()) + " inputs, got " +
                          std::to_string(x.size()));
    }
    if (model.output_size() != kFamilyCount) throw DomainError("forward: model output size is not 10");
    Matrix in = Eigen::Map<const Eigen::RowVectorXd>(x.data(), static_cast<Eigen::Index>(x.size()));
    auto t = detail::forward_batch(model.params, in, mode);
    detail::softmax_rows(t.logits);
    Prediction p;
    for (int i = 0; i < kFamilyCount; ++i) p.probabilities[i] = t.logits(0, i);
    return p;
}

inline Prediction forward(const MlpModel& model, const FeatureVector& x, const ForwardMode& mode = ForwardMode::eval())
{
    return forward(model, std::span<const double>(x.values), mode);
}

struct LossAndGrad {
    double loss = 0.0;
    Parameters grads;
};

/// Mean categorical cross-entropy of a batch and its gradient.
inline LossAndGrad loss_and_grad(const MlpModel& model, std::span<const TrainingRecord> batch,
                                 const ForwardMode& mode = ForwardMode::eval())
{
    if (batch.empty()) throw DomainError("loss_and_grad: empty batch");
    const auto& p = model.params;
    const Matrix x = detail::to_matrix(batch, model.input_size());
    auto t = detail::forward_batch(p, x, mode);
    const auto rows = t.logits.rows();
    const double inv_n = 1.0 / static_cast<double>(rows);

    // log-softmax for the loss, softmax for the gradient
    LossAndGrad out;
    Matrix dz = t.logits;
    for (Eigen::Index r = 0; r < rows; ++r) {
        auto row = dz.row(r);
        const double mx = row.maxCoeff();
        const double lse = mx + std::log((row.array() - mx).exp().sum());
        const int y = batch[static_cast<std::size_t>(r)].label;
        out.loss += lse - row(y);
        row = (row.array() - lse).exp().matrix();
        row(y) -= 1.0;
    }
    out.loss *= inv_n;
    dz *= inv_n;

    out.grads = Parameters::zeros_like(p);
    for (std::size_t i = p.layers.size(); i-- > 0;) {
        auto& g = out.grads.layers[i];
        g.weights.noalias() = t.inputs[i].transpose() * dz;
        g.bias = dz.colwise().sum().transpose();
        if (i == 0) break;
        Matrix da = dz * p.layers[i].weights.transpose();
        if (!t.masks.empty()) da = da.cwiseProduct(t.masks[i - 1]);
        dz = da.cwiseProduct((t.preacts[i - 1].array() > 0.0).cast<double>().matrix());
    }
    return out;
}

struct AdamState {
    Parameters m;
    Parameters v;
    std::uint64_t t = 0;

    static AdamState for_model(const Parameters& p) { return {Parameters::zeros_like(p), Parameters::zeros_like(p), 0}; }
};

/// One bias-corrected Adam update in place.
inline void adam_step(Parameters& params, const Parameters& grads, AdamState& state, const TrainConfig& cfg)
{
    if (params.layers.size() != grads.layers.size()) throw DomainError("adam_step: shape mismatch");
    if (state.m.layers.empty()) state = AdamState::for_model(params);
    ++state.t;
    const double c1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.t));
    const double c2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.t));
    auto update = [&](auto& param, const auto& g, auto& m, auto& v) {
        if (param.size() != g.size()) throw DomainError("adam_step: shape mismatch");
        m = cfg.beta1 * m + (1.0 - cfg.beta1) * g;
        v = cfg.beta2 * v + (1.0 - cfg.beta2) * g.cwiseProduct(g);
        param.array() -= cfg.learning_rate * (m.array() / c1) / ((v.array() / c2).sqrt() + cfg.epsilon);
    };
    for (std::size_t i = 0; i < params.layers.size(); ++i) {
        update(params.layers[i].weights, grads.layers[i].weights, state.m.layers[i].weights, state.v.layers[i].weights);
        update(params.layers[i].bias, grads.layers[i].bias, state.m.layers[i].bias, state.v.layers[i].bias);
    }
}

inline int argmax(const Prediction& p) noexcept
{
    return static_cast<int>(std::max_element(p.probabilities.begin(), p.probabilities.end()) - p.probabilities.begin());
}

inline double accuracy(const MlpModel& model, const Dataset& d)
{
    if (d.empty()) return 0.0;
    std::size_t hit = 0;
    for (const auto& r : d.records) hit += argmax(forward(model, r.features)) == r.label;
    return static_cast<double>(hit) / static_cast<double>(d.size());
}

struct EpochStats {
    int epoch = 0;
    double train_loss = 0.0;
    double val_accuracy = 0.0;
};

struct TrainResult {
    MlpModel model;
    std::vector<EpochStats> history;
};

inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t a, std::uint64_t b = 0)
{
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(a), static_cast<std::uint32_t>(b)};
    std::array<std::uint32_t, 2> out;
    seq.generate(out.begin(), out.end());
    return (std::uint64_t{out[0]} << 32) | out[1];
}

/// Mini-batch Adam. Each epoch reshuffles the training set with a seed derived
/// from (config.seed, epoch); dropout masks are seeded per batch. The whole
/// run is a pure function of its inputs.
inline TrainResult train(MlpModel model, const Dataset& train_set, const Dataset& val_set, const TrainConfig& config,
                         const std::function<void(const EpochStats&)>& on_epoch = {})
{
    config.validate();
    if (train_set.empty() || val_set.empty()) throw DomainError("train: datasets must be nonempty");

    AdamState state = AdamState::for_model(model.params);
    TrainResult out;
    std::vector<std::size_t> order(train_set.size());
    std::vector<TrainingRecord> batch;
    for (int epoch = 0; epoch < config.epochs; ++epoch) {
        std::iota(order.begin(), order.end(), std::size_t{0});
        std::mt19937_64 rng(derive_seed(config.seed, static_cast<std::uint64_t>(epoch)));
        std::shuffle(order.begin(), order.end(), rng);

        double loss_sum = 0.0;
        for (std::size_t start = 0, b = 0; start < order.size(); start += config.batch_size, ++b) {
            const std::size_t end = std::min(order.size(), start + static_cast<std::size_t>(config.batch_size));
            batch.clear();
            for (std::size_t i = start; i < end; ++i) batch.push_back(train_set.records[order[i]]);
            const auto mode = ForwardMode::train(derive_seed(config.seed, static_cast<std::uint64_t>(epoch), b + 1),
                                                 config.dropout_rate);
            auto lg = loss_and_grad(model, batch, mode);
            loss_sum += lg.loss * static_cast<double>(batch.size());
            adam_step(model.params, lg.grads, state, config);
        }
        EpochStats stats{epoch + 1, loss_sum / static_cast<double>(train_set.size()), accuracy(model, val_set)};
        out.history.push_back(stats);
        if (on_epoch) on_epoch(stats);
    }
    out.model = std::move(model);
    return out;
}

struct RankedFamily {
    int family_id = 0;
    double probability = 0.0;

    friend bool operator==(const RankedFamily&, const RankedFamily&) = default;
};

struct Recommendation {
    std::array<RankedFamily, 3> choices;

    friend bool operator==(const Recommendation&, const Recommendation&) = default;
};

/// Three most probable families, descending; exact ties go to the lower id.
inline Recommendation top3(const Prediction& p)
{
    std::array<int, kFamilyCount> ids;
    std::iota(ids.begin(), ids.end(), 0);
    std::partial_sort(ids.begin(), ids.begin() + 3, ids.end(), [&](int a, int b) {
        if (p.probabilities[a] != p.probabilities[b]) return p.probabilities[a] > p.probabilities[b];
        return a < b;
    });
    Recommendation r;
    for (int i = 0; i < 3; ++i) r.choices[i] = {ids[i], p.probabilities[ids[i]]};
    return r;
}

inline Recommendation predict_top3(const MlpModel& model, const FeatureVector& x)
{
    return top3(forward(model, x));
}

} // namespace icdh
