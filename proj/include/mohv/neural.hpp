#pragma once

#include <atomic>
#include <cmath>
#include <cstdint>
#include <istream>
#include <ostream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "mohv/errors.hpp"

namespace mohv {

/// SplitMix64 step, used to fan a master seed out into independent streams.
inline std::uint64_t split_seed(std::uint64_t seed, std::uint64_t stream) {
    std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (stream + 1);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

enum class Activation { identity, relu };

struct DenseLayer {
    Eigen::MatrixXd weight; // out x in
    Eigen::VectorXd bias;   // out
    Activation activation = Activation::identity;
};

/// Activation record of one forward pass. Columns are samples.
struct Tape {
    std::uint64_t owner = 0;
    std::uint64_t version = 0;
    std::vector<Eigen::MatrixXd> layer_inputs;
    std::vector<Eigen::MatrixXd> pre_activations;
};

struct MlpGradient {
    std::vector<Eigen::MatrixXd> weight;
    std::vector<Eigen::VectorXd> bias;

    [[nodiscard]] double squared_norm() const {
        double s = 0.0;
        for (auto const& w : weight) s += w.squaredNorm();
        for (auto const& b : bias) s += b.squaredNorm();
        return s;
    }
};

/// Fully connected network: ReLU on hidden layers, identity on the output.
class Mlp {
public:
    Mlp() = default;

    /// `sizes` = {in, hidden..., out}. Weights and biases drawn from
    /// U(-1/sqrt(fan_in), 1/sqrt(fan_in)).
    Mlp(std::vector<std::size_t> const& sizes, std::uint64_t seed) : id_(next_id()) {
        require(sizes.size() >= 2, "Mlp: need at least input and output sizes");
        std::mt19937_64 rng(seed);
        for (std::size_t k = 0; k + 1 < sizes.size(); ++k) {
            require(sizes[k] > 0 && sizes[k + 1] > 0, "Mlp: zero layer width");
            auto const fan_in = static_cast<Eigen::Index>(sizes[k]);
            auto const fan_out = static_cast<Eigen::Index>(sizes[k + 1]);
            double const bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
            std::uniform_real_distribution<double> dist(-bound, bound);
            DenseLayer layer;
            layer.weight.resize(fan_out, fan_in);
            layer.bias.resize(fan_out);
            for (Eigen::Index r = 0; r < fan_out; ++r)
                for (Eigen::Index c = 0; c < fan_in; ++c) layer.weight(r, c) = dist(rng);
            for (Eigen::Index r = 0; r < fan_out; ++r) layer.bias(r) = dist(rng);
            layer.activation = (k + 2 == sizes.size()) ? Activation::identity : Activation::relu;
            layers_.push_back(std::move(layer));
        }
    }

    explicit Mlp(std::vector<DenseLayer> layers) : id_(next_id()), layers_(std::move(layers)) {
        require(!layers_.empty(), "Mlp: no layers");
        for (std::size_t k = 0; k < layers_.size(); ++k) {
            require(layers_[k].bias.size() == layers_[k].weight.rows(), "Mlp: bias/weight shape mismatch");
            if (k + 1 < layers_.size())
                require(layers_[k].weight.rows() == layers_[k + 1].weight.cols(), "Mlp: layer shapes do not chain");
        }
    }

    [[nodiscard]] std::size_t input_dim() const { return static_cast<std::size_t>(layers_.front().weight.cols()); }
    [[nodiscard]] std::size_t output_dim() const { return static_cast<std::size_t>(layers_.back().weight.rows()); }
    [[nodiscard]] std::vector<DenseLayer> const& layers() const noexcept { return layers_; }
    [[nodiscard]] std::uint64_t version() const noexcept { return version_; }

    [[nodiscard]] std::size_t parameter_count() const {
        std::size_t c = 0;
        for (auto const& l : layers_) c += static_cast<std::size_t>(l.weight.size() + l.bias.size());
        return c;
    }

    /// Mutable access to the parameters. Invalidates outstanding tapes.
    std::vector<DenseLayer>& mutable_layers() {
        ++version_;
        return layers_;
    }

    /// Batched forward pass; `inputs` is in_dim x batch.
    Eigen::MatrixXd forward(Eigen::Ref<Eigen::MatrixXd const> const& inputs, Tape* tape = nullptr) const {
        require(!layers_.empty(), "forward: empty network");
        require(static_cast<std::size_t>(inputs.rows()) == input_dim(), "forward: input dimension mismatch");
        if (tape) {
            tape->owner = id_;
            tape->version = version_;
            tape->layer_inputs.clear();
            tape->pre_activations.clear();
        }
        Eigen::MatrixXd x = inputs;
        for (auto const& layer : layers_) {
            Eigen::MatrixXd z = layer.weight * x;
            z.colwise() += layer.bias;
            if (tape) {
                tape->layer_inputs.push_back(std::move(x));
                tape->pre_activations.push_back(z);
            }
            x = layer.activation == Activation::relu ? Eigen::MatrixXd(z.cwiseMax(0.0)) : std::move(z);
        }
        return x;
    }

    std::vector<double> forward(std::vector<double> const& input, Tape* tape = nullptr) const {
        Eigen::Map<Eigen::VectorXd const> column(input.data(), static_cast<Eigen::Index>(input.size()));
        Eigen::MatrixXd out = forward(Eigen::MatrixXd(column), tape);
        return {out.data(), out.data() + out.size()};
    }

    /// Gradient of sum over columns of <upstream, output> w.r.t. every parameter.
    /// ReLU uses subgradient 0 at a pre-activation of exactly 0.
    MlpGradient backward(Tape const& tape, Eigen::Ref<Eigen::MatrixXd const> const& upstream) const {
        require(tape.owner == id_ && tape.version == version_ && tape.layer_inputs.size() == layers_.size(),
                "backward: stale or foreign tape");
        require(static_cast<std::size_t>(upstream.rows()) == output_dim() &&
                    upstream.cols() == tape.layer_inputs.front().cols(),
                "backward: upstream shape mismatch");
        MlpGradient grad;
        grad.weight.resize(layers_.size());
        grad.bias.resize(layers_.size());
        Eigen::MatrixXd delta = upstream;
        for (std::size_t k = layers_.size(); k-- > 0;) {
            auto const& layer = layers_[k];
            if (layer.activation == Activation::relu)
                delta = delta.cwiseProduct((tape.pre_activations[k].array() > 0.0).cast<double>().matrix());
            grad.weight[k].noalias() = delta * tape.layer_inputs[k].transpose();
            grad.bias[k] = delta.rowwise().sum();
            if (k > 0) delta = layer.weight.transpose() * delta;
        }
        return grad;
    }

    std::vector<double> flat_parameters() const {
        std::vector<double> flat;
        flat.reserve(parameter_count());
        for (auto const& l : layers_) {
            for (Eigen::Index r = 0; r < l.weight.rows(); ++r)
                for (Eigen::Index c = 0; c < l.weight.cols(); ++c) flat.push_back(l.weight(r, c));
            for (Eigen::Index r = 0; r < l.bias.size(); ++r) flat.push_back(l.bias(r));
        }
        return flat;
    }

private:
    static std::uint64_t next_id() {
        static std::atomic<std::uint64_t> counter{1};
        return counter.fetch_add(1);
    }

    std::uint64_t id_ = 0;
    std::uint64_t version_ = 0;
    std::vector<DenseLayer> layers_;
};

struct AdamSettings {
    double learning_rate = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
    double weight_decay = 0.0; // decoupled
};

/// Adam with bias correction and optional decoupled weight decay.
class Adam {
public:
    Adam() = default;

    Adam(Mlp const& net, AdamSettings settings) : settings_(settings) {
        for (auto const& l : net.layers()) {
            m_weight_.push_back(Eigen::MatrixXd::Zero(l.weight.rows(), l.weight.cols()));
            v_weight_.push_back(Eigen::MatrixXd::Zero(l.weight.rows(), l.weight.cols()));
            m_bias_.push_back(Eigen::VectorXd::Zero(l.bias.size()));
            v_bias_.push_back(Eigen::VectorXd::Zero(l.bias.size()));
        }
    }

    void step(Mlp& net, MlpGradient const& grad) {
        auto& layers = net.mutable_layers();
        require(layers.size() == m_weight_.size() && grad.weight.size() == layers.size() &&
                    grad.bias.size() == layers.size(),
                "adam_step: layer count mismatch");
        ++t_;
        double const c1 = 1.0 - std::pow(settings_.beta1, static_cast<double>(t_));
        double const c2 = 1.0 - std::pow(settings_.beta2, static_cast<double>(t_));
        for (std::size_t k = 0; k < layers.size(); ++k) {
            require(grad.weight[k].rows() == layers[k].weight.rows() && grad.weight[k].cols() == layers[k].weight.cols() &&
                        grad.bias[k].size() == layers[k].bias.size(),
                    "adam_step: gradient shape mismatch");
            update(layers[k].weight, m_weight_[k], v_weight_[k], grad.weight[k], c1, c2);
            update(layers[k].bias, m_bias_[k], v_bias_[k], grad.bias[k], c1, c2);
        }
    }

    [[nodiscard]] AdamSettings const& settings() const noexcept { return settings_; }
    [[nodiscard]] std::uint64_t steps() const noexcept { return t_; }

    friend void write_checkpoint(std::ostream&, Mlp const&, Adam const&);
    friend std::pair<Mlp, Adam> read_checkpoint(std::istream&);

private:
    template <class Param, class Grad>
    void update(Param& param, Param& m, Param& v, Grad const& g, double c1, double c2) const {
        m = settings_.beta1 * m + (1.0 - settings_.beta1) * g;
        v = settings_.beta2 * v + (1.0 - settings_.beta2) * g.cwiseProduct(g);
        if (settings_.weight_decay != 0.0) param *= (1.0 - settings_.learning_rate * settings_.weight_decay);
        param.array() -= settings_.learning_rate * (m.array() / c1) / ((v.array() / c2).sqrt() + settings_.epsilon);
    }

    AdamSettings settings_{};
    std::uint64_t t_ = 0;
    std::vector<Eigen::MatrixXd> m_weight_, v_weight_;
    std::vector<Eigen::VectorXd> m_bias_, v_bias_;
};

// Checkpoint text format (version 1):
//
//   mohv-checkpoint 1
//   layers <L>
//   layer <k> <rows> <cols> <relu|identity>
//   <rows*cols weights, row-major>
//   <rows biases>
//   ... repeated per layer ...
//   adam <t> <learning_rate> <beta1> <beta2> <epsilon> <weight_decay>
//   moments <k>
//   <m weights> / <v weights> / <m bias> / <v bias>, one line each, row-major
//
// Values are written with 17 significant digits so a reload is exact.
namespace detail {

inline void write_values(std::ostream& os, Eigen::Ref<Eigen::MatrixXd const> const& m) {
    char buf[32];
    for (Eigen::Index r = 0; r < m.rows(); ++r)
        for (Eigen::Index c = 0; c < m.cols(); ++c) {
            std::snprintf(buf, sizeof buf, "%.17g", m(r, c));
            if (r || c) os << ' ';
            os << buf;
        }
    os << '\n';
}

inline void read_values(std::istream& is, Eigen::MatrixXd& m) {
    for (Eigen::Index r = 0; r < m.rows(); ++r)
        for (Eigen::Index c = 0; c < m.cols(); ++c)
            if (!(is >> m(r, c))) throw IoError("checkpoint: truncated value block");
}

inline void expect_token(std::istream& is, std::string const& token) {
    std::string got;
    if (!(is >> got) || got != token) throw IoError("checkpoint: expected '" + token + "', got '" + got + "'");
}

} // namespace detail

inline void write_checkpoint(std::ostream& os, Mlp const& net, Adam const& opt) {
    auto const& layers = net.layers();
    os << "mohv-checkpoint 1\n";
    os << "layers " << layers.size() << '\n';
    for (std::size_t k = 0; k < layers.size(); ++k) {
        auto const& l = layers[k];
        os << "layer " << k << ' ' << l.weight.rows() << ' ' << l.weight.cols() << ' '
           << (l.activation == Activation::relu ? "relu" : "identity") << '\n';
        detail::write_values(os, l.weight);
        detail::write_values(os, l.bias.transpose());
    }
    char buf[256];
    auto const& s = opt.settings_;
    std::snprintf(buf, sizeof buf, "adam %llu %.17g %.17g %.17g %.17g %.17g\n",
                  static_cast<unsigned long long>(opt.t_), s.learning_rate, s.beta1, s.beta2, s.epsilon,
                  s.weight_decay);
    os << buf;
    for (std::size_t k = 0; k < opt.m_weight_.size(); ++k) {
        os << "moments " << k << '\n';
        detail::write_values(os, opt.m_weight_[k]);
        detail::write_values(os, opt.v_weight_[k]);
        detail::write_values(os, opt.m_bias_[k].transpose());
        detail::write_values(os, opt.v_bias_[k].transpose());
    }
}

inline std::pair<Mlp, Adam> read_checkpoint(std::istream& is) {
    detail::expect_token(is, "mohv-checkpoint");
    int version = 0;
    if (!(is >> version) || version != 1) throw IoError("checkpoint: unsupported version");
    detail::expect_token(is, "layers");
    std::size_t count = 0;
    is >> count;
    std::vector<DenseLayer> layers(count);
    for (std::size_t k = 0; k < count; ++k) {
        detail::expect_token(is, "layer");
        std::size_t idx = 0;
        Eigen::Index rows = 0, cols = 0;
        std::string act;
        if (!(is >> idx >> rows >> cols >> act) || idx != k) throw IoError("checkpoint: bad layer header");
        layers[k].weight.resize(rows, cols);
        detail::read_values(is, layers[k].weight);
        Eigen::MatrixXd b(1, rows);
        detail::read_values(is, b);
        layers[k].bias = b.transpose();
        if (act == "relu") layers[k].activation = Activation::relu;
        else if (act == "identity") layers[k].activation = Activation::identity;
        else throw IoError("checkpoint: unknown activation '" + act + "'");
    }
    Mlp net(std::move(layers));
    detail::expect_token(is, "adam");
    AdamSettings s;
    unsigned long long t = 0;
    if (!(is >> t >> s.learning_rate >> s.beta1 >> s.beta2 >> s.epsilon >> s.weight_decay))
        throw IoError("checkpoint: bad optimizer header");
    Adam opt(net, s);
    opt.t_ = t;
    for (std::size_t k = 0; k < count; ++k) {
        detail::expect_token(is, "moments");
        std::size_t idx = 0;
        is >> idx;
        if (idx != k) throw IoError("checkpoint: moments out of order");
        detail::read_values(is, opt.m_weight_[k]);
        detail::read_values(is, opt.v_weight_[k]);
        Eigen::MatrixXd mb(1, opt.m_bias_[k].size()), vb(1, opt.v_bias_[k].size());
        detail::read_values(is, mb);
        detail::read_values(is, vb);
        opt.m_bias_[k] = mb.transpose();
        opt.v_bias_[k] = vb.transpose();
    }
    return {std::move(net), std::move(opt)};
}

} // namespace mohv
