#include <catch_amalgamated.hpp>

#include <cmath>
#include <numbers>
#include <random>
#include <sstream>

#include "mohv/neural.hpp"
#include "oracles.hpp"

using namespace mohv;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {

Mlp identity_net(std::size_t d) {
    DenseLayer l{Eigen::MatrixXd::Identity(d, d), Eigen::VectorXd::Zero(d), Activation::identity};
    return Mlp({l});
}

// Gradient of <upstream, net(x)> against long-double central differences.
void gradient_check(std::vector<std::size_t> const& sizes, std::uint64_t seed, int probes) {
    Mlp net(sizes, seed);
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> in(0.0, 2.0 * std::numbers::pi);
    std::normal_distribution<double> normal;
    auto const total = net.parameter_count();
    for (int probe = 0; probe < probes; ++probe) {
        std::vector<double> x(sizes.front());
        long double min_abs = 0;
        do {
            for (auto& v : x) v = in(rng);
            oracle::mlp_forward(net.layers(), {x.begin(), x.end()}, &min_abs);
        } while (min_abs < 1e-4L);
        std::vector<double> up(sizes.back());
        for (auto& v : up) v = normal(rng);

        Tape tape;
        net.forward(x, &tape);
        Eigen::Map<Eigen::MatrixXd const> upstream(up.data(), static_cast<Eigen::Index>(up.size()), 1);
        auto const grad = net.backward(tape, upstream);
        std::vector<double> flat;
        for (std::size_t k = 0; k < grad.weight.size(); ++k) {
            for (Eigen::Index r = 0; r < grad.weight[k].rows(); ++r)
                for (Eigen::Index c = 0; c < grad.weight[k].cols(); ++c) flat.push_back(grad.weight[k](r, c));
            for (Eigen::Index r = 0; r < grad.bias[k].size(); ++r) flat.push_back(grad.bias[k](r));
        }
        REQUIRE(flat.size() == total);

        std::size_t const param = rng() % total;
        double const h = 1e-6 * std::max(1.0, std::abs(net.flat_parameters()[param]));
        double const fd = oracle::mlp_param_fd(net.layers(), {x.begin(), x.end()}, up, param, h);
        REQUIRE_THAT(flat[param], WithinAbs(fd, 1e-6 * std::max(std::abs(fd), 1e-6)));
    }
}

} // namespace

TEST_CASE("forward examples") {
    DenseLayer zero{Eigen::MatrixXd::Zero(2, 3), Eigen::VectorXd::Zero(2), Activation::identity};
    CHECK(Mlp({zero}).forward(std::vector<double>{0.3, -1.0, 5.0}) == std::vector<double>{0.0, 0.0});
    CHECK(identity_net(2).forward(std::vector<double>{0.3, 0.7}) == std::vector<double>{0.3, 0.7});

    Mlp net({4, 16, 16, 1}, 3);
    for (double x = 0.0; x <= 2 * std::numbers::pi; x += 0.1) {
        auto const y = net.forward(std::vector<double>{x, x, x, x});
        CHECK(std::isfinite(y[0]));
    }
    CHECK_THROWS_AS(net.forward(std::vector<double>{1.0}), ContractViolation);
}

TEST_CASE("layer shapes must chain") {
    DenseLayer a{Eigen::MatrixXd::Zero(3, 2), Eigen::VectorXd::Zero(3), Activation::relu};
    DenseLayer b{Eigen::MatrixXd::Zero(1, 4), Eigen::VectorXd::Zero(1), Activation::identity};
    CHECK_THROWS_AS(Mlp({a, b}), ContractViolation);
}

TEST_CASE("initialization is fan-in scaled and seeded") {
    Mlp a({1, 100, 100, 1}, 42), b({1, 100, 100, 1}, 42), c({1, 100, 100, 1}, 43);
    CHECK(a.flat_parameters() == b.flat_parameters());
    CHECK(a.flat_parameters() != c.flat_parameters());
    CHECK(a.parameter_count() == 100 + 100 + 100 * 100 + 100 + 100 + 1);
    for (auto const& l : a.layers()) {
        double const bound = 1.0 / std::sqrt(static_cast<double>(l.weight.cols()));
        CHECK(l.weight.cwiseAbs().maxCoeff() <= bound);
        CHECK(l.bias.cwiseAbs().maxCoeff() <= bound);
    }
    CHECK(a.layers().back().activation == Activation::identity);
    CHECK(a.layers().front().activation == Activation::relu);
}

TEST_CASE("backward on a scalar linear net") {
    DenseLayer l{Eigen::MatrixXd::Constant(1, 1, 2.0), Eigen::VectorXd::Zero(1), Activation::identity};
    Mlp net({l});
    Tape tape;
    net.forward(std::vector<double>{0.7}, &tape);
    auto const g = net.backward(tape, Eigen::MatrixXd::Constant(1, 1, 1.0));
    CHECK(g.weight[0](0, 0) == 0.7);
    CHECK(g.bias[0](0) == 1.0);
}

TEST_CASE("ReLU at exactly zero uses subgradient 0") {
    DenseLayer h{Eigen::MatrixXd::Constant(1, 1, 1.0), Eigen::VectorXd::Zero(1), Activation::relu};
    DenseLayer o{Eigen::MatrixXd::Constant(1, 1, 1.0), Eigen::VectorXd::Zero(1), Activation::identity};
    Mlp net({h, o});
    Tape tape;
    net.forward(std::vector<double>{0.0}, &tape);
    auto const g = net.backward(tape, Eigen::MatrixXd::Constant(1, 1, 1.0));
    CHECK(g.weight[0](0, 0) == 0.0);
    CHECK(g.bias[0](0) == 0.0);
}

TEST_CASE("stale and foreign tapes are rejected") {
    Mlp net({2, 3, 1}, 1), other({2, 3, 1}, 1);
    Tape tape;
    net.forward(std::vector<double>{0.1, 0.2}, &tape);
    CHECK_THROWS_AS(other.backward(tape, Eigen::MatrixXd::Ones(1, 1)), ContractViolation);
    net.mutable_layers();
    CHECK_THROWS_AS(net.backward(tape, Eigen::MatrixXd::Ones(1, 1)), ContractViolation);
}

TEST_CASE("batched backward equals the sum of per-sample gradients") {
    Mlp net({3, 8, 2}, 5);
    Eigen::MatrixXd x = Eigen::MatrixXd::Random(3, 4);
    Eigen::MatrixXd up = Eigen::MatrixXd::Random(2, 4);
    Tape tape;
    net.forward(x, &tape);
    auto const all = net.backward(tape, up);
    Eigen::MatrixXd sum = Eigen::MatrixXd::Zero(8, 3);
    for (Eigen::Index c = 0; c < 4; ++c) {
        net.forward(x.col(c), &tape);
        sum += net.backward(tape, up.col(c)).weight[0];
    }
    CHECK(all.weight[0].isApprox(sum, 1e-12));
}

TEST_CASE("gradient check on small random nets") {
    gradient_check({3, 5, 4, 2}, 1, 60);
    gradient_check({1, 7, 1}, 2, 60);
}

TEST_CASE("adam update rules") {
    DenseLayer l{Eigen::MatrixXd::Constant(1, 2, 1.0), Eigen::VectorXd::Zero(1), Activation::identity};
    Mlp net({l});
    Adam opt(net, AdamSettings{0.01, 0.9, 0.999, 1e-8, 0.0});

    MlpGradient g;
    g.weight = {Eigen::MatrixXd(1, 2)};
    g.weight[0] << 3.0, -0.5;
    g.bias = {Eigen::VectorXd::Zero(1)};
    opt.step(net, g);
    CHECK_THAT(net.layers()[0].weight(0, 0), WithinAbs(1.0 - 0.01, 1e-8));
    CHECK_THAT(net.layers()[0].weight(0, 1), WithinAbs(1.0 + 0.01, 1e-8));
    CHECK(net.layers()[0].bias(0) == 0.0); // zero gradient, no decay: unchanged
    double const d1 = 1.0 - net.layers()[0].weight(0, 0);

    double const before = net.layers()[0].weight(0, 0);
    opt.step(net, g);
    double const d2 = before - net.layers()[0].weight(0, 0);
    CHECK(std::abs(d2) <= std::abs(d1) + 1e-15);
    CHECK(opt.steps() == 2);
}

TEST_CASE("adam second step matches the recurrence") {
    double const lr = 0.1, b1 = 0.5, b2 = 0.9, eps = 1e-8;
    DenseLayer l{Eigen::MatrixXd::Constant(1, 1, 0.0), Eigen::VectorXd::Zero(1), Activation::identity};
    Mlp net({l});
    Adam opt(net, AdamSettings{lr, b1, b2, eps, 0.0});
    MlpGradient g{{Eigen::MatrixXd::Constant(1, 1, 2.0)}, {Eigen::VectorXd::Zero(1)}};
    opt.step(net, g);
    g.weight[0](0, 0) = -1.0;
    opt.step(net, g);
    // m: 1.0 then 0.0; v: 0.4 then 0.46.
    double const step1 = lr * (1.0 / (1 - b1)) / (std::sqrt(0.4 / (1 - b2)) + eps);
    double const step2 = lr * (0.0 / (1 - b1 * b1)) / (std::sqrt(0.46 / (1 - b2 * b2)) + eps);
    CHECK_THAT(net.layers()[0].weight(0, 0), WithinAbs(-step1 - step2, 1e-12));
}

TEST_CASE("decoupled weight decay shrinks parameters without gradient") {
    DenseLayer l{Eigen::MatrixXd::Constant(1, 1, 2.0), Eigen::VectorXd::Zero(1), Activation::identity};
    Mlp net({l});
    Adam opt(net, AdamSettings{0.1, 0.9, 0.999, 1e-8, 0.5});
    opt.step(net, MlpGradient{{Eigen::MatrixXd::Zero(1, 1)}, {Eigen::VectorXd::Zero(1)}});
    CHECK_THAT(net.layers()[0].weight(0, 0), WithinRel(2.0 * (1 - 0.05), 1e-15));
}

TEST_CASE("checkpoint round trip is exact") {
    Mlp net({2, 6, 3}, 9);
    Adam opt(net, AdamSettings{0.003, 0.5, 0.99, 1e-7, 0.01});
    Tape tape;
    net.forward(std::vector<double>{0.3, 0.1}, &tape);
    opt.step(net, net.backward(tape, Eigen::MatrixXd::Ones(3, 1)));

    std::stringstream ss;
    write_checkpoint(ss, net, opt);
    std::string const text = ss.str();
    auto [net2, opt2] = read_checkpoint(ss);
    CHECK(net2.flat_parameters() == net.flat_parameters());
    CHECK(opt2.steps() == 1);
    CHECK(opt2.settings().beta1 == 0.5);

    std::stringstream again;
    write_checkpoint(again, net2, opt2);
    CHECK(again.str() == text);

    // Continued training from the reloaded state matches the original.
    net.forward(std::vector<double>{0.2, 0.4}, &tape);
    opt.step(net, net.backward(tape, Eigen::MatrixXd::Ones(3, 1)));
    net2.forward(std::vector<double>{0.2, 0.4}, &tape);
    opt2.step(net2, net2.backward(tape, Eigen::MatrixXd::Ones(3, 1)));
    CHECK(net2.flat_parameters() == net.flat_parameters());
}

TEST_CASE("malformed checkpoints are reported") {
    std::stringstream bad("mohv-checkpoint 2\n");
    CHECK_THROWS_AS(read_checkpoint(bad), IoError);
    std::stringstream truncated("mohv-checkpoint 1\nlayers 1\nlayer 0 1 1 relu\n0.5\n");
    CHECK_THROWS_AS(read_checkpoint(truncated), IoError);
}
