#include <doctest.h>

#include "sleepstack/baselines.hpp"
#include "sleepstack/errors.hpp"
#include "sleepstack/rng.hpp"

#include "gradcheck.hpp"

#include <cmath>
#include <vector>

using namespace sleepstack;

namespace {

double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

// sequences whose label flips with a moving average of the first feature, so
// remembering the past actually helps
void toy_sequences(Rng& rng, int count, int len, int dim, std::vector<Matrix>* seqs,
                   std::vector<std::vector<int>>* ys) {
    seqs->clear();
    ys->clear();
    for (int s = 0; s < count; ++s) {
        Matrix seq(static_cast<std::size_t>(len), static_cast<std::size_t>(dim));
        std::vector<int> y(static_cast<std::size_t>(len));
        double avg = 0.0;
        for (int t = 0; t < len; ++t) {
            for (int k = 0; k < dim; ++k)
                seq.at(static_cast<std::size_t>(t), static_cast<std::size_t>(k)) = rng.normal();
            avg = 0.7 * avg + 0.3 * seq.at(static_cast<std::size_t>(t), 0);
            y[static_cast<std::size_t>(t)] = avg > 0.3 ? 0 : (avg < -0.3 ? 2 : 1);
        }
        seqs->push_back(std::move(seq));
        ys->push_back(std::move(y));
    }
}

} // namespace

TEST_CASE("big comparison net shape") {
    DenseNet net = build_ann_big();
    REQUIRE(net.layers.size() == 6);
    CHECK(net.input_dim() == 22);
    CHECK(net.output_dim() == 3);
    for (std::size_t k = 0; k + 1 < net.layers.size(); ++k) {
        CHECK(net.layers[k].spec.out_dim == kAnnBigDims[k + 1]);
        CHECK(net.layers[k].spec.activation == Activation::Relu);
    }
    CHECK(net.layers.back().spec.activation == Activation::Softmax);
    CHECK(param_count(net) == 2223);
}

TEST_CASE("lstm parameter count") {
    LstmNet net = make_lstm_baseline();
    REQUIRE(net.layers.size() == 2);
    CHECK(net.input_dim() == 22);
    CHECK(net.layers[0].hidden == 25);
    CHECK(net.layers[1].in_dim == 25);
    CHECK(net.output_dim() == 3);
    // layer 0: 100 x 47 + 100; layer 1: 100 x 50 + 100; head: 3 x 25 + 3
    CHECK(lstm_param_count(net) == 4800 + 5100 + 78);
    CHECK(lstm_param_count(net) == 9978);
}

TEST_CASE("forget gate bias starts open") {
    Rng rng(5);
    LstmNet net = make_lstm(4, {6}, 3);
    init_lstm_weights(net, rng);
    const auto& b = net.layers[0].b;
    REQUIRE(b.size() == 24);
    for (int j = 0; j < 6; ++j) {
        CHECK(b[static_cast<std::size_t>(j)] == 0.0);       // input gate
        CHECK(b[static_cast<std::size_t>(6 + j)] == 1.0);   // forget gate
        CHECK(b[static_cast<std::size_t>(12 + j)] == 0.0);  // candidate
        CHECK(b[static_cast<std::size_t>(18 + j)] == 0.0);  // output gate
    }
}

TEST_CASE("cell step matches a hand computation") {
    // 1 input, 1 hidden unit: every gate is a scalar sigmoid/tanh
    LstmNet net = make_lstm(1, {1}, 2);
    auto& l = net.layers[0];
    REQUIRE(l.w.size() == 8); // 4 rows x (1 + 1)
    // rows: i, f, g, o; columns: x then h_prev
    l.w = {0.5, 0.1, -0.3, 0.2, 0.7, -0.4, 0.9, 0.6};
    l.b = {0.05, 1.0, -0.1, 0.15};

    const double x = 0.8, hp = -0.25, cp = 0.4;
    const double zi = 0.5 * x + 0.1 * hp + 0.05;
    const double zf = -0.3 * x + 0.2 * hp + 1.0;
    const double zg = 0.7 * x - 0.4 * hp - 0.1;
    const double zo = 0.9 * x + 0.6 * hp + 0.15;
    const double c = sigmoid(zf) * cp + sigmoid(zi) * std::tanh(zg);
    const double h = sigmoid(zo) * std::tanh(c);

    double h_out = 0.0, c_out = 0.0;
    lstm_cell(l, &x, &hp, &cp, &h_out, &c_out);
    CHECK(c_out == doctest::Approx(c).epsilon(1e-14));
    CHECK(h_out == doctest::Approx(h).epsilon(1e-14));
}

TEST_CASE("sequence forward is shaped and deterministic") {
    Rng rng(7);
    LstmNet net = make_lstm_baseline();
    init_lstm_weights(net, rng);
    Matrix seq(40, 22);
    for (auto& v : seq.data) v = rng.uniform(-2.0, 2.0);

    Matrix p1 = lstm_forward(net, seq);
    Matrix p2 = lstm_forward(net, seq);
    REQUIRE(p1.rows == 40);
    REQUIRE(p1.cols == 3);
    CHECK(p1.data == p2.data);
    for (std::size_t t = 0; t < p1.rows; ++t) {
        double sum = 0.0;
        for (std::size_t k = 0; k < 3; ++k) sum += p1.at(t, k);
        CHECK(sum == doctest::Approx(1.0).epsilon(1e-12));
    }
}

TEST_CASE("lstm gradients agree with finite differences") {
    Rng rng(17);
    LstmNet net = make_lstm(3, {4}, 3);
    init_lstm_weights(net, rng);
    std::vector<Matrix> seqs;
    std::vector<std::vector<int>> ys;
    toy_sequences(rng, 2, 3, 3, &seqs, &ys);
    std::vector<double> cw = {1.0, 0.8, 1.3};
    CHECK(gradcheck::lstm_max_rel(net, seqs, ys, cw) < 1e-3);
}

TEST_CASE("lstm training runs and is reproducible") {
    Rng rng(23);
    std::vector<Matrix> seqs;
    std::vector<std::vector<int>> ys;
    toy_sequences(rng, 6, 30, 4, &seqs, &ys);

    TrainConfig cfg;
    cfg.max_epochs = 8;
    cfg.seed = 11;
    LstmNet a = make_lstm(4, {6}, 3);
    TrainHistory ha = lstm_train(a, seqs, ys, cfg, 16);
    REQUIRE(ha.epochs_run >= 1);
    CHECK(std::isfinite(ha.train_loss.back()));
    // loss should come down on this learnable toy problem
    CHECK(ha.train_loss.back() < ha.train_loss.front());

    LstmNet b = make_lstm(4, {6}, 3);
    TrainHistory hb = lstm_train(b, seqs, ys, cfg, 16);
    CHECK(lstm_to_bytes(a) == lstm_to_bytes(b));
    CHECK(ha.train_loss == hb.train_loss);
}

TEST_CASE("lstm weight files") {
    Rng rng(29);
    LstmNet net = make_lstm(5, {4, 3}, 3);
    init_lstm_weights(net, rng);
    const std::string bytes = lstm_to_bytes(net);

    SUBCASE("round trip is byte-stable") {
        LstmNet back = lstm_from_bytes(bytes);
        CHECK(back.layers.size() == 2);
        CHECK(back.layers[1].hidden == 3);
        CHECK(lstm_to_bytes(back) == bytes);
    }
    SUBCASE("corruption is caught") {
        std::string bad = bytes;
        bad[12] = static_cast<char>(bad[12] ^ 0x01);
        CHECK_THROWS_AS(lstm_from_bytes(bad), Error);
    }
    SUBCASE("a dense blob is not an lstm") {
        DenseNet dense = make_dense_net({4, 3}, Activation::Relu, Activation::Softmax);
        init_weights(dense, rng);
        try {
            lstm_from_bytes(net_to_bytes(dense));
            FAIL("expected a throw");
        } catch (const Error& e) {
            CHECK(e.code() == ErrorCode::TopologyMismatch);
        }
    }
    SUBCASE("an lstm blob is not a dense net") {
        try {
            net_from_bytes(bytes);
            FAIL("expected a throw");
        } catch (const Error& e) {
            CHECK(e.code() == ErrorCode::TopologyMismatch);
        }
    }
}
