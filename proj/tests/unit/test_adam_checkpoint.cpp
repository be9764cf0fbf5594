#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "labelaug/adam.hpp"
#include "labelaug/checkpoint.hpp"
#include "labelaug/errors.hpp"

using namespace labelaug;
namespace fs = std::filesystem;

namespace {

std::vector<Parameter<double>> one_param(double value, double grad) {
    std::vector<Parameter<double>> ps;
    ps.emplace_back("p", Tensor<double>({1}, value));
    ps[0].grad[0] = grad;
    return ps;
}

// Plain scalar recurrence written out independently of the optimizer.
double scalar_adam_displacement(double g, int steps, double lr) {
    double m = 0, v = 0, x = 0;
    for (int t = 1; t <= steps; ++t) {
        m = 0.9 * m + 0.1 * g;
        v = 0.999 * v + 0.001 * g * g;
        const double mh = m / (1 - std::pow(0.9, t));
        const double vh = v / (1 - std::pow(0.999, t));
        x -= lr * mh / (std::sqrt(vh) + 1e-8);
    }
    return x;
}

}  // namespace

TEST_CASE("adam first step moves by lr against the gradient sign") {
    for (double g : {3.0, -0.02, 1e-4}) {
        auto ps = one_param(1.0, g);
        Adam<double> opt;
        opt.step(ps);
        CHECK(ps[0].value[0] - 1.0 == doctest::Approx(-0.001 * (g > 0 ? 1 : -1)).epsilon(1e-3));
        CHECK(ps[0].grad[0] == 0.0);
    }
}

TEST_CASE("adam with zero gradient leaves the parameter and decays the moments") {
    auto ps = one_param(2.0, 0.0);
    Adam<double> opt;
    opt.step(ps);
    CHECK(ps[0].value[0] == 2.0);
    ps[0].grad[0] = 1.0;
    opt.step(ps);
    const double m_after = opt.first_moments()[0][0];
    ps[0].grad[0] = 0.0;
    const double before = ps[0].value[0];
    opt.step(ps);
    CHECK(opt.first_moments()[0][0] == doctest::Approx(0.9 * m_after));
    CHECK(ps[0].value[0] != before);  // momentum still carries
}

TEST_CASE("adam two constant-gradient steps follow the scalar recurrence") {
    auto ps = one_param(0.0, 0.5);
    Adam<double> opt;
    opt.step(ps);
    const double d1 = ps[0].value[0];
    ps[0].grad[0] = 0.5;
    opt.step(ps);
    const double d2 = ps[0].value[0] - d1;
    CHECK(std::abs(d1) == doctest::Approx(0.001).epsilon(0.1));
    CHECK(std::abs(d2) == doctest::Approx(0.001).epsilon(0.1));
    CHECK(ps[0].value[0] == doctest::Approx(scalar_adam_displacement(0.5, 2, 0.001)).epsilon(1e-12));
    CHECK(opt.step_count() == 2);
}

TEST_CASE("adam rejects bad hyperparameters") {
    CHECK_THROWS_AS(Adam<float>(AdamOptions{0.0}), std::invalid_argument);
    CHECK_THROWS_AS(Adam<float>(AdamOptions{1e-3, 1.0}), std::invalid_argument);
}

TEST_CASE("checkpoint encode/decode round trip") {
    std::vector<Parameter<float>> ps;
    ps.emplace_back("a.weight", Tensor<float>({2, 3}, std::vector<float>{1, -2, 3.5f, 0, 1e-7f, 9}));
    ps.emplace_back("a.bias", Tensor<float>({2}, std::vector<float>{0.25f, -0.5f}));
    Adam<float> opt;
    for (auto& p : ps) p.grad.fill(0.1f);
    opt.step(ps);

    const Checkpoint ck = make_checkpoint<float>(ps, &opt);
    const std::string bytes = encode_checkpoint(ck);
    CHECK(bytes.substr(0, 4) == "LCKP");
    const Checkpoint back = decode_checkpoint(bytes);
    CHECK(back.precision == Precision::f32);
    CHECK(encode_checkpoint(back) == bytes);

    std::vector<Parameter<float>> qs;
    qs.emplace_back("a.weight", Tensor<float>({2, 3}));
    qs.emplace_back("a.bias", Tensor<float>({2}));
    Adam<float> opt2;
    restore_checkpoint<float>(back, qs, &opt2);
    CHECK(qs[0].value == ps[0].value);
    CHECK(qs[1].value == ps[1].value);
    CHECK(opt2.step_count() == 1);
    CHECK(opt2.second_moments()[0] == opt.second_moments()[0]);
}

TEST_CASE("checkpoint decoding rejects damaged input") {
    Checkpoint ck;
    ck.add("x", {2}, {1.0, 2.0});
    const std::string bytes = encode_checkpoint(ck);
    CHECK_THROWS_AS(decode_checkpoint("NOPE" + bytes.substr(4)), DataError);
    CHECK_THROWS_AS(decode_checkpoint(bytes.substr(0, bytes.size() - 1)), DataError);
    CHECK_THROWS_AS(decode_checkpoint(bytes + "x"), DataError);
    std::string wrong_version = bytes;
    wrong_version[4] = 9;
    CHECK_THROWS_AS(decode_checkpoint(wrong_version), DataError);
}

TEST_CASE("restore reports missing and mis-shaped entries") {
    Checkpoint ck;
    ck.precision = Precision::f64;
    ck.add("w", {3}, {1, 2, 3});
    std::vector<Parameter<double>> ps;
    ps.emplace_back("w", Tensor<double>({4}));
    CHECK_THROWS_AS(restore_checkpoint<double>(ck, ps), DataError);
    std::vector<Parameter<double>> qs;
    qs.emplace_back("other", Tensor<double>({3}));
    CHECK_THROWS_AS(restore_checkpoint<double>(ck, qs), DataError);
}

TEST_CASE("checkpoint files round trip and reading a missing file fails") {
    const fs::path dir = fs::temp_directory_path() / "labelaug_ckpt_test";
    fs::create_directories(dir);
    Checkpoint ck;
    ck.precision = Precision::f64;
    ck.add("w", {1}, {0.1});
    ck.add_scalar("train.next_epoch", 7);
    write_checkpoint(dir / "a.lckp", ck);
    const Checkpoint back = read_checkpoint(dir / "a.lckp");
    CHECK(back.scalar("train.next_epoch") == 7.0);
    CHECK(back.find("w")->values[0] == 0.1);
    CHECK_FALSE(fs::exists(dir / "a.lckp.tmp"));
    CHECK_THROWS_AS(read_checkpoint(dir / "missing.lckp"), DataError);
    fs::remove_all(dir);
}
