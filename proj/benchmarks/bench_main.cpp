#include <benchmark/benchmark.h>

#include "labelaug/curriculum.hpp"
#include "labelaug/graph.hpp"
#include "labelaug/morphology.hpp"
#include "labelaug/rng.hpp"
#include "labelaug/unet.hpp"

using namespace labelaug;

namespace {

Tensor<float> random_tensor(Shape shape, Rng& rng) {
    Tensor<float> t(std::move(shape));
    for (auto& v : t.values()) v = static_cast<float>(rng.normal());
    return t;
}

void BM_Conv2dForwardBackward(benchmark::State& state) {
    const auto ch = static_cast<std::size_t>(state.range(0));
    const auto side = static_cast<std::size_t>(state.range(1));
    Rng rng(1);
    const auto x = random_tensor({8, ch, side, side}, rng);
    const auto w = random_tensor({ch, ch, 3, 3}, rng);
    const auto b = random_tensor({ch}, rng);
    for (auto _ : state) {
        Graph<float> g;
        Var out = g.conv2d(g.leaf(x), g.leaf(w), g.leaf(b));
        g.backward(out, Tensor<float>(g.value(out).shape(), 1.0f));
        benchmark::DoNotOptimize(g.grad(out).data());
    }
    state.SetItemsProcessed(state.iterations() * 8);
}
BENCHMARK(BM_Conv2dForwardBackward)->Args({8, 64})->Args({16, 32})->Args({64, 8});

void BM_UNetTrainStep(benchmark::State& state) {
    Rng rng(2);
    UNetModel<float> model(UNetConfig{1, 4, 3, 8}, rng);
    const auto x = random_tensor({8, 1, 64, 64}, rng);
    Tensor<float> y({8, 4, 64, 64});
    y[0] = 1.0f;
    const std::vector<float> pw(4, 100.0f);
    const auto w = BceWeights<float>::broadcast(8, pw);
    for (auto _ : state) {
        Graph<float> g;
        Var loss = g.weighted_bce_with_logits(model.forward(g, g.constant(x)), y, w);
        g.backward(loss);
        model.zero_grad();
    }
    state.SetItemsProcessed(state.iterations() * 8);
}
BENCHMARK(BM_UNetTrainStep)->Unit(benchmark::kMillisecond);

void BM_DilateSquare(benchmark::State& state) {
    const int side = static_cast<int>(state.range(0));
    BinaryMask m(side, side);
    m.set(side / 2, side / 2);
    for (auto _ : state) benchmark::DoNotOptimize(dilate(m, 65, StructuringElement::square3));
}
BENCHMARK(BM_DilateSquare)->Arg(64)->Arg(512);

}  // namespace

BENCHMARK_MAIN();
