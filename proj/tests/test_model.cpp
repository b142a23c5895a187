#include <gtest/gtest.h>

#include <map>
#include <random>

#include "bgsnetd/nn/model.hpp"
#include "support.hpp"

using namespace bgsnetd;
using namespace bgsnetd::nn;

namespace {

template <typename T>
Tensor<T> random_batch(const ModelSpec& spec, std::size_t n, std::mt19937_64& rng)
{
    const auto p = static_cast<std::size_t>(spec.patch_size);
    Tensor<T> x({n, static_cast<std::size_t>(spec.in_channels), p, p});
    testsupport::fill_uniform(x, rng, 0.0, 1.0);
    return x;
}

// Trains a model briefly so the batch norm running statistics are not the identity defaults.
template <typename T>
void perturb_running_stats(Model<T>& m, std::mt19937_64& rng)
{
    for (int k = 0; k < 3; ++k) {
        model_forward(m, random_batch<T>(m.spec(), 4, rng), Mode::Train);
    }
}

struct EndToEnd {
    double max_rel = 0;
    std::size_t checked = 0;
};

EndToEnd thumbnail_gradient_check(MlpOrder order, std::uint64_t seed, std::size_t samples)
{
    ModelSpec spec = ModelSpec::thumbnail();
    spec.mlp_order = order;
    Model<double> m = init_model<double>(spec, seed);
    std::mt19937_64 rng(seed + 100);
    const Tensor<double> x = random_batch<double>(spec, 6, rng);
    const std::vector<double> t{1, 0, 0, 1, 1, 0};

    ModelCache<double> cache;
    const Tensor<double> probs = model_forward(m, x, Mode::Train, &cache);
    const auto bce = bce_loss<double>(probs.data, t);
    const Gradients<double> grads = model_backward(m, cache, std::span<const double>(bce.grad));
    auto loss = [&] { return bce_loss<double>(model_forward(m, x, Mode::Train).data, t).loss; };

    // Random (tensor, element) pairs spread over the whole parameter list.
    const auto params = m.parameters();
    std::vector<std::pair<std::size_t, std::size_t>> all;
    for (std::size_t p = 0; p < params.size(); ++p) {
        for (std::size_t k = 0; k < params[p]->size(); ++k) all.emplace_back(p, k);
    }
    std::shuffle(all.begin(), all.end(), rng);
    all.resize(std::min(samples, all.size()));
    std::map<std::size_t, std::vector<std::size_t>> by_tensor;
    for (auto [p, k] : all) by_tensor[p].push_back(k);

    EndToEnd r;
    for (auto& [p, idx] : by_tensor) {
        const auto g = testsupport::check_gradient(params[p]->data, grads[p].data, loss, idx);
        r.max_rel = std::max(r.max_rel, g.max_rel);
        r.checked += g.checked;
    }
    return r;
}

}  // namespace

TEST(Architecture, FullSizeOutputShapes)
{
    Model<float> m = init_model<float>(ModelSpec::standard(), 1);
    std::vector<TraceEntry> trace;
    std::mt19937_64 rng(1);
    const Tensor<float> y = model_predict(m, random_batch<float>(m.spec(), 1, rng), &trace);
    std::map<std::string, Shape> shapes;
    for (const TraceEntry& e : trace) shapes[e.layer] = e.shape;
    EXPECT_EQ(shapes.at("conv1.conv"), (Shape{1, 24, 40, 40}));
    EXPECT_EQ(shapes.at("conv1"), (Shape{1, 24, 20, 20}));
    EXPECT_EQ(shapes.at("conv2"), (Shape{1, 48, 10, 10}));
    EXPECT_EQ(shapes.at("conv3"), (Shape{1, 96, 5, 5}));
    EXPECT_EQ(shapes.at("flatten"), (Shape{1, 2400}));
    EXPECT_EQ(shapes.at("fc1"), (Shape{1, 1200}));
    EXPECT_EQ(shapes.at("fc2"), (Shape{1, 600}));
    EXPECT_EQ(shapes.at("fc3"), (Shape{1, 1}));
    EXPECT_EQ(y.shape, (Shape{1}));
}

TEST(Architecture, ParameterShapes)
{
    Model<float> m(ModelSpec::standard());
    EXPECT_EQ(m.conv[0].weight.shape, (Shape{24, 2, 3, 3}));
    EXPECT_EQ(m.conv[2].weight.shape, (Shape{96, 48, 3, 3}));
    EXPECT_EQ(m.dense[0].weight.shape, (Shape{1200, 2400}));
    EXPECT_EQ(m.dense[2].weight.shape, (Shape{1, 600}));
    EXPECT_EQ(m.parameters().size(), 3u * 4 + 2 * 4 + 2);
    const auto state = m.named_state();
    EXPECT_EQ(state.front().first, "conv1.weight");
    EXPECT_EQ(state.back().first, "fc3.bias");
}

TEST(Architecture, RejectsWrongInput)
{
    Model<float> m(ModelSpec::thumbnail());
    EXPECT_THROW(model_predict(m, Tensor<float>({2, 2, 16, 16})), DataError);
    EXPECT_THROW(model_predict(m, Tensor<float>({2, 3, 8, 8})), DataError);
    EXPECT_THROW(model_predict(m, Tensor<float>({1, 2, 8, 8, 1})), DataError);
}

TEST(Architecture, SpecValidation)
{
    ModelSpec s;
    s.patch_size = 12;
    EXPECT_THROW(s.validate(), ConfigError);
    s = ModelSpec::standard();
    s.hidden[1] = 0;
    EXPECT_THROW(s.validate(), ConfigError);
}

TEST(Forward, OutputsAreProbabilities)
{
    std::mt19937_64 rng(2);
    Model<double> m = init_model<double>(ModelSpec::thumbnail(), 3);
    const Tensor<double> x = random_batch<double>(m.spec(), 16, rng);
    for (Mode mode : {Mode::Train, Mode::Eval}) {
        const Tensor<double> y = model_forward(m, x, mode);
        for (double p : y.data) {
            EXPECT_GT(p, 0.0);
            EXPECT_LT(p, 1.0);
        }
    }
}

TEST(Forward, EvalModeIsRepeatableAndBatchIndependent)
{
    std::mt19937_64 rng(3);
    Model<float> m = init_model<float>(ModelSpec::standard(), 4);
    perturb_running_stats(m, rng);
    const Model<float> before = m;
    const Tensor<float> x = random_batch<float>(m.spec(), 5, rng);
    const Tensor<float> a = model_forward(m, x, Mode::Eval);
    const Tensor<float> b = model_forward(m, x, Mode::Eval);
    EXPECT_EQ(a, b);
    EXPECT_TRUE(m == before);

    // Single-sample evaluation matches the batched result bit for bit.
    const std::size_t per = x.size() / 5;
    for (std::size_t i = 0; i < 5; ++i) {
        Tensor<float> one({1, 2, 40, 40});
        std::copy_n(x.ptr() + i * per, per, one.ptr());
        EXPECT_EQ(model_predict(m, one)[0], a[i]);
    }
}

TEST(Forward, PredictMatchesForwardBitForBit)
{
    std::mt19937_64 rng(4);
    for (MlpOrder order : {MlpOrder::DenseSigmoidBn, MlpOrder::DenseBnSigmoid}) {
        ModelSpec spec = ModelSpec::standard();
        spec.mlp_order = order;
        Model<float> m = init_model<float>(spec, 5);
        perturb_running_stats(m, rng);
        const Tensor<float> x = random_batch<float>(spec, 7, rng);
        EXPECT_EQ(model_predict(m, x), model_forward(m, x, Mode::Eval));

        Model<double> md = init_model<double>(ModelSpec::thumbnail(), 6);
        perturb_running_stats(md, rng);
        const Tensor<double> xd = random_batch<double>(md.spec(), 9, rng);
        EXPECT_EQ(model_predict(md, xd), model_forward(md, xd, Mode::Eval));
    }
}

TEST(Forward, TrainModeUpdatesRunningStatistics)
{
    std::mt19937_64 rng(5);
    Model<double> m = init_model<double>(ModelSpec::thumbnail(), 1);
    const Tensor<double> before = m.conv_bn[0].running_mean;
    model_forward(m, random_batch<double>(m.spec(), 4, rng), Mode::Train);
    EXPECT_NE(m.conv_bn[0].running_mean, before);
}

TEST(Init, SameSeedSameModel)
{
    EXPECT_TRUE(init_model<float>(ModelSpec::standard(), 9) == init_model<float>(ModelSpec::standard(), 9));
    EXPECT_FALSE(init_model<float>(ModelSpec::standard(), 9) == init_model<float>(ModelSpec::standard(), 10));
}

TEST(Init, ScalesFollowFanIn)
{
    const Model<double> m = init_model<double>(ModelSpec::standard(), 1);
    // He normal for conv3: std sqrt(2 / (48 * 9)).
    double sq = 0;
    for (double v : m.conv[2].weight.data) sq += v * v;
    const double std_conv = std::sqrt(sq / m.conv[2].weight.size());
    EXPECT_NEAR(std_conv, std::sqrt(2.0 / (48 * 9)), 0.05 * std::sqrt(2.0 / (48 * 9)));
    // Xavier uniform for fc1: bound sqrt(6 / (2400 + 1200)).
    const double bound = std::sqrt(6.0 / 3600.0);
    for (double v : m.dense[0].weight.data) ASSERT_LE(std::abs(v), bound);
    for (double v : m.conv[0].bias.data) EXPECT_EQ(v, 0.0);
    EXPECT_EQ(m.conv_bn[1].gamma.data, std::vector<double>(48, 1.0));
}

TEST(Backward, ZeroUpstreamGivesZeroGradients)
{
    std::mt19937_64 rng(6);
    Model<double> m = init_model<double>(ModelSpec::thumbnail(), 2);
    ModelCache<double> cache;
    const Tensor<double> y = model_forward(m, random_batch<double>(m.spec(), 4, rng), Mode::Train, &cache);
    const std::vector<double> zero(y.size(), 0.0);
    const Gradients<double> g = model_backward(m, cache, std::span<const double>(zero));
    ASSERT_EQ(g.size(), m.parameters().size());
    for (const auto& t : g) {
        for (double v : t.data) EXPECT_EQ(v, 0.0);
    }
}

TEST(Backward, GradientShapesFollowParameters)
{
    std::mt19937_64 rng(7);
    Model<float> m = init_model<float>(ModelSpec::thumbnail(), 2);
    ModelCache<float> cache;
    const Tensor<float> y = model_forward(m, random_batch<float>(m.spec(), 3, rng), Mode::Train, &cache);
    const std::vector<float> ones(y.size(), 1.0f);
    const Gradients<float> g = model_backward(m, cache, std::span<const float>(ones));
    const auto params = m.parameters();
    for (std::size_t k = 0; k < params.size(); ++k) EXPECT_EQ(g[k].shape, params[k]->shape);
}

TEST(Backward, StaleCacheRejected)
{
    std::mt19937_64 rng(8);
    Model<double> m = init_model<double>(ModelSpec::thumbnail(), 2);
    ModelCache<double> cache;
    const Tensor<double> y = model_forward(m, random_batch<double>(m.spec(), 3, rng), Mode::Train, &cache);
    const std::vector<double> g(y.size(), 1.0);
    m.touch();
    EXPECT_THROW(model_backward(m, cache, std::span<const double>(g)), DataError);

    Model<double> other = init_model<double>(ModelSpec::thumbnail(), 2);
    model_forward(m, random_batch<double>(m.spec(), 3, rng), Mode::Train, &cache);
    EXPECT_THROW(model_backward(other, cache, std::span<const double>(g)), DataError);

    model_forward(m, random_batch<double>(m.spec(), 3, rng), Mode::Train, &cache);
    m = other;  // assignment changes the contents behind the cache
    EXPECT_THROW(model_backward(m, cache, std::span<const double>(g)), DataError);
}

TEST(Backward, EndToEndFiniteDifferences)
{
    for (MlpOrder order : {MlpOrder::DenseSigmoidBn, MlpOrder::DenseBnSigmoid}) {
        const EndToEnd r = thumbnail_gradient_check(order, 21, 150);
        EXPECT_GE(r.checked, 100u);
        EXPECT_LE(r.max_rel, 1e-3) << "mlp order " << static_cast<int>(order);
    }
}
