#include <gtest/gtest.h>

#include <random>

#include "bgsnetd/kernels/conv.hpp"
#include "bgsnetd/kernels/gemm.hpp"
#include "bgsnetd/kernels/parallel.hpp"
#include "bgsnetd/kernels/reference.hpp"
#include "bgsnetd/nn/layers.hpp"
#include "support.hpp"

using namespace bgsnetd;
using namespace bgsnetd::kernels;
using nn::Tensor;

namespace {

template <typename T>
std::vector<T> random_vec(std::size_t n, std::mt19937_64& rng)
{
    std::uniform_real_distribution<double> d(-1, 1);
    std::vector<T> v(n);
    for (T& x : v) x = static_cast<T>(d(rng));
    return v;
}

class ThreadGuard {
public:
    ThreadGuard() : saved_(num_threads()) {}
    ~ThreadGuard() { set_num_threads(saved_); }

private:
    int saved_;
};

}  // namespace

template <typename T>
class GemmTest : public ::testing::Test {};
using Precisions = ::testing::Types<float, double>;
TYPED_TEST_SUITE(GemmTest, Precisions);

TYPED_TEST(GemmTest, MatchesSerialReference)
{
    using T = TypeParam;
    std::mt19937_64 rng(1);
    std::uniform_int_distribution<int> dim(1, 70);
    const double tol = sizeof(T) == 4 ? 1e-4 : 1e-12;
    for (int trial = 0; trial < 60; ++trial) {
        const int m = dim(rng), n = dim(rng), k = trial % 10 == 0 ? 300 : dim(rng);
        const Trans ta = trial % 2 ? Trans::Yes : Trans::No;
        const Trans tb = (trial / 2) % 2 ? Trans::Yes : Trans::No;
        const T beta = trial % 3 == 0 ? T(0) : (trial % 3 == 1 ? T(1) : T(0.5));
        const int lda = (ta == Trans::No ? k : m) + trial % 3;
        const int ldb = (tb == Trans::No ? n : k) + trial % 2;
        const int ldc = n + 1;
        const auto a = random_vec<T>(static_cast<std::size_t>(lda) * (ta == Trans::No ? m : k), rng);
        const auto b = random_vec<T>(static_cast<std::size_t>(ldb) * (tb == Trans::No ? k : n), rng);
        auto c1 = random_vec<T>(static_cast<std::size_t>(ldc) * m, rng);
        auto c2 = c1;
        gemm<T>(ta, tb, m, n, k, a.data(), lda, b.data(), ldb, beta, c1.data(), ldc);
        reference::gemm<T>(ta, tb, m, n, k, a.data(), lda, b.data(), ldb, beta, c2.data(), ldc);
        for (int i = 0; i < m; ++i) {
            for (int j = 0; j < n; ++j) {
                ASSERT_NEAR(c1[i * ldc + j], c2[i * ldc + j], tol * (1 + std::abs(c2[i * ldc + j])))
                    << "m=" << m << " n=" << n << " k=" << k << " i=" << i << " j=" << j;
            }
            // Padding columns beyond n are untouched.
        }
    }
}

TYPED_TEST(GemmTest, ZeroInnerDimensionScalesC)
{
    using T = TypeParam;
    std::vector<T> c{1, 2, 3, 4};
    gemm<T>(Trans::No, Trans::No, 2, 2, 0, nullptr, 1, nullptr, 2, T(0.5), c.data(), 2);
    EXPECT_EQ(c, (std::vector<T>{0.5, 1, 1.5, 2}));
}

TEST(Gemm, BitIdenticalAcrossThreadCounts)
{
    ThreadGuard guard;
    std::mt19937_64 rng(2);
    const int m = 96, n = 777, k = 600;
    const auto a = random_vec<float>(static_cast<std::size_t>(m) * k, rng);
    const auto b = random_vec<float>(static_cast<std::size_t>(k) * n, rng);
    std::vector<float> c1(static_cast<std::size_t>(m) * n), c4(c1.size());
    set_num_threads(1);
    gemm<float>(Trans::No, Trans::No, m, n, k, a.data(), k, b.data(), n, 0.f, c1.data(), n);
    set_num_threads(4);
    gemm<float>(Trans::No, Trans::No, m, n, k, a.data(), k, b.data(), n, 0.f, c4.data(), n);
    EXPECT_EQ(c1, c4);
}

TEST(Gemm, RowResultIndependentOfBatchSize)
{
    // A row of C depends only on its row of A, so evaluating one sample alone or inside a batch
    // gives the same bits.
    std::mt19937_64 rng(3);
    const int m = 37, n = 50, k = 700;
    const auto a = random_vec<float>(static_cast<std::size_t>(m) * k, rng);
    const auto b = random_vec<float>(static_cast<std::size_t>(n) * k, rng);
    std::vector<float> full(static_cast<std::size_t>(m) * n);
    gemm<float>(Trans::No, Trans::Yes, m, n, k, a.data(), k, b.data(), k, 0.f, full.data(), n);
    for (int i = 0; i < m; i += 9) {
        std::vector<float> row(n);
        gemm<float>(Trans::No, Trans::Yes, 1, n, k, a.data() + static_cast<std::ptrdiff_t>(i) * k, k, b.data(), k,
                    0.f, row.data(), n);
        EXPECT_TRUE(std::equal(row.begin(), row.end(), full.begin() + static_cast<std::ptrdiff_t>(i) * n));
    }
}

TEST(Im2col, Col2imIsTheAdjoint)
{
    std::mt19937_64 rng(4);
    const int batch = 2, ch = 3, h = 5, w = 7;
    const auto x = random_vec<double>(static_cast<std::size_t>(batch) * ch * h * w, rng);
    const std::size_t ncols = static_cast<std::size_t>(batch) * h * w;
    const auto y = random_vec<double>(ch * 9 * ncols, rng);
    std::vector<double> cols(ch * 9 * ncols);
    im2col3x3(x.data(), batch, ch, h, w, cols.data());
    std::vector<double> back(x.size());
    col2im3x3(y.data(), batch, ch, h, w, back.data());
    EXPECT_NEAR(testsupport::dot(cols, y), testsupport::dot(x, back), 1e-10);
}

TEST(Im2col, LayoutOfOneChannel)
{
    // 1x1x2x2 input: the centre tap row reproduces the image, the top-left tap is shifted.
    const std::vector<double> x{1, 2, 3, 4};
    std::vector<double> cols(9 * 4);
    im2col3x3(x.data(), 1, 1, 2, 2, cols.data());
    EXPECT_EQ(std::vector<double>(cols.begin() + 4 * 4, cols.begin() + 5 * 4), x);
    EXPECT_EQ(std::vector<double>(cols.begin(), cols.begin() + 4), (std::vector<double>{0, 0, 0, 1}));
}

TYPED_TEST(GemmTest, ConvForwardMatchesDirectLoops)
{
    using T = TypeParam;
    std::mt19937_64 rng(5);
    const double tol = sizeof(T) == 4 ? 1e-4 : 1e-12;
    for (auto [batch, in, out, h, w] : {std::array{1, 2, 24, 40, 40}, std::array{3, 5, 7, 6, 4},
                                        std::array{2, 24, 48, 10, 10}}) {
        nn::ConvLayer<T> layer(in, out);
        testsupport::fill_uniform(layer.weight, rng);
        testsupport::fill_uniform(layer.bias, rng);
        Tensor<T> x({static_cast<std::size_t>(batch), static_cast<std::size_t>(in), static_cast<std::size_t>(h),
                     static_cast<std::size_t>(w)});
        testsupport::fill_uniform(x, rng);
        const Tensor<T> y = nn::conv2d_forward(x, layer);
        std::vector<T> ref(y.size());
        reference::conv3x3_forward(x.ptr(), batch, in, h, w, layer.weight.ptr(), layer.bias.ptr(), out, ref.data());
        for (std::size_t k = 0; k < ref.size(); ++k) {
            ASSERT_NEAR(y[k], ref[k], tol * (1 + std::abs(ref[k])));
        }
    }
}

TYPED_TEST(GemmTest, ConvBackwardMatchesDirectLoops)
{
    using T = TypeParam;
    std::mt19937_64 rng(6);
    const double tol = sizeof(T) == 4 ? 1e-3 : 1e-11;
    const int batch = 3, in = 4, out = 5, h = 6, w = 8;
    nn::ConvLayer<T> layer(in, out);
    testsupport::fill_uniform(layer.weight, rng);
    Tensor<T> x({3, 4, 6, 8});
    testsupport::fill_uniform(x, rng);
    nn::ConvCache<T> cache;
    const Tensor<T> y = nn::conv2d_forward(x, layer, &cache);
    Tensor<T> gy(y.shape);
    testsupport::fill_uniform(gy, rng);
    const nn::ConvGrads<T> g = nn::conv2d_backward(gy, cache, layer);

    std::vector<T> gx(x.size()), gw(layer.weight.size()), gb(out);
    reference::conv3x3_backward(x.ptr(), gy.ptr(), batch, in, h, w, layer.weight.ptr(), out, gx.data(), gw.data(),
                                gb.data());
    for (std::size_t k = 0; k < gx.size(); ++k) ASSERT_NEAR(g.input[k], gx[k], tol * (1 + std::abs(gx[k])));
    for (std::size_t k = 0; k < gw.size(); ++k) ASSERT_NEAR(g.weight[k], gw[k], tol * (1 + std::abs(gw[k])));
    for (std::size_t k = 0; k < gb.size(); ++k) ASSERT_NEAR(g.bias[k], gb[k], tol * (1 + std::abs(gb[k])));
}

TYPED_TEST(GemmTest, DenseMatchesDirectLoops)
{
    using T = TypeParam;
    std::mt19937_64 rng(7);
    const double tol = sizeof(T) == 4 ? 1e-4 : 1e-12;
    const int batch = 9, in = 300, out = 33;
    nn::DenseLayer<T> layer(in, out);
    testsupport::fill_uniform(layer.weight, rng);
    testsupport::fill_uniform(layer.bias, rng);
    Tensor<T> x({9, 300});
    testsupport::fill_uniform(x, rng);
    nn::DenseCache<T> cache;
    const Tensor<T> y = nn::dense_forward(x, layer, &cache);
    std::vector<T> ref(y.size());
    reference::dense_forward(x.ptr(), batch, in, layer.weight.ptr(), layer.bias.ptr(), out, ref.data());
    for (std::size_t k = 0; k < ref.size(); ++k) ASSERT_NEAR(y[k], ref[k], tol * (1 + std::abs(ref[k])));

    Tensor<T> gy(y.shape);
    testsupport::fill_uniform(gy, rng);
    const nn::DenseGrads<T> g = nn::dense_backward(gy, cache, layer);
    std::vector<T> gx(x.size()), gw(layer.weight.size()), gb(out);
    reference::dense_backward(x.ptr(), gy.ptr(), batch, in, layer.weight.ptr(), out, gx.data(), gw.data(), gb.data());
    for (std::size_t k = 0; k < gx.size(); ++k) ASSERT_NEAR(g.input[k], gx[k], tol * (1 + std::abs(gx[k])));
    for (std::size_t k = 0; k < gw.size(); ++k) ASSERT_NEAR(g.weight[k], gw[k], tol * (1 + std::abs(gw[k])));
    for (std::size_t k = 0; k < gb.size(); ++k) ASSERT_NEAR(g.bias[k], gb[k], tol * (1 + std::abs(gb[k])));
}

TEST(ConvLayer, BitIdenticalAcrossThreadCounts)
{
    ThreadGuard guard;
    std::mt19937_64 rng(8);
    nn::ConvLayer<float> layer(24, 48);
    testsupport::fill_uniform(layer.weight, rng);
    Tensor<float> x({16, 24, 20, 20});
    testsupport::fill_uniform(x, rng);
    set_num_threads(1);
    nn::ConvCache<float> c1;
    const Tensor<float> y1 = nn::conv2d_forward(x, layer, &c1);
    const auto g1 = nn::conv2d_backward(y1, c1, layer);
    set_num_threads(3);
    nn::ConvCache<float> c3;
    const Tensor<float> y3 = nn::conv2d_forward(x, layer, &c3);
    const auto g3 = nn::conv2d_backward(y3, c3, layer);
    EXPECT_EQ(y1, y3);
    EXPECT_EQ(g1.input, g3.input);
    EXPECT_EQ(g1.weight, g3.weight);
    EXPECT_EQ(g1.bias, g3.bias);
}

TEST(Threads, SetAndClamp)
{
    ThreadGuard guard;
    set_num_threads(2);
    EXPECT_EQ(num_threads(), 2);
    set_num_threads(0);
    EXPECT_EQ(num_threads(), 1);
    EXPECT_GE(default_num_threads(), 1);
}
