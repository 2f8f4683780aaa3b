#include <thzisac/waveform.hpp>

#include <gtest/gtest.h>

#include <cmath>

using namespace thz;
using namespace thz::waveform;

namespace
{
    CMatrix random_matrix(Eigen::Index r, Eigen::Index c, RngStream &rng)
    {
        CMatrix x(r, c);
        for (Eigen::Index j = 0; j < c; ++j)
            for (Eigen::Index i = 0; i < r; ++i)
                x(i, j) = rng.complex_normal();
        return x;
    }
} // namespace

TEST(Dft, MatchesDirectSum)
{
    RngStream rng(1);
    for (int n : {1, 2, 7, 16, 60})
    {
        const CVector x = random_matrix(n, 1, rng);
        CVector direct(n);
        for (int k = 0; k < n; ++k)
        {
            cd acc = 0.0;
            for (int i = 0; i < n; ++i)
                acc += x(i) * std::polar(1.0, -2.0 * kPi * i * k / n);
            direct(k) = acc / std::sqrt(double(n));
        }
        EXPECT_LT((dft::forward(x) - direct).norm(), 1e-12 * std::max(1.0, x.norm()));
        EXPECT_LT((dft::matrix(n) * x - direct).norm(), 1e-12 * std::max(1.0, x.norm()));
        EXPECT_LT((dft::inverse(x) - dft::matrix(n).adjoint() * x).norm(), 1e-12 * std::max(1.0, x.norm()));
    }
}

TEST(Dft, UnitaryAndInvertible)
{
    RngStream rng(2);
    const CMatrix X = random_matrix(64, 5, rng);
    const CMatrix Y = dft::forward_columns(X);
    EXPECT_NEAR(Y.norm(), X.norm(), 1e-10);
    EXPECT_LT((dft::inverse_columns(Y) - X).norm(), 1e-12 * X.norm());
}

TEST(Frame, ReferenceNumerology)
{
    const auto f = FrameConfig::make(1024, 16, 32, 3.84e6, 0.3e12);
    EXPECT_EQ(f.m_cp, 256);
    EXPECT_NEAR(f.symbol_duration(), 260.41666e-9, 1e-13);
    EXPECT_NEAR(f.cp_duration(), 65.104166e-9, 1e-13);
    EXPECT_NEAR(f.total_symbol_duration(), 325.52083e-9, 1e-13);
    EXPECT_NEAR(f.slot_duration(), 16 * 325.52083e-9, 1e-12);
    EXPECT_EQ(f.samples_per_symbol(), 1280);
}

TEST(Frame, ValidateRejectsBadValues)
{
    auto f = FrameConfig::make(64, 16, 32, 3.84e6, 0.3e12);
    f.m_cp = 65;
    EXPECT_THROW(f.validate(), std::invalid_argument);
    f = FrameConfig::make(64, 0, 32, 3.84e6, 0.3e12);
    EXPECT_THROW(f.validate(), std::invalid_argument);
    f = FrameConfig::make(64, 4, 32, -1.0, 0.3e12);
    EXPECT_THROW(f.validate(), std::invalid_argument);
}

TEST(Ofdm, RoundTripAndCyclicPrefix)
{
    RngStream rng(3);
    const auto f = FrameConfig::make(64, 6, 1, 3.84e6, 0.3e12);
    const CMatrix grid = random_matrix(64, 6, rng);
    const CVector s = ofdm_modulate(grid, f);
    ASSERT_EQ(s.size(), 6 * 80);
    for (int n = 0; n < 6; ++n)
        EXPECT_LT((s.segment(n * 80, 16) - s.segment(n * 80 + 64, 16)).norm(), 1e-14);
    EXPECT_LT((ofdm_demodulate(s, f) - grid).norm(), 1e-12 * grid.norm());
    EXPECT_THROW(ofdm_demodulate(s.head(100), f), std::invalid_argument);
}

TEST(Symbols, QpskHasExactPower)
{
    RngStream rng(4);
    const auto f = FrameConfig::make(16, 4, 1, 3.84e6, 0.3e12);
    const auto sym = generate_symbols(f, 4, Constellation::qpsk, rng);
    ASSERT_EQ(sym.symbols.rows(), 4);
    ASSERT_EQ(sym.symbols.cols(), 64);
    for (Eigen::Index c = 0; c < sym.symbols.cols(); ++c)
        for (Eigen::Index s = 0; s < 4; ++s)
            EXPECT_NEAR(std::norm(sym.symbols(s, c)), 0.25, 1e-15);
}

TEST(Symbols, GaussianAveragePower)
{
    RngStream rng(5);
    const auto f = FrameConfig::make(256, 16, 1, 3.84e6, 0.3e12);
    const auto sym = generate_symbols(f, 2, Constellation::gaussian, rng);
    const double p = sym.symbols.squaredNorm() / double(sym.symbols.size());
    EXPECT_NEAR(p, 0.5, 0.02);
}

TEST(Symbols, SameSeedSameFrame)
{
    const auto f = FrameConfig::make(8, 2, 1, 3.84e6, 0.3e12);
    RngStream a(9), b(9);
    EXPECT_EQ(generate_symbols(f, 2, Constellation::bpsk, a).symbols, generate_symbols(f, 2, Constellation::bpsk, b).symbols);
}

TEST(Symbols, UnknownConstellation)
{
    EXPECT_THROW(parse_constellation("16qam"), std::invalid_argument);
    EXPECT_EQ(parse_constellation("qpsk"), Constellation::qpsk);
}

TEST(Precode, EqualsDenseProduct)
{
    RngStream rng(6);
    const auto f = FrameConfig::make(4, 3, 1, 3.84e6, 0.3e12);
    const auto sym = generate_symbols(f, 2, Constellation::qpsk, rng);
    const CMatrix rf = random_matrix(8, 3, rng);
    std::vector<CMatrix> bb;
    for (int m = 0; m < 4; ++m)
        bb.push_back(random_matrix(3, 2, rng));
    const CMatrix x = precode_frequency(sym, rf, bb);
    for (int n = 0; n < 3; ++n)
        for (int m = 0; m < 4; ++m)
            EXPECT_LT((x.col(sym.column(m, n)) - rf * bb[m] * sym.at(m, n)).norm(), 1e-13);
    bb.pop_back();
    EXPECT_THROW(precode_frequency(sym, rf, bb), std::invalid_argument);
}
