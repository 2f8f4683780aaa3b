#include <thzisac/precoding.hpp>

#include <gtest/gtest.h>

#include <cmath>

using namespace thz;
using namespace thz::precoding;

namespace
{
    CMatrix gaussian(Eigen::Index r, Eigen::Index c, RngStream &rng)
    {
        CMatrix x(r, c);
        for (Eigen::Index j = 0; j < c; ++j)
            for (Eigen::Index i = 0; i < r; ++i)
                x(i, j) = rng.complex_normal();
        return x;
    }

    // Haar-like semi-unitary n x k from a QR of a Gaussian matrix
    CMatrix semi_unitary(Eigen::Index n, Eigen::Index k, RngStream &rng)
    {
        Eigen::HouseholderQR<CMatrix> qr(gaussian(n, k, rng));
        return qr.householderQ() * CMatrix::Identity(n, k);
    }

    struct Scenario
    {
        geometry::UpaGeometry geom{16, 16};
        waveform::FrameConfig frame = waveform::FrameConfig::make(8, 4, 16, 1.92e6, 0.3e12);
        channel::CommChannel channel;
        FullyDigital digital;
        geometry::SensingCodebook codebook;

        Scenario(std::uint64_t seed, int ns)
        {
            RngStream rng(seed);
            channel = channel::random_comm_channel({}, frame, geom, geom, rng);
            digital = optimal_fully_digital(channel, ns);
            codebook = geometry::dft_codebook(geom, kPi / 2);
        }

        PrecodingTargets targets(int q, double eta) const
        {
            return {digital.precoders, optimal_sensing_precoder(codebook, q, int(digital.precoders.front().cols())), eta};
        }
    };
} // namespace

TEST(Switches, CountsAndRowMajorFill)
{
    const auto aosa = SwitchMatrix::diagonal(4, 64);
    EXPECT_EQ(aosa.closed_count(), 4);
    EXPECT_EQ(aosa.k_t, 16);
    EXPECT_TRUE(aosa.closed(2, 2));
    EXPECT_FALSE(aosa.closed(2, 3));

    const auto fc = SwitchMatrix::full(4, 64);
    EXPECT_EQ(fc.closed_count(), 16);

    const auto mid = SwitchMatrix::with_count(4, 6, 64);
    EXPECT_EQ(mid.closed_count(), 6);
    EXPECT_TRUE(mid.closed(0, 1));
    EXPECT_TRUE(mid.closed(0, 2));
    EXPECT_FALSE(mid.closed(0, 3));
    EXPECT_FALSE(mid.closed(1, 0));
}

TEST(Switches, ExpansionBlocks)
{
    const auto sw = SwitchMatrix::with_count(2, 3, 6);
    const RMatrix p = sw.expanded();
    ASSERT_EQ(p.rows(), 6);
    ASSERT_EQ(p.cols(), 2);
    EXPECT_EQ(p.col(0).sum(), 3.0); // subarray 0 only
    EXPECT_EQ(p.col(1).sum(), 6.0); // both subarrays
}

TEST(Switches, InvalidCountsThrow)
{
    EXPECT_THROW(SwitchMatrix::with_count(4, 3, 64), std::invalid_argument);
    EXPECT_THROW(SwitchMatrix::with_count(4, 17, 64), std::invalid_argument);
    EXPECT_THROW(SwitchMatrix::with_count(4, 4, 63), std::invalid_argument);
}

TEST(FullyDigital, SingleStreamRateMatchesLargestSingularValue)
{
    Scenario s(21, 1);
    const double rho = db2lin(-20.0), sigma2 = 1.0;
    double oracle = 0.0;
    for (int m = 0; m < s.frame.m_subcarriers; ++m)
    {
        Eigen::JacobiSVD<CMatrix> svd(s.channel.matrix(m));
        oracle += std::log2(1.0 + rho * std::pow(svd.singularValues()(0), 2) / sigma2);
    }
    oracle /= s.frame.m_subcarriers;
    const double se = spectral_efficiency(s.channel, s.digital.precoders, s.digital.combiners, rho, sigma2).bits;
    EXPECT_NEAR(se, oracle, 1e-9 * oracle);
}

TEST(FullyDigital, RayAndDenseFactorizationsAgree)
{
    Scenario s(22, 4);
    std::vector<CMatrix> dense;
    for (int m = 0; m < s.frame.m_subcarriers; ++m)
        dense.push_back(s.channel.matrix(m));
    const auto ref = optimal_fully_digital(dense, 4);
    for (int m = 0; m < s.frame.m_subcarriers; ++m)
    {
        EXPECT_LT((s.digital.singular_values[m].head(4) - ref.singular_values[m].head(4)).norm(), 1e-9 * ref.singular_values[m](0));
        EXPECT_LT((s.digital.precoders[m].adjoint() * s.digital.precoders[m] - CMatrix::Identity(4, 4)).norm(), 1e-10);
    }
    const double a = spectral_efficiency(s.channel, s.digital.precoders, s.digital.combiners, 0.05, 1.0).bits;
    const double b = spectral_efficiency(s.channel, ref.precoders, ref.combiners, 0.05, 1.0).bits;
    EXPECT_NEAR(a, b, 1e-9 * a);
}

TEST(FullyDigital, BeatsRandomSemiUnitaryPrecoders)
{
    Scenario s(23, 2);
    RngStream rng(5);
    const double best = spectral_efficiency(s.channel, s.digital.precoders, s.digital.combiners, 0.01, 1.0).bits;
    for (int trial = 0; trial < 20; ++trial)
    {
        std::vector<CMatrix> f;
        for (int m = 0; m < s.frame.m_subcarriers; ++m)
            f.push_back(semi_unitary(s.geom.size(), 2, rng));
        EXPECT_LT(spectral_efficiency(s.channel, f, s.digital.combiners, 0.01, 1.0).bits, best);
    }
}

TEST(FullyDigital, StreamCountValidation)
{
    Scenario s(24, 1);
    EXPECT_THROW(optimal_fully_digital(s.channel, 0), std::invalid_argument);
    EXPECT_THROW(optimal_fully_digital(s.channel, 257), std::invalid_argument);
}

TEST(SensingTarget, RepeatsCodebookColumn)
{
    const auto cb = geometry::dft_codebook({8, 8}, kPi / 2);
    const CMatrix fs = optimal_sensing_precoder(cb, 3, 4);
    ASSERT_EQ(fs.cols(), 4);
    for (int j = 0; j < 4; ++j)
        EXPECT_LT((fs.col(j) - cb.column(3)).norm(), 1e-15);
    EXPECT_NEAR(fs.squaredNorm(), 4.0, 1e-12);
}

TEST(Procrustes, OptimalAgainstRandomSemiUnitary)
{
    RngStream rng(31);
    for (int inst = 0; inst < 10; ++inst)
    {
        const CMatrix gb = gaussian(2, 4, rng); // N_s x N_RF
        const CMatrix f = orthogonal_procrustes(gb);
        ASSERT_EQ(f.rows(), 4);
        ASSERT_EQ(f.cols(), 2);
        EXPECT_LT((f.adjoint() * f - CMatrix::Identity(2, 2)).norm(), 1e-12);
        auto score = [&](const CMatrix &x)
        { return (x.adjoint() * gb.adjoint()).trace().real(); };
        // the maximum of Re tr(F^H X) over semi-unitary F is the nuclear norm of X
        Eigen::JacobiSVD<CMatrix> svd(gb);
        EXPECT_NEAR(score(f), svd.singularValues().sum(), 1e-10);
        for (int k = 0; k < 200; ++k)
            EXPECT_LT(score(semi_unitary(4, 2, rng)), score(f));
    }
}

TEST(Procrustes, UnitaryInputIsInverted)
{
    RngStream rng(32);
    const CMatrix u = semi_unitary(3, 3, rng);
    EXPECT_LT((orthogonal_procrustes(u) - u.adjoint()).norm(), 1e-12);
}

TEST(Procrustes, SwappingWeightsAndTargetsKeepsUpdate)
{
    RngStream rng(33);
    const CMatrix fc = gaussian(16, 2, rng), fs = gaussian(16, 2, rng), rf = gaussian(16, 4, rng);
    const double eta = 0.3;
    const CMatrix a = vec_digital_update(eta * fc + (1 - eta) * fs, rf);
    const CMatrix b = vec_digital_update((1 - eta) * fs + eta * fc, rf);
    EXPECT_LT((a - b).norm(), 1e-12);
}

TEST(VecAnalog, ScalarPhaseRotation)
{
    const auto sw = SwitchMatrix::with_count(1, 1, 1);
    CMatrix fc(1, 1), fs(1, 1), bb(1, 1), prev(1, 1);
    fc << cd(0.3, 0.8);
    fs << cd(1.0, 0.0);
    bb << cd(0.6, -0.2);
    prev << cd(1.0, 0.0);
    const auto out = vec_analog_update({{fc}, fs, 1.0}, {bb}, sw, prev);
    const cd expect = std::polar(1.0, std::arg(fc(0, 0) * std::conj(bb(0, 0))));
    EXPECT_NEAR(std::abs(out.matrix(0, 0) - expect), 0.0, 1e-15);
}

TEST(VecAnalog, ZeroArgumentKeepsPreviousPhase)
{
    const auto sw = SwitchMatrix::with_count(1, 1, 1);
    CMatrix zero = CMatrix::Zero(1, 1), bb = CMatrix::Ones(1, 1), prev(1, 1);
    prev << std::polar(1.0, 0.7);
    const auto out = vec_analog_update({{zero}, zero, 0.5}, {bb}, sw, prev);
    EXPECT_NEAR(std::arg(out.matrix(0, 0)), 0.7, 1e-15);
}

TEST(VecAnalog, OpenSwitchesStayZeroAndObjectiveDoesNotRise)
{
    // with a square unitary F_BB the update is the exact minimizer over the feasible set
    RngStream rng(34);
    for (int nc : {4, 7, 12, 16})
    {
        Scenario s(40 + nc, 4);
        const auto sw = SwitchMatrix::with_count(4, nc, s.geom.size());
        const auto t = s.targets(5, 0.5);
        CMatrix prev(s.geom.size(), 4);
        for (Eigen::Index j = 0; j < 4; ++j)
            for (Eigen::Index i = 0; i < prev.rows(); ++i)
                prev(i, j) = sw.closed(int(i / sw.k_t), int(j)) ? std::polar(1.0, rng.phase()) : cd(0.0);
        std::vector<CMatrix> bb;
        for (int m = 0; m < s.frame.m_subcarriers; ++m)
            bb.push_back(semi_unitary(4, 4, rng));
        const auto out = vec_analog_update(t, bb, sw, prev);
        EXPECT_TRUE(out.feasible());
        EXPECT_LE(weighted_objective(t, out.matrix, bb), weighted_objective(t, prev, bb) + 1e-9);
    }
}

TEST(Vec, FeasiblePowerNormalizedAndMonotone)
{
    for (int nc : {4, 8, 16})
    {
        Scenario s(50 + nc, 4);
        const auto sw = SwitchMatrix::with_count(4, nc, s.geom.size());
        for (double eta : {0.0, 0.4, 1.0})
        {
            const auto p = vec_hybrid_precoding(s.targets(4, eta), sw, {40, 1e-10, 3});
            EXPECT_TRUE(p.analog.feasible(1e-12));
            for (int m = 0; m < s.frame.m_subcarriers; ++m)
                EXPECT_NEAR(p.combined(m).squaredNorm(), 4.0, 1e-9);
            ASSERT_FALSE(p.objective_trace.empty());
            for (std::size_t i = 1; i < p.objective_trace.size(); ++i)
                EXPECT_LE(p.objective_trace[i], p.objective_trace[i - 1] * (1 + 1e-10) + 1e-12);
        }
    }
}

TEST(Vec, SensingOnlyDesignReproducesCodebookBeam)
{
    // FC and AoSA: the codebook beam lies in the range of the analog precoder
    for (int nc : {4, 16})
    {
        Scenario s(60 + nc, 4);
        const auto sw = SwitchMatrix::with_count(4, nc, s.geom.size());
        const int q = 6;
        const auto p = vec_hybrid_precoding(s.targets(q, 0.0), sw, {50, 1e-8, 1});
        const double gain = transmit_gain_dbi(p, s.codebook.direction(q), kPi / 2, s.geom);
        EXPECT_NEAR(gain, 10.0 * std::log10(256.0), 0.5) << nc;
    }
}

TEST(Vec, InputValidation)
{
    Scenario s(70, 4);
    EXPECT_THROW(vec_hybrid_precoding(s.targets(1, 1.5), SwitchMatrix::full(4, 256)), std::invalid_argument);
    EXPECT_THROW(vec_hybrid_precoding(s.targets(1, 0.5), SwitchMatrix::full(2, 256)), std::invalid_argument);
    EXPECT_THROW(vec_hybrid_precoding(s.targets(1, 0.5), SwitchMatrix::full(4, 128)), std::invalid_argument);
}

TEST(Sca, ReplacedBlockCount)
{
    EXPECT_EQ(sca_replaced_blocks(16, 0.6), 7);
    EXPECT_EQ(sca_replaced_blocks(10, 0.6), 4);
    EXPECT_EQ(sca_replaced_blocks(4, 1.0), 0);
    EXPECT_EQ(sca_replaced_blocks(8, 0.0), 8);
}

TEST(Sca, EndpointsAndPower)
{
    Scenario s(80, 4);
    const auto sw = SwitchMatrix::full(4, s.geom.size());
    const auto comm = vec_hybrid_precoding(s.targets(2, 1.0), sw, {30, 1e-8, 1});
    const int q = 2, K = sw.k_t;
    const CVector a = std::sqrt(256.0) * s.codebook.column(q);

    const auto same = sca_hybrid_precoding(s.digital.precoders, s.codebook, q, 1.0, comm.analog);
    EXPECT_EQ(same.analog.matrix, comm.analog.matrix);

    const auto sense = sca_hybrid_precoding(s.digital.precoders, s.codebook, q, 0.0, comm.analog);
    EXPECT_TRUE(sense.analog.feasible());
    for (int i = 0; i < 4; ++i)
        for (int j = 0; j < 4; ++j)
            EXPECT_LT((sense.analog.matrix.block(i * K, j, K, 1) - a.segment(i * K, K)).norm(), 1e-12);
    EXPECT_NEAR(transmit_gain_dbi(sense, s.codebook.direction(q), kPi / 2, s.geom), 10.0 * std::log10(256.0), 1e-6);

    const auto mid = sca_hybrid_precoding(s.digital.precoders, s.codebook, q, 0.6, comm.analog);
    for (int m = 0; m < s.frame.m_subcarriers; ++m)
        EXPECT_NEAR(mid.combined(m).squaredNorm(), 4.0, 1e-9);
    int replaced = 0;
    for (int i = 0; i < 4; ++i)
        for (int j = 0; j < 4; ++j)
            replaced += (mid.analog.matrix.block(i * K, j, K, 1) - a.segment(i * K, K)).norm() < 1e-12;
    EXPECT_GE(replaced, sca_replaced_blocks(16, 0.6));
}

TEST(SpectralEfficiency, BasicProperties)
{
    Scenario s(90, 2);
    const auto &F = s.digital.precoders;
    const auto &C = s.digital.combiners;
    EXPECT_EQ(spectral_efficiency(s.channel, F, C, 0.0, 1.0).bits, 0.0);
    double last = 0.0;
    for (double snr_db : {-40.0, -30.0, -20.0, -10.0})
    {
        const double se = spectral_efficiency(s.channel, F, C, db2lin(snr_db), 1.0).bits;
        EXPECT_GT(se, last);
        last = se;
    }
    // only rho / sigma2 matters
    EXPECT_NEAR(spectral_efficiency(s.channel, F, C, 0.2, 2.0).bits, spectral_efficiency(s.channel, F, C, 0.1, 1.0).bits, 1e-10);
    EXPECT_THROW(spectral_efficiency(s.channel, F, C, 1.0, 0.0), std::invalid_argument);
    std::vector<CMatrix> short_f(F.begin(), F.end() - 1);
    EXPECT_THROW(spectral_efficiency(s.channel, short_f, C, 1.0, 1.0), std::invalid_argument);
}

TEST(SpectralEfficiency, HybridOverloadUsesCombinedPrecoder)
{
    Scenario s(91, 4);
    const auto p = vec_hybrid_precoding(s.targets(3, 0.7), SwitchMatrix::full(4, 256), {20, 1e-6, 2});
    std::vector<CMatrix> f;
    for (int m = 0; m < s.frame.m_subcarriers; ++m)
        f.push_back(p.combined(m));
    EXPECT_DOUBLE_EQ(spectral_efficiency(s.channel, p, s.digital.combiners, 0.1, 1.0).bits,
                     spectral_efficiency(s.channel, f, s.digital.combiners, 0.1, 1.0).bits);
}

TEST(Beampattern, CodebookBeamReachesArrayGain)
{
    const geometry::UpaGeometry g{32, 32};
    const auto cb = geometry::dft_codebook(g, kPi / 2);
    const CMatrix fs = optimal_sensing_precoder(cb, 9, 4);
    const RVector gain = transmit_beampattern_linear(std::vector<CMatrix>{fs}, {cb.direction(9)}, kPi / 2, g);
    EXPECT_NEAR(10.0 * std::log10(gain(0)), 30.103, 1e-3);
}

TEST(Beampattern, FullRankUnitaryIsIsotropic)
{
    RngStream rng(92);
    const geometry::UpaGeometry g{4, 4};
    const CMatrix u = semi_unitary(16, 16, rng);
    const RVector gain = transmit_beampattern_linear(std::vector<CMatrix>{u}, {-1.0, -0.2, 0.5, 1.3}, kPi / 2, g);
    for (Eigen::Index i = 0; i < gain.size(); ++i)
        EXPECT_NEAR(gain(i), 1.0, 1e-12);
}

TEST(Beampattern, HybridMatchesUnconstrainedForm)
{
    Scenario s(93, 4);
    const auto p = vec_hybrid_precoding(s.targets(7, 0.5), SwitchMatrix::with_count(4, 8, 256), {20, 1e-6, 2});
    std::vector<CMatrix> f;
    for (int m = 0; m < s.frame.m_subcarriers; ++m)
        f.push_back(p.combined(m));
    const std::vector<double> grid{-1.2, -0.4, 0.0, 0.9};
    const RVector a = transmit_beampattern_linear(p, grid, kPi / 2, s.geom);
    const RVector b = transmit_beampattern_linear(f, grid, kPi / 2, s.geom);
    EXPECT_LT((a - b).norm(), 1e-10 * b.norm());
}
