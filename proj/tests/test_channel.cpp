#include <thzisac/channel.hpp>

#include <gtest/gtest.h>

#include <cmath>

using namespace thz;
using namespace thz::channel;

namespace
{
    const waveform::FrameConfig kFrame = waveform::FrameConfig::make(64, 16, 32, 3.84e6, 0.3e12);
}

TEST(Conversions, RangeDelayDoppler)
{
    EXPECT_NEAR(delay_of_range(15.0), 2.0 * 15.0 / 299792458.0, 1e-20);
    EXPECT_NEAR(range_of_delay(delay_of_range(37.5)), 37.5, 1e-12);
    // 2 f_c v / c for 20 m/s at 300 GHz
    EXPECT_NEAR(doppler_of_velocity(20.0, 0.3e12), 40027.69, 0.01);
    EXPECT_NEAR(velocity_of_doppler(doppler_of_velocity(-7.0, 0.3e12), 0.3e12), -7.0, 1e-12);
}

TEST(CommChannel, DenseMatrixMatchesPathSum)
{
    RngStream rng(11);
    const geometry::UpaGeometry tx{8, 4}, rx{4, 4};
    const auto ch = random_comm_channel({}, kFrame, tx, rx, rng);
    ASSERT_EQ(ch.paths().size(), 5u);
    EXPECT_EQ(ch.nlos_count(), 4);
    const double gamma = std::sqrt(32.0 * 16.0 / 5.0);
    for (int m : {0, 17, 63})
    {
        CMatrix H = CMatrix::Zero(16, 32);
        for (const auto &p : ch.paths())
            H += gamma * p.gain_per_subcarrier(m) * geometry::steering_upa(p.aoa_theta, p.aoa_phi, rx) *
                 geometry::steering_upa(p.aod_theta, p.aod_phi, tx).adjoint();
        EXPECT_LT((ch.matrix(m) - H).norm(), 1e-12 * H.norm());

        CMatrix F(32, 3);
        for (Eigen::Index j = 0; j < 3; ++j)
            for (Eigen::Index i = 0; i < 32; ++i)
                F(i, j) = rng.complex_normal();
        EXPECT_LT((ch.apply(m, F) - H * F).norm(), 1e-12 * (H * F).norm());
        const CMatrix C = CMatrix::Random(16, 2);
        EXPECT_LT((ch.apply_adjoint(m, C) - H.adjoint() * C).norm(), 1e-12 * (H.adjoint() * C).norm());
    }
}

TEST(CommChannel, PathStatistics)
{
    RngStream rng(12);
    const auto ch = random_comm_channel({}, kFrame, {4, 4}, {4, 4}, rng);
    int los = 0;
    for (const auto &p : ch.paths())
    {
        los += p.is_los;
        EXPECT_GE(p.aod_theta, -kPi / 3 - 1e-12);
        EXPECT_LE(p.aod_theta, kPi / 3 + 1e-12);
        const double mag = std::abs(p.gain_per_subcarrier(0));
        EXPECT_NEAR(mag, p.is_los ? 1.0 : std::pow(10.0, -15.0 / 20.0), 1e-12);
        // constant magnitude across subcarriers (pure delay)
        EXPECT_NEAR(std::abs(p.gain_per_subcarrier(40)), mag, 1e-12);
    }
    EXPECT_EQ(los, 1);
    EXPECT_EQ(ch.subcarriers(), 64);
    EXPECT_THROW(ch.gains(64), std::out_of_range);
}

TEST(CommChannel, RequiresExactlyOneLos)
{
    CommPath p;
    p.gain_per_subcarrier = CVector::Ones(4);
    EXPECT_THROW(CommChannel({p}, {2, 2}, {2, 2}), std::invalid_argument);
    p.is_los = true;
    EXPECT_THROW(CommChannel({p, p}, {2, 2}, {2, 2}), std::invalid_argument);
    EXPECT_NO_THROW(CommChannel({p}, {2, 2}, {2, 2}));
}

TEST(SensingChannel, TransposedTransmitSteering)
{
    SensingScene scene;
    scene.targets.push_back({12.0, 20.0, 0.4, kPi / 2, {0.7, -0.2}});
    const geometry::UpaGeometry tx{8, 2}, rx{4, 2};
    const int m = 5, n = 3, q = 2;
    const CMatrix H = sensing_channel(scene, m, n, q, kFrame, tx, rx);
    const auto &t = scene.targets[0];
    const double t_sym = (q - 1) * kFrame.slot_duration() + n * kFrame.total_symbol_duration();
    const cd g = std::sqrt(16.0 * 8.0) * t.coeff * std::polar(1.0, -2.0 * kPi * m * kFrame.delta_f * t.delay()) *
                 std::polar(1.0, 2.0 * kPi * t_sym * t.doppler(kFrame.fc));
    const CMatrix expect = g * geometry::steering_upa(0.4, kPi / 2, rx) * geometry::steering_upa(0.4, kPi / 2, tx).transpose();
    EXPECT_LT((H - expect).norm(), 1e-12 * expect.norm());

    // a_t^T(theta) equals a_t^H(-theta) at broadside elevation: the echo is strongest toward -theta
    const CVector at = geometry::steering_upa(0.4, kPi / 2, tx);
    EXPECT_LT((at.conjugate() - geometry::steering_upa(-0.4, kPi / 2, tx)).norm(), 1e-12);
}

TEST(SensingChannel, ModelCheckFlagsLongDelays)
{
    SensingScene scene;
    scene.targets.push_back({5.0, 20.0, 0.0});
    EXPECT_TRUE(check_isi_ici_free(scene, kFrame).ok());
    // the CP at M = 64, delta_f = 3.84 MHz covers 9.76 m
    scene.targets.push_back({15.0, 20.0, 0.0});
    const auto c = check_isi_ici_free(scene, kFrame);
    EXPECT_FALSE(c.delay_within_cp);
    EXPECT_TRUE(c.doppler_negligible);
    scene.targets = {{5.0, 2000.0, 0.0}};
    EXPECT_FALSE(check_isi_ici_free(scene, kFrame).doppler_negligible);
}

TEST(Noise, VarianceAndCircularity)
{
    RngStream rng(13);
    const CMatrix w = awgn(200, 200, 2.5, rng);
    const double p = w.squaredNorm() / double(w.size());
    EXPECT_NEAR(p, 2.5, 0.05);
    const cd pseudo = (w.array() * w.array()).sum() / double(w.size());
    EXPECT_LT(std::abs(pseudo), 0.05);
}
