#include <thzisac/geometry.hpp>

#include <gtest/gtest.h>

#include <cmath>
#include <complex>

using namespace thz;
using namespace thz::geometry;

namespace
{
    double deg(double d) { return d * kPi / 180.0; }
} // namespace

TEST(Steering, EntriesFollowPlanarPhaseProgression)
{
    const UpaGeometry g{4, 3};
    const double theta = deg(30.0), phi = deg(60.0);
    const CVector a = steering_upa(theta, phi, g);
    ASSERT_EQ(a.size(), 12);
    for (int l = 0; l < 3; ++l)
        for (int w = 0; w < 4; ++w)
        {
            const double arg = kPi * (w * std::sin(theta) * std::sin(phi) + l * std::cos(phi));
            const std::complex<double> expect = std::polar(1.0 / std::sqrt(12.0), arg);
            EXPECT_NEAR(std::abs(a(l * 4 + w) - expect), 0.0, 1e-14);
        }
}

TEST(Steering, UnitNormEverywhere)
{
    const UpaGeometry g{32, 32};
    for (double t = -90.0; t <= 90.0; t += 7.3)
        for (double p : {10.0, 45.0, 90.0, 135.0})
            EXPECT_NEAR(steering_upa(deg(t), deg(p), g).norm(), 1.0, 1e-12);
}

TEST(Steering, KroneckerStructure)
{
    const UpaGeometry g{5, 4};
    const double theta = deg(-41.0), phi = deg(77.0);
    const CVector a = steering_upa(theta, phi, g);
    const CVector ay = steering_upa(theta, phi, {5, 1});
    const CVector az = steering_upa(0.0, phi, {1, 4});
    for (int l = 0; l < 4; ++l)
        for (int w = 0; w < 5; ++w)
            EXPECT_NEAR(std::abs(a(l * 5 + w) - az(l) * ay(w)), 0.0, 1e-14);
}

TEST(Steering, BroadsideIsUniformPhase)
{
    const CVector a = steering_upa(0.0, kPi / 2, {8, 8});
    for (Eigen::Index i = 0; i < a.size(); ++i)
        EXPECT_NEAR(std::abs(a(i) - a(0)), 0.0, 1e-12);
}

TEST(Steering, RejectsEmptyArray)
{
    EXPECT_THROW(steering_upa(0.0, kPi / 2, {0, 4}), std::invalid_argument);
}

TEST(Codebook, ColumnsOrthonormal)
{
    for (UpaGeometry g : {UpaGeometry{32, 32}, UpaGeometry{16, 4}, UpaGeometry{8, 1}})
    {
        const auto cb = dft_codebook(g, kPi / 2);
        ASSERT_EQ(cb.size(), g.w_count);
        const CMatrix gram = cb.columns.adjoint() * cb.columns;
        EXPECT_LT((gram - CMatrix::Identity(g.w_count, g.w_count)).norm(), 1e-10);
    }
}

TEST(Codebook, DirectionValues)
{
    const auto cb = dft_codebook({32, 32}, kPi / 2);
    // sin(omega_q) = -1 + (2q - 1) / W
    EXPECT_NEAR(cb.direction(1), std::asin(-31.0 / 32.0), 1e-15);
    EXPECT_NEAR(cb.direction(16), std::asin(-1.0 / 32.0), 1e-15);
    EXPECT_NEAR(cb.direction(17), std::asin(1.0 / 32.0), 1e-15);
    EXPECT_NEAR(cb.direction(1) * 180.0 / kPi, -75.6385, 1e-3);
    EXPECT_THROW(cb.direction(0), std::domain_error);
    EXPECT_THROW(cb.column(33), std::domain_error);
}

TEST(Window, FirstAndMiddleSlots)
{
    const UpaGeometry g{32, 32};
    const auto w1 = sensing_window(1, g);
    EXPECT_DOUBLE_EQ(w1.lo, -kPi / 2);
    EXPECT_NEAR(w1.hi * 180.0 / kPi, -69.64, 0.01);
    const auto w17 = sensing_window(17, g);
    EXPECT_NEAR(w17.lo, 0.0, 1e-15);
    EXPECT_NEAR(w17.hi * 180.0 / kPi, 3.58, 0.01);
}

TEST(Window, TileTheHalfPlaneAndHoldTheirDirection)
{
    const UpaGeometry g{32, 32};
    const auto cb = dft_codebook(g, kPi / 2);
    double edge = -kPi / 2;
    for (int q = 1; q <= 32; ++q)
    {
        const auto w = sensing_window(q, g);
        EXPECT_DOUBLE_EQ(w.lo, edge);
        EXPECT_GT(w.hi, w.lo);
        EXPECT_TRUE(w.contains(cb.direction(q)));
        edge = w.hi;
    }
    EXPECT_DOUBLE_EQ(edge, kPi / 2);
}

TEST(Window, OutOfRangeSlotThrows)
{
    EXPECT_THROW(sensing_window(0, {8, 8}), std::domain_error);
    EXPECT_THROW(sensing_window(9, {8, 8}), std::domain_error);
}

TEST(Window, MirroredNegatesInterval)
{
    const auto w = sensing_window(3, {16, 16});
    const auto m = w.mirrored();
    EXPECT_DOUBLE_EQ(m.lo, -w.hi);
    EXPECT_DOUBLE_EQ(m.hi, -w.lo);
    EXPECT_EQ(m.slot_index, 3);
}

TEST(Window, SlotForTargetLandsInMirroredWindow)
{
    const UpaGeometry g{32, 32};
    for (double t = -89.5; t < 90.0; t += 0.37)
    {
        const int q = slot_for_target(deg(t), g);
        ASSERT_GE(q, 1);
        ASSERT_LE(q, 32);
        EXPECT_TRUE(sensing_window(q, g).mirrored().contains(deg(t))) << t;
    }
    // 70 deg azimuth sits in the first slot's mirrored window
    EXPECT_EQ(slot_for_target(deg(70.0), g), 1);
}
