#include <doctest.h>

#include "hifsense/mag_sensing.hpp"
#include "test_helpers.hpp"

#include <cmath>
#include <numbers>

using namespace hifsense;

namespace {

constexpr double kMu0 = 4.0e-7 * std::numbers::pi;

/// Numeric Biot-Savart line integral over the finite segment (Simpson rule),
/// independent of the closed form under test.
double segment_field_numeric(double current, double half_length, double distance,
                             int intervals = 20000) {
    const double a = -half_length;
    const double h = 2.0 * half_length / intervals;
    auto integrand = [&](double y) {
        const double r2 = y * y + distance * distance;
        return distance / (r2 * std::sqrt(r2));
    };
    double sum = integrand(a) + integrand(half_length);
    for (int i = 1; i < intervals; ++i) {
        sum += integrand(a + i * h) * ((i % 2 == 1) ? 4.0 : 2.0);
    }
    return kMu0 * current / (4.0 * std::numbers::pi) * sum * h / 3.0;
}

} // namespace

TEST_SUITE("mag_sensing") {

TEST_CASE("single conductor 10 A at 0.6 m below: 3.33 uT, purely horizontal") {
    auto geom = ConductorGeometry::default_flat();
    // Point directly below conductor A.
    const auto& a = geom.conductors[0];
    const FieldSample b = field_at_point({10.0, 0.0, 0.0, 0.0}, geom, a.x_m, a.height_m - 0.6);
    const double expected = kMu0 * 10.0 / (2.0 * std::numbers::pi * 0.6);
    CHECK(std::abs(b.bx_t) == doctest::Approx(expected).epsilon(1e-9));
    CHECK(expected == doctest::Approx(3.333e-6).epsilon(1e-3));
    CHECK(b.by_t == 0.0);
    CHECK(std::abs(b.bz_t) < 1e-18);
}

TEST_CASE("zero currents give zero field; superposition is exact") {
    const auto geom = ConductorGeometry::default_flat();
    const FieldSample zero = field_at_point({0, 0, 0, 0}, geom, 0.6, 4.5);
    CHECK(zero.bx_t == 0.0);
    CHECK(zero.bz_t == 0.0);

    const std::array<double, 4> i1{3.0, -2.0, 1.5, 0.25};
    const std::array<double, 4> i2{-1.0, 4.0, 2.0, -0.5};
    std::array<double, 4> sum{};
    for (int i = 0; i < 4; ++i) sum[static_cast<std::size_t>(i)] = i1[static_cast<std::size_t>(i)] + i2[static_cast<std::size_t>(i)];
    const auto ba = field_at_point(i1, geom, 0.3, 4.2);
    const auto bb = field_at_point(i2, geom, 0.3, 4.2);
    const auto bs = field_at_point(sum, geom, 0.3, 4.2);
    CHECK(bs.bx_t == doctest::Approx(ba.bx_t + bb.bx_t).epsilon(1e-12));
    CHECK(bs.bz_t == doctest::Approx(ba.bz_t + bb.bz_t).epsilon(1e-12));
}

TEST_CASE("field falls off as 1/d and By is identically zero below the line plane") {
    const auto geom = ConductorGeometry::default_flat();
    const std::array<double, 4> cur{7.0, 0.0, 0.0, 0.0};
    const auto near = field_at_point(cur, geom, 0.0, geom.conductors[0].height_m - 0.5);
    const auto far = field_at_point(cur, geom, 0.0, geom.conductors[0].height_m - 1.0);
    const double mag_near = std::hypot(near.bx_t, near.bz_t);
    const double mag_far = std::hypot(far.bx_t, far.bz_t);
    CHECK(mag_near == doctest::Approx(2.0 * mag_far).epsilon(1e-12));
    CHECK(near.by_t == 0.0);
    CHECK(far.by_t == 0.0);
}

TEST_CASE("point on a conductor is rejected") {
    const auto geom = ConductorGeometry::default_flat();
    CHECK_THROWS(field_at_point({1, 0, 0, 0}, geom, geom.conductors[1].x_m,
                                geom.conductors[1].height_m));
}

TEST_CASE("finite segment matches the numeric line-integral oracle") {
    for (double half : {0.5, 3.0, 10.0}) {
        for (double d : {0.3, 0.6, 2.0}) {
            const double closed = finite_segment_field(5.0, half, d);
            const double numeric = segment_field_numeric(5.0, half, d);
            CHECK(closed == doctest::Approx(numeric).epsilon(1e-9));
        }
    }
}

TEST_CASE("segment ratio at 3 m half-length and 0.6 m distance is 0.9806") {
    const double ratio = segment_to_infinite_ratio(3.0, 0.6);
    CHECK(ratio == doctest::Approx(0.9806).epsilon(1e-4));
    const double infinite = kMu0 * 5.0 / (2.0 * std::numbers::pi * 0.6);
    CHECK(segment_field_numeric(5.0, 3.0, 0.6) / infinite == doctest::Approx(0.9806).epsilon(1e-4));
}

TEST_CASE("long segments approach the infinite line from below, monotonically") {
    const double inf_limit = segment_to_infinite_ratio(1e6 * 0.6, 0.6);
    CHECK(inf_limit == doctest::Approx(1.0).epsilon(1e-6));
    double prev = 0.0;
    for (double half : {0.5, 1.0, 2.0, 4.0, 8.0, 16.0}) {
        const double r = segment_to_infinite_ratio(half, 0.6);
        CHECK(r > prev);
        CHECK(r < 1.0);
        prev = r;
    }
}

TEST_CASE("solver finds the 80% distance for a +/-3 m segment at 2.25 m") {
    const double d = distance_for_segment_ratio(3.0, 0.8);
    CHECK(d == doctest::Approx(2.25).epsilon(1e-9));
    CHECK(segment_to_infinite_ratio(3.0, d) == doctest::Approx(0.8).epsilon(1e-9));
}

TEST_CASE("finite segment rejects non-positive arguments") {
    CHECK_THROWS(finite_segment_field(1.0, 0.0, 0.5));
    CHECK_THROWS(finite_segment_field(1.0, 3.0, -0.1));
}

TEST_CASE("transduce: deterministic part is exact, saturation clamps") {
    WaveformRecord fields(1000.0);
    fields.add_channel({"h1_bx", "T", ChannelRole::FieldAxis},
                       {1e-6, -2e-6, 5e-4, 2e-3, -2e-3});
    SensorModel model;
    model.sensitivity_v_per_t = 1e4;
    model.noise_density_t_per_sqrt_hz = 0.0;
    model.saturation_t = 1e-3;
    model.offset_v = 0.1;
    const auto out = transduce(fields, model, 1);
    const auto v = out.samples("h1_vx");
    CHECK(v[0] == doctest::Approx(1e4 * 1e-6 + 0.1).epsilon(1e-12));
    CHECK(v[1] == doctest::Approx(1e4 * -2e-6 + 0.1).epsilon(1e-12));
    CHECK(v[2] == doctest::Approx(1e4 * 5e-4 + 0.1).epsilon(1e-12));
    CHECK(v[3] == doctest::Approx(1e4 * 1e-3 + 0.1).epsilon(1e-12));  // clamped
    CHECK(v[4] == doctest::Approx(-1e4 * 1e-3 + 0.1).epsilon(1e-12)); // clamped

    // Inversion undoes the deterministic part (within the linear range).
    const auto back = to_field_units(out, model);
    CHECK(back.samples("h1_bx")[0] == doctest::Approx(1e-6).epsilon(1e-12));
}

TEST_CASE("noise-only record has the configured standard deviation") {
    const double rate = 27700.0;
    WaveformRecord fields(rate);
    fields.add_channel({"h1_bz", "T", ChannelRole::FieldAxis},
                       std::vector<double>(1000000, 0.0));
    SensorModel model;
    model.sensitivity_v_per_t = 1.0;
    model.noise_density_t_per_sqrt_hz = 2e-10;
    const auto out = transduce(fields, model, 99);
    const double expected = 2e-10 * std::sqrt(rate / 2.0);
    const double sigma = hifsense::testing::rms_of(out.samples("h1_vz"));
    CHECK(sigma == doctest::Approx(expected).epsilon(0.05));
}

TEST_CASE("transduce is linear below saturation with zero noise") {
    WaveformRecord fields(1000.0);
    fields.add_channel({"h1_bx", "T", ChannelRole::FieldAxis}, {1e-6, 3e-6, -4e-6});
    SensorModel model;
    model.noise_density_t_per_sqrt_hz = 0.0;
    model.offset_v = 0.0;
    const auto one = transduce(fields, model, 0);

    WaveformRecord doubled(1000.0);
    doubled.add_channel({"h1_bx", "T", ChannelRole::FieldAxis}, {2e-6, 6e-6, -8e-6});
    const auto two = transduce(doubled, model, 0);
    for (std::size_t i = 0; i < 3; ++i) {
        CHECK(two.samples("h1_vx")[i] == doctest::Approx(2.0 * one.samples("h1_vx")[i]).epsilon(1e-12));
    }
}

TEST_CASE("sensor head validation") {
    const auto geom = ConductorGeometry::default_flat();
    SensorHead head{"h1", 0.6, 5.08, {SensorAxis::X, SensorAxis::Z}};
    CHECK_NOTHROW(head.validate(geom));
    head.axes.clear();
    CHECK_THROWS(head.validate(geom));
    head.axes = {SensorAxis::X};
    head.x_m = geom.conductors[2].x_m;
    head.height_m = geom.conductors[2].height_m;
    CHECK_THROWS(head.validate(geom));
}

} // TEST_SUITE
