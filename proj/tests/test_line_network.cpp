#include <doctest.h>

#include "hifsense/line_network.hpp"
#include "test_helpers.hpp"

#include <cmath>
#include <complex>
#include <numbers>
#include <random>

using namespace hifsense;
using hifsense::testing::random_geometry;

namespace {

// Independent oracle: the per-mile textbook form of the modified Carson
// equations with distances in feet, converted back to SI afterwards. Shares
// no constants or helpers with the implementation (which works in meters via
// the equivalent return depth).
constexpr double kFootM = 0.3048;
constexpr double kMileM = 1609.344;
constexpr double kPi = std::numbers::pi;

std::complex<double> oracle_self_ohm_per_km(double r_ac_ohm_per_km, double gmr_m, double f,
                                            double rho) {
    const double r_mile = r_ac_ohm_per_km * (kMileM / 1000.0);
    const double gmr_ft = gmr_m / kFootM;
    const double resistive = kPi * kPi * f * 1e-7 * kMileM;
    const double reactive =
        4.0 * kPi * 1e-7 * f * kMileM *
        (std::log(1.0 / gmr_ft) + std::log(2160.0) + 0.5 * std::log(rho / f));
    return std::complex<double>(r_mile + resistive, reactive) / (kMileM / 1000.0);
}

std::complex<double> oracle_mutual_ohm_per_km(double spacing_m, double f, double rho) {
    const double d_ft = spacing_m / kFootM;
    const double resistive = kPi * kPi * f * 1e-7 * kMileM;
    const double reactive =
        4.0 * kPi * 1e-7 * f * kMileM *
        (std::log(1.0 / d_ft) + std::log(2160.0) + 0.5 * std::log(rho / f));
    return std::complex<double>(resistive, reactive) / (kMileM / 1000.0);
}

Conductor simple_conductor(char label, double x, double h, double gmr = 0.004,
                           double r_ac = 0.6) {
    return Conductor{label, x, h, gmr, gmr * 1.3, r_ac};
}

} // namespace

TEST_SUITE("line_network") {

TEST_CASE("mirror-symmetric pair gives a symmetric impedance matrix") {
    std::vector<Conductor> pair = {simple_conductor('A', -0.5, 6.0),
                                   simple_conductor('B', 0.5, 6.0)};
    const auto z = carson_impedance_matrix(pair, 50.0, 100.0);
    CHECK(z(0, 1) == z(1, 0));
    CHECK(z(0, 0) == z(1, 1));
}

TEST_CASE("doubling the spacing decreases the mutual reactance") {
    std::vector<Conductor> near = {simple_conductor('A', 0.0, 6.0),
                                   simple_conductor('B', 0.4, 6.0)};
    std::vector<Conductor> far = {simple_conductor('A', 0.0, 6.0),
                                  simple_conductor('B', 0.8, 6.0)};
    const auto zn = carson_impedance_matrix(near, 50.0, 100.0);
    const auto zf = carson_impedance_matrix(far, 50.0, 100.0);
    CHECK(zf(0, 1).imag() < zn(0, 1).imag());
    // The independent evaluation agrees at both spacings.
    CHECK(zn(0, 1).imag() ==
          doctest::Approx(oracle_mutual_ohm_per_km(0.4, 50.0, 100.0).imag()).epsilon(1e-12));
    CHECK(zf(0, 1).imag() ==
          doctest::Approx(oracle_mutual_ohm_per_km(0.8, 50.0, 100.0).imag()).epsilon(1e-12));
}

TEST_CASE("earth return adds resistance above the conductor AC value") {
    const auto geom = ConductorGeometry::default_flat();
    const auto z = carson_series_impedance(geom, 50.0, 100.0);
    for (int i = 0; i < 4; ++i) {
        CHECK(z(i, i).real() > geom.conductors[static_cast<std::size_t>(i)].r_ac_ohm_per_km);
        CHECK(z(i, i).imag() > 0.0);
    }
}

TEST_CASE("oracle equivalence on 20 random geometries") {
    std::mt19937_64 rng(2024);
    std::uniform_real_distribution<double> freq(40.0, 70.0);
    std::uniform_real_distribution<double> rho(20.0, 500.0);
    for (int trial = 0; trial < 20; ++trial) {
        const auto geom = random_geometry(rng);
        const double f = freq(rng);
        const double r = rho(rng);
        const auto z = carson_series_impedance(geom, f, r);
        for (int i = 0; i < 4; ++i) {
            const auto& ci = geom.conductors[static_cast<std::size_t>(i)];
            const auto self = oracle_self_ohm_per_km(ci.r_ac_ohm_per_km, ci.gmr_m, f, r);
            CHECK(std::abs(z(i, i) - self) <= 1e-9 * std::abs(self));
            for (int j = i + 1; j < 4; ++j) {
                const auto& cj = geom.conductors[static_cast<std::size_t>(j)];
                const double d = std::hypot(ci.x_m - cj.x_m, ci.height_m - cj.height_m);
                const auto mutual = oracle_mutual_ohm_per_km(d, f, r);
                CHECK(std::abs(z(i, j) - mutual) <= 1e-9 * std::abs(mutual));
            }
        }
    }
}

TEST_CASE("impedance and capacitance symmetry over 1000 random geometries") {
    std::mt19937_64 rng(77);
    for (int trial = 0; trial < 1000; ++trial) {
        const auto geom = random_geometry(rng);
        const auto z = carson_series_impedance(geom, 50.0, 100.0);
        const auto c = shunt_capacitance(geom);
        for (int i = 0; i < 4; ++i) {
            for (int j = 0; j < 4; ++j) {
                CHECK(std::abs(z(i, j) - z(j, i)) <= 1e-12 * std::max(1.0, std::abs(z(i, j))));
                CHECK(std::abs(c(i, j) - c(j, i)) <= 1e-12 * std::max(1.0, std::abs(c(i, j))));
            }
            CHECK(c(i, i) > 0.0);
        }
    }
}

TEST_CASE("mutual impedance magnitude decreases when separation doubles") {
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> sep(0.1, 1.5);
    for (int trial = 0; trial < 200; ++trial) {
        const double s = sep(rng);
        std::vector<Conductor> near = {simple_conductor('A', 0.0, 7.0),
                                       simple_conductor('B', s, 7.0)};
        std::vector<Conductor> far = {simple_conductor('A', 0.0, 7.0),
                                      simple_conductor('B', 2.0 * s, 7.0)};
        const auto zn = carson_impedance_matrix(near, 50.0, 100.0);
        const auto zf = carson_impedance_matrix(far, 50.0, 100.0);
        CHECK(std::abs(zf(0, 1).imag()) < std::abs(zn(0, 1).imag()));
    }
}

TEST_CASE("carson rejects bad inputs") {
    const auto geom = ConductorGeometry::default_flat();
    CHECK_THROWS(carson_series_impedance(geom, 0.0, 100.0));
    CHECK_THROWS(carson_series_impedance(geom, 50.0, -1.0));
    auto bad = geom;
    bad.conductors[1].x_m = bad.conductors[0].x_m;
    bad.conductors[1].height_m = bad.conductors[0].height_m;
    CHECK_THROWS(carson_series_impedance(bad, 50.0, 100.0));
}

TEST_CASE("single conductor capacitance matches the closed form") {
    const double h = 6.0;
    const double r = 0.005;
    std::vector<Conductor> one = {simple_conductor('A', 0.0, h)};
    one[0].radius_m = r;
    const auto c = capacitance_matrix(one);
    const double eps0 = 8.8541878128e-12;
    const double expected_nf_per_km = 2.0 * kPi * eps0 / std::log(2.0 * h / r) * 1e12;
    CHECK(c(0, 0) == doctest::Approx(expected_nf_per_km).epsilon(1e-9));
}

TEST_CASE("symmetric two-conductor layout has equal diagonal capacitance") {
    std::vector<Conductor> pair = {simple_conductor('A', -0.5, 6.0),
                                   simple_conductor('B', 0.5, 6.0)};
    const auto c = capacitance_matrix(pair);
    CHECK(c(0, 0) == doctest::Approx(c(1, 1)).epsilon(1e-12));
}

TEST_CASE("raising all conductors decreases diagonal capacitance") {
    auto low = ConductorGeometry::default_flat();
    auto high = low;
    for (auto& c : high.conductors) c.height_m *= 1.5;
    const auto cl = shunt_capacitance(low);
    const auto ch = shunt_capacitance(high);
    for (int i = 0; i < 4; ++i) CHECK(ch(i, i) < cl(i, i));
}

TEST_CASE("feeder assembly: counts and additivity") {
    const auto params = line_parameters(ConductorGeometry::default_flat(), 50.0, 100.0);
    const auto feeder = build_feeder(params, 600.0, 100.0);
    CHECK(feeder.sections.size() == 6);
    CHECK(feeder.node_count() == 7);

    const auto single = build_feeder(params, 100.0, 100.0);
    CHECK(single.sections.size() == 1);

    Eigen::Matrix4cd total = Eigen::Matrix4cd::Zero();
    for (const auto& s : feeder.sections) total += s.series_impedance_ohm;
    const Eigen::Matrix4cd expected = params.series_impedance_ohm_per_km * 0.6;
    CHECK((total - expected).norm() <= 1e-12 * expected.norm());

    // End capacitances are half the section total.
    const auto& sec = feeder.sections.front();
    const Eigen::Matrix4d section_total = params.shunt_capacitance_nf_per_km * (1e-9 * 0.1);
    CHECK((sec.end_capacitance_f * 2.0 - section_total).norm() <= 1e-15);

    CHECK_THROWS(build_feeder(params, 250.0, 100.0));
    CHECK_THROWS(build_feeder(params, 600.0, 0.0));
    CHECK_THROWS(build_feeder(params, -600.0, 100.0));
}

TEST_CASE("feeder assembly is linear in length") {
    const auto params = line_parameters(ConductorGeometry::default_flat(), 50.0, 100.0);
    const auto f1 = build_feeder(params, 300.0, 100.0);
    const auto f2 = build_feeder(params, 600.0, 100.0);
    Eigen::Matrix4cd t1 = Eigen::Matrix4cd::Zero();
    Eigen::Matrix4cd t2 = Eigen::Matrix4cd::Zero();
    for (const auto& s : f1.sections) t1 += s.series_impedance_ohm;
    for (const auto& s : f2.sections) t2 += s.series_impedance_ohm;
    CHECK((t2 - 2.0 * t1).norm() <= 1e-12 * t2.norm());
}

TEST_CASE("geometry validation") {
    auto geom = ConductorGeometry::default_flat();
    CHECK_NOTHROW(geom.validate());
    auto dup = geom;
    dup.conductors[3].label = 'A';
    CHECK_THROWS(dup.validate());
    auto neg = geom;
    neg.conductors[0].height_m = -1.0;
    CHECK_THROWS(neg.validate());
    auto zero_r = geom;
    zero_r.conductors[2].radius_m = 0.0;
    CHECK_THROWS(zero_r.validate());
}

} // TEST_SUITE
