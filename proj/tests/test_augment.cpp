#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "nops/augment.hpp"

using namespace nops;

namespace {

LabelledCloud random_cloud(std::size_t n, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(-5.0, 5.0);
    LabelledCloud c;
    for (std::size_t i = 0; i < n; ++i) {
        c.coords.push_back({u(rng), u(rng), u(rng)});
        c.labels.push_back(static_cast<int>(i % 3));
    }
    return c;
}

double dist(const Point3& a, const Point3& b) {
    return std::sqrt((a[0] - b[0]) * (a[0] - b[0]) + (a[1] - b[1]) * (a[1] - b[1]) + (a[2] - b[2]) * (a[2] - b[2]));
}

}  // namespace

TEST_CASE("identity augmentation leaves the cloud untouched") {
    const LabelledCloud c = random_cloud(20, 1);
    const AugmentConfig off{.rotate = false, .scale_lo = 1.0, .scale_hi = 1.0, .jitter_sigma = 0.0};
    const ViewPair v = make_views(c, off, 3);
    CHECK(v.view_a.coords == c.coords);
    CHECK(v.view_b.coords == c.coords);
}

TEST_CASE("rotation by pi flips x") {
    const auto r = rotate_z({{1.0, 0.0, 0.0}}, std::numbers::pi);
    CHECK(std::abs(r[0][0] + 1.0) < 1e-12);
    CHECK(std::abs(r[0][1]) < 1e-12);
    CHECK(r[0][2] == 0.0);
}

TEST_CASE("rotation preserves pairwise distances") {
    const LabelledCloud c = random_cloud(15, 2);
    const AugmentConfig rot{.rotate = true, .scale_lo = 1.0, .scale_hi = 1.0, .jitter_sigma = 0.0};
    const ViewPair v = make_views(c, rot, 4);
    for (std::size_t i = 0; i < c.size(); ++i)
        for (std::size_t j = 0; j < c.size(); ++j) {
            CHECK(std::abs(dist(v.view_a.coords[i], v.view_a.coords[j]) - dist(c.coords[i], c.coords[j])) < 1e-9);
        }
}

TEST_CASE("without jitter a view is an isometry up to one scale factor") {
    const LabelledCloud c = random_cloud(12, 5);
    const AugmentConfig cfg{.rotate = true, .scale_lo = 0.95, .scale_hi = 1.05, .jitter_sigma = 0.0};
    const ViewPair v = make_views(c, cfg, 6);
    const double s = dist(v.view_b.coords[0], v.view_b.coords[1]) / dist(c.coords[0], c.coords[1]);
    CHECK(s >= 0.95);
    CHECK(s <= 1.05);
    for (std::size_t i = 0; i < c.size(); ++i)
        for (std::size_t j = i + 1; j < c.size(); ++j)
            CHECK(std::abs(dist(v.view_b.coords[i], v.view_b.coords[j]) - s * dist(c.coords[i], c.coords[j])) < 1e-9);
}

TEST_CASE("views keep labels and point identity") {
    const LabelledCloud c = random_cloud(50, 7);
    const ViewPair v = make_views(c, AugmentConfig{}, 8);
    CHECK(v.view_a.labels == c.labels);
    CHECK(v.view_b.labels == c.labels);
    CHECK(v.view_a.size() == c.size());
    CHECK(v.view_a.coords != v.view_b.coords);
    // Heights only see scale and jitter, so point i stays recognisable.
    for (std::size_t i = 0; i < c.size(); ++i) CHECK(std::abs(v.view_a.coords[i][2] - c.coords[i][2]) < 0.4);
}

TEST_CASE("same seed, same views") {
    const LabelledCloud c = random_cloud(10, 9);
    CHECK(make_views(c, AugmentConfig{}, 11).view_a.coords == make_views(c, AugmentConfig{}, 11).view_a.coords);
}

TEST_CASE("invalid input") {
    CHECK_THROWS(make_views(LabelledCloud{}, AugmentConfig{}, 0));
    CHECK_THROWS(make_views(random_cloud(3, 1), AugmentConfig{.scale_lo = 1.2, .scale_hi = 1.0}, 0));
    CHECK_THROWS(make_views(random_cloud(3, 1), AugmentConfig{.jitter_sigma = -1.0}, 0));
}
