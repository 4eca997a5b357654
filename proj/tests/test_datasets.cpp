#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "komet/datasets.hpp"
#include "komet/error.hpp"

using namespace komet;

namespace {

const DriftKind kAll[] = {DriftKind::A_sign_flip,      DriftKind::B_osc_sep,        DriftKind::C_lissajous,
                          DriftKind::D_orbit_mog,      DriftKind::E_subcluster_mog, DriftKind::F_expanding};

}  // namespace

TEST_SUITE("datasets") {

TEST_CASE("kind C centroids at t = 0") {
  const auto spec = DriftSpec::defaults(DriftKind::C_lissajous);
  const auto c = centroids(spec, 0);
  REQUIRE(c.size() == 2);
  CHECK(c[0].x() == doctest::Approx(-0.6));
  CHECK(c[0].y() == doctest::Approx(1.0));
  CHECK(c[1].x() == doctest::Approx(0.6));
  CHECK(c[1].y() == doctest::Approx(1.0));
}

TEST_CASE("kind E circumradius and gap") {
  const auto spec = DriftSpec::defaults(DriftKind::E_subcluster_mog);
  CHECK(circumradius(spec, 0) == doctest::Approx(1.8));
  CHECK(gap(spec, 50) == doctest::Approx(std::sqrt(3.0) * 1.2));
  CHECK(gap(spec, 50) == doctest::Approx(2.078).epsilon(1e-3));
  CHECK(gap(spec, 0) == doctest::Approx(3.118).epsilon(1e-3));
  // Two sub-clusters per class, centred on the triangle vertex.
  const auto c = centroids(spec, 0);
  REQUIRE(c.size() == 6);
  for (int k = 0; k < 3; ++k) {
    const Eigen::Vector2d vertex = 0.5 * (c[2 * k] + c[2 * k + 1]);
    CHECK(vertex.norm() == doctest::Approx(1.8));
    CHECK((c[2 * k] - c[2 * k + 1]).norm() == doctest::Approx(0.6));
  }
}

TEST_CASE("kind F radius grows linearly") {
  const auto spec = DriftSpec::defaults(DriftKind::F_expanding);
  CHECK(circumradius(spec, 300) == doctest::Approx(2.40));
  CHECK(gap(spec, 399) == doctest::Approx(std::sqrt(3.0) * (1.2 + 0.004 * 399)));
  CHECK(gap(spec, 399) == doctest::Approx(4.84).epsilon(1e-3));
  for (int t = 1; t < spec.total_steps; ++t) CHECK(circumradius(spec, t) > circumradius(spec, t - 1));
  CHECK_THROWS_AS(circumradius(DriftSpec::defaults(DriftKind::A_sign_flip), 0), ConfigError);
}

TEST_CASE("kinds A-E repeat every period") {
  for (auto kind : kAll) {
    if (kind == DriftKind::F_expanding) continue;
    const auto spec = DriftSpec::defaults(kind);
    for (int t = 0; t + spec.period < spec.total_steps; t += 7) {
      const auto a = centroids(spec, t);
      const auto b = centroids(spec, t + spec.period);
      REQUIRE(a.size() == b.size());
      for (std::size_t i = 0; i < a.size(); ++i) CHECK((a[i] - b[i]).norm() < 1e-12);
    }
  }
}

TEST_CASE("periodic kinds: samples at t and t + T agree in location") {
  // Two-sample z-test per class and coordinate on independent large draws.
  for (auto kind : {DriftKind::B_osc_sep, DriftKind::D_orbit_mog}) {
    const auto spec = DriftSpec::defaults(kind);
    const auto a = sample_timestep(spec, 13, 20000, 1);
    const auto b = sample_timestep(spec, 113, 20000, 2);
    for (int k = 0; k < spec.n_classes; ++k) {
      for (int d = 0; d < 2; ++d) {
        double sa = 0, sb = 0;
        int na = 0, nb = 0;
        for (Eigen::Index i = 0; i < a.size(); ++i)
          if (a.labels[i] == k) sa += a.inputs(i, d), ++na;
        for (Eigen::Index i = 0; i < b.size(); ++i)
          if (b.labels[i] == k) sb += b.inputs(i, d), ++nb;
        const double se = spec.noise_std * std::sqrt(1.0 / na + 1.0 / nb);
        CHECK(std::abs(sa / na - sb / nb) < 4.0 * se);
      }
    }
  }
}

TEST_CASE("kind A reverses its rotation at 180 degrees") {
  const auto spec = DriftSpec::defaults(DriftKind::A_sign_flip);
  // Continuous in t, including across the half-period and period boundaries.
  for (int t = 1; t < spec.total_steps; ++t) {
    const auto a = centroids(spec, t - 1);
    const auto b = centroids(spec, t);
    CHECK((a[0] - b[0]).norm() < 2.0 * std::numbers::pi / spec.period + 1e-12);
  }
  // The angle is a triangle wave: position at T/2 + s equals position at T/2 - s.
  for (int s = 1; s < 50; ++s) CHECK((centroids(spec, 50 + s)[0] - centroids(spec, 50 - s)[0]).norm() < 1e-12);
}

TEST_CASE("kind A label-swap variant flips every half period") {
  auto spec = DriftSpec::defaults(DriftKind::A_sign_flip);
  spec.params["reverse_rotation"] = 0.0;
  const auto before = centroids(spec, 49);
  const auto after = centroids(spec, 50);
  // Class 0 jumps to the opposite side at the half-period boundary.
  CHECK((before[0] + after[0]).norm() < 0.1);
  for (int t = 50; t < 100; ++t) {
    const double ph = 2.0 * std::numbers::pi * t / spec.period;
    CHECK((centroids(spec, t)[1] - Eigen::Vector2d(std::cos(ph), std::sin(ph))).norm() < 1e-12);
  }
}

TEST_CASE("kind B separation law") {
  const auto spec = DriftSpec::defaults(DriftKind::B_osc_sep);
  CHECK((centroids(spec, 0)[0] - centroids(spec, 0)[1]).norm() == doctest::Approx(1.6));
  CHECK((centroids(spec, 50)[0] - centroids(spec, 50)[1]).norm() == doctest::Approx(0.4));
}

TEST_CASE("kind B Bayes error near 5% at minimum separation") {
  // Monte Carlo with the exact likelihood-ratio classifier.
  const auto spec = DriftSpec::defaults(DriftKind::B_osc_sep);
  const int n = 100000;
  const auto batch = sample_timestep(spec, 50, n, 11);
  int errors = 0;
  for (Eigen::Index i = 0; i < n; ++i) errors += bayes_label(spec, 50, batch.inputs.row(i).transpose()) != batch.labels[i];
  const double err = static_cast<double>(errors) / n;
  CHECK(err > 0.035);
  CHECK(err < 0.065);
}

TEST_CASE("batches are balanced, reproducible and seed-dependent") {
  for (auto kind : kAll) {
    const auto spec = DriftSpec::defaults(kind);
    const auto a = sample_timestep(spec, 5, 1601, 3);
    const auto b = sample_timestep(spec, 5, 1601, 3);
    CHECK(a.inputs == b.inputs);
    CHECK(a.labels == b.labels);
    CHECK(a.timestep == 5);
    std::vector<int> hist(spec.n_classes, 0);
    for (Eigen::Index i = 0; i < a.size(); ++i) {
      REQUIRE(a.labels[i] >= 0);
      REQUIRE(a.labels[i] < spec.n_classes);
      ++hist[a.labels[i]];
    }
    const double target = 1601.0 / spec.n_classes;
    for (int h : hist) CHECK(std::abs(h - target) <= 1.0);
    CHECK(a.inputs != sample_timestep(spec, 5, 1601, 4).inputs);
    CHECK(a.inputs != sample_timestep(spec, 6, 1601, 3).inputs);
    CHECK(a.inputs != sample_timestep(spec, 5, 1601, 3, Stream::test).inputs);
  }
}

TEST_CASE("invalid requests are rejected") {
  const auto spec = DriftSpec::defaults(DriftKind::D_orbit_mog);
  CHECK_THROWS_AS(sample_timestep(spec, 0, 0, 0), ConfigError);
  CHECK_THROWS_AS(mixture(spec, 400), ConfigError);
  CHECK_THROWS_AS(mixture(spec, -1), ConfigError);
  CHECK_THROWS_AS(kind_from_string("G"), ConfigError);
  auto bad = spec;
  bad.noise_std = 0.0;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad = spec;
  bad.total_steps = 300;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad = spec;
  bad.n_classes = 2;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
}

}  // TEST_SUITE
