#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>

#include "doctest.h"
#include "uvsim/errmodel.hpp"
#include "uvsim/errors.hpp"
#include "uvsim/prf.hpp"

using namespace uvsim;

namespace {

// Frozen reference values: these pin the PRF contract. Changing the mixer
// changes every simulated error pattern, so it must not happen silently.
constexpr uint64_t kMix64Of1 = 0x5692161d100b05e5ull;
constexpr uint64_t kHash123 = 0xb19f667b2781fdf0ull;

std::filesystem::path write_temp(const std::string& name,
                                 const std::string& content) {
  const auto path = std::filesystem::temp_directory_path() / name;
  std::ofstream out(path, std::ios::binary);
  out << content;
  return path;
}

}  // namespace

TEST_CASE("PRF outputs are frozen") {
  CHECK(mix64(0) == 0);  // the splitmix64 finalizer fixes zero
  CHECK(mix64(1) == kMix64Of1);
  CHECK(hash_tuple(1, 2, 3) == kHash123);
  CHECK(hash_tuple(1, 2, 3) != hash_tuple(1, 3, 2));
  CHECK(hash_tuple(1, 2, 3) != hash_tuple(2, 2, 3));
  // Folding is positional: a zero coordinate still moves the hash.
  CHECK(hash_tuple(1, 0, 2) != hash_tuple(1, 2, 0));
  CHECK(hash_tuple(1, 0) != hash_tuple(1));
}

TEST_CASE("bernoulli respects degenerate probabilities and concentrates") {
  CHECK_FALSE(bernoulli(0, 0.0));
  CHECK_FALSE(bernoulli(~0ull, -1.0));
  CHECK(bernoulli(~0ull, 1.0));
  // The threshold is trunc(p * 2^64): rates below 2^-64 can never fire,
  // while h = 0 fires for any p whose threshold reaches 1.
  CHECK_FALSE(bernoulli(0, 1e-300));
  CHECK(bernoulli(0, 1e-18));
  CHECK(bernoulli(17, 1e-18));   // threshold is 18 of 2^64
  CHECK_FALSE(bernoulli(19, 1e-18));

  const double p = 0.3;
  const int trials = 100000;
  int hits = 0;
  for (int i = 0; i < trials; ++i)
    hits += bernoulli(hash_tuple(7, i), p) ? 1 : 0;
  // 4 sigma around the mean: sigma = sqrt(p(1-p)/N) ~ 0.00145.
  const double freq = static_cast<double>(hits) / trials;
  CHECK(freq == doctest::Approx(p).epsilon(0.02));
}

TEST_CASE("bounded stays in range and spreads evenly") {
  int buckets[24] = {};
  const int trials = 240000;
  for (int i = 0; i < trials; ++i) {
    const uint32_t v = bounded(hash_tuple(11, i), 24);
    REQUIRE(v < 24);
    ++buckets[v];
  }
  for (int b = 0; b < 24; ++b) {
    // Expected 10000 per bucket; allow 5%.
    CHECK(buckets[b] > 9500);
    CHECK(buckets[b] < 10500);
  }
  CHECK(bounded(0, 24) == 0);
  CHECK(bounded(~0ull, 24) == 23);
}

TEST_CASE("gaussian has standard-normal moments") {
  const int trials = 50000;
  double sum = 0.0, sum_sq = 0.0;
  for (int i = 0; i < trials; ++i) {
    const double z = gaussian(hash_tuple(3, i, 0), hash_tuple(3, i, 1));
    sum += z;
    sum_sq += z * z;
  }
  const double mean = sum / trials;
  const double var = sum_sq / trials - mean * mean;
  CHECK(std::abs(mean) < 0.02);
  CHECK(var == doctest::Approx(1.0).epsilon(0.03));
}

TEST_CASE("default profile hits its anchors exactly") {
  const VoltageErrorProfile profile = default_profile();
  CHECK(profile.error_prob(0.90) == 1e-5);
  CHECK(profile.error_prob(0.85) == 1e-4);
  CHECK(profile.error_prob(0.95) == 0.0);
  CHECK(profile.error_prob(1.00) == 0.0);
  // The logistic parameters solve the anchor system.
  const double k = default_profile_steepness();
  const double r0 = default_profile_r0();
  CHECK(kDefaultProfilePMax / (1.0 + std::exp(k * (0.85 - r0))) ==
        doctest::Approx(1e-4).epsilon(1e-12));
  CHECK(kDefaultProfilePMax / (1.0 + std::exp(k * (0.90 - r0))) ==
        doctest::Approx(1e-5).epsilon(1e-12));
}

TEST_CASE("profile interpolation is log-linear with a hard zero tail") {
  const VoltageErrorProfile profile = default_profile();
  // Between the 1e-4 and 1e-5 anchors: p(0.89) = 10^(-4.8).
  CHECK(profile.error_prob(0.89) ==
        doctest::Approx(1.584893192461113e-5).epsilon(1e-12));
  // Above the last failing row the rate is identically zero, not merely
  // small: log-linear interpolation toward a zero row is ill-defined.
  CHECK(profile.error_prob(0.91) == 0.0);
  CHECK(profile.error_prob(0.9499) == 0.0);
  CHECK(profile.error_prob(2.0) == 0.0);   // clamp above the table
  CHECK(profile.error_prob(0.30) == profile.error_prob(0.55));  // clamp below
  // Monotone non-increasing across the whole range.
  double prev = 1.0;
  for (double r = 0.50; r <= 1.001; r += 0.001) {
    const double p = profile.error_prob(r);
    CHECK(p <= prev + 1e-15);
    prev = p;
  }
}

TEST_CASE("profile construction rejects malformed tables") {
  CHECK_THROWS_AS(VoltageErrorProfile({}), data_error);
  CHECK_THROWS_AS(VoltageErrorProfile({{0.0, 0.1}}), data_error);
  CHECK_THROWS_AS(VoltageErrorProfile({{0.5, 1.5}}), data_error);
  CHECK_THROWS_AS(VoltageErrorProfile({{0.5, 0.1}, {0.5, 0.1}}), data_error);
  CHECK_THROWS_AS(VoltageErrorProfile({{0.5, 0.1}, {0.6, 0.2}}), data_error);
  CHECK_NOTHROW(VoltageErrorProfile({{0.5, 0.1}, {0.6, 0.1}}));
}

TEST_CASE("scaled multiplies p and saturates at 1") {
  const VoltageErrorProfile base({{0.5, 0.4}, {0.9, 0.001}});
  const VoltageErrorProfile up = base.scaled(3.0);
  CHECK(up.rows()[0].p == 1.0);  // 1.2 capped
  CHECK(up.rows()[1].p == doctest::Approx(0.003));
  CHECK_THROWS_AS(base.scaled(0.0), config_error);
}

TEST_CASE("global_error_rate matches 1-(1-p)^m") {
  CHECK(global_error_rate(0.0, 100) == 0.0);
  CHECK(global_error_rate(0.5, 0) == 0.0);
  CHECK(global_error_rate(1.0, 3) == 1.0);
  CHECK(global_error_rate(0.1, 2) == doctest::Approx(0.19).epsilon(1e-12));
  CHECK(global_error_rate(1e-5, 65536) ==
        doctest::Approx(0.4807466044).epsilon(1e-9));
}

TEST_CASE("splice24 takes low bits from correct, high bits from previous") {
  const Acc24 correct = acc_from_bits(0x000001);
  const Acc24 previous = acc_from_bits(0x800000);
  CHECK(splice24(correct, previous, 8) == acc_from_bits(0x800001));
  CHECK(splice24(correct, previous, 0) == previous);
  CHECK(splice24(correct, previous, 23) == acc_from_bits(0x800001));
  CHECK(splice24(Acc24{88}, Acc24{88}, 13) == Acc24{88});

  // Bit-loop oracle across random pairs and every cut.
  for (int trial = 0; trial < 200; ++trial) {
    const uint32_t a = static_cast<uint32_t>(hash_tuple(21, trial)) & 0xFFFFFF;
    const uint32_t b =
        static_cast<uint32_t>(hash_tuple(22, trial)) & 0xFFFFFF;
    for (int cut = 0; cut < 24; ++cut) {
      uint32_t expect = 0;
      for (int bit = 0; bit < 24; ++bit)
        expect |= ((bit < cut ? a : b) >> bit & 1u) << bit;
      CHECK(splice24(acc_from_bits(a), acc_from_bits(b), cut) ==
            acc_from_bits(expect));
    }
  }
}

TEST_CASE("corrupt is deterministic and can be silent") {
  ErrorCoords coords{.seed = 5, .layer = 1, .block = 2, .row = 3, .col = 4,
                     .k = 5};
  const Acc24 correct{12345}, previous{-777};
  const Acc24 once = corrupt(correct, previous, coords);
  CHECK(corrupt(correct, previous, coords) == once);
  // The result is one of the 24 possible splices.
  bool matches_some_cut = false;
  for (int cut = 0; cut < 24; ++cut)
    matches_some_cut |= splice24(correct, previous, cut) == once;
  CHECK(matches_some_cut);
  // Equal registers make every error silent.
  CHECK(corrupt(Acc24{42}, Acc24{42}, coords) == Acc24{42});
}

TEST_CASE("sample_error is a pure function of its coordinates") {
  ErrorCoords coords{.seed = 9, .layer = 0, .block = 1, .row = 7, .col = 31,
                     .k = 2};
  const bool first = sample_error(0.37, coords);
  CHECK(sample_error(0.37, coords) == first);
  coords.col = 32;
  // p = 0 never hashes, never fires.
  CHECK_FALSE(sample_error(0.0, coords));
  // Rate check at moderate p over many coordinates.
  int hits = 0;
  const int trials = 50000;
  for (int i = 0; i < trials; ++i) {
    coords.col = static_cast<uint64_t>(i);
    hits += sample_error(0.2, coords) ? 1 : 0;
  }
  CHECK(static_cast<double>(hits) / trials == doctest::Approx(0.2).epsilon(0.03));
}

TEST_CASE("chip samples have the requested spread and a positive floor") {
  double sum = 0.0, sum_sq = 0.0;
  const int chips = 20000;
  for (int chip = 0; chip < chips; ++chip) {
    const double f = draw_chip_sample(hash_tuple(1, chip), 0.05).factor;
    CHECK(f > 0.0);
    sum += f;
    sum_sq += f * f;
  }
  const double mean = sum / chips;
  const double sd = std::sqrt(sum_sq / chips - mean * mean);
  CHECK(mean == doctest::Approx(1.0).epsilon(0.002));
  CHECK(sd == doctest::Approx(0.05).epsilon(0.05));
  // A pathological sigma cannot push the factor to zero or below.
  for (int chip = 0; chip < 200; ++chip)
    CHECK(draw_chip_sample(hash_tuple(2, chip), 50.0).factor >= 0.05);
  CHECK_THROWS_AS(draw_chip_sample(1, -0.1), config_error);
}

TEST_CASE("process variation rescales the voltage axis") {
  const VoltageErrorProfile base = default_profile();
  // sigma = 0: identical table, not merely equivalent.
  const VoltageErrorProfile same = apply_process_variation(base, 0.0, 123);
  REQUIRE(same.rows().size() == base.rows().size());
  for (size_t i = 0; i < base.rows().size(); ++i) {
    CHECK(same.rows()[i].r == base.rows()[i].r);
    CHECK(same.rows()[i].p == base.rows()[i].p);
  }
  // p'(r) = p(r / f) holds across the table (same interpolation weights).
  const uint64_t chip_seed = hash_tuple(77, 3);
  const double f = draw_chip_sample(chip_seed, 0.05).factor;
  const VoltageErrorProfile shifted =
      apply_process_variation(base, 0.05, chip_seed);
  for (double r : {0.60, 0.72, 0.81, 0.88}) {
    CHECK(shifted.error_prob(r) ==
          doctest::Approx(base.error_prob(r / f)).epsilon(1e-9));
  }
}

TEST_CASE("layer_profiles spreads rates geometrically") {
  const VoltageErrorProfile base = default_profile();
  const auto profiles = layer_profiles(base, 3, 10.0);
  REQUIRE(profiles.size() == 3);
  const double r = 0.75;
  const double p0 = profiles[0].error_prob(r);
  const double p1 = profiles[1].error_prob(r);
  const double p2 = profiles[2].error_prob(r);
  CHECK(p1 == doctest::Approx(base.error_prob(r)));
  CHECK(p2 / p0 == doctest::Approx(10.0).epsilon(1e-9));
  CHECK(p1 / p0 == doctest::Approx(std::sqrt(10.0)).epsilon(1e-9));
  // A single layer gets the base curve unchanged.
  const auto single = layer_profiles(base, 1, 10.0);
  CHECK(single[0].error_prob(r) == base.error_prob(r));
  // Huge spread saturates at p = 1 instead of overflowing.
  const auto wide = layer_profiles(base, 2, 1e9);
  CHECK(wide[1].rows().front().p == 1.0);
  CHECK_THROWS_AS(layer_profiles(base, 0, 10.0), config_error);
  CHECK_THROWS_AS(layer_profiles(base, 2, 0.5), config_error);
}

TEST_CASE("profile files parse with wildcard fallback and overrides") {
  const auto path = write_temp("uvsim_profiles_ok.csv",
                               "# per-layer error profiles\n"
                               "\n"
                               "*, 0.7, 0.05\n"
                               "*, 0.9, 0.001\n"
                               "1, 0.7, 0.2\n"
                               "1, 0.9, 0.01\n");
  const auto profiles = load_profiles(path.string(), 3);
  REQUIRE(profiles.size() == 3);
  CHECK(profiles[0].error_prob(0.7) == 0.05);
  CHECK(profiles[2].error_prob(0.9) == 0.001);
  // Layer 1 has specific rows; the wildcard does not leak in.
  CHECK(profiles[1].error_prob(0.7) == 0.2);
  CHECK(profiles[1].error_prob(0.9) == 0.01);
  std::filesystem::remove(path);
}

TEST_CASE("profile files report malformed lines with their line number") {
  const auto missing = write_temp("uvsim_profiles_missing.csv",
                                  "*, 0.7, 0.05\n"
                                  "*, 0.9\n");
  CHECK_THROWS_WITH_AS(load_profiles(missing.string(), 2),
                       doctest::Contains(":2:"), data_error);
  std::filesystem::remove(missing);

  const auto garbage = write_temp("uvsim_profiles_garbage.csv",
                                  "*, 0.7x, 0.05\n");
  CHECK_THROWS_AS(load_profiles(garbage.string(), 1), data_error);
  std::filesystem::remove(garbage);

  const auto out_of_range = write_temp("uvsim_profiles_range.csv",
                                       "5, 0.7, 0.05\n"
                                       "*, 0.7, 0.05\n");
  CHECK_THROWS_WITH_AS(load_profiles(out_of_range.string(), 2),
                       doctest::Contains("out of range"), data_error);
  std::filesystem::remove(out_of_range);

  // Non-monotone rows fail with the offending layer named.
  const auto non_mono = write_temp("uvsim_profiles_mono.csv",
                                   "0, 0.9, 0.05\n"
                                   "0, 0.7, 0.001\n");
  CHECK_THROWS_WITH_AS(load_profiles(non_mono.string(), 1),
                       doctest::Contains("layer 0"), data_error);
  std::filesystem::remove(non_mono);

  // A layer with no rows anywhere is an error, not a silent default.
  const auto sparse = write_temp("uvsim_profiles_sparse.csv",
                                 "0, 0.7, 0.05\n");
  CHECK_THROWS_AS(load_profiles(sparse.string(), 2), data_error);
  std::filesystem::remove(sparse);

  CHECK_THROWS_AS(load_profiles("/nonexistent/profiles.csv", 1), data_error);
}
