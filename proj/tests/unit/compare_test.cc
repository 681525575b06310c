#include <gtest/gtest.h>

#include <set>

#include "primematch/compare.h"
#include "support/oracles.h"

using namespace primematch;

namespace {

ComparisonRandomness identity_randomness(unsigned n) {
  ComparisonRandomness r;
  for (unsigned j = 0; j <= n; ++j) {
    r.perm.push_back(j);
    r.s0.push_back(Scalar::from_u64(1));
    r.s1.push_back(Scalar::from_u64(1));
  }
  return r;
}

Seed seed_of(uint64_t v) {
  Seed s{};
  for (int i = 0; i < 8; ++i) s[i] = static_cast<uint8_t>(v >> (8 * i));
  return s;
}

std::vector<Scalar> bits(uint64_t v, unsigned n) { return bits_as_scalars(bit_decompose(v, n)); }

ComparisonOutput<Scalar> run_plain(uint64_t v0, uint64_t v1, unsigned n, const ComparisonRandomness& r) {
  auto b0 = bits(v0, n), b1 = bits(v1, n);
  return comparison_initial(ScalarModule{}, std::span<const Scalar>(b0), std::span<const Scalar>(b1), r);
}

}  // namespace

TEST(ComparisonInitial, HandTrace) {
  auto out = run_plain(2, 1, 2, identity_randomness(2));
  std::vector<Scalar> c0{Scalar::from_i64(2), Scalar::from_i64(4), Scalar::from_i64(-4)};
  std::vector<Scalar> c1{Scalar::from_i64(0), Scalar::from_i64(2), Scalar::from_i64(-4)};
  EXPECT_EQ(out.d0, c0);
  EXPECT_EQ(out.d1, c1);
}

TEST(ComparisonInitial, MatchesIntegerTrace) {
  for (unsigned n : {2u, 3u, 5u}) {
    for (uint64_t v0 = 0; v0 < (1u << n); ++v0) {
      for (uint64_t v1 = 0; v1 < (1u << n); ++v1) {
        auto out = run_plain(v0, v1, n, identity_randomness(n));
        auto trace = oracle::comparison_trace(v0, v1, n);
        for (unsigned j = 0; j <= n; ++j) {
          ASSERT_EQ(out.d0[j], Scalar::from_i64(trace.c0[j]));
          ASSERT_EQ(out.d1[j], Scalar::from_i64(trace.c1[j]));
        }
      }
    }
  }
}

TEST(ComparisonInitial, EqualitySlot) {
  for (uint64_t v : {0u, 5u, 31u}) {
    auto out = run_plain(v, v, 5, identity_randomness(5));
    EXPECT_TRUE(out.d0[5].is_zero());
    EXPECT_TRUE(out.d1[5].is_zero());
  }
}

TEST(ComparisonInitial, LengthMismatch) {
  auto b0 = bits(1, 3), b1 = bits(1, 4);
  EXPECT_THROW(comparison_initial(ScalarModule{}, std::span<const Scalar>(b0), std::span<const Scalar>(b1),
                                  identity_randomness(3)),
               ParameterError);
  auto b2 = bits(1, 3);
  EXPECT_THROW(comparison_initial(ScalarModule{}, std::span<const Scalar>(b0), std::span<const Scalar>(b2),
                                  identity_randomness(4)),
               ParameterError);
}

TEST(ComparisonFinal, Examples) {
  std::vector<Scalar> nz{Scalar::from_u64(1), Scalar::from_u64(2)};
  std::vector<Scalar> z{Scalar::from_u64(1), Scalar()};
  EXPECT_EQ(comparison_final(nz, z), std::make_pair(false, true));
  EXPECT_EQ(comparison_final(z, z), std::make_pair(true, true));
  EXPECT_EQ(comparison_final(nz, nz), std::make_pair(false, false));
}

TEST(ComparisonPipeline, ExhaustiveSmallWidths) {
  uint64_t counter = 0;
  for (unsigned n = 2; n <= 6; ++n) {
    for (uint64_t v0 = 0; v0 < (1u << n); ++v0) {
      for (uint64_t v1 = 0; v1 < (1u << n); ++v1) {
        auto r = derive_randomness(seed_of(++counter), n);
        ASSERT_EQ(compare_plain(v0, v1, n, r), std::make_pair(v0 <= v1, v1 <= v0)) << n << " " << v0 << " " << v1;
      }
    }
  }
}

TEST(ComparisonPipeline, ShareRunsReconstructPlainRun) {
  ChaChaStream rng(seed_of(99));
  const unsigned n = 31;
  for (int t = 0; t < 100; ++t) {
    uint64_t v0 = rng.next_u32() >> 1, v1 = rng.next_u32() >> 1;
    auto r = derive_randomness(rng.next_seed(), n);
    auto b0 = bits(v0, n), b1 = bits(v1, n);
    std::vector<Scalar> s00, s01, s10, s11;
    for (unsigned j = 0; j < n; ++j) {
      s00.push_back(Scalar::random(rng));
      s01.push_back(b0[j] - s00[j]);
      s10.push_back(Scalar::random(rng));
      s11.push_back(b1[j] - s10[j]);
    }
    auto p0 = comparison_initial(ScalarModule{true}, std::span<const Scalar>(s00), std::span<const Scalar>(s10), r);
    auto p1 = comparison_initial(ScalarModule{false}, std::span<const Scalar>(s01), std::span<const Scalar>(s11), r);
    auto plain = run_plain(v0, v1, n, r);
    for (unsigned j = 0; j <= n; ++j) {
      ASSERT_EQ(p0.d0[j] + p1.d0[j], plain.d0[j]);
      ASSERT_EQ(p0.d1[j] + p1.d1[j], plain.d1[j]);
    }
  }
}

TEST(ComparisonPipeline, CommitmentRunMatchesMessageAndRandomnessRuns) {
  const auto& pp = PedersenParams::standard();
  ChaChaStream rng(seed_of(100));
  const unsigned n = 7;
  for (int t = 0; t < 10; ++t) {
    uint64_t v0 = rng.uniform_below(128), v1 = rng.uniform_below(128);
    auto r = derive_randomness(rng.next_seed(), n);
    auto m0 = bits(v0, n), m1 = bits(v1, n);
    std::vector<Scalar> r0, r1;
    std::vector<Point> c0, c1;
    for (unsigned j = 0; j < n; ++j) {
      r0.push_back(Scalar::random(rng));
      r1.push_back(Scalar::random(rng));
      c0.push_back(pp.commit(m0[j], r0[j]));
      c1.push_back(pp.commit(m1[j], r1[j]));
    }
    auto dm = comparison_initial(ScalarModule{true}, std::span<const Scalar>(m0), std::span<const Scalar>(m1), r);
    auto dr = comparison_initial(ScalarModule{false}, std::span<const Scalar>(r0), std::span<const Scalar>(r1), r);
    auto dc = comparison_initial(PointModule{true}, std::span<const Point>(c0), std::span<const Point>(c1), r);
    for (unsigned j = 0; j <= n; ++j) {
      ASSERT_EQ(dc.d0[j].bytes(), pp.commit(dm.d0[j], dr.d0[j]).bytes());
      ASSERT_EQ(dc.d1[j].bytes(), pp.commit(dm.d1[j], dr.d1[j]).bytes());
    }
  }
}

TEST(ComparisonPipeline, CiphertextRunZeroTests) {
  ChaChaStream rng(seed_of(101));
  auto kp = ElGamalKeypair::generate(rng);
  const unsigned n = 4;
  for (uint64_t v0 = 0; v0 < 16; v0 += 3) {
    for (uint64_t v1 = 0; v1 < 16; v1 += 5) {
      auto r = derive_randomness(rng.next_seed(), n);
      std::vector<Ciphertext> e0, e1;
      for (auto& b : bits(v0, n)) e0.push_back(elgamal_encrypt(kp.pk, b, Scalar::random(rng)));
      for (auto& b : bits(v1, n)) e1.push_back(elgamal_trivial(kp.pk, b));
      auto d = comparison_initial(CiphertextModule{kp.pk}, std::span<const Ciphertext>(e0),
                                  std::span<const Ciphertext>(e1), r);
      bool b0 = false, b1 = false;
      for (auto& c : d.d0) b0 |= elgamal_is_zero(kp.sk, c);
      for (auto& c : d.d1) b1 |= elgamal_is_zero(kp.sk, c);
      EXPECT_EQ(b0, v0 <= v1);
      EXPECT_EQ(b1, v1 <= v0);
    }
  }
}

TEST(DeriveRandomness, DeterministicBijectiveNonzero) {
  auto a = derive_randomness(seed_of(1), 31), b = derive_randomness(seed_of(1), 31);
  EXPECT_EQ(a.perm, b.perm);
  EXPECT_EQ(a.s0, b.s0);
  EXPECT_EQ(a.s1, b.s1);
  std::set<uint32_t> seen(a.perm.begin(), a.perm.end());
  EXPECT_EQ(seen.size(), 32u);
  EXPECT_EQ(*seen.rbegin(), 31u);
}

TEST(DeriveRandomness, OneBitSeedChangeGivesDifferentPermutation) {
  ChaChaStream rng(seed_of(2));
  int collisions = 0;
  for (int t = 0; t < 1000; ++t) {
    Seed s = rng.next_seed();
    Seed s2 = s;
    s2[rng.uniform_below(32)] ^= static_cast<uint8_t>(1u << rng.uniform_below(8));
    collisions += derive_randomness(s, 31).perm == derive_randomness(s2, 31).perm;
  }
  EXPECT_EQ(collisions, 0);
}

TEST(DeriveRandomness, MillionScalarsNoneZero) {
  size_t drawn = 0, zeros = 0;
  for (uint64_t t = 0; drawn < 1000000; ++t) {
    auto r = derive_randomness(seed_of(1000 + t), 250);
    for (auto& s : r.s0) zeros += s.is_zero();
    for (auto& s : r.s1) zeros += s.is_zero();
    drawn += r.s0.size() + r.s1.size();
  }
  EXPECT_EQ(zeros, 0u);
}
