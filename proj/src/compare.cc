#include "primematch/compare.h"

#include <algorithm>
#include <numeric>

namespace primematch {

namespace {

Scalar draw_nonzero(ChaChaStream& stream) {
  while (true) {
    std::array<uint8_t, 64> wide{};
    stream.fill(wide);
    Scalar s = Scalar::from_wide(wide);
    if (!s.is_zero()) return s;
  }
}

}  // namespace

ComparisonRandomness derive_randomness(const Seed& seed, unsigned n) {
  ChaChaStream stream(seed);
  ComparisonRandomness r;
  r.perm.resize(n + 1);
  std::iota(r.perm.begin(), r.perm.end(), 0u);
  for (uint32_t i = n; i >= 1; --i) std::swap(r.perm[i], r.perm[stream.uniform_below(i + 1)]);
  r.s0.reserve(n + 1);
  r.s1.reserve(n + 1);
  for (unsigned j = 0; j <= n; ++j) r.s0.push_back(draw_nonzero(stream));
  for (unsigned j = 0; j <= n; ++j) r.s1.push_back(draw_nonzero(stream));
  return r;
}

std::pair<bool, bool> comparison_final(std::span<const Scalar> d0, std::span<const Scalar> d1) {
  auto has_zero = [](std::span<const Scalar> d) {
    return std::any_of(d.begin(), d.end(), [](const Scalar& s) { return s.is_zero(); });
  };
  return {has_zero(d0), has_zero(d1)};
}

std::vector<Scalar> bits_as_scalars(std::span<const uint8_t> bits) {
  std::vector<Scalar> out;
  out.reserve(bits.size());
  for (uint8_t b : bits) out.push_back(Scalar::from_u64(b));
  return out;
}

std::pair<bool, bool> compare_plain(uint64_t v0, uint64_t v1, unsigned n, const ComparisonRandomness& rand) {
  auto b0 = bits_as_scalars(bit_decompose(v0, n));
  auto b1 = bits_as_scalars(bit_decompose(v1, n));
  auto out = comparison_initial(ScalarModule{}, std::span<const Scalar>(b0), std::span<const Scalar>(b1), rand);
  return comparison_final(out.d0, out.d1);
}

}  // namespace primematch
