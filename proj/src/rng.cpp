#include "threshtest/rng.hpp"

#include <array>
#include <thread>

#include <boost/random/bernoulli_distribution.hpp>
#include <boost/random/normal_distribution.hpp>
#include <boost/random/poisson_distribution.hpp>
#include <openssl/sha.h>

namespace threshtest {

namespace {

std::array<unsigned char, SHA256_DIGEST_LENGTH> sha256(std::string_view text) {
  std::array<unsigned char, SHA256_DIGEST_LENGTH> out{};
  SHA256(reinterpret_cast<const unsigned char*>(text.data()), text.size(), out.data());
  return out;
}

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

}  // namespace

Engine substream(std::uint64_t seed, std::uint64_t stream, std::uint64_t index) {
  auto lo = [](std::uint64_t v) { return static_cast<std::uint32_t>(v & 0xffffffffu); };
  auto hi = [](std::uint64_t v) { return static_cast<std::uint32_t>(v >> 32); };
  std::seed_seq seq{lo(seed), hi(seed), lo(stream), hi(stream), lo(index), hi(index)};
  return Engine(seq);
}

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t label) {
  return splitmix64(splitmix64(seed) ^ splitmix64(label + 0x632be59bd9b4e019ULL));
}

std::uint64_t stable_hash(std::string_view text) {
  const auto d = sha256(text);
  std::uint64_t v = 0;
  for (int i = 7; i >= 0; --i) v = (v << 8) | d[static_cast<std::size_t>(i)];
  return v;
}

std::string sha256_hex(std::string_view text) {
  static constexpr char digits[] = "0123456789abcdef";
  const auto d = sha256(text);
  std::string out;
  out.reserve(2 * d.size());
  for (unsigned char b : d) {
    out.push_back(digits[b >> 4]);
    out.push_back(digits[b & 0xf]);
  }
  return out;
}

double draw_normal(Engine& eng) {
  boost::random::normal_distribution<double> dist(0.0, 1.0);
  return dist(eng);
}

double draw_bernoulli(Engine& eng, double p) {
  boost::random::bernoulli_distribution<double> dist(p);
  return dist(eng) ? 1.0 : 0.0;
}

double draw_poisson(Engine& eng, double mean) {
  if (mean <= 0.0) return 0.0;
  boost::random::poisson_distribution<long, double> dist(mean);
  return static_cast<double>(dist(eng));
}

unsigned resolve_threads(int requested) {
  if (requested > 0) return static_cast<unsigned>(requested);
  const unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1u : hw;
}

}  // namespace threshtest
