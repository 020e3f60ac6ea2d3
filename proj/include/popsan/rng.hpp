#pragma once

#include <cstdint>
#include <random>
#include <sstream>
#include <string>

namespace popsan {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Derive an independent stream seed from a master seed and a stream tag.
inline std::uint64_t derive_seed(std::uint64_t master, std::uint64_t stream) {
  return splitmix64(master ^ splitmix64(stream + 0x51ed2701a4398b1dULL));
}

// Distribution objects are constructed per call so no hidden state survives
// between samples; an engine's raw state is then the only thing a checkpoint
// has to carry.
inline double uniform_sample(std::mt19937_64& g, double lo, double hi) {
  std::uniform_real_distribution<double> d(lo, hi);
  return d(g);
}

inline double normal_sample(std::mt19937_64& g, double mean, double stddev) {
  std::normal_distribution<double> d(mean, stddev);
  return d(g);
}

inline std::string rng_to_string(const std::mt19937_64& g) {
  std::ostringstream os;
  os << g;
  return os.str();
}

inline std::mt19937_64 rng_from_string(const std::string& s) {
  std::istringstream is(s);
  std::mt19937_64 g;
  is >> g;
  return g;
}

}  // namespace popsan
