// Copyright (c) 2026 helmdec contributors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <Eigen/Dense>
#include <Eigen/SparseCore>

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace helmdec {

using Vec3 = Eigen::Vector3d;
using Vec = Eigen::VectorXd;
using SpMat = Eigen::SparseMatrix<double>;
using Mask = std::vector<char>;

// Invalid input to a constructor (wrong geometry, nonzero data on Gamma, ...).
class PreconditionError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// FNV-1a, used for cache keys and provenance hashes.
inline std::uint64_t fnv1a(const void* data, std::size_t n,
                           std::uint64_t h = 1469598103934665603ull) {
  const auto* p = static_cast<const unsigned char*>(data);
  for (std::size_t i = 0; i < n; ++i) {
    h ^= p[i];
    h *= 1099511628211ull;
  }
  return h;
}

inline std::uint64_t hash_mask(const Mask& m, std::uint64_t seed = 1469598103934665603ull) {
  return fnv1a(m.data(), m.size(), seed);
}

inline std::size_t count(const Mask& m) {
  std::size_t c = 0;
  for (char x : m) c += x ? 1 : 0;
  return c;
}

inline Mask mask_or(const Mask& a, const Mask& b) {
  Mask r(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) r[i] = a[i] || b[i];
  return r;
}

}  // namespace helmdec
