// Copyright Contributors to the hdrsplat Project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace hdrsplat {

struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// A raw quaternion with (near-)zero norm cannot be normalized into a rotation.
struct DegenerateRotation : Error {
    using Error::Error;
};

struct NonFiniteParameter : Error {
    using Error::Error;
};

// Temporal variance too small to condition on.
struct DegenerateTemporalVariance : Error {
    using Error::Error;
};

struct ContractViolation : Error {
    using Error::Error;
};

struct InvalidExposure : Error {
    using Error::Error;
};

struct EmptyScene : Error {
    using Error::Error;
};

// Radiance bank queried before all window entries were initialized.
struct ColdBank : Error {
    using Error::Error;
};

struct ManifestError : Error {
    using Error::Error;
};

struct IoError : Error {
    using Error::Error;
};

// FNV-1a, used for config and dataset fingerprints.
inline std::uint64_t fnv1a(const void* data, std::size_t n, std::uint64_t h = 14695981039346656037ull) {
    const auto* p = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < n; ++i) {
        h ^= p[i];
        h *= 1099511628211ull;
    }
    return h;
}

inline std::uint64_t fnv1a(const std::string& s) {
    return fnv1a(s.data(), s.size());
}

} // namespace hdrsplat
