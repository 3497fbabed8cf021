#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <stdexcept>
#include <string>

namespace melodit {

using Mat = Eigen::MatrixXd;
using Vec = Eigen::VectorXd;

// Error taxonomy mapped to CLI exit codes: usage=2, data=3, numeric=4.
struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct DataError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct NumericError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

inline uint64_t fnv1a64(const void* data, size_t n, uint64_t h = 0xcbf29ce484222325ull) {
    const unsigned char* p = static_cast<const unsigned char*>(data);
    for (size_t i = 0; i < n; i++) {
        h ^= p[i];
        h *= 0x100000001b3ull;
    }
    return h;
}

inline uint64_t fnv1a64(const std::string& s) {
    return fnv1a64(s.data(), s.size());
}

inline uint64_t hash_mat(const Mat& m, uint64_t h = 0xcbf29ce484222325ull) {
    return fnv1a64(m.data(), sizeof(double) * m.size(), h);
}

std::string to_hex(uint64_t v);

inline double midi_to_hz(double midi) {
    return 440.0 * std::pow(2.0, (midi - 69.0) / 12.0);
}

}  // namespace melodit
