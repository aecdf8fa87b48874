#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace arbr {

// ---------------------------------------------------------------------------
// Errors
// ---------------------------------------------------------------------------

enum class ErrorKind {
    Usage,                // bad command line
    Config,               // invalid configuration value
    Schema,               // input file structure wrong (missing column, bad field)
    Validation,           // a record violates its invariants
    Ordering,             // timestamps out of order
    InsufficientHistory,  // not enough lookback for an indicator/window
    InsufficientData,     // not enough records for an operation
    Degenerate,           // zero denominator / zero variance
    Dimension,            // matrix/vector width mismatch
    Domain,               // value outside the mathematical domain
    Contract,             // caller violated a structural precondition
    Io,                   // file system failure
    Numeric,              // divergence or non-convergence
};

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& msg)
        : std::runtime_error(msg), kind_(kind) {}

    ErrorKind kind() const noexcept { return kind_; }

    // Process exit code contract: 1 usage/config, 2 data, 3 numeric.
    int exit_code() const noexcept {
        switch (kind_) {
            case ErrorKind::Usage:
            case ErrorKind::Config: return 1;
            case ErrorKind::Numeric: return 3;
            default: return 2;
        }
    }

private:
    ErrorKind kind_;
};

// ---------------------------------------------------------------------------
// Deterministic RNG
//
// mt19937_64 plus hand-rolled draw algorithms; std::uniform_*_distribution is
// implementation-defined, which would break reproducibility across standard
// libraries.
// ---------------------------------------------------------------------------

class Rng {
public:
    explicit Rng(std::uint64_t seed = 0) : eng_(seed) {}

    std::uint64_t next() { return eng_(); }

    // [0, 1)
    double uniform() { return static_cast<double>(eng_() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // [0, n); rejection sampling, unbiased
    std::uint64_t uniform_int(std::uint64_t n) {
        if (n == 0) throw Error(ErrorKind::Contract, "uniform_int: n must be positive");
        const std::uint64_t rem = std::numeric_limits<std::uint64_t>::max() % n;
        const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() - rem;
        std::uint64_t x;
        do { x = eng_(); } while (x > limit);
        return x % n;
    }

    // Box-Muller, cached second value
    double normal() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        double u1 = 0.0;
        while (u1 <= 0.0) u1 = uniform();
        const double u2 = uniform();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double theta = 6.283185307179586476925286766559 * u2;
        spare_ = r * std::sin(theta);
        has_spare_ = true;
        return r * std::cos(theta);
    }

    std::string serialize() const {
        std::ostringstream os;
        os << eng_;
        if (has_spare_) os << " 1 " << spare_; else os << " 0";
        return os.str();
    }

    static Rng deserialize(const std::string& s) {
        Rng r;
        std::istringstream is(s);
        is >> r.eng_;
        int flag = 0;
        is >> flag;
        if (flag) { r.has_spare_ = true; is >> r.spare_; }
        if (is.fail()) throw Error(ErrorKind::Schema, "invalid rng state string");
        return r;
    }

private:
    std::mt19937_64 eng_;
    bool has_spare_ = false;
    double spare_ = 0.0;
};

// ---------------------------------------------------------------------------
// Dense row-major matrix
// ---------------------------------------------------------------------------

struct Matrix {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> v;

    Matrix() = default;
    Matrix(std::size_t r, std::size_t c, double fill = 0.0) : rows(r), cols(c), v(r * c, fill) {}

    double& operator()(std::size_t i, std::size_t j) { return v[i * cols + j]; }
    double operator()(std::size_t i, std::size_t j) const { return v[i * cols + j]; }

    const double* row_ptr(std::size_t i) const { return v.data() + i * cols; }
    double* row_ptr(std::size_t i) { return v.data() + i * cols; }

    bool same_shape(const Matrix& o) const { return rows == o.rows && cols == o.cols; }
};

// ---------------------------------------------------------------------------
// Hashing (FNV-1a 64) — config hashes and data fingerprints
// ---------------------------------------------------------------------------

inline std::uint64_t fnv1a64(const void* data, std::size_t n, std::uint64_t h = 0xcbf29ce484222325ull) {
    const auto* p = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < n; ++i) {
        h ^= p[i];
        h *= 0x100000001b3ull;
    }
    return h;
}

inline std::uint64_t fnv1a64(const std::string& s) { return fnv1a64(s.data(), s.size()); }

inline std::uint64_t fnv1a64(const std::vector<double>& xs) {
    return fnv1a64(xs.data(), xs.size() * sizeof(double));
}

// Population mean / standard deviation — the convention used throughout.
inline double mean_of(const std::vector<double>& xs) {
    double s = 0.0;
    for (double x : xs) s += x;
    return xs.empty() ? 0.0 : s / static_cast<double>(xs.size());
}

inline double pop_std(const std::vector<double>& xs, double mu) {
    double s = 0.0;
    for (double x : xs) s += (x - mu) * (x - mu);
    return xs.empty() ? 0.0 : std::sqrt(s / static_cast<double>(xs.size()));
}

}  // namespace arbr
