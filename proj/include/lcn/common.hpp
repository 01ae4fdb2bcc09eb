// Shared numeric primitives: dense matrix, deterministic RNG, error types.
#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace lcn {

// Row-major dense matrix of doubles. Deliberately minimal; the heavy math in
// this project is row-by-row, so rows are exposed as spans.
class Matrix {
public:
    Matrix() = default;
    Matrix(int rows, int cols, double fill = 0.0)
        : rows_(rows), cols_(cols), data_(static_cast<size_t>(rows) * cols, fill) {}

    int rows() const { return rows_; }
    int cols() const { return cols_; }
    bool empty() const { return data_.empty(); }

    double* row(int r) { return data_.data() + static_cast<size_t>(r) * cols_; }
    const double* row(int r) const { return data_.data() + static_cast<size_t>(r) * cols_; }
    std::span<double> row_span(int r) { return {row(r), static_cast<size_t>(cols_)}; }
    std::span<const double> row_span(int r) const { return {row(r), static_cast<size_t>(cols_)}; }

    double& at(int r, int c) { return data_[static_cast<size_t>(r) * cols_ + c]; }
    double at(int r, int c) const { return data_[static_cast<size_t>(r) * cols_ + c]; }

    std::vector<double>& data() { return data_; }
    const std::vector<double>& data() const { return data_; }

    bool operator==(const Matrix&) const = default;

private:
    int rows_ = 0;
    int cols_ = 0;
    std::vector<double> data_;
};

// Deterministic RNG. All draws go through hand-rolled conversions because the
// std distributions are implementation-defined and would break byte-identical
// reruns across standard libraries.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    std::uint64_t next_u64() { return engine_(); }

    // Uniform in [0, 1) with 53 random bits.
    double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // Unbiased integer in [0, n).
    std::uint64_t below(std::uint64_t n) {
        const std::uint64_t threshold = (0 - n) % n;  // 2^64 mod n
        for (;;) {
            std::uint64_t r = engine_();
            if (r >= threshold) return r % n;
        }
    }

    bool bernoulli(double p) { return uniform() < p; }

    template <class T>
    void shuffle(std::vector<T>& v) {
        for (size_t i = v.size(); i > 1; --i) {
            size_t j = static_cast<size_t>(below(i));
            std::swap(v[i - 1], v[j]);
        }
    }

private:
    std::mt19937_64 engine_;
};

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Malformed or inconsistent input data (CSV, model files, flag/file mismatch).
class DataError : public Error {
public:
    using Error::Error;
};

// Training produced a non-finite loss; carries the location for reproduction.
class DivergenceError : public Error {
public:
    DivergenceError(const std::string& what, int epoch, long batch)
        : Error(what), epoch(epoch), batch(batch) {}
    int epoch = 0;
    long batch = 0;
};

// A metric whose mathematical definition does not apply to the given input
// (e.g. AUC of a single-class label). Distinct from numeric errors.
class UndefinedMetric : public Error {
public:
    using Error::Error;
};

inline void check_finite(std::span<const double> xs, const char* what) {
    for (double x : xs) {
        if (!std::isfinite(x)) throw Error(std::string(what) + ": non-finite value");
    }
}

}  // namespace lcn
