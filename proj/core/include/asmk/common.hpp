#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace asmk {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A precondition on an argument was violated (dimension mismatch, bad count...).
class InvalidArgument : public Error {
public:
    using Error::Error;
};

/// Filesystem failure (missing file, unwritable directory).
class IoError : public Error {
public:
    using Error::Error;
};

/// Dense row-major matrix; rows are exposed as spans.
template <class T>
class RowMatrix {
public:
    RowMatrix() = default;
    RowMatrix(std::size_t rows, std::size_t cols)
        : rows_(rows), cols_(cols), data_(rows * cols) {}
    RowMatrix(std::size_t rows, std::size_t cols, std::vector<T> data)
        : rows_(rows), cols_(cols), data_(std::move(data))
    {
        if (data_.size() != rows_ * cols_) {
            throw InvalidArgument("matrix data length does not match shape");
        }
    }

    std::size_t rows() const noexcept { return rows_; }
    std::size_t cols() const noexcept { return cols_; }
    bool empty() const noexcept { return rows_ == 0; }

    std::span<T> row(std::size_t i) noexcept { return {data_.data() + i * cols_, cols_}; }
    std::span<const T> row(std::size_t i) const noexcept
    {
        return {data_.data() + i * cols_, cols_};
    }

    T& operator()(std::size_t i, std::size_t j) noexcept { return data_[i * cols_ + j]; }
    const T& operator()(std::size_t i, std::size_t j) const noexcept
    {
        return data_[i * cols_ + j];
    }

    void append_row(std::span<const T> values)
    {
        if (rows_ == 0 && cols_ == 0) cols_ = values.size();
        if (values.size() != cols_) throw InvalidArgument("row length mismatch");
        data_.insert(data_.end(), values.begin(), values.end());
        ++rows_;
    }

    std::vector<T>& data() noexcept { return data_; }
    const std::vector<T>& data() const noexcept { return data_; }

    friend bool operator==(const RowMatrix&, const RowMatrix&) = default;

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<T> data_;
};

using MatrixF = RowMatrix<float>;
using MatrixD = RowMatrix<double>;

/// Caps the number of worker threads used by parallel loops (0 = hardware concurrency).
void set_max_threads(unsigned n);
unsigned max_threads();

/// Runs body(begin, end) over contiguous chunks of [0, n). Chunk boundaries depend
/// only on n and the thread cap, and each index is visited exactly once.
void parallel_for(std::size_t n, const std::function<void(std::size_t, std::size_t)>& body);

enum class LogLevel { error = 0, warn = 1, info = 2, debug = 3 };

/// Level is read once from the MK_LOG environment variable (error|warn|info|debug).
LogLevel log_level();
void log(LogLevel level, const std::string& message);

}  // namespace asmk
