// Dense row-major matrices of 64-bit floats plus the forward math used
// everywhere else: products, activations, losses.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <initializer_list>
#include <limits>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace ussl {

// Probabilities are clamped into [kProbEps, 1 - kProbEps] before any log.
inline constexpr double kProbEps = 1e-7;

struct Matrix {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> data;  // row-major, length rows*cols

    Matrix() = default;
    Matrix(std::size_t r, std::size_t c, double fill = 0.0)
        : rows(r), cols(c), data(r * c, fill) {}

    static Matrix from_rows(std::initializer_list<std::initializer_list<double>> rws) {
        Matrix m;
        m.rows = rws.size();
        m.cols = m.rows ? rws.begin()->size() : 0;
        m.data.reserve(m.rows * m.cols);
        for (const auto& r : rws) {
            if (r.size() != m.cols)
                throw std::invalid_argument("from_rows: ragged rows");
            m.data.insert(m.data.end(), r.begin(), r.end());
        }
        return m;
    }

    static Matrix identity(std::size_t n) {
        Matrix m(n, n);
        for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
        return m;
    }

    static Matrix row_vector(const std::vector<double>& v) {
        Matrix m(1, v.size());
        m.data = v;
        return m;
    }

    static Matrix column_vector(const std::vector<double>& v) {
        Matrix m(v.size(), 1);
        m.data = v;
        return m;
    }

    double& operator()(std::size_t r, std::size_t c) { return data[r * cols + c]; }
    double operator()(std::size_t r, std::size_t c) const { return data[r * cols + c]; }

    bool same_shape(const Matrix& o) const { return rows == o.rows && cols == o.cols; }

    bool all_finite() const {
        return std::all_of(data.begin(), data.end(),
                           [](double v) { return std::isfinite(v); });
    }

    std::string shape_str() const {
        std::ostringstream os;
        os << rows << "x" << cols;
        return os.str();
    }

    Matrix row(std::size_t r) const {
        Matrix m(1, cols);
        std::copy(data.begin() + r * cols, data.begin() + (r + 1) * cols, m.data.begin());
        return m;
    }

    bool operator==(const Matrix& o) const {
        return rows == o.rows && cols == o.cols && data == o.data;
    }
};

[[noreturn]] inline void shape_error(const std::string& op, const Matrix& a, const Matrix& b) {
    throw std::invalid_argument(op + ": incompatible shapes " + a.shape_str() + " and " +
                                b.shape_str());
}

inline double clamp_prob(double p) {
    return std::min(1.0 - kProbEps, std::max(kProbEps, p));
}

// ---- products ----

inline Matrix matmul(const Matrix& a, const Matrix& b) {
    if (a.cols != b.rows) shape_error("matmul", a, b);
    Matrix out(a.rows, b.cols);
    for (std::size_t i = 0; i < a.rows; ++i)
        for (std::size_t j = 0; j < b.cols; ++j) {
            double acc = 0.0;
            for (std::size_t k = 0; k < a.cols; ++k) acc += a(i, k) * b(k, j);
            out(i, j) = acc;
        }
    return out;
}

inline Matrix transpose(const Matrix& a) {
    Matrix out(a.cols, a.rows);
    for (std::size_t i = 0; i < a.rows; ++i)
        for (std::size_t j = 0; j < a.cols; ++j) out(j, i) = a(i, j);
    return out;
}

// x*w with the row vector b added to every row.
inline Matrix affine(const Matrix& x, const Matrix& w, const Matrix& b) {
    if (x.cols != w.rows) shape_error("affine", x, w);
    if (b.rows != 1 || b.cols != w.cols) shape_error("affine bias", b, w);
    Matrix out = matmul(x, w);
    for (std::size_t i = 0; i < out.rows; ++i)
        for (std::size_t j = 0; j < out.cols; ++j) out(i, j) += b(0, j);
    return out;
}

// ---- elementwise ----

inline Matrix add(const Matrix& a, const Matrix& b) {
    if (!a.same_shape(b)) shape_error("add", a, b);
    Matrix out = a;
    for (std::size_t i = 0; i < out.data.size(); ++i) out.data[i] += b.data[i];
    return out;
}

inline Matrix sub(const Matrix& a, const Matrix& b) {
    if (!a.same_shape(b)) shape_error("sub", a, b);
    Matrix out = a;
    for (std::size_t i = 0; i < out.data.size(); ++i) out.data[i] -= b.data[i];
    return out;
}

inline Matrix hadamard(const Matrix& a, const Matrix& b) {
    if (!a.same_shape(b)) shape_error("hadamard", a, b);
    Matrix out = a;
    for (std::size_t i = 0; i < out.data.size(); ++i) out.data[i] *= b.data[i];
    return out;
}

inline Matrix scale(const Matrix& a, double c) {
    Matrix out = a;
    for (double& v : out.data) v *= c;
    return out;
}

inline Matrix relu(const Matrix& x) {
    Matrix out = x;
    for (double& v : out.data) v = std::max(0.0, v);
    return out;
}

inline Matrix sigmoid(const Matrix& x) {
    Matrix out = x;
    for (double& v : out.data) v = 1.0 / (1.0 + std::exp(-v));
    return out;
}

// Per-row exp-normalization with max subtraction; each row sums to 1.
inline Matrix softmax_rows(const Matrix& x) {
    Matrix out(x.rows, x.cols);
    for (std::size_t i = 0; i < x.rows; ++i) {
        double mx = -std::numeric_limits<double>::infinity();
        for (std::size_t j = 0; j < x.cols; ++j) mx = std::max(mx, x(i, j));
        double z = 0.0;
        for (std::size_t j = 0; j < x.cols; ++j) {
            out(i, j) = std::exp(x(i, j) - mx);
            z += out(i, j);
        }
        for (std::size_t j = 0; j < x.cols; ++j) out(i, j) /= z;
    }
    return out;
}

// ---- losses (forward only; the differentiable versions live on the tape) ----

inline double cross_entropy(const Matrix& probs, const Matrix& targets) {
    if (!probs.same_shape(targets)) shape_error("cross_entropy", probs, targets);
    double acc = 0.0;
    for (std::size_t i = 0; i < probs.data.size(); ++i)
        if (targets.data[i] != 0.0) acc -= targets.data[i] * std::log(clamp_prob(probs.data[i]));
    return probs.rows ? acc / static_cast<double>(probs.rows) : 0.0;
}

// Mean over samples (rows) of the squared L2 distance per row.
inline double mse(const Matrix& a, const Matrix& b) {
    if (!a.same_shape(b)) shape_error("mse", a, b);
    double acc = 0.0;
    for (std::size_t i = 0; i < a.data.size(); ++i) {
        const double d = a.data[i] - b.data[i];
        acc += d * d;
    }
    return a.rows ? acc / static_cast<double>(a.rows) : 0.0;
}

// -mean(w_i * [y_i log yhat_i + (1-y_i) log(1-yhat_i)]) over column vectors.
inline double bce(const Matrix& yhat, const Matrix& y, const Matrix& w) {
    if (!yhat.same_shape(y)) shape_error("bce targets", yhat, y);
    if (!yhat.same_shape(w)) shape_error("bce weights", yhat, w);
    double acc = 0.0;
    for (std::size_t i = 0; i < yhat.data.size(); ++i) {
        const double p = clamp_prob(yhat.data[i]);
        acc -= w.data[i] * (y.data[i] * std::log(p) + (1.0 - y.data[i]) * std::log(1.0 - p));
    }
    const std::size_t n = yhat.data.size();
    return n ? acc / static_cast<double>(n) : 0.0;
}

}  // namespace ussl
