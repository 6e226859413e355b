#pragma once

// Small dense matrices over exact or floating scalars. Row-major, row-vector
// convention: a lattice is the set of k*B for integer row vectors k.

#include <cstddef>
#include <initializer_list>
#include <vector>

#include "sadic/integer.hpp"

namespace sadic {

template <class T>
class Matrix {
public:
    Matrix() = default;
    Matrix(std::size_t rows, std::size_t cols) : r_(rows), c_(cols), a_(rows * cols, T(0)) {}
    Matrix(std::initializer_list<std::initializer_list<T>> rows) {
        r_ = rows.size();
        c_ = r_ ? rows.begin()->size() : 0;
        for (auto& row : rows) {
            require(row.size() == c_, "ragged matrix literal");
            for (auto& x : row) a_.push_back(x);
        }
    }

    static Matrix identity(std::size_t n) {
        Matrix m(n, n);
        for (std::size_t i = 0; i < n; ++i) m(i, i) = T(1);
        return m;
    }

    std::size_t rows() const { return r_; }
    std::size_t cols() const { return c_; }
    bool square() const { return r_ == c_; }

    T& operator()(std::size_t i, std::size_t j) { return a_[i * c_ + j]; }
    const T& operator()(std::size_t i, std::size_t j) const { return a_[i * c_ + j]; }

    std::vector<T> row(std::size_t i) const {
        return std::vector<T>(a_.begin() + i * c_, a_.begin() + (i + 1) * c_);
    }
    void set_row(std::size_t i, const std::vector<T>& v) {
        for (std::size_t j = 0; j < c_; ++j) (*this)(i, j) = v[j];
    }
    void swap_rows(std::size_t i, std::size_t k) {
        for (std::size_t j = 0; j < c_; ++j) std::swap((*this)(i, j), (*this)(k, j));
    }

    Matrix transpose() const {
        Matrix t(c_, r_);
        for (std::size_t i = 0; i < r_; ++i)
            for (std::size_t j = 0; j < c_; ++j) t(j, i) = (*this)(i, j);
        return t;
    }

    friend Matrix operator*(const Matrix& x, const Matrix& y) {
        require(x.c_ == y.r_, "matrix shape mismatch");
        Matrix z(x.r_, y.c_);
        for (std::size_t i = 0; i < x.r_; ++i)
            for (std::size_t k = 0; k < x.c_; ++k) {
                if (x(i, k) == T(0)) continue;
                for (std::size_t j = 0; j < y.c_; ++j) z(i, j) += x(i, k) * y(k, j);
            }
        return z;
    }
    friend Matrix operator+(Matrix x, const Matrix& y) {
        for (std::size_t i = 0; i < x.a_.size(); ++i) x.a_[i] += y.a_[i];
        return x;
    }
    friend Matrix operator*(const T& s, Matrix x) {
        for (auto& v : x.a_) v *= s;
        return x;
    }
    friend bool operator==(const Matrix& x, const Matrix& y) {
        return x.r_ == y.r_ && x.c_ == y.c_ && x.a_ == y.a_;
    }

    bool symmetric() const {
        if (!square()) return false;
        for (std::size_t i = 0; i < r_; ++i)
            for (std::size_t j = 0; j < i; ++j)
                if ((*this)(i, j) != (*this)(j, i)) return false;
        return true;
    }

    const std::vector<T>& data() const { return a_; }
    std::vector<T>& data() { return a_; }

private:
    std::size_t r_ = 0, c_ = 0;
    std::vector<T> a_;
};

using RatMatrix = Matrix<Rat>;
using IntMatrix = Matrix<Int>;

// row vector times matrix
template <class T>
std::vector<T> vec_mul(const std::vector<T>& v, const Matrix<T>& m) {
    require(v.size() == m.rows(), "vector/matrix shape mismatch");
    std::vector<T> out(m.cols(), T(0));
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (v[i] == T(0)) continue;
        for (std::size_t j = 0; j < m.cols(); ++j) out[j] += v[i] * m(i, j);
    }
    return out;
}

// v G v^T
template <class T>
T quad_eval(const Matrix<T>& g, const std::vector<T>& v) {
    T s(0);
    const std::size_t n = v.size();
    for (std::size_t i = 0; i < n; ++i) {
        if (v[i] == T(0)) continue;
        T row(0);
        for (std::size_t j = 0; j < n; ++j) row += g(i, j) * v[j];
        s += v[i] * row;
    }
    return s;
}

// u G v^T
template <class T>
T bilinear(const Matrix<T>& g, const std::vector<T>& u, const std::vector<T>& v) {
    T s(0);
    for (std::size_t i = 0; i < u.size(); ++i)
        for (std::size_t j = 0; j < v.size(); ++j) s += u[i] * g(i, j) * v[j];
    return s;
}

inline Rat det(RatMatrix m) {
    require(m.square(), "determinant of non-square matrix");
    const std::size_t n = m.rows();
    Rat d = 1;
    for (std::size_t c = 0; c < n; ++c) {
        std::size_t piv = c;
        while (piv < n && m(piv, c) == 0) ++piv;
        if (piv == n) return 0;
        if (piv != c) {
            m.swap_rows(piv, c);
            d = -d;
        }
        d *= m(c, c);
        for (std::size_t r = c + 1; r < n; ++r) {
            if (m(r, c) == 0) continue;
            Rat f = m(r, c) / m(c, c);
            for (std::size_t j = c; j < n; ++j) m(r, j) -= f * m(c, j);
        }
    }
    return d;
}

inline Int det(const IntMatrix& m) {
    RatMatrix r(m.rows(), m.cols());
    for (std::size_t i = 0; i < m.rows(); ++i)
        for (std::size_t j = 0; j < m.cols(); ++j) r(i, j) = m(i, j);
    Rat d = det(r);
    return d.get_num();
}

inline RatMatrix inverse(const RatMatrix& m) {
    require(m.square(), "inverse of non-square matrix");
    const std::size_t n = m.rows();
    RatMatrix a = m, inv = RatMatrix::identity(n);
    for (std::size_t c = 0; c < n; ++c) {
        std::size_t piv = c;
        while (piv < n && a(piv, c) == 0) ++piv;
        require(piv < n, "singular matrix");
        a.swap_rows(piv, c);
        inv.swap_rows(piv, c);
        Rat s = 1 / a(c, c);
        for (std::size_t j = 0; j < n; ++j) {
            a(c, j) *= s;
            inv(c, j) *= s;
        }
        for (std::size_t r = 0; r < n; ++r) {
            if (r == c || a(r, c) == 0) continue;
            Rat f = a(r, c);
            for (std::size_t j = 0; j < n; ++j) {
                a(r, j) -= f * a(c, j);
                inv(r, j) -= f * inv(c, j);
            }
        }
    }
    return inv;
}

inline RatMatrix to_rat(const IntMatrix& m) {
    RatMatrix r(m.rows(), m.cols());
    for (std::size_t i = 0; i < m.rows(); ++i)
        for (std::size_t j = 0; j < m.cols(); ++j) r(i, j) = m(i, j);
    return r;
}

inline Matrix<double> to_double(const RatMatrix& m) {
    Matrix<double> r(m.rows(), m.cols());
    for (std::size_t i = 0; i < m.rows(); ++i)
        for (std::size_t j = 0; j < m.cols(); ++j) r(i, j) = m(i, j).get_d();
    return r;
}

}  // namespace sadic
