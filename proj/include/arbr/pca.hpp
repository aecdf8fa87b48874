#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <span>
#include <vector>

#include "arbr/core.hpp"
#include "arbr/indicators.hpp"
#include "arbr/io.hpp"

namespace arbr::pca {

// Population covariance of mean-centered columns; rows are samples.
inline Matrix covariance(const Matrix& rows) {
    if (rows.rows < 2) throw Error(ErrorKind::InsufficientData, "covariance: need >= 2 rows");
    const std::size_t n = rows.rows, d = rows.cols;
    std::vector<double> mu(d, 0.0);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < d; ++j) mu[j] += rows(i, j);
    for (std::size_t j = 0; j < d; ++j) mu[j] /= static_cast<double>(n);
    Matrix c(d, d);
    for (std::size_t a = 0; a < d; ++a) {
        for (std::size_t b = a; b < d; ++b) {
            double s = 0.0;
            for (std::size_t i = 0; i < n; ++i) s += (rows(i, a) - mu[a]) * (rows(i, b) - mu[b]);
            s /= static_cast<double>(n);
            c(a, b) = s;
            c(b, a) = s;
        }
    }
    return c;
}

struct EigResult {
    std::vector<double> values;  // descending
    Matrix vectors;              // column j is the unit eigenvector for values[j]
};

// Cyclic Jacobi rotations; converges quadratically for symmetric input.
// Stops when the off-diagonal norm falls below tol (or below the noise floor
// of the matrix scale), capped at 100 sweeps.
inline EigResult eig_symmetric(const Matrix& m, double tol = 1e-9) {
    if (m.rows != m.cols) throw Error(ErrorKind::Contract, "eig_symmetric: matrix not square");
    const std::size_t d = m.rows;
    double max_abs = 0.0;
    for (std::size_t i = 0; i < d; ++i)
        for (std::size_t j = i + 1; j < d; ++j) {
            if (std::abs(m(i, j) - m(j, i)) > 1e-10)
                throw Error(ErrorKind::Contract, "eig_symmetric: matrix not symmetric");
            max_abs = std::max(max_abs, std::abs(m(i, j)));
        }
    for (std::size_t i = 0; i < d; ++i) max_abs = std::max(max_abs, std::abs(m(i, i)));

    Matrix a = m;
    Matrix v(d, d);
    for (std::size_t i = 0; i < d; ++i) v(i, i) = 1.0;

    auto off_norm = [&]() {
        double s = 0.0;
        for (std::size_t i = 0; i < d; ++i)
            for (std::size_t j = i + 1; j < d; ++j) s += 2.0 * a(i, j) * a(i, j);
        return std::sqrt(s);
    };

    const double floor = 1e-15 * std::max(1.0, max_abs) * static_cast<double>(d);
    const double stop = std::max(tol, floor);
    const int max_sweeps = 100;
    int sweep = 0;
    while (off_norm() > stop) {
        if (++sweep > max_sweeps)
            throw Error(ErrorKind::Numeric, "eig_symmetric: no convergence after 100 sweeps");
        for (std::size_t p = 0; p < d; ++p) {
            for (std::size_t q = p + 1; q < d; ++q) {
                const double apq = a(p, q);
                if (apq == 0.0) continue;
                const double theta = (a(q, q) - a(p, p)) / (2.0 * apq);
                const double t = (theta >= 0.0 ? 1.0 : -1.0) /
                                 (std::abs(theta) + std::sqrt(theta * theta + 1.0));
                const double c = 1.0 / std::sqrt(t * t + 1.0);
                const double s = t * c;
                for (std::size_t k = 0; k < d; ++k) {
                    const double akp = a(k, p), akq = a(k, q);
                    a(k, p) = c * akp - s * akq;
                    a(k, q) = s * akp + c * akq;
                }
                for (std::size_t k = 0; k < d; ++k) {
                    const double apk = a(p, k), aqk = a(q, k);
                    a(p, k) = c * apk - s * aqk;
                    a(q, k) = s * apk + c * aqk;
                }
                for (std::size_t k = 0; k < d; ++k) {
                    const double vkp = v(k, p), vkq = v(k, q);
                    v(k, p) = c * vkp - s * vkq;
                    v(k, q) = s * vkp + c * vkq;
                }
            }
        }
    }

    std::vector<std::size_t> order(d);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t x, std::size_t y) { return a(x, x) > a(y, y); });

    EigResult r;
    r.values.reserve(d);
    r.vectors = Matrix(d, d);
    for (std::size_t j = 0; j < d; ++j) {
        r.values.push_back(a(order[j], order[j]));
        for (std::size_t i = 0; i < d; ++i) r.vectors(i, j) = v(i, order[j]);
    }
    return r;
}

struct PcaModel {
    std::vector<double> mean;    // per-column mean of the fitted rows
    Matrix components;           // k x d, rows orthonormal
    std::vector<double> eigenvalues;  // k, descending, clamped >= 0
    double total_variance = 0.0;      // sum over all d eigenvalues
    std::size_t d = 0;
    std::size_t k = 0;
};

// Top-k principal components of the row covariance. Sign convention: each
// component's largest-magnitude entry is positive, so fits are deterministic.
inline PcaModel fit_rows(const Matrix& rows, std::size_t k) {
    if (k > rows.cols) throw Error(ErrorKind::Dimension, "pca: k exceeds column count");
    if (k == 0) throw Error(ErrorKind::Config, "pca: k must be >= 1");
    const Matrix cov = covariance(rows);
    EigResult eig = eig_symmetric(cov);

    PcaModel model;
    model.d = rows.cols;
    model.k = k;
    model.mean.assign(rows.cols, 0.0);
    for (std::size_t i = 0; i < rows.rows; ++i)
        for (std::size_t j = 0; j < rows.cols; ++j) model.mean[j] += rows(i, j);
    for (std::size_t j = 0; j < rows.cols; ++j) model.mean[j] /= static_cast<double>(rows.rows);

    model.total_variance = 0.0;
    for (double& lam : eig.values) {
        if (lam < 0.0) lam = 0.0;  // numerical dust
        model.total_variance += lam;
    }
    model.eigenvalues.assign(eig.values.begin(), eig.values.begin() + static_cast<std::ptrdiff_t>(k));

    model.components = Matrix(k, model.d);
    for (std::size_t c = 0; c < k; ++c) {
        std::size_t imax = 0;
        double amax = -1.0;
        for (std::size_t i = 0; i < model.d; ++i) {
            const double av = std::abs(eig.vectors(i, c));
            if (av > amax) { amax = av; imax = i; }
        }
        const double sign = eig.vectors(imax, c) < 0.0 ? -1.0 : 1.0;
        for (std::size_t i = 0; i < model.d; ++i) model.components(c, i) = sign * eig.vectors(i, c);
    }
    return model;
}

inline PcaModel fit(const indicators::FeatureMatrix& fm, std::size_t k) {
    return fit_rows(fm.values, k);
}

inline void transform_row(const PcaModel& m, std::span<const double> row, std::span<double> out) {
    if (row.size() != m.d) throw Error(ErrorKind::Dimension, "pca transform: row width mismatch");
    for (std::size_t c = 0; c < m.k; ++c) {
        double s = 0.0;
        for (std::size_t j = 0; j < m.d; ++j) s += m.components(c, j) * (row[j] - m.mean[j]);
        out[c] = s;
    }
}

inline Matrix transform(const PcaModel& m, const Matrix& rows) {
    if (rows.cols != m.d) throw Error(ErrorKind::Dimension, "pca transform: width mismatch");
    Matrix out(rows.rows, m.k);
    for (std::size_t i = 0; i < rows.rows; ++i)
        transform_row(m, std::span<const double>(rows.row_ptr(i), rows.cols),
                      std::span<double>(out.row_ptr(i), m.k));
    return out;
}

// lambda_i / sum over all d eigenvalues
inline std::vector<double> explained_variance_ratio(const PcaModel& m) {
    if (!(m.total_variance > 0.0))
        throw Error(ErrorKind::Degenerate, "explained_variance_ratio: zero total variance");
    std::vector<double> out;
    out.reserve(m.k);
    for (double lam : m.eigenvalues) out.push_back(lam / m.total_variance);
    return out;
}

inline JVal to_json(const PcaModel& m) {
    JVal o = JVal::obj();
    o.set("version", JVal::integer(1));
    o.set("d", JVal::uinteger(m.d));
    o.set("k", JVal::uinteger(m.k));
    o.set("mean", JVal::num_array(m.mean));
    JVal comps = JVal::arr();
    for (std::size_t c = 0; c < m.k; ++c) {
        std::vector<double> row(m.components.row_ptr(c), m.components.row_ptr(c) + m.d);
        comps.push(JVal::num_array(row));
    }
    o.set("components", std::move(comps));
    o.set("eigenvalues", JVal::num_array(m.eigenvalues));
    o.set("total_variance", JVal::num(m.total_variance));
    return o;
}

}  // namespace arbr::pca
