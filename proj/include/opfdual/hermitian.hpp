#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include "opfdual/grid.hpp"  // complex alias

namespace opfdual {

// Dense Hermitian matrix, packed upper-triangular storage. The diagonal is
// kept exactly real; entries below the diagonal are materialized as
// conjugates on read, so H == H^dagger holds by construction.
class HermitianMatrix {
  public:
    HermitianMatrix() = default;
    explicit HermitianMatrix(std::size_t n) : n_(n), data_(n * (n + 1) / 2) {}

    std::size_t order() const { return n_; }

    complex at(std::size_t i, std::size_t j) const {
        return i <= j ? data_[idx(i, j)] : std::conj(data_[idx(j, i)]);
    }
    void set(std::size_t i, std::size_t j, complex z) {
        if (i == j) {
            data_[idx(i, i)] = complex(z.real(), 0.0);
        } else if (i < j) {
            data_[idx(i, j)] = z;
        } else {
            data_[idx(j, i)] = std::conj(z);
        }
    }
    void add(std::size_t i, std::size_t j, complex z) { set(i, j, at(i, j) + z); }

    double trace() const {
        double t = 0;
        for (std::size_t i = 0; i < n_; ++i) t += data_[idx(i, i)].real();
        return t;
    }

    double frob_norm() const {
        double s = 0;
        for (std::size_t i = 0; i < n_; ++i)
            for (std::size_t j = i; j < n_; ++j) {
                const double a = std::norm(data_[idx(i, j)]);
                s += i == j ? a : 2 * a;
            }
        return std::sqrt(s);
    }

    std::vector<complex> matvec(const std::vector<complex>& x) const {
        std::vector<complex> y(n_, complex(0));
        for (std::size_t i = 0; i < n_; ++i)
            for (std::size_t j = 0; j < n_; ++j) y[i] += at(i, j) * x[j];
        return y;
    }

    // Real pairing tr(A B) of two Hermitian matrices.
    double pair(const HermitianMatrix& other) const {
        double s = 0;
        for (std::size_t i = 0; i < n_; ++i) {
            s += at(i, i).real() * other.at(i, i).real();
            for (std::size_t j = i + 1; j < n_; ++j) {
                const complex a = data_[idx(i, j)];
                const complex b = other.data_[other.idx(i, j)];
                s += 2 * (a.real() * b.real() + a.imag() * b.imag());
            }
        }
        return s;
    }

    const std::vector<complex>& packed() const { return data_; }
    std::vector<complex>& packed() { return data_; }

  private:
    std::size_t idx(std::size_t i, std::size_t j) const {
        return i * n_ - i * (i - 1) / 2 + (j - i);
    }
    std::size_t n_ = 0;
    std::vector<complex> data_;
};

inline HermitianMatrix herm_add_scaled(const HermitianMatrix& h, double c) {
    HermitianMatrix out = h;
    for (std::size_t i = 0; i < h.order(); ++i) out.add(i, i, complex(c, 0));
    return out;
}

struct MinEigPair {
    double lambda_min = 0;
    std::vector<complex> eigvec;
    double gap = 0;  // lambda_2 - lambda_min, for degeneracy diagnostics
};

struct EigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

namespace detail {

// Cyclic Jacobi on a dense real symmetric matrix; rotations accumulate into v.
// Returns the achieved off-diagonal Frobenius norm.
inline double jacobi_sweeps(std::vector<double>& m, std::vector<double>& v,
                            std::size_t n, double tol, int max_sweeps) {
    auto off_norm = [&]() {
        double s = 0;
        for (std::size_t p = 0; p < n; ++p)
            for (std::size_t q = p + 1; q < n; ++q) s += 2 * m[p * n + q] * m[p * n + q];
        return std::sqrt(s);
    };
    for (int sweep = 0; sweep < max_sweeps; ++sweep) {
        const double off = off_norm();
        if (off <= tol) return off;
        for (std::size_t p = 0; p < n; ++p) {
            for (std::size_t q = p + 1; q < n; ++q) {
                const double apq = m[p * n + q];
                if (apq == 0.0) continue;
                const double app = m[p * n + p];
                const double aqq = m[q * n + q];
                const double theta = (aqq - app) / (2 * apq);
                const double t = (theta >= 0 ? 1.0 : -1.0) /
                                 (std::abs(theta) + std::sqrt(theta * theta + 1));
                const double c = 1.0 / std::sqrt(t * t + 1);
                const double s = t * c;
                for (std::size_t k = 0; k < n; ++k) {
                    const double mkp = m[k * n + p];
                    const double mkq = m[k * n + q];
                    m[k * n + p] = c * mkp - s * mkq;
                    m[k * n + q] = s * mkp + c * mkq;
                }
                for (std::size_t k = 0; k < n; ++k) {
                    const double mpk = m[p * n + k];
                    const double mqk = m[q * n + k];
                    m[p * n + k] = c * mpk - s * mqk;
                    m[q * n + k] = s * mpk + c * mqk;
                }
                for (std::size_t k = 0; k < n; ++k) {
                    const double vkp = v[k * n + p];
                    const double vkq = v[k * n + q];
                    v[k * n + p] = c * vkp - s * vkq;
                    v[k * n + q] = s * vkp + c * vkq;
                }
            }
        }
    }
    return off_norm();
}

}  // namespace detail

// Smallest eigenvalue and eigenvector of a Hermitian matrix, via cyclic
// Jacobi on the real symmetric embedding [[A, -B], [B, A]] of H = A + jB.
// Each eigenvalue of H appears twice in the embedding.
inline MinEigPair min_eig(const HermitianMatrix& h, int max_sweeps = 100) {
    const std::size_t n = h.order();
    if (n == 0) throw std::invalid_argument("min_eig on empty matrix");

    const double hnorm = h.frob_norm();
    if (n == 1) {
        MinEigPair out;
        out.lambda_min = h.at(0, 0).real();
        out.eigvec = {complex(1, 0)};
        out.gap = std::numeric_limits<double>::infinity();
        return out;
    }

    const std::size_t m = 2 * n;
    std::vector<double> emb(m * m, 0.0), rot(m * m, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        rot[i * m + i] = 1.0;
        rot[(n + i) * m + (n + i)] = 1.0;
        for (std::size_t j = 0; j < n; ++j) {
            const complex z = h.at(i, j);
            emb[i * m + j] = z.real();
            emb[(n + i) * m + (n + j)] = z.real();
            emb[i * m + (n + j)] = -z.imag();
            emb[(n + i) * m + j] = z.imag();
        }
    }

    const double tol = 1e-12 * std::max(hnorm, 1e-300);
    const double off = detail::jacobi_sweeps(emb, rot, m, tol, max_sweeps);
    if (off > tol)
        throw EigError("Jacobi eigensolver did not converge: off-diagonal norm " +
                       std::to_string(off) + " > " + std::to_string(tol));

    std::vector<double> evals(m);
    for (std::size_t k = 0; k < m; ++k) evals[k] = emb[k * m + k];

    // Deterministic choice under degeneracy: the first converged basis column
    // attaining the minimum (ties broken by column index).
    std::size_t kmin = 0;
    for (std::size_t k = 1; k < m; ++k)
        if (evals[k] < evals[kmin]) kmin = k;

    std::vector<double> sorted = evals;
    std::sort(sorted.begin(), sorted.end());
    // The minimum appears (at least) twice in the embedding; lambda_2 of H is
    // the third entry of the sorted embedding spectrum.
    const double gap = m >= 3 ? sorted[2] - sorted[0]
                              : std::numeric_limits<double>::infinity();

    std::vector<complex> vec(n);
    for (std::size_t i = 0; i < n; ++i)
        vec[i] = complex(rot[i * m + kmin], rot[(n + i) * m + kmin]);

    // Normalize and fix the phase: largest-magnitude component positive real.
    double norm2 = 0;
    for (const complex& z : vec) norm2 += std::norm(z);
    std::size_t imax = 0;
    for (std::size_t i = 1; i < n; ++i)
        if (std::abs(vec[i]) > std::abs(vec[imax])) imax = i;
    const complex phase = std::abs(vec[imax]) > 0
                              ? std::conj(vec[imax]) / std::abs(vec[imax])
                              : complex(1, 0);
    const double scale = 1.0 / std::sqrt(norm2);
    for (complex& z : vec) z *= phase * scale;

    MinEigPair out;
    out.lambda_min = evals[kmin];
    out.eigvec = std::move(vec);
    out.gap = gap;
    return out;
}

// Derivative of lambda_min with respect to H at a simple minimum eigenvalue:
// the rank-one projector v v^dagger. Under degeneracy this is a subgradient.
inline HermitianMatrix d_lambda_min(const MinEigPair& pair) {
    const std::size_t n = pair.eigvec.size();
    HermitianMatrix g(n);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i; j < n; ++j)
            g.set(i, j, pair.eigvec[i] * std::conj(pair.eigvec[j]));
    return g;
}

}  // namespace opfdual
