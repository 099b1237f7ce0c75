// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

#include "bihmg/linalg.hpp"

namespace bihmg {

/// Univariate B-spline space on (0,1): degree p, m equal elements of length
/// h = 1/m, open-uniform knot vector with simple interior knots, dimension
/// n = m + p, smoothness C^{p-1}. Immutable after construction.
struct SplineSpace {
    int degree = 0;             // p >= 1
    int elements = 0;           // m >= 1
    double h = 0.0;             // 1 / m
    std::vector<double> knots;  // size n + p + 1

    int dim() const { return elements + degree; }
};

/// Open-uniform space with m elements.
inline SplineSpace make_uniform_space(int degree, int elements)
{
    if (degree < 1)
        throw std::invalid_argument("make_uniform_space: degree must be >= 1");
    if (elements < 1)
        throw std::invalid_argument("make_uniform_space: need at least one element");
    SplineSpace s;
    s.degree = degree;
    s.elements = elements;
    s.h = 1.0 / elements;
    s.knots.reserve(elements + 2 * degree + 1);
    for (int i = 0; i <= degree; ++i)
        s.knots.push_back(0.0);
    for (int i = 1; i < elements; ++i)
        s.knots.push_back(i * s.h);
    for (int i = 0; i <= degree; ++i)
        s.knots.push_back(1.0);
    return s;
}

/// Space at dyadic refinement level: m = 2^level elements.
inline SplineSpace make_space(int degree, int level)
{
    if (degree < 1)
        throw std::invalid_argument("make_space: degree must be >= 1");
    if (level < 0)
        throw std::invalid_argument("make_space: level must be >= 0");
    return make_uniform_space(degree, 1 << level);
}

/// Index of the element containing x; evaluation is right-continuous at
/// interior knots and left-continuous at x = 1.
inline int element_index(const SplineSpace& s, double x)
{
    int e = static_cast<int>(std::floor(x * s.elements));
    return std::clamp(e, 0, s.elements - 1);
}

/// Values and derivatives of the p+1 basis functions that may be nonzero at x.
struct BasisEval {
    int anchor = 0;  // index of the first listed basis function
    // values(r, j) = d^r/dx^r of basis function anchor + j at x
    Matrix values;
};

/// Cox-de Boor evaluation with the standard derivative recursion on knot
/// differences. Derivative orders above p evaluate to zero.
inline BasisEval eval_basis(const SplineSpace& s, double x, int max_deriv)
{
    if (x < 0.0 || x > 1.0)
        throw std::domain_error("eval_basis: point outside [0,1]");
    const int p = s.degree;
    const std::vector<double>& knots = s.knots;
    const int span = p + element_index(s, x);

    BasisEval out;
    out.anchor = span - p;
    out.values = Matrix::Zero(max_deriv + 1, p + 1);

    // triangular table of basis values and knot differences
    Matrix ndu(p + 1, p + 1);
    std::vector<double> left(p + 1), right(p + 1);
    ndu(0, 0) = 1.0;
    for (int j = 1; j <= p; ++j) {
        left[j] = x - knots[span + 1 - j];
        right[j] = knots[span + j] - x;
        double saved = 0.0;
        for (int r = 0; r < j; ++r) {
            ndu(j, r) = right[r + 1] + left[j - r];
            const double temp = ndu(r, j - 1) / ndu(j, r);
            ndu(r, j) = saved + right[r + 1] * temp;
            saved = left[j - r] * temp;
        }
        ndu(j, j) = saved;
    }
    for (int j = 0; j <= p; ++j)
        out.values(0, j) = ndu(j, p);

    const int nd = std::min(max_deriv, p);
    Matrix a(2, p + 1);
    for (int r = 0; r <= p; ++r) {
        int s1 = 0, s2 = 1;
        a(0, 0) = 1.0;
        for (int k = 1; k <= nd; ++k) {
            double dsum = 0.0;
            const int rk = r - k, pk = p - k;
            if (r >= k) {
                a(s2, 0) = a(s1, 0) / ndu(pk + 1, rk);
                dsum = a(s2, 0) * ndu(rk, pk);
            }
            const int j1 = (rk >= -1) ? 1 : -rk;
            const int j2 = (r - 1 <= pk) ? k - 1 : p - r;
            for (int j = j1; j <= j2; ++j) {
                a(s2, j) = (a(s1, j) - a(s1, j - 1)) / ndu(pk + 1, rk + j);
                dsum += a(s2, j) * ndu(rk + j, pk);
            }
            if (r <= pk) {
                a(s2, k) = -a(s1, k - 1) / ndu(pk + 1, r);
                dsum += a(s2, k) * ndu(r, pk);
            }
            out.values(k, r) = dsum;
            std::swap(s1, s2);
        }
    }
    double factor = p;
    for (int k = 1; k <= nd; ++k) {
        for (int j = 0; j <= p; ++j)
            out.values(k, j) *= factor;
        factor *= (p - k);
    }
    return out;
}

/// Evaluates the spline with the given coefficients at x (derivative `deriv`).
inline double eval_spline(const SplineSpace& s, const Vector& coeffs, double x, int deriv = 0)
{
    const BasisEval be = eval_basis(s, x, deriv);
    double v = 0.0;
    for (int j = 0; j <= s.degree; ++j)
        v += coeffs[be.anchor + j] * be.values(deriv, j);
    return v;
}

namespace detail {

/// One Boehm knot-insertion step: returns the (n+1) x n coefficient map and
/// appends x to the knot vector.
inline Matrix insert_knot(std::vector<double>& knots, int degree, double x)
{
    const int p = degree;
    const int n = static_cast<int>(knots.size()) - p - 1;
    // rightmost span with knots[k] <= x
    int k = p;
    while (k + 1 < n && knots[k + 1] <= x)
        ++k;
    Matrix step = Matrix::Zero(n + 1, n);
    for (int i = 0; i <= n; ++i) {
        if (i <= k - p) {
            step(i, i) = 1.0;
        } else if (i <= k) {
            const double alpha = (x - knots[i]) / (knots[i + p] - knots[i]);
            step(i, i) = alpha;
            step(i, i - 1) = 1.0 - alpha;
        } else {
            step(i, i - 1) = 1.0;
        }
    }
    knots.insert(knots.begin() + (k + 1), x);
    return step;
}

}  // namespace detail

/// Coefficient map R from a coarse space to its dyadic refinement (one level
/// finer, same degree): fine(R c) == coarse(c) pointwise. Rows are convex
/// combinations, so R is nonnegative with unit row sums.
/// Built by repeated single-knot insertion, one code path for every degree.
inline CsrMatrix refinement_matrix(const SplineSpace& coarse)
{
    std::vector<double> knots = coarse.knots;
    const int m = coarse.elements;
    Matrix r = Matrix::Identity(coarse.dim(), coarse.dim());
    for (int e = 0; e < m; ++e) {
        const double x = (e + 0.5) * coarse.h;
        r = detail::insert_knot(knots, coarse.degree, x) * r;
    }
    return CsrMatrix::from_dense(r, 0.0);
}

/// Greville abscissae, xi_i = (t_{i+1} + ... + t_{i+p}) / p.
inline std::vector<double> greville_points(const SplineSpace& s)
{
    std::vector<double> pts(s.dim());
    for (int i = 0; i < s.dim(); ++i) {
        double acc = 0.0;
        for (int k = 1; k <= s.degree; ++k)
            acc += s.knots[i + k];
        pts[i] = acc / s.degree;
    }
    return pts;
}

}  // namespace bihmg
