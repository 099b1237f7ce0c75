// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <cstdint>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "bihmg/bspline.hpp"
#include "bihmg/linalg.hpp"

namespace bihmg {

/// Point, Jacobian, per-component Hessians and Jacobian determinant of a
/// geometry map at one parameter point. For affine maps the Hessians are
/// exactly zero.
struct GeometrySample {
    Vector point;                  // G(x^)
    Matrix jacobian;               // J(i, j) = d G_i / d x^_j
    std::vector<Matrix> hessians;  // hessians[c](a, b) = d2 G_c / (d x^_a d x^_b)
    double det = 0.0;
};

/// Tensor-product B-spline/NURBS patch G: (0,1)^d -> Omega. The per-direction
/// spaces are open-uniform; degrees are independent of the analysis space.
/// Control points and weights are stored flat, row-major with the last index
/// fastest. Immutable after construction.
class GeometryMap {
public:
    GeometryMap() = default;

    GeometryMap(std::vector<SplineSpace> spaces, std::vector<Vector> components, Vector weights)
        : spaces_(std::move(spaces)), components_(std::move(components)),
          weights_(std::move(weights))
    {
        const int d = dim();
        if (d < 1 || d > 3)
            throw std::invalid_argument("GeometryMap: spatial dimension must be 1, 2 or 3");
        if (static_cast<int>(components_.size()) != d)
            throw std::invalid_argument("GeometryMap: need one control component per dimension");
        std::int64_t n = 1;
        for (const SplineSpace& s : spaces_)
            n *= s.dim();
        for (const Vector& c : components_)
            if (c.size() != n)
                throw std::invalid_argument("GeometryMap: control point count mismatch");
        if (weights_.size() != 0) {
            if (weights_.size() != n)
                throw std::invalid_argument("GeometryMap: weight count mismatch");
            for (int i = 0; i < weights_.size(); ++i)
                if (!(weights_[i] > 0.0))
                    throw std::invalid_argument("GeometryMap: weights must be positive");
        }
    }

    int dim() const { return static_cast<int>(spaces_.size()); }
    const std::vector<SplineSpace>& spaces() const { return spaces_; }
    const std::vector<Vector>& components() const { return components_; }
    const Vector& weights() const { return weights_; }
    bool rational() const { return weights_.size() != 0; }
    bool is_identity() const { return identity_; }

    /// Exact derivatives of the (rational) tensor spline map; for NURBS the
    /// second derivatives come from the quotient rule.
    GeometrySample eval(const Vector& xhat) const
    {
        const int d = dim();
        if (xhat.size() != d)
            throw std::invalid_argument("GeometryMap::eval: point dimension mismatch");
        if (identity_) {
            GeometrySample out;
            out.point = xhat;
            out.jacobian = Matrix::Identity(d, d);
            out.hessians.assign(d, Matrix::Zero(d, d));
            out.det = 1.0;
            return out;
        }

        std::vector<BasisEval> basis(d);
        for (int k = 0; k < d; ++k)
            basis[k] = eval_basis(spaces_[k], xhat[k], 2);

        // accumulate numerator components and the weight function with all
        // derivatives up to order two
        const int nsecond = d * (d + 1) / 2;
        std::vector<Vector> num(1 + d + nsecond, Vector::Zero(d));
        std::vector<double> wgt(1 + d + nsecond, 0.0);

        std::vector<std::int64_t> stride(d, 1);
        for (int k = d - 2; k >= 0; --k)
            stride[k] = stride[k + 1] * spaces_[k + 1].dim();

        std::vector<int> loc(d, 0);
        const auto second_slot = [d](int a, int b) {
            if (a > b)
                std::swap(a, b);
            int slot = 0;
            for (int i = 0; i < a; ++i)
                slot += d - i;
            return slot + (b - a);
        };
        while (true) {
            std::int64_t flat = 0;
            double v = 1.0;
            for (int k = 0; k < d; ++k) {
                flat += (basis[k].anchor + loc[k]) * stride[k];
                v *= basis[k].values(0, loc[k]);
            }
            const double w = rational() ? weights_[flat] : 1.0;
            Vector pt(d);
            for (int c = 0; c < d; ++c)
                pt[c] = components_[c][flat];

            const auto accumulate = [&](int slot, double factor) {
                num[slot] += (w * factor) * pt;
                wgt[slot] += w * factor;
            };
            accumulate(0, v);
            for (int a = 0; a < d; ++a) {
                double fa = basis[a].values(1, loc[a]);
                for (int k = 0; k < d; ++k)
                    if (k != a)
                        fa *= basis[k].values(0, loc[k]);
                accumulate(1 + a, fa);
                for (int b = a; b < d; ++b) {
                    double fab = 1.0;
                    for (int k = 0; k < d; ++k) {
                        int order = (k == a ? 1 : 0) + (k == b ? 1 : 0);
                        fab *= basis[k].values(order, loc[k]);
                    }
                    accumulate(1 + d + second_slot(a, b), fab);
                }
            }
            int k = d - 1;
            for (; k >= 0; --k) {
                if (++loc[k] <= spaces_[k].degree)
                    break;
                loc[k] = 0;
            }
            if (k < 0)
                break;
        }

        GeometrySample out;
        const double w0 = wgt[0];
        out.point = num[0] / w0;
        out.jacobian.resize(d, d);
        for (int a = 0; a < d; ++a)
            out.jacobian.col(a) = (num[1 + a] - wgt[1 + a] * out.point) / w0;
        out.hessians.assign(d, Matrix::Zero(d, d));
        if (!affine_)
            for (int a = 0; a < d; ++a)
                for (int b = a; b < d; ++b) {
                    const int slot = 1 + d + second_slot(a, b);
                    const Vector h = (num[slot] - wgt[slot] * out.point -
                                      wgt[1 + a] * out.jacobian.col(b) -
                                      wgt[1 + b] * out.jacobian.col(a)) /
                                     w0;
                    for (int c = 0; c < d; ++c) {
                        out.hessians[c](a, b) = h[c];
                        out.hessians[c](b, a) = h[c];
                    }
                }
        out.det = out.jacobian.determinant();
        if (!(out.det > 0.0)) {
            std::ostringstream msg;
            msg << "GeometryMap::eval: non-positive Jacobian determinant at (";
            for (int k = 0; k < d; ++k)
                msg << (k ? ", " : "") << xhat[k];
            msg << ")";
            throw std::runtime_error(msg.str());
        }
        return out;
    }

    /// Identity patch on (0,1)^d.
    static GeometryMap identity(int d)
    {
        GeometryMap g(make_cube_data(d, 1.0, 0.0));
        g.identity_ = true;
        g.affine_ = true;
        return g;
    }

    /// Affine patch x -> scale * x + shift, component-wise.
    static GeometryMap affine(int d, double scale, double shift)
    {
        GeometryMap g(make_cube_data(d, scale, shift));
        g.affine_ = true;
        return g;
    }

private:
    struct Data {
        std::vector<SplineSpace> spaces;
        std::vector<Vector> components;
        Vector weights;
    };

    explicit GeometryMap(Data data)
        : GeometryMap(std::move(data.spaces), std::move(data.components), std::move(data.weights))
    {
    }

    static Data make_cube_data(int d, double scale, double shift)
    {
        Data data;
        std::int64_t n = 1;
        for (int k = 0; k < d; ++k) {
            data.spaces.push_back(make_uniform_space(1, 1));
            n *= 2;
        }
        data.components.assign(d, Vector::Zero(n));
        for (std::int64_t flat = 0; flat < n; ++flat)
            for (int c = 0; c < d; ++c) {
                const int bit = (flat >> (d - 1 - c)) & 1;
                data.components[c][flat] = scale * bit + shift;
            }
        return data;
    }

    std::vector<SplineSpace> spaces_;
    std::vector<Vector> components_;
    Vector weights_;
    bool identity_ = false;
    bool affine_ = false;
};

/// Built-in domains. The quarter annulus (radii 1 and 2) is the exact NURBS
/// patch with a degree-2 circular arc in the angular direction; its 3D
/// variant is the extrusion to thickness 1.
inline GeometryMap builtin_domain(const std::string& name)
{
    if (name == "unit-square")
        return GeometryMap::identity(2);
    if (name == "unit-cube")
        return GeometryMap::identity(3);
    if (name == "quarter-annulus-2d" || name == "quarter-annulus-3d") {
        const double rin = 1.0, rout = 2.0;
        const double s = 1.0 / std::sqrt(2.0);
        // direction 0: radial (degree 1), direction 1: angular (degree 2)
        const double arc_x[3] = {1.0, 1.0, 0.0};
        const double arc_y[3] = {0.0, 1.0, 1.0};
        const double arc_w[3] = {1.0, s, 1.0};
        std::vector<SplineSpace> spaces{make_uniform_space(1, 1), make_uniform_space(2, 1)};
        const bool extruded = (name == "quarter-annulus-3d");
        if (extruded)
            spaces.push_back(make_uniform_space(1, 1));
        const int nz = extruded ? 2 : 1;
        const std::int64_t n = 2 * 3 * nz;
        std::vector<Vector> comps(extruded ? 3 : 2, Vector::Zero(n));
        Vector weights(n);
        std::int64_t flat = 0;
        for (int ir = 0; ir < 2; ++ir)
            for (int ia = 0; ia < 3; ++ia)
                for (int iz = 0; iz < nz; ++iz, ++flat) {
                    const double r = (ir == 0) ? rin : rout;
                    comps[0][flat] = r * arc_x[ia];
                    comps[1][flat] = r * arc_y[ia];
                    if (extruded)
                        comps[2][flat] = iz;
                    weights[flat] = arc_w[ia];
                }
        return GeometryMap(std::move(spaces), std::move(comps), std::move(weights));
    }
    throw std::invalid_argument("builtin_domain: unknown domain '" + name + "'");
}

// ---------------------------------------------------------------------------
// Patch file I/O
//
// UTF-8 JSON object:
//   { "dim": d,
//     "degrees": [p_1, ..., p_d],
//     "knots": [[...], ...],           open-uniform per direction
//     "weights": [...],                optional, positive, flat
//     "control_points": [[x, y, ...], ...] }
// Flat arrays are row-major with the last index fastest.
// ---------------------------------------------------------------------------

inline GeometryMap load_geometry(const std::string& path)
{
    std::ifstream in(path);
    if (!in)
        throw std::runtime_error("load_geometry: cannot open '" + path + "'");
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
        throw std::runtime_error("load_geometry: " + path + ": " + e.what());
    }
    const auto fail = [&](const std::string& field, const std::string& what) -> void {
        throw std::runtime_error("load_geometry: " + path + ": field '" + field + "': " + what);
    };
    if (!j.contains("dim") || !j["dim"].is_number_integer())
        fail("dim", "missing or not an integer");
    const int d = j["dim"].get<int>();
    if (d < 2 || d > 3)
        fail("dim", "must be 2 or 3, got " + std::to_string(d));
    if (!j.contains("degrees") || !j["degrees"].is_array() ||
        static_cast<int>(j["degrees"].size()) != d)
        fail("degrees", "must be an array of length dim");
    if (!j.contains("knots") || !j["knots"].is_array() || static_cast<int>(j["knots"].size()) != d)
        fail("knots", "must be an array of length dim");

    std::vector<SplineSpace> spaces;
    for (int k = 0; k < d; ++k) {
        const int p = j["degrees"][k].get<int>();
        if (p < 1)
            fail("degrees", "degree must be >= 1");
        const std::vector<double> knots = j["knots"][k].get<std::vector<double>>();
        const int m = static_cast<int>(knots.size()) - 2 * p - 1;
        if (m < 1)
            fail("knots", "knot vector too short for degree " + std::to_string(p));
        SplineSpace s = make_uniform_space(p, m);
        for (std::size_t i = 0; i < knots.size(); ++i)
            if (std::abs(knots[i] - s.knots[i]) > 1e-12)
                fail("knots", "direction " + std::to_string(k) +
                                  " is not the open-uniform knot vector on [0,1]");
        spaces.push_back(std::move(s));
    }

    std::int64_t n = 1;
    for (const SplineSpace& s : spaces)
        n *= s.dim();
    if (!j.contains("control_points") || !j["control_points"].is_array() ||
        static_cast<std::int64_t>(j["control_points"].size()) != n)
        fail("control_points", "must be an array of length " + std::to_string(n));
    std::vector<Vector> comps(d, Vector::Zero(n));
    for (std::int64_t i = 0; i < n; ++i) {
        const auto& pt = j["control_points"][i];
        if (!pt.is_array() || static_cast<int>(pt.size()) != d)
            fail("control_points", "entry " + std::to_string(i) + " is not a " +
                                       std::to_string(d) + "-vector");
        for (int c = 0; c < d; ++c)
            comps[c][i] = pt[c].get<double>();
    }
    Vector weights;
    if (j.contains("weights")) {
        if (!j["weights"].is_array() || static_cast<std::int64_t>(j["weights"].size()) != n)
            fail("weights", "must be a flat array of length " + std::to_string(n));
        weights.resize(n);
        for (std::int64_t i = 0; i < n; ++i) {
            weights[i] = j["weights"][i].get<double>();
            if (!(weights[i] > 0.0))
                fail("weights", "entry " + std::to_string(i) + " is not positive");
        }
    }
    return GeometryMap(std::move(spaces), std::move(comps), std::move(weights));
}

inline void save_geometry(const GeometryMap& g, const std::string& path)
{
    nlohmann::json j;
    const int d = g.dim();
    j["dim"] = d;
    for (const SplineSpace& s : g.spaces()) {
        j["degrees"].push_back(s.degree);
        j["knots"].push_back(s.knots);
    }
    const std::int64_t n = g.components()[0].size();
    for (std::int64_t i = 0; i < n; ++i) {
        nlohmann::json pt = nlohmann::json::array();
        for (int c = 0; c < d; ++c)
            pt.push_back(g.components()[c][i]);
        j["control_points"].push_back(pt);
    }
    if (g.rational())
        for (std::int64_t i = 0; i < n; ++i)
            j["weights"].push_back(g.weights()[i]);
    std::ofstream out(path);
    if (!out)
        throw std::runtime_error("save_geometry: cannot open '" + path + "' for writing");
    out << j.dump(2) << "\n";
}

}  // namespace bihmg
