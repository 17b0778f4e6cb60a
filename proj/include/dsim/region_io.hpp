#pragma once

// Region files: JSON objects {"kind", "n", "params", "shift", "scale"}.
//
//   box        params {"lo": [...], "hi": [...]}
//   ellipsoid  params {"K": [[...]], "center": [...]}        center optional
//   hypograph  params {"density": "gaussian", "mean": [...], "cov": [[...]]}
//              or {"density": "uniform_box", "lo", "hi"} or {"density": "triangular"}
//   union      params {"children": [region, ...]}
//
// "n" is checked when present; "shift"/"scale" wrap the region in an affine map.

#include <fstream>

#include "json.hpp"

#include "dsim/region.hpp"

namespace dsim {

namespace detail {

inline std::vector<Vec> json_matrix(const nlohmann::json& j) { return j.get<std::vector<Vec>>(); }

inline Density density_from_json(const nlohmann::json& p) {
    const std::string d = p.at("density").get<std::string>();
    if (d == "gaussian") return Density::gaussian(p.at("mean").get<Vec>(), json_matrix(p.at("cov")));
    if (d == "uniform_box") return Density::uniform_box(Box(p.at("lo").get<Vec>(), p.at("hi").get<Vec>()));
    if (d == "triangular") return Density::triangular();
    throw InvalidArgument("unknown density '" + d + "'");
}

inline nlohmann::json density_to_json(const Density& f) {
    switch (f.kind()) {
        case DensityKind::Gaussian: {
            std::vector<Vec> cov(f.dim(), Vec(f.dim()));
            for (std::size_t i = 0; i < f.dim(); ++i)
                for (std::size_t j = 0; j < f.dim(); ++j) cov[i][j] = f.covariance()(i, j);
            return {{"density", "gaussian"}, {"mean", f.mean()}, {"cov", cov}};
        }
        case DensityKind::UniformBox: return {{"density", "uniform_box"}, {"lo", f.support().lo}, {"hi", f.support().hi}};
        case DensityKind::Triangular: return {{"density", "triangular"}};
    }
    return {};
}

}  // namespace detail

inline Region region_from_json(const nlohmann::json& j) {
    try {
        const std::string kind = j.at("kind").get<std::string>();
        const nlohmann::json& p = j.contains("params") ? j.at("params") : j;
        Region r;
        if (kind == "box") {
            r = Region::box(Box(p.at("lo").get<Vec>(), p.at("hi").get<Vec>()));
        } else if (kind == "ellipsoid") {
            r = Region::ellipsoid(detail::json_matrix(p.at("K")), p.contains("center") ? p.at("center").get<Vec>() : Vec{});
        } else if (kind == "hypograph") {
            r = Region::hypograph(detail::density_from_json(p));
        } else if (kind == "union") {
            std::vector<Region> ch;
            for (const auto& c : p.at("children")) ch.push_back(region_from_json(c));
            r = Region::disjoint_union(std::move(ch));
        } else {
            throw InvalidArgument("unknown region kind '" + kind + "'");
        }
        if (j.contains("scale") || j.contains("shift"))
            r = Region::transformed(r, j.value("scale", Vec{}), j.value("shift", Vec{}));
        if (j.contains("n")) require_dim(j.at("n").get<std::size_t>(), r.dim());
        return r;
    } catch (const nlohmann::json::exception& e) {
        throw InvalidArgument(std::string("malformed region description: ") + e.what());
    }
}

inline nlohmann::json region_to_json(const Region& r) {
    nlohmann::json j;
    j["n"] = r.dim();
    switch (r.kind()) {
        case RegionKind::AxisBox:
            j["kind"] = "box";
            j["params"] = {{"lo", r.box_params().lo}, {"hi", r.box_params().hi}};
            break;
        case RegionKind::Ellipsoid: {
            const Mat& k = r.ellipsoid_matrix();
            std::vector<Vec> km(r.dim(), Vec(r.dim()));
            for (std::size_t i = 0; i < r.dim(); ++i)
                for (std::size_t c = 0; c < r.dim(); ++c) km[i][c] = k(i, c);
            j["kind"] = "ellipsoid";
            j["params"] = {{"K", km}, {"center", r.ellipsoid_center()}};
            break;
        }
        case RegionKind::Hypograph:
            j["kind"] = "hypograph";
            j["params"] = detail::density_to_json(r.density());
            break;
        case RegionKind::DisjointUnion: {
            nlohmann::json ch = nlohmann::json::array();
            for (const auto& c : r.children()) ch.push_back(region_to_json(c));
            j["kind"] = "union";
            j["params"] = {{"children", ch}};
            break;
        }
        case RegionKind::Transformed: {
            j = region_to_json(r.children().front());
            // Nested maps compose: outer(inner(x)).
            Vec s = j.value("scale", Vec(r.dim(), 1.0)), t = j.value("shift", Vec(r.dim(), 0.0));
            for (std::size_t i = 0; i < r.dim(); ++i) {
                s[i] *= r.scale()[i];
                t[i] = r.scale()[i] * t[i] + r.shift()[i];
            }
            j["scale"] = s;
            j["shift"] = t;
            break;
        }
    }
    return j;
}

inline Region load_region(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw InvalidArgument("cannot open region file " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw InvalidArgument("region file " + path + ": " + e.what());
    }
    return region_from_json(j);
}

/// Built-in fixtures by name.
inline std::optional<Region> named_region(std::string_view name) {
    if (name == "unit-square") return unit_cube_region(2);
    if (name == "unit-cube3") return unit_cube_region(3);
    if (name == "l-shape") return l_shape();
    if (name == "ellipse-example1") return example1_ellipse();
    if (name == "gauss-example2") return Region::hypograph(example2_gaussian());
    return std::nullopt;
}

/// A fixture name or a region file path.
inline Region resolve_region(const std::string& spec) {
    if (auto r = named_region(spec)) return *r;
    return load_region(spec);
}

}  // namespace dsim
