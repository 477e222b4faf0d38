#pragma once

// Unions of balls and boxes in R^{4n}, used both as computational domains
// and as constraint sets K. Axis-aligned ray hits give the sub-cell
// distances needed by boundary-fitted stencils.

#include "qma/error.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <span>
#include <variant>
#include <vector>

namespace qma {

struct Ball {
    std::vector<double> center;
    double radius = 0.0;

    bool contains(std::span<const double> x) const {
        double r2 = 0.0;
        for (std::size_t a = 0; a < center.size(); ++a) r2 += (x[a] - center[a]) * (x[a] - center[a]);
        return r2 <= radius * radius;
    }

    /// Distance t in (0, max_len] along x + t * sign * e_axis to the sphere, or +inf.
    double ray_hit(std::span<const double> x, int axis, int sign, double max_len) const {
        double rest = 0.0;
        for (std::size_t a = 0; a < center.size(); ++a)
            if (static_cast<int>(a) != axis) rest += (x[a] - center[a]) * (x[a] - center[a]);
        const double disc = radius * radius - rest;
        if (disc < 0.0) return std::numeric_limits<double>::infinity();
        const double root = std::sqrt(disc);
        const double off = x[static_cast<std::size_t>(axis)] - center[static_cast<std::size_t>(axis)];
        double best = std::numeric_limits<double>::infinity();
        for (double target : {-root, root}) {
            const double t = (target - off) * sign;
            if (t > 1e-14 && t <= max_len) best = std::min(best, t);
        }
        return best;
    }
};

struct Box {
    std::vector<double> lo;
    std::vector<double> hi;

    bool contains(std::span<const double> x) const {
        for (std::size_t a = 0; a < lo.size(); ++a)
            if (x[a] < lo[a] || x[a] > hi[a]) return false;
        return true;
    }

    double ray_hit(std::span<const double> x, int axis, int sign, double max_len) const {
        for (std::size_t a = 0; a < lo.size(); ++a)
            if (static_cast<int>(a) != axis && (x[a] < lo[a] || x[a] > hi[a]))
                return std::numeric_limits<double>::infinity();
        const auto ax = static_cast<std::size_t>(axis);
        double best = std::numeric_limits<double>::infinity();
        for (double face : {lo[ax], hi[ax]}) {
            const double t = (face - x[ax]) * sign;
            if (t > 1e-14 && t <= max_len) best = std::min(best, t);
        }
        return best;
    }
};

/// Finite union of balls and boxes. An empty region contains nothing.
class Region {
public:
    using Part = std::variant<Ball, Box>;

    Region() = default;
    explicit Region(std::vector<Part> parts) : parts_(std::move(parts)) {}

    static Region ball(std::vector<double> center, double radius) { return Region({Ball{std::move(center), radius}}); }
    static Region box(std::vector<double> lo, std::vector<double> hi) { return Region({Box{std::move(lo), std::move(hi)}}); }

    bool empty() const { return parts_.empty(); }
    const std::vector<Part>& parts() const { return parts_; }

    Region united(const Region& other) const {
        auto parts = parts_;
        parts.insert(parts.end(), other.parts_.begin(), other.parts_.end());
        return Region(std::move(parts));
    }

    bool contains(std::span<const double> x) const {
        return std::any_of(parts_.begin(), parts_.end(),
                           [&](const Part& p) { return std::visit([&](const auto& s) { return s.contains(x); }, p); });
    }

    /// Nearest crossing of the union boundary along the ray, restricted to
    /// crossings where the membership actually changes.
    double ray_hit(std::span<const double> x, int axis, int sign, double max_len) const {
        const bool inside = contains(x);
        std::vector<double> hits;
        for (const auto& p : parts_) {
            const double t = std::visit([&](const auto& s) { return s.ray_hit(x, axis, sign, max_len); }, p);
            if (std::isfinite(t)) hits.push_back(t);
        }
        std::sort(hits.begin(), hits.end());
        std::vector<double> probe(x.begin(), x.end());
        const auto ax = static_cast<std::size_t>(axis);
        for (double t : hits) {
            probe[ax] = x[ax] + sign * (t + 1e-12);
            if (contains(probe) != inside) return t;
        }
        return std::numeric_limits<double>::infinity();
    }

    nlohmann::json to_json() const {
        nlohmann::json arr = nlohmann::json::array();
        for (const auto& p : parts_) {
            if (const auto* b = std::get_if<Ball>(&p))
                arr.push_back({{"type", "ball"}, {"center", b->center}, {"radius", b->radius}});
            else {
                const auto& bx = std::get<Box>(p);
                arr.push_back({{"type", "box"}, {"lo", bx.lo}, {"hi", bx.hi}});
            }
        }
        return {{"union", arr}};
    }

    /// Accepts {"type":"ball",...}, {"type":"box",...} or {"union":[...]}.
    /// A ball center may be omitted (origin); `dim` fills it in.
    static Region from_json(const nlohmann::json& j, int dim) {
        if (j.contains("union")) {
            Region out;
            for (const auto& part : j.at("union")) out = out.united(from_json(part, dim));
            return out;
        }
        const std::string type = j.at("type").get<std::string>();
        if (type == "ball") {
            std::vector<double> c = j.contains("center") ? j.at("center").get<std::vector<double>>()
                                                         : std::vector<double>(static_cast<std::size_t>(dim), 0.0);
            require(static_cast<int>(c.size()) == dim, "Region: ball center has wrong dimension");
            const double r = j.at("radius").get<double>();
            require(r > 0.0, "Region: ball radius must be positive");
            return ball(std::move(c), r);
        }
        if (type == "box") {
            auto lo = j.at("lo").get<std::vector<double>>();
            auto hi = j.at("hi").get<std::vector<double>>();
            require(static_cast<int>(lo.size()) == dim && lo.size() == hi.size(), "Region: box has wrong dimension");
            return box(std::move(lo), std::move(hi));
        }
        throw DomainError("Region: unknown part type " + type);
    }

private:
    std::vector<Part> parts_;
};

} // namespace qma
