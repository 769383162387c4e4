#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "harmlab/rational.hpp"

namespace harmlab {

/// Group element in the presentation's canonical normal form.
/// Z^d: (x_1..x_d). Heisenberg H3(Z): (x,y,z) upper-triangular coordinates.
/// Lamplighter Z2 wr Z: (position, sorted lit-lamp positions...). Sublattice
/// elements reuse the ambient coordinates. The identity is all-zero in every
/// presentation.
struct Element {
    std::vector<std::int64_t> coords;

    bool operator==(const Element& o) const { return coords == o.coords; }
    bool operator<(const Element& o) const { return coords < o.coords; }
};

struct ElementHash {
    std::size_t operator()(const Element& e) const {
        std::uint64_t h = 1469598103934665603ULL;
        for (auto v : e.coords) {
            h ^= static_cast<std::uint64_t>(v);
            h *= 1099511628211ULL;
        }
        return static_cast<std::size_t>(h);
    }
};

/// Coordinate structure available for the polynomial ansatz.
enum class CoordKind {
    Lattice,     // multiplication is coordinate-wise addition
    Heisenberg,  // (x,y,z)*(a,b,c) = (x+a, y+b, z+c+x*b)
    None,
};

class Group {
public:
    virtual ~Group() = default;

    const std::string& name() const { return name_; }
    /// Growth degree when known, -1 otherwise.
    virtual int growth_degree_hint() const = 0;
    virtual Element identity() const = 0;
    virtual Element multiply(const Element& g, const Element& h) const = 0;
    virtual Element invert(const Element& g) const = 0;
    /// Symmetric generating set, identity included, in canonical order.
    const std::vector<Element>& generators() const { return generators_; }
    /// Largest radius ball enumeration will attempt.
    virtual int radius_cap() const { return 4096; }
    virtual CoordKind coord_kind() const { return CoordKind::None; }

protected:
    std::string name_;
    std::vector<Element> generators_;
    void check_arity(const Element& g) const;
    std::size_t arity_ = 0;
};

std::shared_ptr<const Group> make_zd(int d);
std::shared_ptr<const Group> make_heisenberg();
std::shared_ptr<const Group> make_lamplighter();
std::shared_ptr<const Group> make_sublattice(std::shared_ptr<const Group> ambient,
                                             const std::vector<std::vector<std::int64_t>>& basis);

/// Group selection by name: "Z^d:d=2" (also "Z"), "heisenberg", "lamplighter",
/// "sublattice:Z^2:basis=[[2,0],[0,1]]".
std::shared_ptr<const Group> make_group(const std::string& spec);

/// Word-metric ball around `center`, complete and duplicate-free, in
/// BFS-then-lexicographic order. point_weight is the Haar normalization
/// 1/|S| so that m(S) = 1.
struct Ball {
    const Group* group = nullptr;
    Element center;
    int radius = 0;
    std::vector<Element> points;
    std::vector<int> dist;
    std::vector<std::size_t> shell_start;  // shell_start[r] = first index at distance r
    double point_weight = 1.0;
    Rat point_weight_exact = 1;
    std::unordered_map<Element, int, ElementHash> index;

    int find(const Element& g) const {
        auto it = index.find(g);
        return it == index.end() ? -1 : it->second;
    }
    /// |B(r)| in counting measure, r <= radius.
    std::size_t count(int r) const;
    /// m(B(r)) in normalized Haar units.
    double haar(int r) const { return static_cast<double>(count(r)) * point_weight; }
};

using BallPtr = std::shared_ptr<const Ball>;

BallPtr enumerate_ball(const Group& G, const Element& center, int R,
                       std::size_t point_budget = 2'000'000);
inline BallPtr enumerate_ball(const Group& G, int R) {
    return enumerate_ball(G, G.identity(), R);
}

/// BFS distance from the identity. Throws ResourceError if `x` is not found
/// within `cap` (non-generating S or the cap is too small).
int word_length(const Group& G, const Element& x, int cap = -1);

struct DoublingReport {
    std::vector<std::size_t> growth;  // |B(1)| .. |B(R_max)|
    Rat D = 1;                        // max over 2r <= R_max of |B(2r)|/|B(r)|
    int argmax_radius = 0;
    std::vector<double> ratios;       // |B(2r)|/|B(r)| for 2r <= R_max
    double D_double() const { return to_double(D); }
};

DoublingReport doubling_constant(const Group& G, int R_max);

} // namespace harmlab
