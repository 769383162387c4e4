#include "harmlab/group.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>

#include "harmlab/errors.hpp"

namespace harmlab {

void Group::check_arity(const Element& g) const {
    if (g.coords.size() != arity_ && arity_ != 0)
        throw UsageError("element arity " + std::to_string(g.coords.size()) +
                         " does not match presentation '" + name_ + "'");
}

namespace {

class ZdGroup final : public Group {
public:
    explicit ZdGroup(int d) : d_(d) {
        if (d < 1 || d > 8) throw UsageError("Z^d supports 1 <= d <= 8");
        name_ = "Z^d:d=" + std::to_string(d);
        arity_ = static_cast<std::size_t>(d);
        generators_.push_back(identity());
        for (int i = 0; i < d; ++i) {
            Element e = identity();
            e.coords[i] = 1;
            generators_.push_back(e);
            e.coords[i] = -1;
            generators_.push_back(e);
        }
        std::sort(generators_.begin(), generators_.end());
    }
    int growth_degree_hint() const override { return d_; }
    Element identity() const override {
        return Element{std::vector<std::int64_t>(d_, 0)};
    }
    Element multiply(const Element& g, const Element& h) const override {
        check_arity(g);
        check_arity(h);
        Element r = g;
        for (int i = 0; i < d_; ++i) r.coords[i] += h.coords[i];
        return r;
    }
    Element invert(const Element& g) const override {
        check_arity(g);
        Element r = g;
        for (auto& c : r.coords) c = -c;
        return r;
    }
    CoordKind coord_kind() const override { return CoordKind::Lattice; }

private:
    int d_;
};

class HeisenbergGroup final : public Group {
public:
    HeisenbergGroup() {
        name_ = "heisenberg";
        arity_ = 3;
        generators_.push_back(identity());
        generators_.push_back(Element{{1, 0, 0}});
        generators_.push_back(Element{{-1, 0, 0}});
        generators_.push_back(Element{{0, 1, 0}});
        generators_.push_back(Element{{0, -1, 0}});
        std::sort(generators_.begin(), generators_.end());
    }
    int growth_degree_hint() const override { return 4; }
    Element identity() const override { return Element{{0, 0, 0}}; }
    Element multiply(const Element& g, const Element& h) const override {
        check_arity(g);
        check_arity(h);
        // (x,y,z)*(a,b,c) = (x+a, y+b, z+c+x*b): product of unitriangular matrices
        return Element{{g.coords[0] + h.coords[0], g.coords[1] + h.coords[1],
                        g.coords[2] + h.coords[2] + g.coords[0] * h.coords[1]}};
    }
    Element invert(const Element& g) const override {
        check_arity(g);
        return Element{{-g.coords[0], -g.coords[1],
                        -g.coords[2] + g.coords[0] * g.coords[1]}};
    }
    int radius_cap() const override { return 64; }
    CoordKind coord_kind() const override { return CoordKind::Heisenberg; }
};

// Z2 wr Z with generators t^{+-1} (translation) and sigma (toggle the lamp at
// the current position). Exponential growth; included as a negative control,
// hence the small default cap.
class LamplighterGroup final : public Group {
public:
    LamplighterGroup() {
        name_ = "lamplighter";
        generators_.push_back(identity());
        generators_.push_back(Element{{1}});    // t
        generators_.push_back(Element{{-1}});   // t^-1
        generators_.push_back(Element{{0, 0}}); // sigma: lamp at 0, position 0
        std::sort(generators_.begin(), generators_.end());
    }
    int growth_degree_hint() const override { return -1; }
    Element identity() const override { return Element{{0}}; }
    Element multiply(const Element& g, const Element& h) const override {
        const std::int64_t p = g.coords[0], q = h.coords[0];
        std::set<std::int64_t> lamps(g.coords.begin() + 1, g.coords.end());
        for (std::size_t i = 1; i < h.coords.size(); ++i) {
            const std::int64_t shifted = h.coords[i] + p;
            auto it = lamps.find(shifted);
            if (it == lamps.end())
                lamps.insert(shifted);
            else
                lamps.erase(it);
        }
        Element r{{p + q}};
        r.coords.insert(r.coords.end(), lamps.begin(), lamps.end());
        return r;
    }
    Element invert(const Element& g) const override {
        const std::int64_t p = g.coords[0];
        Element r{{-p}};
        std::vector<std::int64_t> lamps(g.coords.begin() + 1, g.coords.end());
        for (auto& l : lamps) l -= p;
        std::sort(lamps.begin(), lamps.end());
        r.coords.insert(r.coords.end(), lamps.begin(), lamps.end());
        return r;
    }
    int radius_cap() const override { return 12; }
};

// Finite-index sublattice of Z^d. Elements keep the ambient coordinates; the
// word metric comes from the +-basis generating set.
class SublatticeGroup final : public Group {
public:
    SublatticeGroup(std::shared_ptr<const Group> ambient,
                    std::vector<std::vector<std::int64_t>> basis)
        : ambient_(std::move(ambient)), basis_(std::move(basis)) {
        if (ambient_->coord_kind() != CoordKind::Lattice)
            throw UsageError("sublattice requires a Z^d ambient group");
        d_ = static_cast<int>(ambient_->identity().coords.size());
        if (basis_.size() != static_cast<std::size_t>(d_))
            throw UsageError("sublattice basis must have d vectors");
        for (const auto& v : basis_)
            if (v.size() != static_cast<std::size_t>(d_))
                throw UsageError("sublattice basis vector has wrong arity");
        index_ = std::llabs(det());
        if (index_ == 0) throw UsageError("sublattice basis is singular");
        arity_ = static_cast<std::size_t>(d_);
        std::ostringstream os;
        os << "sublattice:" << ambient_->name() << ":index=" << index_;
        name_ = os.str();
        generators_.push_back(identity());
        for (const auto& v : basis_) {
            generators_.push_back(Element{v});
            Element n{v};
            for (auto& c : n.coords) c = -c;
            generators_.push_back(n);
        }
        std::sort(generators_.begin(), generators_.end());
        generators_.erase(std::unique(generators_.begin(), generators_.end(),
                                      [](const Element& a, const Element& b) {
                                          return a.coords == b.coords;
                                      }),
                          generators_.end());
    }
    int growth_degree_hint() const override { return d_; }
    Element identity() const override {
        return Element{std::vector<std::int64_t>(d_, 0)};
    }
    Element multiply(const Element& g, const Element& h) const override {
        return ambient_->multiply(g, h);
    }
    Element invert(const Element& g) const override { return ambient_->invert(g); }
    CoordKind coord_kind() const override { return CoordKind::Lattice; }

    std::int64_t lattice_index() const { return index_; }
    const Group& ambient() const { return *ambient_; }
    const std::vector<std::vector<std::int64_t>>& basis() const { return basis_; }

    /// Membership via exact integer elimination on the basis matrix.
    bool contains(const Element& x) const {
        std::vector<std::vector<Rat>> m(d_, std::vector<Rat>(d_ + 1));
        for (int i = 0; i < d_; ++i) {
            for (int j = 0; j < d_; ++j) m[i][j] = basis_[j][i]; // columns are basis vectors
            m[i][d_] = x.coords[i];
        }
        for (int col = 0; col < d_; ++col) {
            int piv = -1;
            for (int r = col; r < d_; ++r)
                if (m[r][col] != 0) { piv = r; break; }
            if (piv < 0) return false;
            std::swap(m[col], m[piv]);
            for (int r = 0; r < d_; ++r) {
                if (r == col || m[r][col] == 0) continue;
                Rat f = m[r][col] / m[col][col];
                for (int c = col; c <= d_; ++c) m[r][c] -= f * m[col][c];
            }
        }
        for (int i = 0; i < d_; ++i) {
            Rat t = m[i][d_] / m[i][i];
            if (denominator(t) != 1) return false;
        }
        return true;
    }

private:
    std::int64_t det() const {
        // Bareiss would be overkill at d <= 8; rational elimination is exact.
        std::vector<std::vector<Rat>> m(d_, std::vector<Rat>(d_));
        for (int i = 0; i < d_; ++i)
            for (int j = 0; j < d_; ++j) m[i][j] = basis_[i][j];
        Rat det = 1;
        for (int col = 0; col < d_; ++col) {
            int piv = -1;
            for (int r = col; r < d_; ++r)
                if (m[r][col] != 0) { piv = r; break; }
            if (piv < 0) return 0;
            if (piv != col) { std::swap(m[col], m[piv]); det = -det; }
            det *= m[col][col];
            for (int r = col + 1; r < d_; ++r) {
                Rat f = m[r][col] / m[col][col];
                for (int c = col; c < d_; ++c) m[r][c] -= f * m[col][c];
            }
        }
        return det.convert_to<std::int64_t>();
    }

    std::shared_ptr<const Group> ambient_;
    std::vector<std::vector<std::int64_t>> basis_;
    int d_;
    std::int64_t index_;
};

std::vector<std::vector<std::int64_t>> parse_basis(const std::string& s) {
    // [[2,0],[0,1]]
    std::vector<std::vector<std::int64_t>> basis;
    std::vector<std::int64_t> cur;
    std::string num;
    int depth = 0;
    auto flush = [&] {
        if (!num.empty()) { cur.push_back(std::stoll(num)); num.clear(); }
    };
    for (char c : s) {
        if (c == '[') { ++depth; }
        else if (c == ']') {
            flush();
            if (depth == 2) { basis.push_back(cur); cur.clear(); }
            --depth;
        } else if (c == ',') flush();
        else if (c == '-' || (c >= '0' && c <= '9')) num.push_back(c);
        else if (c != ' ')
            throw UsageError("cannot parse basis '" + s + "'");
    }
    if (basis.empty()) throw UsageError("empty basis in '" + s + "'");
    return basis;
}

} // namespace

std::shared_ptr<const Group> make_zd(int d) { return std::make_shared<ZdGroup>(d); }
std::shared_ptr<const Group> make_heisenberg() { return std::make_shared<HeisenbergGroup>(); }
std::shared_ptr<const Group> make_lamplighter() { return std::make_shared<LamplighterGroup>(); }
std::shared_ptr<const Group> make_sublattice(
    std::shared_ptr<const Group> ambient,
    const std::vector<std::vector<std::int64_t>>& basis) {
    return std::make_shared<SublatticeGroup>(std::move(ambient), basis);
}

std::shared_ptr<const Group> make_group(const std::string& spec) {
    if (spec == "Z" || spec == "Z^1") return make_zd(1);
    if (spec == "Z^2") return make_zd(2);
    if (spec == "Z^3") return make_zd(3);
    if (spec.rfind("Z^d:d=", 0) == 0) return make_zd(std::stoi(spec.substr(6)));
    if (spec == "heisenberg") return make_heisenberg();
    if (spec == "lamplighter") return make_lamplighter();
    if (spec.rfind("sublattice:", 0) == 0) {
        const std::string rest = spec.substr(11);
        auto colon = rest.find(':');
        if (colon == std::string::npos)
            throw UsageError("sublattice spec needs ambient and basis: " + spec);
        auto ambient = make_group(rest.substr(0, colon));
        std::string tail = rest.substr(colon + 1);
        // accept "index=N," prefix as documentation; the basis determines the index
        auto bpos = tail.find("basis=");
        if (bpos == std::string::npos)
            throw UsageError("sublattice spec needs basis=[[..]]: " + spec);
        return make_sublattice(ambient, parse_basis(tail.substr(bpos + 6)));
    }
    throw UsageError("unknown group spec '" + spec + "'");
}

std::size_t Ball::count(int r) const {
    if (r < 0) return 0;
    if (r >= radius) return points.size();
    return shell_start[static_cast<std::size_t>(r) + 1];
}

BallPtr enumerate_ball(const Group& G, const Element& center, int R,
                       std::size_t point_budget) {
    if (R < 0) throw UsageError("ball radius must be >= 0");
    if (R > G.radius_cap())
        throw ResourceError("radius " + std::to_string(R) + " exceeds cap " +
                                std::to_string(G.radius_cap()) + " for " + G.name(),
                            G.radius_cap());
    auto ball = std::make_shared<Ball>();
    ball->group = &G;
    ball->center = center;
    ball->radius = R;
    ball->point_weight_exact = Rat(1, static_cast<long>(G.generators().size()));
    ball->point_weight = to_double(ball->point_weight_exact);

    ball->points.push_back(center);
    ball->dist.push_back(0);
    ball->index.emplace(center, 0);
    ball->shell_start.assign(1, 0);

    std::vector<Element> frontier{center};
    for (int r = 1; r <= R; ++r) {
        ball->shell_start.push_back(ball->points.size());
        std::vector<Element> next;
        for (const auto& x : frontier) {
            for (const auto& s : G.generators()) {
                Element y = G.multiply(x, s);
                if (ball->index.find(y) == ball->index.end() &&
                    !(y == center)) {
                    // mark now to avoid duplicates across the frontier
                    ball->index.emplace(y, -1);
                    next.push_back(std::move(y));
                }
            }
        }
        std::sort(next.begin(), next.end());
        for (auto& y : next) {
            ball->index[y] = static_cast<int>(ball->points.size());
            ball->points.push_back(std::move(y));
            ball->dist.push_back(r);
        }
        if (ball->points.size() > point_budget)
            throw ResourceError("ball enumeration exceeded point budget at radius " +
                                    std::to_string(r),
                                r - 1);
        frontier.assign(ball->points.begin() + static_cast<std::ptrdiff_t>(
                                                   ball->shell_start.back()),
                        ball->points.end());
    }
    ball->shell_start.push_back(ball->points.size());
    return ball;
}

int word_length(const Group& G, const Element& x, int cap) {
    if (cap < 0) cap = G.radius_cap();
    if (x == G.identity()) return 0;
    std::set<Element> seen{G.identity()};
    std::vector<Element> frontier{G.identity()};
    for (int r = 1; r <= cap; ++r) {
        std::vector<Element> next;
        for (const auto& g : frontier)
            for (const auto& s : G.generators()) {
                Element y = G.multiply(g, s);
                if (seen.insert(y).second) {
                    if (y == x) return r;
                    next.push_back(std::move(y));
                }
            }
        frontier = std::move(next);
        if (frontier.empty()) break;
    }
    throw ResourceError("element not reached within radius cap " + std::to_string(cap),
                        cap);
}

DoublingReport doubling_constant(const Group& G, int R_max) {
    if (R_max < 2) throw UsageError("doubling_constant needs R_max >= 2");
    auto ball = enumerate_ball(G, G.identity(), R_max);
    DoublingReport rep;
    for (int r = 1; r <= R_max; ++r) rep.growth.push_back(ball->count(r));
    for (int r = 1; 2 * r <= R_max; ++r) {
        Rat ratio(static_cast<long long>(ball->count(2 * r)),
                  static_cast<long long>(ball->count(r)));
        rep.ratios.push_back(to_double(ratio));
        if (ratio > rep.D) {
            rep.D = ratio;
            rep.argmax_radius = r;
        }
    }
    return rep;
}

Rat parse_rational(const std::string& s) {
    auto slash = s.find('/');
    if (slash == std::string::npos) {
        // allow decimals like "0.25"
        auto dot = s.find('.');
        if (dot == std::string::npos) return Rat(BigInt(s));
        std::string digits = s.substr(0, dot) + s.substr(dot + 1);
        BigInt den = 1;
        for (std::size_t i = 0; i < s.size() - dot - 1; ++i) den *= 10;
        return Rat(BigInt(digits), den);
    }
    return Rat(BigInt(s.substr(0, slash)), BigInt(s.substr(slash + 1)));
}

} // namespace harmlab
