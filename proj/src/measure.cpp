#include "harmlab/measure.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <set>

#include "harmlab/errors.hpp"
#include "harmlab/parallel.hpp"
#include "harmlab/rng.hpp"

namespace harmlab {

StepMeasure::StepMeasure(const Group& G, std::vector<Element> support,
                         std::vector<double> masses,
                         std::optional<std::vector<Rat>> exact,
                         std::optional<Truncation> trunc)
    : group_(&G),
      support_(std::move(support)),
      masses_(std::move(masses)),
      exact_(std::move(exact)),
      truncation_(std::move(trunc)) {
    if (support_.size() != masses_.size())
        throw UsageError("measure support/mass size mismatch");
    if (exact_ && exact_->size() != support_.size())
        throw UsageError("measure exact mass size mismatch");
    // canonical support order
    std::vector<std::size_t> perm(support_.size());
    std::iota(perm.begin(), perm.end(), 0);
    std::sort(perm.begin(), perm.end(), [&](std::size_t a, std::size_t b) {
        return support_[a] < support_[b];
    });
    std::vector<Element> s2(support_.size());
    std::vector<double> m2(masses_.size());
    std::optional<std::vector<Rat>> e2;
    if (exact_) e2.emplace(exact_->size());
    for (std::size_t i = 0; i < perm.size(); ++i) {
        s2[i] = std::move(support_[perm[i]]);
        m2[i] = masses_[perm[i]];
        if (exact_) (*e2)[i] = std::move((*exact_)[perm[i]]);
    }
    support_ = std::move(s2);
    masses_ = std::move(m2);
    exact_ = std::move(e2);
    for (double m : masses_) {
        if (m <= 0) throw UsageError("measure masses must be positive");
        total_ += m;
    }
    const double budget = 1.0 - (truncation_ ? truncation_->discarded_mass : 0.0);
    if (std::abs(total_ - budget) > 1e-12)
        throw UsageError("measure masses and discarded mass do not sum to 1");
    for (const auto& g : support_) reach_ = std::max(reach_, word_length(G, g));
}

double StepMeasure::mass_of(const Element& g) const {
    int i = find(g);
    return i < 0 ? 0.0 : masses_[static_cast<std::size_t>(i)];
}

int StepMeasure::find(const Element& g) const {
    auto it = std::lower_bound(support_.begin(), support_.end(), g);
    if (it == support_.end() || !(*it == g)) return -1;
    return static_cast<int>(it - support_.begin());
}

StepMeasure uniform_on_generators(const Group& G) {
    const auto& S = G.generators();
    const Rat w(1, static_cast<long>(S.size()));
    std::vector<Rat> exact(S.size(), w);
    std::vector<double> masses(S.size(), to_double(w));
    return StepMeasure(G, S, std::move(masses), std::move(exact));
}

StepMeasure uniform_on_generators_no_identity(const Group& G) {
    std::vector<Element> supp;
    for (const auto& s : G.generators())
        if (!(s == G.identity())) supp.push_back(s);
    if (supp.empty()) throw UsageError("generating set has no non-identity element");
    const Rat w(1, static_cast<long>(supp.size()));
    std::vector<Rat> exact(supp.size(), w);
    std::vector<double> masses(supp.size(), to_double(w));
    return StepMeasure(G, std::move(supp), std::move(masses), std::move(exact));
}

StepMeasure geometric_tail_measure(const Group& G, double c, double mass_tol) {
    if (c <= 0) throw UsageError("geometric tail rate must be positive");
    if (mass_tol <= 0 || mass_tol >= 1) throw UsageError("mass_tol must be in (0,1)");
    // Enumerate shells until the unnormalized weight is negligible, so the
    // normalizer is known to machine precision.
    const int cap = G.radius_cap();
    BallPtr ball;
    int R_enum = std::min(cap, 8);
    double Z = 0;
    std::vector<double> shell_weight;
    while (true) {
        ball = enumerate_ball(G, G.identity(), R_enum);
        shell_weight.clear();
        Z = 0;
        for (int r = 0; r <= R_enum; ++r) {
            const auto shell =
                static_cast<double>(ball->count(r) - (r ? ball->count(r - 1) : 0));
            shell_weight.push_back(shell * std::exp(-c * r));
            Z += shell_weight.back();
        }
        const bool converged =
            R_enum >= 4 && shell_weight.back() < 1e-18 * Z &&
            shell_weight[shell_weight.size() - 2] < 1e-18 * Z;
        if (converged) break;
        if (R_enum == cap) {
            // exponential growth can beat the decay; detect divergence
            if (shell_weight.back() > shell_weight[shell_weight.size() - 2])
                throw ResourceError(
                    "geometric tail does not converge under the radius cap for " +
                        G.name(),
                    cap);
            break;
        }
        R_enum = std::min(cap, R_enum * 2);
    }
    // smallest R_t with tail <= mass_tol
    std::vector<double> tail(shell_weight.size() + 1, 0.0);
    for (int r = static_cast<int>(shell_weight.size()) - 1; r >= 0; --r)
        tail[r] = tail[r + 1] + shell_weight[static_cast<std::size_t>(r)];
    int R_t = -1;
    for (std::size_t r = 0; r + 1 < tail.size(); ++r)
        if (tail[r + 1] / Z <= mass_tol) {
            R_t = static_cast<int>(r);
            break;
        }
    if (R_t < 0)
        throw ResourceError("mass_tol unreachable under radius cap for " + G.name(),
                            R_enum);

    Truncation trunc;
    trunc.radius = R_t;
    trunc.discarded_mass = tail[static_cast<std::size_t>(R_t) + 1] / Z;
    trunc.tail_rate = c;
    for (std::size_t r = static_cast<std::size_t>(R_t) + 1; r < shell_weight.size();
         ++r) {
        const double m = shell_weight[r] / Z;
        if (m < 1e-300) break;
        trunc.tail_profile.emplace_back(static_cast<int>(r), m);
    }

    std::vector<Element> supp;
    std::vector<double> masses;
    for (std::size_t i = 0; i < ball->points.size(); ++i) {
        if (ball->dist[i] > R_t) break;
        supp.push_back(ball->points[i]);
        masses.push_back(std::exp(-c * ball->dist[i]) / Z);
    }
    return StepMeasure(G, std::move(supp), std::move(masses), std::nullopt, trunc);
}

StepMeasure convolution_power(const StepMeasure& mu, int n,
                              std::size_t support_budget) {
    if (n < 1) throw UsageError("convolution power must be >= 1");
    const Group& G = mu.group();
    std::map<Element, double> acc;
    std::map<Element, Rat> acc_exact;
    const bool exact = mu.is_exact();
    for (std::size_t i = 0; i < mu.support().size(); ++i) {
        acc[mu.support()[i]] = mu.masses()[i];
        if (exact) acc_exact[mu.support()[i]] = (*mu.exact_masses())[i];
    }
    for (int step = 1; step < n; ++step) {
        std::map<Element, double> next;
        std::map<Element, Rat> next_exact;
        for (const auto& [g, mg] : acc) {
            for (std::size_t j = 0; j < mu.support().size(); ++j) {
                Element h = G.multiply(g, mu.support()[j]);
                next[h] += mg * mu.masses()[j];
                if (exact) next_exact[h] += acc_exact[g] * (*mu.exact_masses())[j];
            }
        }
        if (next.size() > support_budget)
            throw ResourceError("convolution support exceeded budget", step);
        acc = std::move(next);
        acc_exact = std::move(next_exact);
    }
    std::vector<Element> supp;
    std::vector<double> masses;
    std::optional<std::vector<Rat>> ex;
    if (exact) ex.emplace();
    for (auto& [g, m] : acc) {
        supp.push_back(g);
        masses.push_back(exact ? to_double(acc_exact[g]) : m);
        if (exact) ex->push_back(acc_exact[g]);
    }
    std::optional<Truncation> trunc;
    if (mu.truncation()) {
        trunc = *mu.truncation();
        trunc->radius = mu.truncation()->radius * n;
        trunc->discarded_mass =
            1.0 - std::pow(1.0 - mu.truncation()->discarded_mass, n);
        trunc->tail_profile.clear();  // profile is not tracked through convolution
        // renormalize doubles onto the mass budget to keep the sum identity
        double tot = 0;
        for (double m : masses) tot += m;
        const double budget = 1.0 - trunc->discarded_mass;
        for (auto& m : masses) m *= budget / tot;
    }
    return StepMeasure(G, std::move(supp), std::move(masses), std::move(ex), trunc);
}

CourteousReport check_courteous(const Group& G, const StepMeasure& mu) {
    CourteousReport rep;
    rep.exact_mode = mu.is_exact();
    rep.compact_support = !mu.truncation().has_value();

    // symmetry: sum |mass(x) - mass(x^-1)|
    if (mu.is_exact()) {
        Rat defect = 0;
        for (std::size_t i = 0; i < mu.support().size(); ++i) {
            Element inv = G.invert(mu.support()[i]);
            int j = mu.find(inv);
            Rat other = j < 0 ? Rat(0) : (*mu.exact_masses())[static_cast<std::size_t>(j)];
            defect += abs((*mu.exact_masses())[i] - other);
        }
        rep.symmetry_defect = to_double(defect);
        rep.symmetric = defect == 0;
    } else {
        double defect = 0;
        for (std::size_t i = 0; i < mu.support().size(); ++i) {
            Element inv = G.invert(mu.support()[i]);
            defect += std::abs(mu.masses()[i] - mu.mass_of(inv));
        }
        rep.symmetry_defect = defect;
        rep.symmetric = defect < 1e-12;
    }

    // adapted: smallest n with union of supp^1..supp^n covering S
    {
        std::set<Element> covered;
        std::set<Element> current{G.identity()};
        std::set<Element> target(G.generators().begin(), G.generators().end());
        target.erase(G.identity());
        const int n_cap = 6;
        for (int n = 1; n <= n_cap && !rep.adapted_radius; ++n) {
            std::set<Element> next;
            for (const auto& g : current)
                for (const auto& s : mu.support()) next.insert(G.multiply(g, s));
            current = std::move(next);
            covered.insert(current.begin(), current.end());
            bool all = true;
            for (const auto& s : target)
                if (!covered.count(s)) { all = false; break; }
            if (all) rep.adapted_radius = n;
            if (covered.size() > 200'000) break;
        }
    }

    // second moment and exact tail sums T(t) = Pr[|x| > t]
    std::vector<int> lens(mu.support().size());
    for (std::size_t i = 0; i < lens.size(); ++i)
        lens[i] = word_length(G, mu.support()[i]);
    const int maxlen = lens.empty() ? 0 : *std::max_element(lens.begin(), lens.end());
    std::vector<double> tail(static_cast<std::size_t>(maxlen) + 1,
                             mu.discarded_mass());
    for (std::size_t i = 0; i < lens.size(); ++i) {
        rep.second_moment += mu.masses()[i] * lens[i] * lens[i];
        for (int t = 0; t < lens[i]; ++t) tail[static_cast<std::size_t>(t)] += mu.masses()[i];
    }
    // least-squares fit of log T(t) ~ a - c t over strictly positive tails
    {
        std::vector<double> xs, ys;
        for (std::size_t t = 0; t < tail.size(); ++t)
            if (tail[t] > 0) {
                xs.push_back(static_cast<double>(t));
                ys.push_back(std::log(tail[t]));
            }
        if (xs.size() >= 3) {
            double sx = 0, sy = 0, sxx = 0, sxy = 0;
            for (std::size_t i = 0; i < xs.size(); ++i) {
                sx += xs[i]; sy += ys[i]; sxx += xs[i] * xs[i]; sxy += xs[i] * ys[i];
            }
            const double n = static_cast<double>(xs.size());
            const double slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
            const double intercept = (sy - slope * sx) / n;
            double rss = 0;
            for (std::size_t i = 0; i < xs.size(); ++i) {
                const double e = ys[i] - (intercept + slope * xs[i]);
                rss += e * e;
            }
            rep.tail_fit = TailFit{-slope, std::sqrt(rss / n)};
        }
    }

    // density floor on S^n, n in {1,2}: smallest point density mass*|S|
    for (int n = 1; n <= 2; ++n) {
        auto ball = enumerate_ball(G, G.identity(), n);
        double floor_c = std::numeric_limits<double>::infinity();
        for (const auto& x : ball->points)
            floor_c = std::min(floor_c,
                               mu.mass_of(x) * static_cast<double>(G.generators().size()));
        rep.density_floor[static_cast<std::size_t>(n - 1)] =
            DensityFloor{n, std::isfinite(floor_c) ? floor_c : 0.0};
    }
    return rep;
}

Subgroup::Subgroup(std::shared_ptr<const Group> ambient,
                   std::vector<std::vector<std::int64_t>> basis)
    : ambient_(std::move(ambient)), basis_(std::move(basis)) {
    as_group_ = make_sublattice(ambient_, basis_);
    // recover the index from the sublattice name (computed from the det there)
    auto pos = as_group_->name().rfind("index=");
    index_ = std::stoll(as_group_->name().substr(pos + 6));
}

bool Subgroup::contains(const Element& x) const {
    // delegate to the sublattice membership test
    const auto* sub = as_group_.get();
    // SublatticeGroup::contains is not on the Group interface; reimplement via
    // rational elimination here to keep Subgroup self-contained.
    const int d = static_cast<int>(x.coords.size());
    std::vector<std::vector<Rat>> m(static_cast<std::size_t>(d),
                                    std::vector<Rat>(static_cast<std::size_t>(d) + 1));
    for (int i = 0; i < d; ++i) {
        for (int j = 0; j < d; ++j) m[i][j] = basis_[static_cast<std::size_t>(j)][static_cast<std::size_t>(i)];
        m[i][static_cast<std::size_t>(d)] = x.coords[static_cast<std::size_t>(i)];
    }
    for (int col = 0; col < d; ++col) {
        int piv = -1;
        for (int r = col; r < d; ++r)
            if (m[static_cast<std::size_t>(r)][static_cast<std::size_t>(col)] != 0) { piv = r; break; }
        if (piv < 0) return false;
        std::swap(m[static_cast<std::size_t>(col)], m[static_cast<std::size_t>(piv)]);
        for (int r = 0; r < d; ++r) {
            if (r == col) continue;
            auto& row = m[static_cast<std::size_t>(r)];
            const auto& prow = m[static_cast<std::size_t>(col)];
            if (row[static_cast<std::size_t>(col)] == 0) continue;
            Rat f = row[static_cast<std::size_t>(col)] / prow[static_cast<std::size_t>(col)];
            for (int c = col; c <= d; ++c)
                row[static_cast<std::size_t>(c)] -= f * prow[static_cast<std::size_t>(c)];
        }
    }
    for (int i = 0; i < d; ++i) {
        Rat t = m[static_cast<std::size_t>(i)][static_cast<std::size_t>(d)] /
                m[static_cast<std::size_t>(i)][static_cast<std::size_t>(i)];
        if (denominator(t) != 1) return false;
    }
    (void)sub;
    return true;
}

std::int64_t Subgroup::verify_index_by_coset_enumeration(std::int64_t cap) const {
    // BFS over ambient generators, reducing each element to a coset signature
    // by subtracting its projection onto the sublattice (rational solve, floor).
    std::set<std::vector<std::int64_t>> cosets;
    std::set<Element> seen;
    std::vector<Element> frontier{ambient_->identity()};
    seen.insert(ambient_->identity());
    auto signature = [&](const Element& x) {
        // coset rep: x mod basis lattice via rational coordinates, floored
        const int d = static_cast<int>(x.coords.size());
        std::vector<std::vector<Rat>> m(static_cast<std::size_t>(d),
                                        std::vector<Rat>(static_cast<std::size_t>(d) + 1));
        for (int i = 0; i < d; ++i) {
            for (int j = 0; j < d; ++j)
                m[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] =
                    basis_[static_cast<std::size_t>(j)][static_cast<std::size_t>(i)];
            m[static_cast<std::size_t>(i)][static_cast<std::size_t>(d)] = x.coords[static_cast<std::size_t>(i)];
        }
        for (int col = 0; col < d; ++col) {
            int piv = -1;
            for (int r = col; r < d; ++r)
                if (m[static_cast<std::size_t>(r)][static_cast<std::size_t>(col)] != 0) { piv = r; break; }
            std::swap(m[static_cast<std::size_t>(col)], m[static_cast<std::size_t>(piv)]);
            for (int r = 0; r < d; ++r) {
                if (r == col || m[static_cast<std::size_t>(r)][static_cast<std::size_t>(col)] == 0) continue;
                Rat f = m[static_cast<std::size_t>(r)][static_cast<std::size_t>(col)] /
                        m[static_cast<std::size_t>(col)][static_cast<std::size_t>(col)];
                for (int c = col; c <= d; ++c)
                    m[static_cast<std::size_t>(r)][static_cast<std::size_t>(c)] -=
                        f * m[static_cast<std::size_t>(col)][static_cast<std::size_t>(c)];
            }
        }
        std::vector<std::int64_t> frac(static_cast<std::size_t>(d));
        for (int i = 0; i < d; ++i) {
            Rat t = m[static_cast<std::size_t>(i)][static_cast<std::size_t>(d)] /
                    m[static_cast<std::size_t>(i)][static_cast<std::size_t>(i)];
            // fractional part encoded as floor-normalized numerator
            BigInt num = numerator(t), den = denominator(t);
            BigInt q = num / den;
            if (num < 0 && q * den != num) q -= 1;
            Rat f = t - Rat(q);
            frac[static_cast<std::size_t>(i)] =
                static_cast<std::int64_t>((numerator(f) * 1000000 / denominator(f))
                                              .convert_to<std::int64_t>());
        }
        return frac;
    };
    cosets.insert(signature(ambient_->identity()));
    // a ball of radius index()+1 suffices to meet every coset in a lattice
    const int R = static_cast<int>(std::min<std::int64_t>(index_ + 1, 64));
    for (int r = 0; r < R; ++r) {
        std::vector<Element> next;
        for (const auto& g : frontier)
            for (const auto& s : ambient_->generators()) {
                Element y = ambient_->multiply(g, s);
                if (seen.insert(y).second) {
                    cosets.insert(signature(y));
                    next.push_back(std::move(y));
                    if (static_cast<std::int64_t>(seen.size()) > cap)
                        return static_cast<std::int64_t>(cosets.size());
                }
            }
        frontier = std::move(next);
    }
    return static_cast<std::int64_t>(cosets.size());
}

Subgroup make_subgroup(std::shared_ptr<const Group> ambient, const std::string& spec) {
    auto bpos = spec.find("basis=");
    if (bpos == std::string::npos)
        throw UsageError("subgroup spec needs basis=[[..]]: " + spec);
    // reuse the group factory's parser through make_group for consistency
    std::string full = "sublattice:" + ambient->name() + ":" + spec.substr(bpos);
    auto g = make_group(full);
    // extract basis again (cheap, spec strings are tiny)
    std::vector<std::vector<std::int64_t>> basis;
    {
        std::string b = spec.substr(bpos + 6);
        std::vector<std::int64_t> cur;
        std::string num;
        int depth = 0;
        auto flush = [&] {
            if (!num.empty()) { cur.push_back(std::stoll(num)); num.clear(); }
        };
        for (char c : b) {
            if (c == '[') ++depth;
            else if (c == ']') {
                flush();
                if (depth == 2) { basis.push_back(cur); cur.clear(); }
                --depth;
            } else if (c == ',') flush();
            else if (c == '-' || (c >= '0' && c <= '9')) num.push_back(c);
        }
    }
    (void)g;
    return Subgroup(std::move(ambient), std::move(basis));
}

namespace {

// Exact absorbing-chain solve over rationals; only viable for small state
// spaces, which is exactly where the golden tests need exactness.
HittingResult hitting_exact_rational(const Group& G, const Subgroup& H,
                                     const StepMeasure& mu, const Ball& ball,
                                     const HittingOptions& opt) {
    std::vector<int> transient;  // ball indices
    std::vector<int> t_of_ball(ball.points.size(), -1);
    for (std::size_t i = 0; i < ball.points.size(); ++i)
        if (!H.contains(ball.points[i])) {
            t_of_ball[i] = static_cast<int>(transient.size());
            transient.push_back(static_cast<int>(i));
        }
    const int n = static_cast<int>(transient.size());
    const auto& ex = *mu.exact_masses();

    // rows of (I - Q) and absorption targets
    std::vector<std::vector<Rat>> A(static_cast<std::size_t>(n),
                                    std::vector<Rat>(static_cast<std::size_t>(n), 0));
    std::map<Element, Rat> first_step_absorbed;
    std::vector<Rat> init(static_cast<std::size_t>(n), 0);
    std::vector<std::map<Element, Rat>> absorb_row(static_cast<std::size_t>(n));
    Rat escaped_first = 0;
    for (int t = 0; t < n; ++t) {
        A[static_cast<std::size_t>(t)][static_cast<std::size_t>(t)] = 1;
        const Element& x = ball.points[static_cast<std::size_t>(transient[static_cast<std::size_t>(t)])];
        for (std::size_t j = 0; j < mu.support().size(); ++j) {
            Element y = G.multiply(x, mu.support()[j]);
            int bi = ball.find(y);
            if (bi < 0) continue;  // escaped; tracked via the mass deficit
            if (H.contains(y))
                absorb_row[static_cast<std::size_t>(t)][y] += ex[j];
            else
                A[static_cast<std::size_t>(t)][static_cast<std::size_t>(t_of_ball[static_cast<std::size_t>(bi)])] -= ex[j];
        }
    }
    for (std::size_t j = 0; j < mu.support().size(); ++j) {
        const Element& s = mu.support()[j];
        if (H.contains(s)) {
            first_step_absorbed[s] += ex[j];
        } else {
            int bi = ball.find(s);
            if (bi < 0) { escaped_first += ex[j]; continue; }
            init[static_cast<std::size_t>(t_of_ball[static_cast<std::size_t>(bi)])] += ex[j];
        }
    }

    // Solve v^T (I-Q) = init^T, i.e. (I-Q)^T v = init, by Gaussian elimination.
    std::vector<std::vector<Rat>> M(static_cast<std::size_t>(n),
                                    std::vector<Rat>(static_cast<std::size_t>(n) + 1, 0));
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < n; ++j)
            M[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] =
                A[static_cast<std::size_t>(j)][static_cast<std::size_t>(i)];
        M[static_cast<std::size_t>(i)][static_cast<std::size_t>(n)] = init[static_cast<std::size_t>(i)];
    }
    for (int col = 0; col < n; ++col) {
        int piv = -1;
        for (int r = col; r < n; ++r)
            if (M[static_cast<std::size_t>(r)][static_cast<std::size_t>(col)] != 0) { piv = r; break; }
        if (piv < 0) throw PreconditionError("absorbing chain is singular");
        std::swap(M[static_cast<std::size_t>(col)], M[static_cast<std::size_t>(piv)]);
        for (int r = 0; r < n; ++r) {
            if (r == col || M[static_cast<std::size_t>(r)][static_cast<std::size_t>(col)] == 0) continue;
            Rat f = M[static_cast<std::size_t>(r)][static_cast<std::size_t>(col)] /
                    M[static_cast<std::size_t>(col)][static_cast<std::size_t>(col)];
            for (int c = col; c <= n; ++c)
                M[static_cast<std::size_t>(r)][static_cast<std::size_t>(c)] -=
                    f * M[static_cast<std::size_t>(col)][static_cast<std::size_t>(c)];
        }
    }
    std::vector<Rat> occupancy(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i)
        occupancy[static_cast<std::size_t>(i)] =
            M[static_cast<std::size_t>(i)][static_cast<std::size_t>(n)] /
            M[static_cast<std::size_t>(i)][static_cast<std::size_t>(i)];

    std::map<Element, Rat> law = first_step_absorbed;
    for (int t = 0; t < n; ++t)
        for (const auto& [h, m] : absorb_row[static_cast<std::size_t>(t)])
            law[h] += occupancy[static_cast<std::size_t>(t)] * m;

    Rat total = 0;
    for (const auto& [h, m] : law) total += m;
    Rat escaped = 1 - total;

    HittingResult res;
    res.exact_arithmetic = true;
    res.escaped_mass = to_double(escaped);
    if (res.escaped_mass > opt.escape_tolerance)
        throw ResourceError("hitting truncation too small: escaped mass " +
                                std::to_string(res.escaped_mass),
                            opt.trunc_radius);
    std::vector<Element> supp;
    std::vector<double> masses;
    std::vector<Rat> exact;
    for (auto& [h, m] : law) {
        if (m == 0) continue;
        supp.push_back(h);
        masses.push_back(to_double(m / total));
        exact.push_back(m / total);
    }
    res.measure = StepMeasure(*H.as_group(), std::move(supp), std::move(masses),
                              std::move(exact));
    return res;
}

HittingResult hitting_exact_float(const Group& G, const Subgroup& H,
                                  const StepMeasure& mu, const Ball& ball,
                                  const HittingOptions& opt) {
    std::vector<int> transient;
    std::vector<int> t_of_ball(ball.points.size(), -1);
    for (std::size_t i = 0; i < ball.points.size(); ++i)
        if (!H.contains(ball.points[i])) {
            t_of_ball[i] = static_cast<int>(transient.size());
            transient.push_back(static_cast<int>(i));
        }
    const int n = static_cast<int>(transient.size());
    Eigen::MatrixXd A = Eigen::MatrixXd::Identity(n, n);
    Eigen::VectorXd init = Eigen::VectorXd::Zero(n);
    std::vector<std::map<Element, double>> absorb_row(static_cast<std::size_t>(n));
    std::map<Element, double> law;
    for (int t = 0; t < n; ++t) {
        const Element& x = ball.points[static_cast<std::size_t>(transient[static_cast<std::size_t>(t)])];
        for (std::size_t j = 0; j < mu.support().size(); ++j) {
            Element y = G.multiply(x, mu.support()[j]);
            int bi = ball.find(y);
            if (bi < 0) continue;
            if (H.contains(y))
                absorb_row[static_cast<std::size_t>(t)][y] += mu.masses()[j];
            else
                A(t, t_of_ball[static_cast<std::size_t>(bi)]) -= mu.masses()[j];
        }
    }
    for (std::size_t j = 0; j < mu.support().size(); ++j) {
        const Element& s = mu.support()[j];
        if (H.contains(s)) law[s] += mu.masses()[j];
        else {
            int bi = ball.find(s);
            if (bi >= 0) init(t_of_ball[static_cast<std::size_t>(bi)]) += mu.masses()[j];
        }
    }
    Eigen::VectorXd occupancy = A.transpose().partialPivLu().solve(init);
    for (int t = 0; t < n; ++t)
        for (const auto& [h, m] : absorb_row[static_cast<std::size_t>(t)])
            law[h] += occupancy(t) * m;

    double total = 0;
    for (const auto& [h, m] : law) total += m;
    HittingResult res;
    res.escaped_mass = 1.0 - total;
    if (res.escaped_mass > opt.escape_tolerance)
        throw ResourceError("hitting truncation too small: escaped mass " +
                                std::to_string(res.escaped_mass),
                            opt.trunc_radius);
    std::vector<Element> supp;
    std::vector<double> masses;
    for (auto& [h, m] : law) {
        if (m <= 0) continue;
        supp.push_back(h);
        masses.push_back(m / total);
    }
    res.measure = StepMeasure(*H.as_group(), std::move(supp), std::move(masses));
    return res;
}

// tau distribution by iterating the truncated chain in doubles (diagnostics).
std::pair<std::vector<std::pair<int, double>>, double> tau_distribution_iterate(
    const Group& G, const Subgroup& H, const StepMeasure& mu, const Ball& ball) {
    std::unordered_map<Element, double, ElementHash> cur;
    cur.emplace(G.identity(), 1.0);
    std::vector<std::pair<int, double>> dist;
    double mean = 0;
    for (int t = 1; t <= 4096; ++t) {
        std::unordered_map<Element, double, ElementHash> next;
        double absorbed = 0, alive = 0;
        for (const auto& [x, p] : cur) {
            for (std::size_t j = 0; j < mu.support().size(); ++j) {
                Element y = G.multiply(x, mu.support()[j]);
                const double m = p * mu.masses()[j];
                if (H.contains(y)) absorbed += m;
                else if (ball.find(y) >= 0) { next[y] += m; alive += m; }
            }
        }
        if (absorbed > 1e-15) dist.emplace_back(t, absorbed);
        mean += absorbed * t;
        cur = std::move(next);
        if (alive < 1e-15) break;
    }
    return {dist, mean};
}

HittingResult hitting_monte_carlo(const Group& G, const Subgroup& H,
                                  const StepMeasure& mu, const HittingOptions& opt) {
    const std::size_t m = mu.support().size();
    std::vector<double> cdf(m);
    double acc = 0;
    for (std::size_t j = 0; j < m; ++j) {
        acc += mu.masses()[j];
        cdf[j] = acc;
    }
    const double total = acc;

    const auto walks = static_cast<std::size_t>(opt.n_samples);
    std::vector<int> hit_index(walks, -2);  // -1 = censored
    std::vector<Element> hit_elem(walks);
    std::vector<std::int32_t> hit_tau(walks, 0);
    par::map(walks, [&](std::size_t w) {
        Rng rng(stream_seed(opt.seed, w));
        Element x = G.identity();
        for (std::int64_t t = 1; t <= opt.step_cap; ++t) {
            const double u = rng.uniform() * total;
            auto it = std::lower_bound(cdf.begin(), cdf.end(), u);
            std::size_t j = static_cast<std::size_t>(it - cdf.begin());
            if (j >= m) j = m - 1;
            x = G.multiply(x, mu.support()[j]);
            if (H.contains(x)) {
                hit_index[w] = 0;
                hit_elem[w] = x;
                hit_tau[w] = static_cast<std::int32_t>(t);
                return;
            }
        }
        hit_index[w] = -1;
    });

    std::map<Element, std::int64_t> counts;
    std::map<int, std::int64_t> tau_counts;
    std::int64_t censored = 0, ok = 0;
    for (std::size_t w = 0; w < walks; ++w) {
        if (hit_index[w] == -1) { ++censored; continue; }
        ++ok;
        counts[hit_elem[w]] += 1;
        tau_counts[hit_tau[w]] += 1;
    }
    HittingResult res;
    res.censored_walks = censored;
    std::vector<Element> supp;
    std::vector<double> masses;
    for (auto& [h, c] : counts) {
        supp.push_back(h);
        masses.push_back(static_cast<double>(c) / static_cast<double>(walks));
    }
    // censored mass is reported, never silently dropped
    Truncation trunc;
    trunc.radius = 0;
    trunc.discarded_mass = static_cast<double>(censored) / static_cast<double>(walks);
    res.measure = StepMeasure(*H.as_group(), supp, masses, std::nullopt,
                              censored ? std::optional<Truncation>(trunc)
                                       : std::nullopt);
    res.std_errors.resize(supp.size());
    for (std::size_t i = 0; i < supp.size(); ++i) {
        const double p = masses[i];
        res.std_errors[i] =
            std::sqrt(p * (1.0 - p) / static_cast<double>(walks));
    }
    double mean = 0;
    for (auto& [t, c] : tau_counts) {
        res.tau_distribution.emplace_back(
            t, static_cast<double>(c) / static_cast<double>(walks));
        mean += static_cast<double>(t) * static_cast<double>(c);
    }
    res.tau_mean = ok ? mean / static_cast<double>(ok) : 0.0;
    return res;
}

} // namespace

HittingResult hitting_measure(const Group& G, const Subgroup& H,
                              const StepMeasure& mu, const HittingOptions& opt) {
    if (H.verify_index_by_coset_enumeration() != H.index())
        throw UsageError("coset enumeration disagrees with the basis index");
    if (opt.mode == HittingMode::MonteCarlo)
        return hitting_monte_carlo(G, H, mu, opt);

    auto ball = enumerate_ball(G, G.identity(), opt.trunc_radius);
    std::size_t transient = 0;
    for (std::size_t i = 0; i < ball->points.size(); ++i)
        if (!H.contains(ball->points[i])) ++transient;

    HittingResult res;
    if (mu.is_exact() && transient <= 160)
        res = hitting_exact_rational(G, H, mu, *ball, opt);
    else
        res = hitting_exact_float(G, H, mu, *ball, opt);
    auto [dist, mean] = tau_distribution_iterate(G, H, mu, *ball);
    res.tau_distribution = std::move(dist);
    res.tau_mean = mean;
    return res;
}

} // namespace harmlab
