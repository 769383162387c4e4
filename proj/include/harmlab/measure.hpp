#pragma once

#include <array>
#include <cstdint>
#include <memory>
#include <optional>
#include <vector>

#include "harmlab/group.hpp"

namespace harmlab {

struct Truncation {
    int radius = 0;             // R_t: support lives in B(R_t)
    double discarded_mass = 0;  // probability mass cut by the truncation
    double tail_rate = 0;       // nominal decay rate c of the family
    /// Discarded mass per radius beyond R_t, until it underflows. Used to
    /// account for the truncation explicitly in inequality error terms.
    std::vector<std::pair<int, double>> tail_profile;
};

/// Finitely supported symmetric probability step measure. Support is kept in
/// canonical element order; masses are doubles, with exact rationals kept
/// alongside when the construction allows it.
class StepMeasure {
public:
    StepMeasure() = default;
    StepMeasure(const Group& G, std::vector<Element> support,
                std::vector<double> masses,
                std::optional<std::vector<Rat>> exact = std::nullopt,
                std::optional<Truncation> trunc = std::nullopt);

    const Group& group() const { return *group_; }
    const std::vector<Element>& support() const { return support_; }
    const std::vector<double>& masses() const { return masses_; }
    const std::optional<std::vector<Rat>>& exact_masses() const { return exact_; }
    const std::optional<Truncation>& truncation() const { return truncation_; }
    double discarded_mass() const {
        return truncation_ ? truncation_->discarded_mass : 0.0;
    }
    /// Max word length over the support: how far one application of the
    /// Markov operator reaches.
    int reach() const { return reach_; }
    double mass_of(const Element& g) const;
    int find(const Element& g) const;
    bool is_exact() const { return exact_.has_value(); }
    double total_mass() const { return total_; }

private:
    const Group* group_ = nullptr;
    std::vector<Element> support_;
    std::vector<double> masses_;
    std::optional<std::vector<Rat>> exact_;
    std::optional<Truncation> truncation_;
    int reach_ = 0;
    double total_ = 0;
};

/// mass 1/|S| on every generator, identity included.
StepMeasure uniform_on_generators(const Group& G);
/// uniform on S \ {identity}; on Z this is the +-1 coin.
StepMeasure uniform_on_generators_no_identity(const Group& G);

/// mass(x) proportional to e^{-c|x|}, truncated to the smallest radius with
/// relative tail <= mass_tol.
StepMeasure geometric_tail_measure(const Group& G, double c, double mass_tol);

StepMeasure convolution_power(const StepMeasure& mu, int n,
                              std::size_t support_budget = 4'000'000);

struct TailFit {
    double rate = 0;
    double residual = 0;
};

struct DensityFloor {
    int n = 0;
    double c = 0;
};

struct CourteousReport {
    bool symmetric = false;
    double symmetry_defect = 0;
    std::optional<int> adapted_radius;  // smallest n with U_{m<=n} supp^m >= S
    std::optional<TailFit> tail_fit;
    double second_moment = 0;  // sigma^2 of |x| under mu
    std::array<DensityFloor, 2> density_floor{};  // on S^1 and S^2
    bool compact_support = true;
    bool exact_mode = false;
};

CourteousReport check_courteous(const Group& G, const StepMeasure& mu);

/// Finite-index subgroup of a lattice group, given by an integer basis.
class Subgroup {
public:
    Subgroup(std::shared_ptr<const Group> ambient,
             std::vector<std::vector<std::int64_t>> basis);

    bool contains(const Element& x) const;
    std::int64_t index() const { return index_; }
    const Group& ambient() const { return *ambient_; }
    /// H as a group in its own right (ambient coordinates, +-basis generators).
    std::shared_ptr<const Group> as_group() const { return as_group_; }
    /// Number of cosets reached by BFS over the ambient generators; equals
    /// index() for a correct basis.
    std::int64_t verify_index_by_coset_enumeration(std::int64_t cap = 1 << 20) const;

private:
    std::shared_ptr<const Group> ambient_;
    std::vector<std::vector<std::int64_t>> basis_;
    std::shared_ptr<const Group> as_group_;
    std::int64_t index_ = 0;
};

/// "sublattice:basis=[[2,0],[0,1]]" relative to `ambient`.
Subgroup make_subgroup(std::shared_ptr<const Group> ambient, const std::string& spec);

enum class HittingMode { Exact, MonteCarlo };

struct HittingOptions {
    HittingMode mode = HittingMode::Exact;
    int trunc_radius = 24;
    std::int64_t n_samples = 100'000;
    std::uint64_t seed = 1;
    std::int64_t step_cap = 1'000'000;
    double escape_tolerance = 1e-6;
};

struct HittingResult {
    StepMeasure measure;  // mu_H, law of the walk at the return time
    double escaped_mass = 0;
    std::vector<std::pair<int, double>> tau_distribution;
    double tau_mean = 0;
    std::int64_t censored_walks = 0;
    std::vector<double> std_errors;  // MC mode, aligned with measure support
    bool exact_arithmetic = false;
};

HittingResult hitting_measure(const Group& G, const Subgroup& H,
                              const StepMeasure& mu, const HittingOptions& opt);

} // namespace harmlab
