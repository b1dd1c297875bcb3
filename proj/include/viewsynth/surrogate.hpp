#ifndef VIEWSYNTH_SURROGATE_HPP
#define VIEWSYNTH_SURROGATE_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <vector>

#include "viewsynth/vocab.hpp"

namespace viewsynth {

namespace detail {

/// Sum of ordered same-value pairs, exact: sort keys and add run*(run-1).
inline std::int64_t pair_collision_count(std::vector<std::uint64_t>& keys) {
    std::sort(keys.begin(), keys.end());
    std::int64_t sum = 0;
    std::size_t i = 0;
    while (i < keys.size()) {
        std::size_t j = i;
        while (j < keys.size() && keys[j] == keys[i]) ++j;
        std::int64_t run = static_cast<std::int64_t>(j - i);
        sum += run * (run - 1);
        i = j;
    }
    return sum;
}

}  // namespace detail

/// Plug-in collision probability: sum_x N_x(N_x - 1) / N^2. The pair count is
/// exact in 64-bit integers; only the final division rounds.
inline double collision_sum(std::span<const std::int64_t> counts, std::int64_t n) {
    if (n < 2) throw ArgumentError("collision_sum: need at least 2 samples");
    std::int64_t total = 0;
    std::int64_t pairs = 0;
    for (std::int64_t c : counts) {
        if (c < 0) throw ArgumentError("collision_sum: negative count");
        total += c;
        pairs += c * (c - 1);
    }
    if (total != n) throw ArgumentError("collision_sum: counts do not sum to N");
    return static_cast<double>(pairs) / (static_cast<double>(n) * static_cast<double>(n));
}

/// gamma-hat for patch g0@v0 as surrogate for g1@v1: log of the joint
/// collision sum over code pairs minus log of the marginal collision sum over
/// the conditioning codes at g0@v0. nullopt when the marginal has no
/// collisions (nothing to condition on); -infinity when only the joint is
/// collision-free.
inline std::optional<double> estimate_gamma(const QuantizedCollection& qc, int v0, int g0,
                                            int v1, int g1) {
    if (qc.shapes < 2) throw ArgumentError("estimate_gamma: need at least 2 shapes");
    if (v0 < 0 || v0 >= qc.views) throw AddressError("view", v0, qc.views);
    if (v1 < 0 || v1 >= qc.views) throw AddressError("view", v1, qc.views);
    if (g0 < 0 || g0 >= qc.patches) throw AddressError("patch", g0, qc.patches);
    if (g1 < 0 || g1 >= qc.patches) throw AddressError("patch", g1, qc.patches);

    const std::uint64_t w = static_cast<std::uint64_t>(qc.words);
    std::vector<std::uint64_t> marg(qc.shapes);
    std::vector<std::uint64_t> joint(qc.shapes);
    for (int n = 0; n < qc.shapes; ++n) {
        std::uint64_t c0 = static_cast<std::uint64_t>(qc.code(n, v0, g0));
        std::uint64_t c1 = static_cast<std::uint64_t>(qc.code(n, v1, g1));
        marg[n] = c0;
        joint[n] = c0 * w + c1;
    }
    std::int64_t marg_pairs = detail::pair_collision_count(marg);
    if (marg_pairs == 0) return std::nullopt;
    std::int64_t joint_pairs = detail::pair_collision_count(joint);
    double nn = static_cast<double>(qc.shapes) * static_cast<double>(qc.shapes);
    double marg_ratio = static_cast<double>(marg_pairs) / nn;
    if (joint_pairs == 0) return -std::numeric_limits<double>::infinity();
    double joint_ratio = static_cast<double>(joint_pairs) / nn;
    return std::log(joint_ratio) - std::log(marg_ratio);
}

/// gamma-hat for every (v0, v1, g0, g1); undefined entries are -infinity.
struct SuitabilityTable {
    int views = 0;
    int patches = 0;
    std::vector<double> gamma;  // row-major (v0, v1, g0, g1)

    double at(int v0, int v1, int g0, int g1) const {
        if (v0 < 0 || v0 >= views) throw AddressError("observed view", v0, views);
        if (v1 < 0 || v1 >= views) throw AddressError("novel view", v1, views);
        if (g0 < 0 || g0 >= patches) throw AddressError("observed patch", g0, patches);
        if (g1 < 0 || g1 >= patches) throw AddressError("novel patch", g1, patches);
        return gamma[index(v0, v1, g0, g1)];
    }
    std::size_t index(int v0, int v1, int g0, int g1) const {
        return ((static_cast<std::size_t>(v0) * views + v1) * patches + g0) * patches + g1;
    }
    /// true when the entry can participate in region selection
    bool selectable(int v0, int v1, int g0, int g1) const {
        return at(v0, v1, g0, g1) != -std::numeric_limits<double>::infinity();
    }
};

inline SuitabilityTable build_table(const QuantizedCollection& qc) {
    if (qc.shapes < 2) throw ArgumentError("build_table: need at least 2 shapes");
    SuitabilityTable table;
    table.views = qc.views;
    table.patches = qc.patches;
    table.gamma.assign(static_cast<std::size_t>(qc.views) * qc.views * qc.patches * qc.patches,
                       -std::numeric_limits<double>::infinity());
    const std::uint64_t w = static_cast<std::uint64_t>(qc.words);
    double nn = static_cast<double>(qc.shapes) * static_cast<double>(qc.shapes);

    // one task per conditioning patch (v0, g0); tasks write disjoint entries
    parallel_for(static_cast<std::size_t>(qc.views) * qc.patches, [&](std::size_t idx) {
        int v0 = static_cast<int>(idx) / qc.patches;
        int g0 = static_cast<int>(idx) % qc.patches;
        std::vector<std::uint64_t> keys(qc.shapes);
        for (int n = 0; n < qc.shapes; ++n) {
            keys[n] = static_cast<std::uint64_t>(qc.code(n, v0, g0));
        }
        std::vector<std::uint64_t> cond = keys;  // pair_collision_count sorts in place
        std::int64_t marg_pairs = detail::pair_collision_count(cond);
        if (marg_pairs == 0) return;  // whole (v0, g0) slab stays undefined
        double log_marg = std::log(static_cast<double>(marg_pairs) / nn);
        for (int v1 = 0; v1 < qc.views; ++v1) {
            for (int g1 = 0; g1 < qc.patches; ++g1) {
                for (int n = 0; n < qc.shapes; ++n) {
                    keys[n] = static_cast<std::uint64_t>(qc.code(n, v0, g0)) * w +
                              static_cast<std::uint64_t>(qc.code(n, v1, g1));
                }
                std::int64_t joint_pairs = detail::pair_collision_count(keys);
                if (joint_pairs == 0) continue;
                double val = std::log(static_cast<double>(joint_pairs) / nn) - log_marg;
                table.gamma[table.index(v0, v1, g0, g1)] = val;
            }
        }
    });
    return table;
}

struct SelectionRule {
    enum class Kind { TopK, Threshold };
    Kind kind = Kind::TopK;
    int k_p = 9;
    double tau = 0.0;

    static SelectionRule top_k(int k) {
        SelectionRule r;
        r.kind = Kind::TopK;
        r.k_p = k;
        return r;
    }
    static SelectionRule threshold(double tau) {
        SelectionRule r;
        r.kind = Kind::Threshold;
        r.tau = tau;
        return r;
    }
};

/// Observed-view patches acting jointly as the surrogate for one novel patch,
/// ordered by descending gamma (ties toward the lower patch index).
struct SurrogateRegion {
    int observed_view = 0;
    std::vector<int> patches;
};

inline SurrogateRegion select_region(const SuitabilityTable& table, int v0, int v1, int g1,
                                     const SelectionRule& rule) {
    if (rule.kind == SelectionRule::Kind::TopK && rule.k_p < 1) {
        throw ArgumentError("select_region: k_p must be at least 1");
    }
    std::vector<std::pair<double, int>> defined;
    defined.reserve(table.patches);
    for (int g0 = 0; g0 < table.patches; ++g0) {
        double val = table.at(v0, v1, g0, g1);
        if (val != -std::numeric_limits<double>::infinity()) defined.emplace_back(val, g0);
    }
    if (defined.empty()) {
        throw EstimationError(
            "select_region: no defined suitability entries for this patch; "
            "use a larger collection or a smaller vocabulary");
    }
    std::sort(defined.begin(), defined.end(), [](const auto& a, const auto& b) {
        if (a.first != b.first) return a.first > b.first;
        return a.second < b.second;
    });

    SurrogateRegion region;
    region.observed_view = v0;
    if (rule.kind == SelectionRule::Kind::TopK) {
        int take = std::min<int>(rule.k_p, static_cast<int>(defined.size()));
        for (int i = 0; i < take; ++i) region.patches.push_back(defined[i].second);
    } else {
        for (const auto& [val, g0] : defined) {
            if (val > rule.tau) region.patches.push_back(g0);
        }
        if (region.patches.empty()) region.patches.push_back(defined.front().second);
    }
    return region;
}

}  // namespace viewsynth

#endif
