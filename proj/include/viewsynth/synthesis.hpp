#ifndef VIEWSYNTH_SYNTHESIS_HPP
#define VIEWSYNTH_SYNTHESIS_HPP

#include <algorithm>
#include <cmath>
#include <iostream>
#include <limits>
#include <map>
#include <numeric>
#include <span>
#include <vector>

#include "viewsynth/surrogate.hpp"

namespace viewsynth {

/// k collection shapes nearest to the input on the observed view.
struct Neighborhood {
    std::vector<int> shape_indices;  // unique, ascending distance, ties by lower index
    std::vector<double> distances;   // L2, ascending

    int size() const { return static_cast<int>(shape_indices.size()); }
};

/// Nonnegative weights summing to 1.
struct SimplexWeights {
    std::vector<double> w;

    void validate(double tol = 1e-9) const {
        double sum = 0.0;
        for (double x : w) {
            if (!(x >= 0.0)) throw NumericError("simplex weights: negative entry");
            sum += x;
        }
        if (std::abs(sum - 1.0) > tol) throw NumericError("simplex weights: sum differs from 1");
    }
};

/// Euclidean projection onto {w >= 0, sum w = 1} by sort-and-threshold.
inline SimplexWeights project_simplex(std::span<const double> y) {
    if (y.empty()) throw ArgumentError("project_simplex: empty input");
    std::vector<double> u(y.begin(), y.end());
    std::sort(u.begin(), u.end(), std::greater<>());
    double css = 0.0;
    double theta = 0.0;
    int rho = 0;
    for (int j = 0; j < static_cast<int>(u.size()); ++j) {
        css += u[j];
        double cand = (css - 1.0) / (j + 1);
        if (u[j] - cand > 0.0) {
            rho = j + 1;
            theta = cand;
        }
    }
    (void)rho;
    SimplexWeights out;
    out.w.resize(y.size());
    for (std::size_t i = 0; i < y.size(); ++i) out.w[i] = std::max(y[i] - theta, 0.0);
    return out;
}

/// k shapes minimizing L2 between the input's observed-view features and each
/// shape's view-v0 slab; ties by lower index. k larger than the candidate pool
/// is clamped with a warning. exclude_shape (if >= 0) never enters the pool.
inline Neighborhood find_neighborhood(const ShapeCollection& collection,
                                      const FeatureBlock& observed, int v0, int k,
                                      int exclude_shape = -1) {
    if (k < 1) throw ArgumentError("find_neighborhood: k must be at least 1");
    if (v0 < 0 || v0 >= collection.views()) throw AddressError("view", v0, collection.views());
    if (observed.count != collection.patches() || observed.dim != collection.dim()) {
        throw ArgumentError("find_neighborhood: observed features do not match the collection grid");
    }
    std::span<const float> x = {observed.values.data(), observed.values.size()};
    std::vector<std::pair<double, int>> scored;
    scored.reserve(collection.size());
    for (int n = 0; n < collection.size(); ++n) {
        if (n == exclude_shape) continue;
        scored.emplace_back(detail::l2_flat(x, collection.view_block(n, v0)), n);
    }
    if (scored.empty()) throw ArgumentError("find_neighborhood: no candidate shapes");
    if (k > static_cast<int>(scored.size())) {
        std::cerr << "warning: neighborhood size " << k << " clamped to "
                  << scored.size() << " available shapes\n";
        k = static_cast<int>(scored.size());
    }
    std::sort(scored.begin(), scored.end());
    Neighborhood nb;
    nb.shape_indices.reserve(k);
    nb.distances.reserve(k);
    for (int i = 0; i < k; ++i) {
        nb.shape_indices.push_back(scored[i].second);
        nb.distances.push_back(scored[i].first);
    }
    return nb;
}

struct SolveStats {
    int iterations = 0;
    double objective = 0.0;
    std::vector<double> history;  // accepted objective per iteration, non-increasing
};

namespace detail {

/// Largest eigenvalue of a symmetric PSD matrix by fixed-count power iteration.
inline double power_iteration_lmax(std::span<const double> gram, int k, int rounds = 50) {
    std::vector<double> v(static_cast<std::size_t>(k), 1.0 / std::sqrt(static_cast<double>(k)));
    std::vector<double> gv(static_cast<std::size_t>(k));
    for (int r = 0; r < rounds; ++r) {
        for (int i = 0; i < k; ++i) {
            double acc = 0.0;
            const double* row = gram.data() + static_cast<std::size_t>(i) * k;
            for (int j = 0; j < k; ++j) acc += row[j] * v[j];
            gv[i] = acc;
        }
        double norm = std::sqrt(std::inner_product(gv.begin(), gv.end(), gv.begin(), 0.0));
        if (norm <= 0.0) return 0.0;  // gram annihilates the iterate; treat as rank-0
        for (int i = 0; i < k; ++i) v[i] = gv[i] / norm;
    }
    // Rayleigh quotient of the final unit iterate
    double lmax = 0.0;
    for (int i = 0; i < k; ++i) {
        double acc = 0.0;
        const double* row = gram.data() + static_cast<std::size_t>(i) * k;
        for (int j = 0; j < k; ++j) acc += row[j] * v[j];
        lmax += v[i] * acc;
    }
    return lmax;
}

}  // namespace detail

/// Minimizes f(w) = w'Gw - 2c'w + c0 (the stacked least-squares objective in
/// Gram form) over the probability simplex. Accelerated projected gradient,
/// step 1/lmax(G) from 50 power iterations, uniform start; a step that would
/// raise the objective is rejected, momentum restarts there, and the step
/// shrinks if rejection repeats. Stops when the accepted objective decrease
/// falls below 1e-10 relative, or after 10000 iterations.
inline SimplexWeights solve_simplex_lsq(std::span<const double> gram, std::span<const double> lin,
                                        double c0, int k, SolveStats* stats = nullptr) {
    if (k < 1) throw ArgumentError("solve_simplex_lsq: k must be at least 1");
    if (static_cast<int>(lin.size()) != k ||
        static_cast<int>(gram.size()) != k * k) {
        throw ArgumentError("solve_simplex_lsq: shape mismatch");
    }
    for (double x : gram) {
        if (!std::isfinite(x)) throw NumericError("solve_simplex_lsq: non-finite gram");
    }
    for (double x : lin) {
        if (!std::isfinite(x)) throw NumericError("solve_simplex_lsq: non-finite linear term");
    }
    if (!std::isfinite(c0)) throw NumericError("solve_simplex_lsq: non-finite constant");

    auto matvec = [&](const std::vector<double>& w, std::vector<double>& out) {
        for (int i = 0; i < k; ++i) {
            double acc = 0.0;
            const double* row = gram.data() + static_cast<std::size_t>(i) * k;
            for (int j = 0; j < k; ++j) acc += row[j] * w[j];
            out[i] = acc;
        }
    };
    auto objective = [&](const std::vector<double>& w, std::vector<double>& gw) {
        matvec(w, gw);
        double f = c0;
        for (int i = 0; i < k; ++i) f += w[i] * gw[i] - 2.0 * lin[i] * w[i];
        return f;
    };

    SimplexWeights cur;
    cur.w.assign(static_cast<std::size_t>(k), 1.0 / k);
    std::vector<double> gw(static_cast<std::size_t>(k));
    double f_cur = objective(cur.w, gw);
    if (stats) {
        stats->history.clear();
        stats->history.push_back(f_cur);
    }
    if (k == 1) {
        if (stats) {
            stats->iterations = 0;
            stats->objective = f_cur;
        }
        return cur;
    }

    double lmax = detail::power_iteration_lmax(gram, k);
    double step = 1.0 / std::max(lmax, 1e-12);
    std::vector<double> prev = cur.w;  // previous accepted point, for momentum
    std::vector<double> y = cur.w;
    std::vector<double> gy(static_cast<std::size_t>(k));
    std::vector<double> trial(static_cast<std::size_t>(k));
    double t = 1.0;
    bool rejected_last = false;
    int iter = 0;

    for (; iter < 10000; ++iter) {
        matvec(y, gy);
        for (int i = 0; i < k; ++i) trial[i] = y[i] - step * 2.0 * (gy[i] - lin[i]);
        SimplexWeights z = project_simplex(trial);
        double f_z = objective(z.w, gw);
        if (f_z <= f_cur) {
            double f_before = f_cur;
            double decrease = f_cur - f_z;
            prev.swap(cur.w);
            cur.w = std::move(z.w);
            f_cur = f_z;
            rejected_last = false;
            double t_next = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t * t));
            for (int i = 0; i < k; ++i) {
                y[i] = cur.w[i] + ((t - 1.0) / t_next) * (cur.w[i] - prev[i]);
            }
            t = t_next;
            if (stats) stats->history.push_back(f_cur);
            if (decrease <= 1e-10 * std::max(std::abs(f_before), 1e-300)) {
                ++iter;
                break;
            }
        } else {
            // overshoot: keep the incumbent, restart momentum from it
            if (rejected_last) step *= 0.5;
            rejected_last = true;
            t = 1.0;
            y = cur.w;
            if (stats) stats->history.push_back(f_cur);
        }
    }
    if (stats) {
        stats->iterations = iter;
        stats->objective = f_cur;
    }
    return cur;
}

namespace detail {

/// Gram-form pieces of one region patch's least-squares term.
struct GramBlock {
    std::vector<double> gram;  // k x k
    std::vector<double> lin;   // k
    double c0 = 0.0;
};

inline GramBlock build_gram_block(const ShapeCollection& collection, const Neighborhood& nb,
                                  int v0, int g0, std::span<const float> x) {
    const int k = nb.size();
    const int d = collection.dim();
    GramBlock b;
    b.gram.assign(static_cast<std::size_t>(k) * k, 0.0);
    b.lin.assign(static_cast<std::size_t>(k), 0.0);
    for (int t = 0; t < d; ++t) b.c0 += static_cast<double>(x[t]) * static_cast<double>(x[t]);
    for (int a = 0; a < k; ++a) {
        auto col_a = collection.slice_patch(nb.shape_indices[a], {v0, g0});
        double la = 0.0;
        for (int t = 0; t < d; ++t) la += static_cast<double>(col_a[t]) * static_cast<double>(x[t]);
        b.lin[a] = la;
        for (int c = a; c < k; ++c) {
            auto col_c = collection.slice_patch(nb.shape_indices[c], {v0, g0});
            double acc = 0.0;
            for (int t = 0; t < d; ++t) {
                acc += static_cast<double>(col_a[t]) * static_cast<double>(col_c[t]);
            }
            b.gram[static_cast<std::size_t>(a) * k + c] = acc;
            b.gram[static_cast<std::size_t>(c) * k + a] = acc;
        }
    }
    return b;
}

}  // namespace detail

/// Eq.-style LLE weights: minimize the summed reconstruction error of the
/// observed features over the region's patches, across the neighborhood's
/// view-v0 columns, subject to the simplex constraints. The region is
/// consumed as a set; assembly runs in ascending patch order.
inline SimplexWeights solve_weights(const FeatureBlock& observed,
                                    const ShapeCollection& collection, const Neighborhood& nb,
                                    int v0, const SurrogateRegion& region,
                                    SolveStats* stats = nullptr) {
    if (region.patches.empty()) throw ArgumentError("solve_weights: empty region");
    if (nb.size() < 1) throw ArgumentError("solve_weights: empty neighborhood");
    if (observed.count != collection.patches() || observed.dim != collection.dim()) {
        throw ArgumentError("solve_weights: observed features do not match the collection grid");
    }
    const int k = nb.size();
    std::vector<int> order = region.patches;
    std::sort(order.begin(), order.end());
    std::vector<double> gram(static_cast<std::size_t>(k) * k, 0.0);
    std::vector<double> lin(static_cast<std::size_t>(k), 0.0);
    double c0 = 0.0;
    for (int g0 : order) {
        auto block = detail::build_gram_block(collection, nb, v0, g0, observed.row(g0));
        for (std::size_t i = 0; i < gram.size(); ++i) gram[i] += block.gram[i];
        for (int i = 0; i < k; ++i) lin[i] += block.lin[i];
        c0 += block.c0;
    }
    return solve_simplex_lsq(gram, lin, c0, k, stats);
}

/// S_{N,v1,g1} w: convex combination of the neighbors' features at one patch.
inline std::vector<float> synthesize_patch(const ShapeCollection& collection,
                                           const Neighborhood& nb, const SimplexWeights& weights,
                                           int v1, int g1) {
    if (static_cast<int>(weights.w.size()) != nb.size()) {
        throw ArgumentError("synthesize_patch: weight count does not match neighborhood");
    }
    const int d = collection.dim();
    std::vector<double> acc(static_cast<std::size_t>(d), 0.0);
    for (int j = 0; j < nb.size(); ++j) {
        auto col = collection.slice_patch(nb.shape_indices[j], {v1, g1});
        double wj = weights.w[j];
        for (int t = 0; t < d; ++t) acc[t] += wj * static_cast<double>(col[t]);
    }
    std::vector<float> out(static_cast<std::size_t>(d));
    for (int t = 0; t < d; ++t) out[t] = static_cast<float>(acc[t]);
    return out;
}

/// Full multi-view tensor for one input image, with provenance.
struct SynthesizedDescriptor {
    MultiViewDescriptor data;
    int observed_view = 0;
    Neighborhood neighborhood;
    std::vector<std::vector<int>> regions;  // per (view * G + patch); empty on the observed view
};

/// Pipeline core: pick a surrogate region per novel patch, solve weights per
/// distinct region (cached on the sorted patch set), and transfer them. The
/// observed-view slab is copied from the input verbatim.
inline SynthesizedDescriptor synthesize_descriptor(const ShapeCollection& collection,
                                                   const SuitabilityTable& table,
                                                   const FeatureBlock& observed, int v0,
                                                   const SelectionRule& selection = {},
                                                   int k = 200, int exclude_shape = -1) {
    const int views = collection.views();
    const int patches = collection.patches();
    const int dim = collection.dim();
    if (table.views != views || table.patches != patches) {
        throw ArgumentError("synthesize_descriptor: table does not match the collection");
    }
    if (v0 < 0 || v0 >= views) throw AddressError("view", v0, views);

    SynthesizedDescriptor out;
    out.observed_view = v0;
    out.neighborhood = find_neighborhood(collection, observed, v0, k, exclude_shape);
    out.data = MultiViewDescriptor(views, patches, dim);
    out.regions.resize(static_cast<std::size_t>(views) * patches);
    std::copy(observed.values.begin(), observed.values.end(),
              out.data.view_block(v0).begin());

    // pass 1: select regions, dedupe by sorted patch set
    std::map<std::vector<int>, int> slot_of;
    std::vector<int> cell_slot(static_cast<std::size_t>(views) * patches, -1);
    std::vector<const std::vector<int>*> slot_keys;
    for (int v1 = 0; v1 < views; ++v1) {
        if (v1 == v0) continue;
        for (int g1 = 0; g1 < patches; ++g1) {
            SurrogateRegion region = select_region(table, v0, v1, g1, selection);
            std::size_t cell = static_cast<std::size_t>(v1) * patches + g1;
            out.regions[cell] = region.patches;
            std::vector<int> key = region.patches;
            std::sort(key.begin(), key.end());
            auto [it, inserted] = slot_of.emplace(std::move(key),
                                                  static_cast<int>(slot_of.size()));
            cell_slot[cell] = it->second;
            if (inserted) slot_keys.push_back(&it->first);
        }
    }

    // pass 2: per-patch Gram pieces for every patch any region uses
    const int nk = out.neighborhood.size();
    std::vector<detail::GramBlock> blocks(static_cast<std::size_t>(patches));
    std::vector<char> have_block(static_cast<std::size_t>(patches), 0);
    for (const auto* key : slot_keys) {
        for (int g0 : *key) have_block[g0] = 1;
    }
    parallel_for(static_cast<std::size_t>(patches), [&](std::size_t g0) {
        if (!have_block[g0]) return;
        blocks[g0] = detail::build_gram_block(collection, out.neighborhood, v0,
                                              static_cast<int>(g0),
                                              observed.row(static_cast<int>(g0)));
    });

    // pass 3: one solve per distinct region
    std::vector<SimplexWeights> weights(slot_keys.size());
    parallel_for(slot_keys.size(), [&](std::size_t s) {
        const std::vector<int>& key = *slot_keys[s];
        std::vector<double> gram(static_cast<std::size_t>(nk) * nk, 0.0);
        std::vector<double> lin(static_cast<std::size_t>(nk), 0.0);
        double c0 = 0.0;
        for (int g0 : key) {
            const auto& b = blocks[g0];
            for (std::size_t i = 0; i < gram.size(); ++i) gram[i] += b.gram[i];
            for (int i = 0; i < nk; ++i) lin[i] += b.lin[i];
            c0 += b.c0;
        }
        weights[s] = solve_simplex_lsq(gram, lin, c0, nk);
    });

    // pass 4: transfer
    parallel_for(static_cast<std::size_t>(views) * patches, [&](std::size_t cell) {
        int v1 = static_cast<int>(cell) / patches;
        int g1 = static_cast<int>(cell) % patches;
        if (v1 == v0) return;
        auto feat = synthesize_patch(collection, out.neighborhood, weights[cell_slot[cell]],
                                     v1, g1);
        std::copy(feat.begin(), feat.end(), out.data.patch(v1, g1).begin());
    });
    return out;
}

}  // namespace viewsynth

#endif
