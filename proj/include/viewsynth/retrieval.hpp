#ifndef VIEWSYNTH_RETRIEVAL_HPP
#define VIEWSYNTH_RETRIEVAL_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "viewsynth/synthesis.hpp"

namespace viewsynth {

/// View-agnostic distance: L2 between the flattened V*G*d tensors, views
/// aligned by absolute index.
inline double vad(const MultiViewDescriptor& a, const MultiViewDescriptor& b) {
    if (!a.same_shape(b)) throw ArgumentError("vad: descriptor shapes do not match");
    return detail::l2_flat(a.flat(), b.flat());
}

inline double vad(const SynthesizedDescriptor& a, const SynthesizedDescriptor& b) {
    return vad(a.data, b.data);
}

/// Novel-view patches whose surrogate region overlaps the user's marked
/// patches on v0, plus the marked patches themselves. Patches whose region
/// cannot be selected (no defined suitability) are simply not related.
inline std::vector<PatchAddress> part_related_patches(const SuitabilityTable& table, int v0,
                                                      const std::vector<int>& user_region,
                                                      const SelectionRule& selection) {
    if (user_region.empty()) throw ArgumentError("part_related_patches: empty user region");
    std::set<int> marked;
    for (int g : user_region) {
        if (g < 0 || g >= table.patches) throw AddressError("patch", g, table.patches);
        marked.insert(g);
    }
    std::set<std::pair<int, int>> related;
    for (int g : marked) related.emplace(v0, g);
    for (int v1 = 0; v1 < table.views; ++v1) {
        for (int g1 = 0; g1 < table.patches; ++g1) {
            SurrogateRegion region;
            try {
                region = select_region(table, v0, v1, g1, selection);
            } catch (const EstimationError&) {
                continue;
            }
            for (int g0 : region.patches) {
                if (marked.count(g0)) {
                    related.emplace(v1, g1);
                    break;
                }
            }
        }
    }
    std::vector<PatchAddress> out;
    out.reserve(related.size());
    for (auto [v, g] : related) out.push_back({v, g});
    return out;
}

/// L2 over the selected patch addresses only.
inline double part_vad(const MultiViewDescriptor& a, const MultiViewDescriptor& b,
                       const std::vector<PatchAddress>& related) {
    if (!a.same_shape(b)) throw ArgumentError("part_vad: descriptor shapes do not match");
    if (related.empty()) throw ArgumentError("part_vad: empty address set");
    double acc = 0.0;
    for (const auto& addr : related) {
        auto pa = a.patch(addr.view, addr.patch);
        auto pb = b.patch(addr.view, addr.patch);
        for (std::size_t t = 0; t < pa.size(); ++t) {
            double diff = static_cast<double>(pa[t]) - static_cast<double>(pb[t]);
            acc += diff * diff;
        }
    }
    return std::sqrt(acc);
}

/// One evaluated image: descriptor plus its fine-grained labels.
struct LabeledItem {
    std::string id;
    MultiViewDescriptor descriptor;
    int observed_view = 0;
    std::vector<std::string> labels;
};

struct LabeledImageSet {
    std::vector<LabeledItem> items;

    void validate() const {
        if (items.empty()) throw ArgumentError("labeled set: empty");
        for (const auto& it : items) {
            if (!it.descriptor.same_shape(items.front().descriptor)) {
                throw ArgumentError("labeled set: descriptor shapes differ");
            }
            if (it.labels.empty()) throw ArgumentError("labeled set: item has no labels");
        }
    }
};

enum class DistanceKind { Vad, BaselineL2, PartVad };

struct PRCurve {
    std::vector<std::pair<double, double>> points;  // (recall, precision)
    double auc = 0.0;
};

struct RankedItem {
    double distance = 0.0;
    int item = 0;       // index into the candidate set
    int rank = 0;       // competition rank: 1 + count of strictly smaller distances
};

struct QueryRanking {
    int query = 0;
    std::vector<RankedItem> ranked;  // ascending distance, ties by item index
};

struct RetrievalResult {
    std::vector<QueryRanking> rankings;
    PRCurve curve;
};

namespace detail {

inline bool share_label(const std::vector<std::string>& a, const std::vector<std::string>& b) {
    for (const auto& x : a) {
        if (std::find(b.begin(), b.end(), x) != b.end()) return true;
    }
    return false;
}

/// Pooled curve over all (query, candidate) pairs; one point per distance tie
/// group, trapezoidal AUC anchored at (0, precision of the first group).
inline PRCurve pooled_pr(std::vector<std::pair<double, bool>>& pool) {
    std::int64_t positives = 0;
    for (const auto& [d, good] : pool) positives += good ? 1 : 0;
    if (positives == 0) throw ArgumentError("pr curve: no relevant pairs");
    std::sort(pool.begin(), pool.end(),
              [](const auto& a, const auto& b) { return a.first < b.first; });
    PRCurve curve;
    std::int64_t tp = 0;
    std::int64_t seen = 0;
    std::size_t i = 0;
    while (i < pool.size()) {
        std::size_t j = i;
        while (j < pool.size() && pool[j].first == pool[i].first) {
            tp += pool[j].second ? 1 : 0;
            ++seen;
            ++j;
        }
        double recall = static_cast<double>(tp) / static_cast<double>(positives);
        double precision = static_cast<double>(tp) / static_cast<double>(seen);
        curve.points.emplace_back(recall, precision);
        i = j;
    }
    double prev_r = 0.0;
    double prev_p = curve.points.front().second;
    double auc = 0.0;
    for (const auto& [r, p] : curve.points) {
        auc += (r - prev_r) * 0.5 * (p + prev_p);
        prev_r = r;
        prev_p = p;
    }
    curve.auc = auc;
    return curve;
}

}  // namespace detail

/// Roles bitmask per item: 1 = acts as query, 2 = acts as candidate.
constexpr int kRoleQuery = 1;
constexpr int kRoleCandidate = 2;

/// Leave-query-out retrieval over the set: every query-role item ranks all
/// candidate-role items (itself excluded) by ascending distance; a candidate
/// is correct when it shares any label with the query. Without roles, every
/// item is both. For PartVad the related set is derived per query from its
/// own observed view.
inline RetrievalResult run_retrieval(const LabeledImageSet& set, DistanceKind kind,
                                     const SuitabilityTable* table = nullptr,
                                     const SelectionRule* selection = nullptr,
                                     const std::vector<int>* user_region = nullptr,
                                     const std::vector<int>* roles = nullptr) {
    set.validate();
    const int n = static_cast<int>(set.items.size());
    if (n < 2) throw ArgumentError("run_retrieval: need at least 2 items");
    if (kind == DistanceKind::PartVad && (!table || !selection || !user_region)) {
        throw ArgumentError("run_retrieval: part distance needs a table, a rule and a region");
    }
    if (roles && static_cast<int>(roles->size()) != n) {
        throw ArgumentError("run_retrieval: roles size does not match items");
    }
    auto role_of = [&](int i) { return roles ? (*roles)[i] : (kRoleQuery | kRoleCandidate); };

    std::vector<double> dist(static_cast<std::size_t>(n) * n, 0.0);
    if (kind == DistanceKind::PartVad) {
        // related set depends on the query's observed view, so fill full rows
        parallel_for(static_cast<std::size_t>(n), [&](std::size_t q) {
            if (!(role_of(static_cast<int>(q)) & kRoleQuery)) return;
            auto related = part_related_patches(*table, set.items[q].observed_view,
                                                *user_region, *selection);
            for (int c = 0; c < n; ++c) {
                if (static_cast<int>(q) == c) continue;
                dist[q * n + c] = part_vad(set.items[q].descriptor, set.items[c].descriptor,
                                           related);
            }
        });
    } else {
        // symmetric distances: fill the upper triangle in cache-friendly
        // column blocks and mirror
        constexpr int kBlock = 16;
        for (int jb = 0; jb < n; jb += kBlock) {
            int je = std::min(jb + kBlock, n);
            parallel_for(static_cast<std::size_t>(je - 1), [&](std::size_t qi) {
                int q = static_cast<int>(qi);
                for (int c = std::max(q + 1, jb); c < je; ++c) {
                    double d;
                    if (kind == DistanceKind::Vad) {
                        d = vad(set.items[q].descriptor, set.items[c].descriptor);
                    } else {
                        d = detail::l2_flat(
                            set.items[q].descriptor.view_block(set.items[q].observed_view),
                            set.items[c].descriptor.view_block(set.items[c].observed_view));
                    }
                    dist[static_cast<std::size_t>(q) * n + c] = d;
                    dist[static_cast<std::size_t>(c) * n + q] = d;
                }
            });
        }
    }

    RetrievalResult result;
    std::vector<std::pair<double, bool>> pool;
    pool.reserve(static_cast<std::size_t>(n) * (n - 1));
    for (int q = 0; q < n; ++q) {
        if (!(role_of(q) & kRoleQuery)) continue;
        result.rankings.emplace_back();
        QueryRanking& qr = result.rankings.back();
        qr.query = q;
        qr.ranked.reserve(n - 1);
        for (int c = 0; c < n; ++c) {
            if (c == q || !(role_of(c) & kRoleCandidate)) continue;
            qr.ranked.push_back({dist[static_cast<std::size_t>(q) * n + c], c, 0});
        }
        if (qr.ranked.empty()) throw ArgumentError("run_retrieval: query has no candidates");
        std::sort(qr.ranked.begin(), qr.ranked.end(), [](const RankedItem& a, const RankedItem& b) {
            if (a.distance != b.distance) return a.distance < b.distance;
            return a.item < b.item;
        });
        for (std::size_t i = 0; i < qr.ranked.size(); ++i) {
            if (i > 0 && qr.ranked[i].distance == qr.ranked[i - 1].distance) {
                qr.ranked[i].rank = qr.ranked[i - 1].rank;
            } else {
                qr.ranked[i].rank = static_cast<int>(i) + 1;
            }
        }
        for (const auto& r : qr.ranked) {
            pool.emplace_back(r.distance,
                              detail::share_label(set.items[q].labels, set.items[r.item].labels));
        }
    }
    result.curve = detail::pooled_pr(pool);
    return result;
}

/// Mean cross-view rank of weight-transferred reconstructions.
struct TransferMatrix {
    int views = 0;
    std::vector<double> avg_rank;  // row-major (observed view i, target view j)

    double at(int i, int j) const {
        if (i < 0 || i >= views) throw AddressError("view", i, views);
        if (j < 0 || j >= views) throw AddressError("view", j, views);
        return avg_rank[static_cast<std::size_t>(i) * views + j];
    }
    double diagonal_mean() const {
        double s = 0.0;
        for (int i = 0; i < views; ++i) s += at(i, i);
        return s / views;
    }
    double global_mean() const {
        double s = 0.0;
        for (double x : avg_rank) s += x;
        return s / static_cast<double>(avg_rank.size());
    }
};

/// For each shape s and view pair (i, j): fit image-wide weights on view i
/// reconstructing shape s from its k nearest other shapes, transfer to view j,
/// and rank the reconstruction against every other shape's true view-j slab
/// (competition rank, 1 = best). Entries are means over shapes.
inline TransferMatrix transferability_matrix(const ShapeCollection& collection, int k) {
    const int n = collection.size();
    const int views = collection.views();
    const int patches = collection.patches();
    const int dim = collection.dim();
    if (n < 2) throw ArgumentError("transferability_matrix: need at least 2 shapes");
    if (k < 1) throw ArgumentError("transferability_matrix: k must be at least 1");

    SurrogateRegion whole;
    whole.observed_view = 0;
    for (int g = 0; g < patches; ++g) whole.patches.push_back(g);

    std::vector<std::int64_t> ranks(static_cast<std::size_t>(n) * views * views, 0);
    parallel_for(static_cast<std::size_t>(n) * views, [&](std::size_t task) {
        int s = static_cast<int>(task) / views;
        int vi = static_cast<int>(task) % views;
        FeatureBlock observed(patches, dim);
        auto slab = collection.view_block(s, vi);
        std::copy(slab.begin(), slab.end(), observed.values.begin());
        Neighborhood nb = find_neighborhood(collection, observed, vi, k, s);
        SimplexWeights w = solve_weights(observed, collection, nb, vi, whole);

        std::vector<float> recon(static_cast<std::size_t>(patches) * dim);
        for (int vj = 0; vj < views; ++vj) {
            for (int g = 0; g < patches; ++g) {
                auto feat = synthesize_patch(collection, nb, w, vj, g);
                std::copy(feat.begin(), feat.end(),
                          recon.begin() + static_cast<std::size_t>(g) * dim);
            }
            auto truth = collection.view_block(s, vj);
            double self_d = detail::l2_flat(recon, truth);
            std::int64_t better = 0;
            for (int other = 0; other < n; ++other) {
                if (other == s) continue;
                if (detail::l2_flat(collection.view_block(other, vj), truth) < self_d) ++better;
            }
            ranks[(static_cast<std::size_t>(s) * views + vi) * views + vj] = 1 + better;
        }
    });

    TransferMatrix m;
    m.views = views;
    m.avg_rank.assign(static_cast<std::size_t>(views) * views, 0.0);
    for (int s = 0; s < n; ++s) {
        for (int vi = 0; vi < views; ++vi) {
            for (int vj = 0; vj < views; ++vj) {
                m.avg_rank[static_cast<std::size_t>(vi) * views + vj] +=
                    static_cast<double>(ranks[(static_cast<std::size_t>(s) * views + vi) * views + vj]);
            }
        }
    }
    for (double& x : m.avg_rank) x /= static_cast<double>(n);
    return m;
}

}  // namespace viewsynth

#endif
