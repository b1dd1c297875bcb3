#ifndef VIEWSYNTH_POSE_HPP
#define VIEWSYNTH_POSE_HPP

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "viewsynth/image.hpp"
#include "viewsynth/synthesis.hpp"

namespace viewsynth {

struct PoseEstimate {
    int view = 0;
    double score = 0.0;  // mean-distance margin to the runner-up view; +inf if unanimous
};

/// m-NN vote over all rendered (shape, view) slabs: the estimated view is the
/// plurality among the m nearest; vote ties go to the smaller mean distance,
/// then the lower view index. An exact match settles the vote by itself:
/// when the nearest distance is 0, only the zero-distance slabs vote, so a
/// query equal to a rendered slab always returns that slab's view instead of
/// being outvoted by lookalike neighbors. Candidate ties at the m-th distance
/// are resolved by view index, so shape order never matters.
inline PoseEstimate estimate_pose(const ShapeCollection& collection, const FeatureBlock& features,
                                  int m = 15) {
    if (collection.size() == 0) throw ArgumentError("estimate_pose: empty collection");
    if (m < 1) throw ArgumentError("estimate_pose: m must be at least 1");
    if (features.count != collection.patches() || features.dim != collection.dim()) {
        throw ArgumentError("estimate_pose: features do not match the collection grid");
    }
    const int n = collection.size();
    const int views = collection.views();
    std::span<const float> x = {features.values.data(), features.values.size()};

    struct Scored {
        double distance;
        int view;
    };
    std::vector<Scored> scored(static_cast<std::size_t>(n) * views);
    parallel_for(static_cast<std::size_t>(n) * views, [&](std::size_t idx) {
        int shape = static_cast<int>(idx) / views;
        int view = static_cast<int>(idx) % views;
        scored[idx] = {detail::l2_flat(x, collection.view_block(shape, view)), view};
    });
    int take = std::min<int>(m, static_cast<int>(scored.size()));
    std::partial_sort(scored.begin(), scored.begin() + take, scored.end(),
                      [](const Scored& a, const Scored& b) {
                          if (a.distance != b.distance) return a.distance < b.distance;
                          return a.view < b.view;
                      });

    std::vector<int> votes(static_cast<std::size_t>(views), 0);
    std::vector<double> dist_sum(static_cast<std::size_t>(views), 0.0);
    for (int i = 0; i < take; ++i) {
        ++votes[scored[i].view];
        dist_sum[scored[i].view] += scored[i].distance;
    }
    auto mean_of = [&](int v) { return dist_sum[v] / votes[v]; };
    int winner = -1;
    if (scored[0].distance == 0.0) {
        // exact matches form a sorted prefix; they alone decide the view
        // (plurality, ties to the lower index since all their means are 0)
        std::vector<int> zero_votes(static_cast<std::size_t>(views), 0);
        for (int i = 0; i < take && scored[i].distance == 0.0; ++i) ++zero_votes[scored[i].view];
        for (int v = 0; v < views; ++v) {
            if (zero_votes[v] == 0) continue;
            if (winner < 0 || zero_votes[v] > zero_votes[winner]) winner = v;
        }
    }
    if (winner < 0) {
        for (int v = 0; v < views; ++v) {
            if (votes[v] == 0) continue;
            if (winner < 0 || votes[v] > votes[winner] ||
                (votes[v] == votes[winner] && mean_of(v) < mean_of(winner))) {
                winner = v;
            }
        }
    }
    int runner = -1;
    for (int v = 0; v < views; ++v) {
        if (votes[v] == 0 || v == winner) continue;
        if (runner < 0 || votes[v] > votes[runner] ||
            (votes[v] == votes[runner] && mean_of(v) < mean_of(runner))) {
            runner = v;
        }
    }
    PoseEstimate est;
    est.view = winner;
    est.score = runner < 0 ? std::numeric_limits<double>::infinity()
                           : std::max(0.0, mean_of(runner) - mean_of(winner));
    return est;
}

struct PosedSynthesis {
    PoseEstimate pose;
    SynthesizedDescriptor descriptor;
};

/// Full image path: resize, extract patch features, estimate the viewpoint
/// (or take the forced one; its score is +inf since nothing was estimated),
/// then synthesize all novel views.
inline PosedSynthesis synthesize_with_pose(const ShapeCollection& collection,
                                           const SuitabilityTable& table, const GrayImage& image,
                                           const HogConfig& hog_cfg, const PatchGridConfig& grid,
                                           const SelectionRule& selection = {}, int k = 200,
                                           int m = 15, int forced_view = -1,
                                           int exclude_shape = -1) {
    GrayImage sized = resize_bilinear(image, grid.image_side);
    FeatureBlock features = extract_view_features(sized, grid, hog_cfg);
    PosedSynthesis out;
    if (forced_view >= 0) {
        if (forced_view >= collection.views()) {
            throw AddressError("view", forced_view, collection.views());
        }
        out.pose = {forced_view, std::numeric_limits<double>::infinity()};
    } else {
        out.pose = estimate_pose(collection, features, m);
    }
    out.descriptor = synthesize_descriptor(collection, table, features, out.pose.view,
                                           selection, k, exclude_shape);
    return out;
}

}  // namespace viewsynth

#endif
