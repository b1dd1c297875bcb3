#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "viewsynth/pose.hpp"

using namespace viewsynth;
using Catch::Matchers::WithinRel;

namespace {

const double kInf = std::numeric_limits<double>::infinity();

// Constant per-(shape, view) slabs make every distance a closed-form multiple
// of sqrt(G * d).
ShapeCollection constant_collection(const std::vector<std::vector<float>>& slab_values,
                                    int dim = 2) {
    PatchGridConfig grid{48, 32, 16};
    const int n = static_cast<int>(slab_values.size());
    const int views = static_cast<int>(slab_values.front().size());
    const int per_view = grid.patch_count() * dim;
    std::vector<float> data(static_cast<std::size_t>(n) * views * per_view);
    std::vector<std::string> ids;
    for (int s = 0; s < n; ++s) {
        ids.push_back("s" + std::to_string(s));
        for (int v = 0; v < views; ++v) {
            for (int t = 0; t < per_view; ++t) {
                data[(static_cast<std::size_t>(s) * views + v) * per_view + t] =
                    slab_values[s][v];
            }
        }
    }
    return ShapeCollection(std::move(ids), ViewSet::uniform_ring(views), grid, dim,
                           std::move(data));
}

FeatureBlock constant_features(const ShapeCollection& c, float value) {
    FeatureBlock fb(c.patches(), c.dim());
    std::fill(fb.values.begin(), fb.values.end(), value);
    return fb;
}

}  // namespace

TEST_CASE("estimate_pose plurality vote with runner-up margin") {
    auto coll = constant_collection({{0.0f, 10.0f}, {1.0f, 10.5f}, {4.0f, 11.0f}});
    auto query = constant_features(coll, 0.0f);
    const double u = std::sqrt(static_cast<double>(coll.patches()) * coll.dim());

    SECTION("majority among the m nearest wins") {
        auto est = estimate_pose(coll, query, 4);
        REQUIRE(est.view == 0);
        // view 0 mean (0 + 1 + 4)u / 3, runner-up view 1 mean 10u
        REQUIRE_THAT(est.score, WithinRel(u * (10.0 - 5.0 / 3.0), 1e-12));
    }
    SECTION("unanimous vote scores infinity") {
        auto est = estimate_pose(coll, query, 2);
        REQUIRE(est.view == 0);
        REQUIRE(est.score == kInf);
    }
    SECTION("m beyond the pool clamps") {
        auto est = estimate_pose(coll, query, 100);
        REQUIRE(est.view == 0);
    }
}

TEST_CASE("estimate_pose vote tie falls back to mean distance") {
    auto coll = constant_collection({{0.0f, 2.0f}, {3.0f, 2.5f}});
    auto query = constant_features(coll, 0.0f);
    const double u = std::sqrt(static_cast<double>(coll.patches()) * coll.dim());

    auto est = estimate_pose(coll, query, 2);
    REQUIRE(est.view == 0);
    REQUIRE_THAT(est.score, WithinRel(2.0 * u, 1e-12));
}

TEST_CASE("estimate_pose full tie keeps the lower view index") {
    auto coll = constant_collection({{1.0f, -1.0f}, {5.0f, -5.0f}});
    auto query = constant_features(coll, 0.0f);

    auto est = estimate_pose(coll, query, 2);
    REQUIRE(est.view == 0);
    REQUIRE(est.score == 0.0);
}

TEST_CASE("estimate_pose exact match overrides the plurality") {
    // query sits exactly on s0's view-1 slab while four view-0 slabs crowd
    // the neighbor list; the zero-distance slab must still win
    auto coll = constant_collection(
        {{0.25f, 0.0f}, {0.25f, 5.0f}, {0.25f, 5.0f}, {0.25f, 5.0f}});
    auto query = constant_features(coll, 0.0f);
    const double u = std::sqrt(static_cast<double>(coll.patches()) * coll.dim());

    auto est = estimate_pose(coll, query, 5);
    REQUIRE(est.view == 1);
    REQUIRE_THAT(est.score, WithinRel(0.25 * u, 1e-12));
}

TEST_CASE("estimate_pose exact-match ties use their own plurality") {
    auto coll = constant_collection({{0.0f, 7.0f}, {3.0f, 0.0f}, {3.0f, 0.0f}});
    auto query = constant_features(coll, 0.0f);
    const double u = std::sqrt(static_cast<double>(coll.patches()) * coll.dim());

    // zero-distance slabs: one at view 0, two at view 1
    auto est = estimate_pose(coll, query, 4);
    REQUIRE(est.view == 1);
    REQUIRE_THAT(est.score, WithinRel(1.5 * u, 1e-12));
}

TEST_CASE("estimate_pose pins an exact render to its view") {
    PatchGridConfig grid{48, 32, 16};
    const int n = 4, views = 3, dim = 2;
    std::vector<float> data(static_cast<std::size_t>(n) * views * grid.patch_count() * dim);
    Rng rng(13);
    for (float& x : data) x = static_cast<float>(rng.normal());
    ShapeCollection coll({"a", "b", "c", "d"}, ViewSet::uniform_ring(views), grid, dim,
                         std::move(data));

    for (int s = 0; s < n; ++s) {
        for (int v = 0; v < views; ++v) {
            FeatureBlock fb(coll.patches(), dim);
            auto slab = coll.view_block(s, v);
            std::copy(slab.begin(), slab.end(), fb.values.begin());
            REQUIRE(estimate_pose(coll, fb, 1).view == v);
        }
    }
}

TEST_CASE("estimate_pose ignores shape order") {
    PatchGridConfig grid{48, 32, 16};
    const int n = 5, views = 4, dim = 3;
    const std::size_t per_shape = static_cast<std::size_t>(views) * grid.patch_count() * dim;
    std::vector<float> data(n * per_shape);
    Rng rng(29);
    for (float& x : data) x = static_cast<float>(rng.normal());

    std::vector<float> reversed(data.size());
    for (int s = 0; s < n; ++s) {
        std::copy(data.begin() + s * per_shape, data.begin() + (s + 1) * per_shape,
                  reversed.begin() + (n - 1 - s) * per_shape);
    }
    ShapeCollection fwd({"a", "b", "c", "d", "e"}, ViewSet::uniform_ring(views), grid, dim,
                        std::move(data));
    ShapeCollection rev({"e", "d", "c", "b", "a"}, ViewSet::uniform_ring(views), grid, dim,
                        std::move(reversed));

    FeatureBlock query(fwd.patches(), dim);
    for (float& x : query.values) x = static_cast<float>(rng.normal());
    for (int m : {1, 3, 7, 20}) {
        auto a = estimate_pose(fwd, query, m);
        auto b = estimate_pose(rev, query, m);
        REQUIRE(a.view == b.view);
        REQUIRE(a.score == b.score);
    }
}

TEST_CASE("estimate_pose argument checks") {
    auto coll = constant_collection({{0.0f, 1.0f}, {2.0f, 3.0f}});
    auto query = constant_features(coll, 0.0f);
    REQUIRE_THROWS_AS(estimate_pose(coll, query, 0), ArgumentError);
    FeatureBlock wrong(coll.patches() + 1, coll.dim());
    REQUIRE_THROWS_AS(estimate_pose(coll, wrong, 3), ArgumentError);
}

TEST_CASE("synthesize_with_pose end to end") {
    PatchGridConfig grid{48, 32, 16};
    HogConfig hog_cfg;
    const int dim = hog_cfg.feature_dim(grid);
    const int n = 4, views = 3;
    std::vector<float> data(static_cast<std::size_t>(n) * views * grid.patch_count() * dim);
    Rng rng(37);
    for (float& x : data) x = static_cast<float>(rng.normal());
    ShapeCollection coll({"a", "b", "c", "d"}, ViewSet::uniform_ring(views), grid, dim,
                         std::move(data));

    SuitabilityTable table;
    table.views = views;
    table.patches = coll.patches();
    table.gamma.assign(static_cast<std::size_t>(views) * views * table.patches * table.patches,
                       -0.5);

    GrayImage img(64, 64);
    for (float& p : img.pixels) p = static_cast<float>(rng.uniform());

    SECTION("forced view bypasses estimation") {
        auto out = synthesize_with_pose(coll, table, img, hog_cfg, grid, SelectionRule::top_k(2),
                                        2, 3, 1);
        REQUIRE(out.pose.view == 1);
        REQUIRE(out.pose.score == kInf);
        REQUIRE(out.descriptor.observed_view == 1);

        auto features = extract_view_features(resize_bilinear(img, grid.image_side), grid,
                                              hog_cfg);
        auto slab = out.descriptor.data.view_block(1);
        for (std::size_t i = 0; i < features.values.size(); ++i) {
            REQUIRE(slab[i] == features.values[i]);
        }
    }
    SECTION("estimated view matches a direct estimate") {
        auto out = synthesize_with_pose(coll, table, img, hog_cfg, grid, SelectionRule::top_k(2),
                                        2, 3);
        auto features = extract_view_features(resize_bilinear(img, grid.image_side), grid,
                                              hog_cfg);
        auto direct = estimate_pose(coll, features, 3);
        REQUIRE(out.pose.view == direct.view);
        REQUIRE(out.pose.score == direct.score);
        REQUIRE(out.descriptor.observed_view == direct.view);
    }
    SECTION("forced view out of range throws") {
        REQUIRE_THROWS_AS(synthesize_with_pose(coll, table, img, hog_cfg, grid,
                                               SelectionRule::top_k(2), 2, 3, views),
                          AddressError);
    }
}
