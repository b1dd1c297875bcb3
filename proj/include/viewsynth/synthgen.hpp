#ifndef VIEWSYNTH_SYNTHGEN_HPP
#define VIEWSYNTH_SYNTHGEN_HPP

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "viewsynth/hog.hpp"
#include "viewsynth/image.hpp"

namespace viewsynth {

enum class ShapeFamily { Chairlike, Tablelike, Mixed };

/// Sampled voxel dimensions. Ranges (inclusive, in voxels on a 32-grid):
/// chairlike: seat half-width/depth 7..12, seat top height 14..20, seat
/// thickness 2..4, leg thickness 2..5, back height 6..14, back thickness
/// 2..3. Tablelike: top half-width/depth 8..13, top height 16..22, top
/// thickness 2..3, leg thickness 2..4, no back.
struct ShapeParams {
    int seat_half_w = 0;
    int seat_half_d = 0;
    int seat_top = 0;
    int seat_thick = 0;
    int leg_thick = 0;
    int back_h = 0;
    int back_thick = 0;
};

/// Axis convention: x runs left-right (the mirror axis), y up, z front-back.
/// Occupied voxels live on a res^3 grid centered in the unit cube.
struct VoxelShape {
    int res = 32;
    ShapeFamily family = ShapeFamily::Chairlike;
    ShapeParams params;
    std::uint64_t seed = 0;
    double orientation_deg = 0.0;  // added to every view azimuth when rendering
    std::vector<std::uint8_t> occupancy;  // index (y * res + z) * res + x

    bool at(int x, int y, int z) const {
        return occupancy[(static_cast<std::size_t>(y) * res + z) * res + x] != 0;
    }
    void set(int x, int y, int z) {
        occupancy[(static_cast<std::size_t>(y) * res + z) * res + x] = 1;
    }
    bool any() const {
        for (auto v : occupancy) {
            if (v) return true;
        }
        return false;
    }
    /// Same voxels, world orientation advanced by deg about the vertical axis.
    /// rotated(step).render at view v reproduces the original at view v+1.
    VoxelShape rotated(double deg) const {
        VoxelShape copy = *this;
        copy.orientation_deg += deg;
        return copy;
    }
};

/// Deterministic parametric shape. Chairlike and tablelike shapes are
/// mirror-symmetric in x about the grid center by construction.
inline VoxelShape sample_shape(ShapeFamily family, std::uint64_t seed) {
    Rng rng(seed);
    VoxelShape shape;
    shape.seed = seed;
    shape.family = family;
    if (family == ShapeFamily::Mixed) {
        shape.family = rng.uniform_index(2) == 0 ? ShapeFamily::Chairlike
                                                 : ShapeFamily::Tablelike;
    }
    shape.occupancy.assign(static_cast<std::size_t>(shape.res) * shape.res * shape.res, 0);

    ShapeParams& p = shape.params;
    if (shape.family == ShapeFamily::Chairlike) {
        p.seat_half_w = rng.uniform_int(7, 12);
        p.seat_half_d = rng.uniform_int(7, 12);
        p.seat_top = rng.uniform_int(14, 20);
        p.seat_thick = rng.uniform_int(2, 4);
        p.leg_thick = rng.uniform_int(2, 5);
        p.back_h = rng.uniform_int(6, 14);
        p.back_thick = rng.uniform_int(2, 3);
    } else {
        p.seat_half_w = rng.uniform_int(8, 13);
        p.seat_half_d = rng.uniform_int(8, 13);
        p.seat_top = rng.uniform_int(16, 22);
        p.seat_thick = rng.uniform_int(2, 3);
        p.leg_thick = rng.uniform_int(2, 4);
    }

    const int c = shape.res / 2;  // 16; ranges [c-h, c-1+h] stay symmetric about 15.5
    int x0 = c - p.seat_half_w, x1 = c - 1 + p.seat_half_w;
    int z0 = c - p.seat_half_d, z1 = c - 1 + p.seat_half_d;
    for (int y = p.seat_top - p.seat_thick + 1; y <= p.seat_top; ++y) {
        for (int z = z0; z <= z1; ++z) {
            for (int x = x0; x <= x1; ++x) shape.set(x, y, z);
        }
    }
    int lt = p.leg_thick;
    std::array<std::pair<int, int>, 2> leg_x = {{{x0, x0 + lt - 1}, {x1 - lt + 1, x1}}};
    std::array<std::pair<int, int>, 2> leg_z = {{{z0, z0 + lt - 1}, {z1 - lt + 1, z1}}};
    for (auto [lx0, lx1] : leg_x) {
        for (auto [lz0, lz1] : leg_z) {
            for (int y = 0; y <= p.seat_top - p.seat_thick; ++y) {
                for (int z = lz0; z <= lz1; ++z) {
                    for (int x = lx0; x <= lx1; ++x) shape.set(x, y, z);
                }
            }
        }
    }
    if (shape.family == ShapeFamily::Chairlike) {
        int top = std::min(p.seat_top + p.back_h, shape.res - 1);
        for (int y = p.seat_top + 1; y <= top; ++y) {
            for (int z = z1 - p.back_thick + 1; z <= z1; ++z) {
                for (int x = x0; x <= x1; ++x) shape.set(x, y, z);
            }
        }
    }
    return shape;
}

/// Fine-grained category from the parameter buckets that drive retrieval
/// ground truth (4 combinations per family).
inline std::string bucket_label(const VoxelShape& shape) {
    const ShapeParams& p = shape.params;
    if (shape.family == ShapeFamily::Chairlike) {
        std::string back = p.back_h >= 10 ? "tall_back" : "short_back";
        std::string leg = p.leg_thick >= 4 ? "thick_leg" : "thin_leg";
        return back + "+" + leg;
    }
    std::string top = p.seat_half_w >= 11 ? "wide_top" : "narrow_top";
    std::string leg = p.leg_thick >= 3 ? "thick_leg" : "thin_leg";
    return top + "+" + leg;
}

struct RenderSpec {
    ViewSet view_set = ViewSet::uniform_ring(16);
    int image_side = 112;
    double elevation_deg = 20.0;
    double extent = 1.05;  // world units spanned by the image; chosen so pixel
                           // centers never sample voxel boundaries exactly

    void validate() const {
        view_set.validate();
        if (image_side < 8) throw ArgumentError("render spec: image side too small");
        if (!(extent > 0.0)) throw ArgumentError("render spec: extent must be positive");
    }
};

/// Orthographic ray-marched render: front-most surface shading, intensity
/// 1 at the near clip falling linearly to 0 at the far clip, background 0.
/// Pixels are snapped to the 8-bit export lattice, so a saved PGM render
/// reads back bit-identical and file-based queries hit the exact-match path.
inline GrayImage render(const VoxelShape& shape, const RenderSpec& spec, int view) {
    spec.validate();
    if (view < 0 || view >= spec.view_set.count()) {
        throw AddressError("view", view, spec.view_set.count());
    }
    const double deg2rad = std::acos(-1.0) / 180.0;
    double az = (spec.view_set.azimuths_deg[view] + shape.orientation_deg) * deg2rad;
    double el = spec.elevation_deg * deg2rad;

    // camera on the unit sphere looking at the origin, y up
    std::array<double, 3> cam = {std::sin(az) * std::cos(el), std::sin(el),
                                 std::cos(az) * std::cos(el)};
    std::array<double, 3> dir = {-cam[0], -cam[1], -cam[2]};
    auto cross = [](std::array<double, 3> a, std::array<double, 3> b) {
        return std::array<double, 3>{a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2],
                                     a[0] * b[1] - a[1] * b[0]};
    };
    std::array<double, 3> right = cross(dir, {0.0, 1.0, 0.0});
    double rn = std::sqrt(right[0] * right[0] + right[1] * right[1] + right[2] * right[2]);
    for (double& v : right) v /= rn;
    std::array<double, 3> up = cross(right, dir);

    const int s = spec.image_side;
    const int res = shape.res;
    const double t_near = -0.9, t_far = 0.9;
    const double step = 1.0 / (2.0 * res);
    const int steps = static_cast<int>((t_far - t_near) / step);
    GrayImage img;
    img.width = s;
    img.height = s;
    img.pixels.assign(static_cast<std::size_t>(s) * s, 0.0f);

    for (int i = 0; i < s; ++i) {
        double v_img = (s / 2 - (i + 0.5)) / static_cast<double>(s) * spec.extent;
        for (int j = 0; j < s; ++j) {
            double u_img = (j + 0.5 - s / 2) / static_cast<double>(s) * spec.extent;
            std::array<double, 3> origin = {u_img * right[0] + v_img * up[0],
                                            u_img * right[1] + v_img * up[1],
                                            u_img * right[2] + v_img * up[2]};
            for (int n = 0; n <= steps; ++n) {
                double t = t_near + n * step;
                double px = origin[0] + t * dir[0];
                double py = origin[1] + t * dir[1];
                double pz = origin[2] + t * dir[2];
                int ix = static_cast<int>(std::floor((px + 0.5) * res));
                int iy = static_cast<int>(std::floor((py + 0.5) * res));
                int iz = static_cast<int>(std::floor((pz + 0.5) * res));
                if (ix < 0 || ix >= res || iy < 0 || iy >= res || iz < 0 || iz >= res) continue;
                if (shape.at(ix, iy, iz)) {
                    double shade = 1.0 - (t - t_near) / (t_far - t_near);
                    img.at(i, j) = static_cast<float>(std::lround(shade * 255.0)) / 255.0f;
                    break;
                }
            }
        }
    }
    return img;
}

struct SyntheticCollection {
    ShapeCollection collection;
    std::vector<std::string> labels;  // one bucket label per shape
    std::vector<VoxelShape> shapes;
};

/// Renders n shapes at every view, extracts patch features, and labels each
/// shape by its parameter bucket.
inline SyntheticCollection build_synthetic_collection(int n_shapes, ShapeFamily family,
                                                      const RenderSpec& spec,
                                                      const PatchGridConfig& grid,
                                                      const HogConfig& hog_cfg,
                                                      std::uint64_t seed) {
    if (n_shapes < 2) throw ArgumentError("build_synthetic_collection: need at least 2 shapes");
    spec.validate();
    grid.validate();
    hog_cfg.validate(grid);
    if (grid.image_side != spec.image_side) {
        throw ArgumentError("build_synthetic_collection: grid and render image sides differ");
    }

    SyntheticCollection out;
    out.shapes.reserve(n_shapes);
    out.labels.reserve(n_shapes);
    std::vector<std::string> ids;
    ids.reserve(n_shapes);
    for (int i = 0; i < n_shapes; ++i) {
        out.shapes.push_back(sample_shape(family, mix_seed(seed, static_cast<std::uint64_t>(i))));
        out.labels.push_back(bucket_label(out.shapes.back()));
        std::string id = std::to_string(i);
        ids.push_back("shape_" + std::string(4 - std::min<std::size_t>(4, id.size()), '0') + id);
    }

    const int views = spec.view_set.count();
    const int patches = grid.patch_count();
    const int dim = hog_cfg.feature_dim(grid);
    std::vector<float> data(static_cast<std::size_t>(n_shapes) * views * patches * dim);
    parallel_for(static_cast<std::size_t>(n_shapes) * views, [&](std::size_t task) {
        int n = static_cast<int>(task) / views;
        int v = static_cast<int>(task) % views;
        GrayImage img = render(out.shapes[n], spec, v);
        FeatureBlock feats = extract_view_features(img, grid, hog_cfg);
        std::copy(feats.values.begin(), feats.values.end(),
                  data.begin() + task * patches * dim);
    });
    out.collection = ShapeCollection(std::move(ids), spec.view_set, grid, dim, std::move(data));
    return out;
}

}  // namespace viewsynth

#endif
