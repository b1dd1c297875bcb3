#ifndef VIEWSYNTH_HOG_HPP
#define VIEWSYNTH_HOG_HPP

#include <cmath>
#include <span>
#include <vector>

#include "viewsynth/core.hpp"
#include "viewsynth/image.hpp"

namespace viewsynth {

/// HoG internals: unsigned orientations over [0, 180), per-cell histograms,
/// whole-patch L2 normalization with a floor.
struct HogConfig {
    int cell_side = 8;
    int bins = 9;
    float epsilon = 1e-6f;

    void validate(const PatchGridConfig& grid) const {
        if (bins < 2) throw ArgumentError("HogConfig: bins must be >= 2");
        if (cell_side <= 0 || grid.patch_side % cell_side != 0) {
            throw ArgumentError("HogConfig: patch_side must be divisible by cell_side");
        }
    }

    int cells_per_side(const PatchGridConfig& grid) const { return grid.patch_side / cell_side; }

    int feature_dim(const PatchGridConfig& grid) const {
        int c = cells_per_side(grid);
        return c * c * bins;
    }
};

/// Rows of per-patch (or per-sample) feature vectors, row-major count x dim.
struct FeatureBlock {
    int count = 0;
    int dim = 0;
    std::vector<float> values;

    FeatureBlock() = default;
    FeatureBlock(int count_, int dim_)
        : count(count_), dim(dim_),
          values(static_cast<std::size_t>(count_) * dim_, 0.0f) {}

    std::span<const float> row(int i) const {
        if (i < 0 || i >= count) throw AddressError("row", i, count);
        return {values.data() + static_cast<std::size_t>(i) * dim, static_cast<std::size_t>(dim)};
    }
    std::span<float> row(int i) {
        if (i < 0 || i >= count) throw AddressError("row", i, count);
        return {values.data() + static_cast<std::size_t>(i) * dim, static_cast<std::size_t>(dim)};
    }
};

/// Cuts the image into G overlapping patches, row-major over the grid.
inline std::vector<GrayImage> extract_patches(const GrayImage& img, const PatchGridConfig& grid) {
    grid.validate();
    if (img.width != grid.image_side || img.height != grid.image_side) {
        throw ArgumentError("extract_patches: image does not match grid.image_side");
    }
    std::vector<GrayImage> patches;
    patches.reserve(grid.patch_count());
    for (int p = 0; p < grid.patch_count(); ++p) {
        int oy = grid.offset_y(p);
        int ox = grid.offset_x(p);
        GrayImage patch(grid.patch_side, grid.patch_side);
        for (int y = 0; y < grid.patch_side; ++y) {
            for (int x = 0; x < grid.patch_side; ++x) {
                patch.at(y, x) = img.at(oy + y, ox + x);
            }
        }
        patches.push_back(std::move(patch));
    }
    return patches;
}

/// HoG of one patch: central-difference gradients (replicate border),
/// magnitude-weighted bilinear vote into orientation bins per cell, cell
/// histograms concatenated row-major, full vector L2-normalized with floor.
/// Bin centers sit at b * 180/bins degrees; votes wrap circularly.
inline std::vector<float> hog_patch(const GrayImage& patch, const PatchGridConfig& grid,
                                    const HogConfig& cfg) {
    cfg.validate(grid);
    if (patch.width != grid.patch_side || patch.height != grid.patch_side) {
        throw ArgumentError("hog_patch: patch does not match grid.patch_side");
    }
    const int side = grid.patch_side;
    const int cells = cfg.cells_per_side(grid);
    const int dim = cfg.feature_dim(grid);
    const double bin_width = 3.14159265358979323846 / cfg.bins;

    std::vector<double> hist(static_cast<std::size_t>(dim), 0.0);
    for (int y = 0; y < side; ++y) {
        int ym = y > 0 ? y - 1 : 0;
        int yp = y < side - 1 ? y + 1 : side - 1;
        for (int x = 0; x < side; ++x) {
            int xm = x > 0 ? x - 1 : 0;
            int xp = x < side - 1 ? x + 1 : side - 1;
            double gx = 0.5 * (static_cast<double>(patch.at(y, xp)) - patch.at(y, xm));
            double gy = 0.5 * (static_cast<double>(patch.at(yp, x)) - patch.at(ym, x));
            double mag = std::sqrt(gx * gx + gy * gy);
            if (mag == 0.0) continue;
            double theta = std::atan2(gy, gx);
            if (theta < 0.0) theta += 3.14159265358979323846;           // unsigned
            if (theta >= 3.14159265358979323846) theta = 0.0;           // fold 180 -> 0
            double c = theta / bin_width;
            int lo = static_cast<int>(std::floor(c));
            double frac = c - lo;
            int b0 = lo % cfg.bins;
            int b1 = (lo + 1) % cfg.bins;
            int cell = (y / cfg.cell_side) * cells + (x / cfg.cell_side);
            hist[static_cast<std::size_t>(cell) * cfg.bins + b0] += (1.0 - frac) * mag;
            hist[static_cast<std::size_t>(cell) * cfg.bins + b1] += frac * mag;
        }
    }

    double norm_sq = 0.0;
    for (double h : hist) norm_sq += h * h;
    double norm = std::max(std::sqrt(norm_sq), static_cast<double>(cfg.epsilon));
    std::vector<float> out(static_cast<std::size_t>(dim));
    for (int i = 0; i < dim; ++i) {
        out[i] = static_cast<float>(hist[i] / norm);
    }
    return out;
}

/// Full G x d feature block of one image view.
inline FeatureBlock extract_view_features(const GrayImage& img, const PatchGridConfig& grid,
                                          const HogConfig& cfg) {
    auto patches = extract_patches(img, grid);
    FeatureBlock block(grid.patch_count(), cfg.feature_dim(grid));
    for (int p = 0; p < grid.patch_count(); ++p) {
        auto f = hog_patch(patches[p], grid, cfg);
        std::copy(f.begin(), f.end(), block.row(p).begin());
    }
    return block;
}

}  // namespace viewsynth

#endif
