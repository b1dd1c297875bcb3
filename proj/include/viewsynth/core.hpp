#ifndef VIEWSYNTH_CORE_HPP
#define VIEWSYNTH_CORE_HPP

#include <cmath>
#include <span>
#include <string>
#include <vector>

#include "viewsynth/common.hpp"

namespace viewsynth {

namespace detail {

/// L2 between equal-length float spans with double accumulation. Eight
/// independent partial sums keep the reduction off the FPU latency chain.
inline double l2_flat(std::span<const float> a, std::span<const float> b) {
    double acc[8] = {};
    const std::size_t n = a.size();
    std::size_t i = 0;
    for (; i + 8 <= n; i += 8) {
        for (std::size_t m = 0; m < 8; ++m) {
            double d = static_cast<double>(a[i + m]) - static_cast<double>(b[i + m]);
            acc[m] += d * d;
        }
    }
    for (std::size_t m = 0; i < n; ++i, ++m) {
        double d = static_cast<double>(a[i]) - static_cast<double>(b[i]);
        acc[m] += d * d;
    }
    double s = ((acc[0] + acc[1]) + (acc[2] + acc[3])) + ((acc[4] + acc[5]) + (acc[6] + acc[7]));
    return std::sqrt(s);
}

}  // namespace detail

// ---------------------------------------------------------------------------
// View set
// ---------------------------------------------------------------------------

/// The predefined ring of viewpoints, identified by azimuth in degrees.
struct ViewSet {
    std::vector<double> azimuths_deg;

    int count() const { return static_cast<int>(azimuths_deg.size()); }

    /// V azimuths uniformly spaced over [0, 360).
    static ViewSet uniform_ring(int count) {
        if (count < 2) throw ArgumentError("ViewSet needs at least 2 views");
        ViewSet vs;
        vs.azimuths_deg.resize(count);
        for (int i = 0; i < count; ++i) {
            vs.azimuths_deg[i] = 360.0 * static_cast<double>(i) / static_cast<double>(count);
        }
        return vs;
    }

    void validate() const {
        if (azimuths_deg.size() < 2) throw ArgumentError("ViewSet needs at least 2 views");
        for (std::size_t i = 0; i < azimuths_deg.size(); ++i) {
            double a = azimuths_deg[i];
            if (!(a >= 0.0 && a < 360.0)) throw ArgumentError("azimuth out of [0, 360)");
            if (i > 0 && !(a > azimuths_deg[i - 1])) {
                throw ArgumentError("azimuths must be strictly increasing");
            }
        }
    }
};

// ---------------------------------------------------------------------------
// Patch grid
// ---------------------------------------------------------------------------

/// Square image partitioned into overlapping square patches, row-major
/// (patch = row * cols + col).
struct PatchGridConfig {
    int image_side = 112;
    int patch_side = 32;
    int stride = 16;

    int rows() const { return (image_side - patch_side) / stride + 1; }
    int cols() const { return rows(); }
    int patch_count() const { return rows() * cols(); }

    int patch_row(int patch) const { return patch / cols(); }
    int patch_col(int patch) const { return patch % cols(); }
    int offset_y(int patch) const { return patch_row(patch) * stride; }
    int offset_x(int patch) const { return patch_col(patch) * stride; }

    void validate() const {
        if (image_side <= 0 || patch_side <= 0 || stride <= 0) {
            throw ArgumentError("grid dimensions must be positive");
        }
        if (patch_side > image_side) {
            throw ArgumentError("patch_side exceeds image_side");
        }
        if ((image_side - patch_side) % stride != 0) {
            throw ArgumentError("(image_side - patch_side) must be divisible by stride");
        }
    }
};

/// One patch slot in the multi-view tensor.
struct PatchAddress {
    int view = 0;
    int patch = 0;
};

// ---------------------------------------------------------------------------
// Multi-view descriptor (one shape)
// ---------------------------------------------------------------------------

/// V x G x d tensor of per-patch features, row-major in (view, patch, dim).
class MultiViewDescriptor {
public:
    MultiViewDescriptor() = default;

    MultiViewDescriptor(int views, int patches, int dim)
        : views_(views), patches_(patches), dim_(dim),
          data_(static_cast<std::size_t>(views) * patches * dim, 0.0f) {
        if (views <= 0 || patches <= 0 || dim <= 0) {
            throw ArgumentError("descriptor dimensions must be positive");
        }
    }

    int views() const { return views_; }
    int patches() const { return patches_; }
    int dim() const { return dim_; }

    std::span<const float> flat() const { return data_; }
    std::span<float> flat() { return data_; }

    std::span<const float> patch(int view, int patch) const {
        check(view, patch);
        return {data_.data() + index(view, patch), static_cast<std::size_t>(dim_)};
    }

    std::span<float> patch(int view, int patch) {
        check(view, patch);
        return {data_.data() + index(view, patch), static_cast<std::size_t>(dim_)};
    }

    std::span<const float> view_block(int view) const {
        if (view < 0 || view >= views_) throw AddressError("view", view, views_);
        return {data_.data() + static_cast<std::size_t>(view) * patches_ * dim_,
                static_cast<std::size_t>(patches_) * dim_};
    }

    std::span<float> view_block(int view) {
        if (view < 0 || view >= views_) throw AddressError("view", view, views_);
        return {data_.data() + static_cast<std::size_t>(view) * patches_ * dim_,
                static_cast<std::size_t>(patches_) * dim_};
    }

    bool same_shape(const MultiViewDescriptor& other) const {
        return views_ == other.views_ && patches_ == other.patches_ && dim_ == other.dim_;
    }

private:
    std::size_t index(int view, int patch) const {
        return (static_cast<std::size_t>(view) * patches_ + patch) * dim_;
    }

    void check(int view, int patch) const {
        if (view < 0 || view >= views_) throw AddressError("view", view, views_);
        if (patch < 0 || patch >= patches_) throw AddressError("patch", patch, patches_);
    }

    int views_ = 0;
    int patches_ = 0;
    int dim_ = 0;
    std::vector<float> data_;
};

// ---------------------------------------------------------------------------
// Shape collection
// ---------------------------------------------------------------------------

/// Feature matrix gathering one patch address across several shapes.
/// Column j (contiguous, length dim) is the j-th requested shape's feature.
struct PatchMatrix {
    int dim = 0;
    int cols = 0;
    std::vector<float> values;  // column-major: column j at [j*dim, (j+1)*dim)

    std::span<const float> col(int j) const {
        if (j < 0 || j >= cols) throw AddressError("column", j, cols);
        return {values.data() + static_cast<std::size_t>(j) * dim,
                static_cast<std::size_t>(dim)};
    }
};

/// N aligned multi-view descriptors in one contiguous buffer, row-major in
/// (shape, view, patch, dim). Immutable after construction by contract;
/// concurrent readers are safe.
class ShapeCollection {
public:
    ShapeCollection() = default;

    ShapeCollection(std::vector<std::string> ids, ViewSet view_set, PatchGridConfig grid,
                    int feature_dim, std::vector<float> data)
        : ids_(std::move(ids)),
          view_set_(std::move(view_set)),
          grid_(grid),
          dim_(feature_dim),
          data_(std::move(data)) {
        validate();
    }

    int size() const { return static_cast<int>(ids_.size()); }
    int views() const { return view_set_.count(); }
    int patches() const { return grid_.patch_count(); }
    int dim() const { return dim_; }

    const ViewSet& view_set() const { return view_set_; }
    const PatchGridConfig& grid() const { return grid_; }
    const std::vector<std::string>& ids() const { return ids_; }
    std::span<const float> flat() const { return data_; }
    std::span<float> mutable_flat() { return data_; }

    std::span<const float> slice_patch(int shape, PatchAddress addr) const {
        if (shape < 0 || shape >= size()) throw AddressError("shape", shape, size());
        if (addr.view < 0 || addr.view >= views()) throw AddressError("view", addr.view, views());
        if (addr.patch < 0 || addr.patch >= patches()) {
            throw AddressError("patch", addr.patch, patches());
        }
        return {data_.data() + offset(shape, addr.view, addr.patch),
                static_cast<std::size_t>(dim_)};
    }

    /// Flattened G*d block of one view of one shape.
    std::span<const float> view_block(int shape, int view) const {
        if (shape < 0 || shape >= size()) throw AddressError("shape", shape, size());
        if (view < 0 || view >= views()) throw AddressError("view", view, views());
        return {data_.data() + offset(shape, view, 0),
                static_cast<std::size_t>(patches()) * dim_};
    }

    PatchMatrix patch_matrix(std::span<const int> subset, PatchAddress addr) const {
        if (subset.empty()) throw ArgumentError("patch_matrix: empty shape subset");
        PatchMatrix m;
        m.dim = dim_;
        m.cols = static_cast<int>(subset.size());
        m.values.resize(static_cast<std::size_t>(m.dim) * m.cols);
        for (int j = 0; j < m.cols; ++j) {
            auto src = slice_patch(subset[j], addr);
            std::copy(src.begin(), src.end(),
                      m.values.begin() + static_cast<std::size_t>(j) * dim_);
        }
        return m;
    }

    void validate() const {
        if (ids_.size() < 2) throw ArgumentError("collection needs at least 2 shapes");
        view_set_.validate();
        grid_.validate();
        if (dim_ <= 0) throw ArgumentError("feature dim must be positive");
        std::size_t expect = static_cast<std::size_t>(ids_.size()) * views() * patches() * dim_;
        if (data_.size() != expect) {
            throw ArgumentError("collection buffer size does not match dimensions");
        }
        for (std::size_t i = 0; i < ids_.size(); ++i) {
            for (std::size_t j = i + 1; j < ids_.size(); ++j) {
                if (ids_[i] == ids_[j]) throw ArgumentError("duplicate shape id: " + ids_[i]);
            }
        }
        for (float v : data_) {
            if (!std::isfinite(v)) throw ArgumentError("collection contains non-finite values");
        }
    }

private:
    std::size_t offset(int shape, int view, int patch) const {
        return ((static_cast<std::size_t>(shape) * views() + view) * patches() + patch) * dim_;
    }

    std::vector<std::string> ids_;
    ViewSet view_set_;
    PatchGridConfig grid_;
    int dim_ = 0;
    std::vector<float> data_;
};

}  // namespace viewsynth

#endif
