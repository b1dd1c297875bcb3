#ifndef VIEWSYNTH_VOCAB_HPP
#define VIEWSYNTH_VOCAB_HPP

#include <algorithm>
#include <cstdint>
#include <cstring>
#include <limits>
#include <span>
#include <string_view>
#include <unordered_set>
#include <vector>

#include "viewsynth/core.hpp"
#include "viewsynth/hog.hpp"

namespace viewsynth {

/// Visual-word codebook: W centers of dimension d.
struct Codebook {
    int words = 0;
    int dim = 0;
    std::uint64_t seed = 0;
    std::vector<float> centers;  // row-major W x d

    std::span<const float> center(int w) const {
        if (w < 0 || w >= words) throw AddressError("word", w, words);
        return {centers.data() + static_cast<std::size_t>(w) * dim, static_cast<std::size_t>(dim)};
    }
};

/// Codes of every patch of every shape, same N/V/G layout as the source collection.
struct QuantizedCollection {
    int shapes = 0;
    int views = 0;
    int patches = 0;
    int words = 0;
    std::vector<std::int32_t> codes;  // row-major (shape, view, patch)

    std::int32_t code(int n, int v, int g) const {
        return codes[(static_cast<std::size_t>(n) * views + v) * patches + g];
    }
    std::int32_t& code(int n, int v, int g) {
        return codes[(static_cast<std::size_t>(n) * views + v) * patches + g];
    }
};

namespace detail {

inline double sq_dist(std::span<const float> a, std::span<const float> b) {
    double acc = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        double diff = static_cast<double>(a[i]) - static_cast<double>(b[i]);
        acc += diff * diff;
    }
    return acc;
}

inline std::size_t distinct_row_count(const FeatureBlock& samples) {
    std::unordered_set<std::string_view> seen;
    seen.reserve(samples.count);
    std::size_t row_bytes = static_cast<std::size_t>(samples.dim) * sizeof(float);
    for (int i = 0; i < samples.count; ++i) {
        const char* p = reinterpret_cast<const char*>(samples.row(i).data());
        seen.insert(std::string_view(p, row_bytes));
    }
    return seen.size();
}

}  // namespace detail

/// Nearest center by squared L2; ties go to the lowest index.
inline int assign(const Codebook& cb, std::span<const float> x) {
    if (static_cast<int>(x.size()) != cb.dim) {
        throw ArgumentError("assign: feature dim does not match codebook");
    }
    int best = 0;
    double best_d = detail::sq_dist(cb.center(0), x);
    for (int w = 1; w < cb.words; ++w) {
        double d = detail::sq_dist(cb.center(w), x);
        if (d < best_d) {
            best_d = d;
            best = w;
        }
    }
    return best;
}

struct KMeansStats {
    int iterations = 0;
    std::vector<double> objective;  // SSE after each assignment pass
};

/// Lloyd's k-means with k-means++ seeding. Deterministic given
/// (samples, words, seed): stops when no assignment changes or after
/// max_iterations; empty clusters are re-seeded to the sample currently
/// farthest from its own center.
inline Codebook train_codebook(const FeatureBlock& samples, int words, std::uint64_t seed,
                               int max_iterations = 100, KMeansStats* stats = nullptr) {
    if (words < 2) throw ArgumentError("train_codebook: need at least 2 words");
    const int m = samples.count;
    const int dim = samples.dim;
    if (m < words) throw ArgumentError("train_codebook: fewer samples than words");
    for (float v : samples.values) {
        if (!std::isfinite(v)) throw ArgumentError("train_codebook: non-finite sample");
    }
    if (detail::distinct_row_count(samples) < static_cast<std::size_t>(words)) {
        throw ArgumentError("train_codebook: fewer distinct samples than words");
    }

    Codebook cb;
    cb.words = words;
    cb.dim = dim;
    cb.seed = seed;
    cb.centers.resize(static_cast<std::size_t>(words) * dim);

    Rng rng(seed);
    auto set_center = [&](int w, std::span<const float> src) {
        std::copy(src.begin(), src.end(), cb.centers.begin() + static_cast<std::size_t>(w) * dim);
    };

    // k-means++ seeding
    std::vector<double> min_d(static_cast<std::size_t>(m), 0.0);
    set_center(0, samples.row(static_cast<int>(rng.uniform_index(m))));
    for (int i = 0; i < m; ++i) min_d[i] = detail::sq_dist(samples.row(i), cb.center(0));
    for (int w = 1; w < words; ++w) {
        double total = 0.0;
        for (int i = 0; i < m; ++i) total += min_d[i];
        int pick = -1;
        if (total > 0.0) {
            double r = rng.uniform() * total;
            double acc = 0.0;
            for (int i = 0; i < m; ++i) {
                acc += min_d[i];
                if (acc > r) {
                    pick = i;
                    break;
                }
            }
            if (pick < 0) pick = m - 1;
        } else {
            // remaining mass sits on already-chosen points; take the first
            // sample at positive distance (distinctness guarantees one exists)
            for (int i = 0; i < m; ++i) {
                if (min_d[i] > 0.0) {
                    pick = i;
                    break;
                }
            }
            if (pick < 0) pick = 0;
        }
        set_center(w, samples.row(pick));
        for (int i = 0; i < m; ++i) {
            min_d[i] = std::min(min_d[i], detail::sq_dist(samples.row(i), cb.center(w)));
        }
    }

    std::vector<int> labels(static_cast<std::size_t>(m), -1);
    std::vector<int> next_labels(static_cast<std::size_t>(m), -1);
    std::vector<double> sample_d(static_cast<std::size_t>(m), 0.0);
    std::vector<double> sums(static_cast<std::size_t>(words) * dim);
    std::vector<std::int64_t> counts(static_cast<std::size_t>(words));
    double prev_obj = std::numeric_limits<double>::infinity();

    int iter = 0;
    while (iter < max_iterations) {
        parallel_for(static_cast<std::size_t>(m), [&](std::size_t i) {
            int w = assign(cb, samples.row(static_cast<int>(i)));
            next_labels[i] = w;
            sample_d[i] = detail::sq_dist(cb.center(w), samples.row(static_cast<int>(i)));
        });
        bool changed = false;
        double obj = 0.0;
        for (int i = 0; i < m; ++i) {
            if (next_labels[i] != labels[i]) {
                labels[i] = next_labels[i];
                changed = true;
            }
            obj += sample_d[i];
        }
        if (stats) stats->objective.push_back(obj);
        // exact arithmetic never increases SSE; float-rounded centers may by a hair
        if (obj > prev_obj * (1.0 + 1e-7) + 1e-9) {
            throw NumericError("k-means objective increased across iterations");
        }
        prev_obj = obj;
        ++iter;
        if (!changed && iter > 1) break;

        std::fill(sums.begin(), sums.end(), 0.0);
        std::fill(counts.begin(), counts.end(), 0);
        for (int i = 0; i < m; ++i) {
            auto row = samples.row(i);
            double* dst = sums.data() + static_cast<std::size_t>(labels[i]) * dim;
            for (int k = 0; k < dim; ++k) dst[k] += row[k];
            ++counts[labels[i]];
        }
        for (int w = 0; w < words; ++w) {
            if (counts[w] == 0) continue;
            double inv = 1.0 / static_cast<double>(counts[w]);
            float* c = cb.centers.data() + static_cast<std::size_t>(w) * dim;
            const double* s = sums.data() + static_cast<std::size_t>(w) * dim;
            for (int k = 0; k < dim; ++k) c[k] = static_cast<float>(s[k] * inv);
        }
        for (int w = 0; w < words; ++w) {
            if (counts[w] != 0) continue;
            int far = 0;
            double far_d = -1.0;
            for (int i = 0; i < m; ++i) {
                if (sample_d[i] > far_d) {
                    far_d = sample_d[i];
                    far = i;
                }
            }
            set_center(w, samples.row(far));
            sample_d[far] = -1.0;  // keep later empty clusters off this point
            prev_obj = std::numeric_limits<double>::infinity();  // reseed may raise SSE
        }
    }
    if (stats) stats->iterations = iter;
    return cb;
}

/// codes[n,v,g] = assign(codebook, S[n,v,g])
inline QuantizedCollection quantize_collection(const ShapeCollection& collection,
                                               const Codebook& cb) {
    if (cb.dim != collection.dim()) {
        throw ArgumentError("quantize_collection: codebook dim does not match collection");
    }
    QuantizedCollection qc;
    qc.shapes = collection.size();
    qc.views = collection.views();
    qc.patches = collection.patches();
    qc.words = cb.words;
    qc.codes.resize(static_cast<std::size_t>(qc.shapes) * qc.views * qc.patches);
    parallel_for(static_cast<std::size_t>(qc.shapes) * qc.views, [&](std::size_t idx) {
        int n = static_cast<int>(idx) / qc.views;
        int v = static_cast<int>(idx) % qc.views;
        for (int g = 0; g < qc.patches; ++g) {
            qc.code(n, v, g) = assign(cb, collection.slice_patch(n, {v, g}));
        }
    });
    return qc;
}

/// Uniform subsample (without replacement) of all (shape, view, patch)
/// features, capped for codebook training.
inline FeatureBlock subsample_features(const ShapeCollection& collection, int cap,
                                       std::uint64_t seed) {
    if (cap <= 0) throw ArgumentError("subsample_features: cap must be positive");
    std::size_t total = static_cast<std::size_t>(collection.size()) * collection.views() *
                        collection.patches();
    std::size_t take = std::min(static_cast<std::size_t>(cap), total);
    std::vector<std::size_t> order(total);
    for (std::size_t i = 0; i < total; ++i) order[i] = i;
    Rng rng(seed);
    for (std::size_t i = 0; i < take; ++i) {
        std::size_t j = i + rng.uniform_index(total - i);
        std::swap(order[i], order[j]);
    }
    FeatureBlock out(static_cast<int>(take), collection.dim());
    const int vg = collection.views() * collection.patches();
    for (std::size_t i = 0; i < take; ++i) {
        std::size_t flat = order[i];
        int n = static_cast<int>(flat / vg);
        int rem = static_cast<int>(flat % vg);
        auto src = collection.slice_patch(n, {rem / collection.patches(),
                                              rem % collection.patches()});
        std::copy(src.begin(), src.end(), out.row(static_cast<int>(i)).begin());
    }
    return out;
}

}  // namespace viewsynth

#endif
