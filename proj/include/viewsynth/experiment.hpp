#ifndef VIEWSYNTH_EXPERIMENT_HPP
#define VIEWSYNTH_EXPERIMENT_HPP

#include <string>
#include <vector>

#include "viewsynth/retrieval.hpp"

namespace viewsynth {

/// "shape_0007@v03" style item ids for the fully controlled protocol.
inline std::string render_item_id(const std::string& shape_id, int view) {
    std::string v = std::to_string(view);
    return shape_id + "@v" + std::string(2 - std::min<std::size_t>(2, v.size()), '0') + v;
}

/// Fully controlled evaluation set: every render of every collection shape
/// becomes one item, with its descriptor synthesized from its own (known)
/// view and its own shape excluded from the neighborhood. Labels come per
/// shape; pass shape ids to score same-shape retrieval, or bucket labels to
/// score fine-grained retrieval.
inline LabeledImageSet build_self_synthesized_set(const ShapeCollection& collection,
                                                  const SuitabilityTable& table,
                                                  const std::vector<std::vector<std::string>>& labels,
                                                  int k, const SelectionRule& selection) {
    if (static_cast<int>(labels.size()) != collection.size()) {
        throw ArgumentError("self set: label count does not match shapes");
    }
    const int views = collection.views();
    const int patches = collection.patches();
    const int dim = collection.dim();
    LabeledImageSet set;
    set.items.resize(static_cast<std::size_t>(collection.size()) * views);
    parallel_for(set.items.size(), [&](std::size_t task) {
        int n = static_cast<int>(task) / views;
        int v = static_cast<int>(task) % views;
        FeatureBlock observed(patches, dim);
        auto slab = collection.view_block(n, v);
        std::copy(slab.begin(), slab.end(), observed.values.begin());
        SynthesizedDescriptor synth =
            synthesize_descriptor(collection, table, observed, v, selection, k, n);
        LabeledItem& item = set.items[task];
        item.id = render_item_id(collection.ids()[n], v);
        item.descriptor = std::move(synth.data);
        item.observed_view = v;
        item.labels = labels[n];
    });
    return set;
}

/// Per-shape singleton label sets from one label per shape.
inline std::vector<std::vector<std::string>> singleton_labels(
    const std::vector<std::string>& labels) {
    std::vector<std::vector<std::string>> out;
    out.reserve(labels.size());
    for (const auto& l : labels) out.push_back({l});
    return out;
}

/// AUC of the fully controlled protocol at one parameter setting.
inline double self_retrieval_auc(const ShapeCollection& collection, const SuitabilityTable& table,
                                 const std::vector<std::vector<std::string>>& labels, int k,
                                 const SelectionRule& selection, DistanceKind kind) {
    LabeledImageSet set = build_self_synthesized_set(collection, table, labels, k, selection);
    return run_retrieval(set, kind).curve.auc;
}

}  // namespace viewsynth

#endif
