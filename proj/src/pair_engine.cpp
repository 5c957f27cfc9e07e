#include "matchlab/pair_engine.hpp"

#include <algorithm>
#include <fstream>
#include <set>

#include "matchlab/rng.hpp"

namespace matchlab {

bool PairSet::contains(const std::string& s, const std::string& t) const {
    for (const auto& p : pairs)
        if (p.src_id == s && p.tgt_id == t) return true;
    return false;
}

PairSet enumerate_pairs(const DatasetManifest& m, const std::string& class_id) {
    if (std::find(m.classes.begin(), m.classes.end(), class_id) == m.classes.end()) {
        throw UnknownClass("enumerate_pairs: " + class_id);
    }
    PairSet out;
    auto members = m.images_in(class_id, Split::train);
    for (const auto* s : members) {
        for (const auto* t : members) {
            if (s == t) continue;
            out.pairs.push_back({s->id, t->id, false});
        }
    }
    return out;
}

PairSet labeled_pairs(const DatasetManifest& m) {
    PairSet out;
    for (const auto& pair : m.pairs) {
        if (pair.keypoints.empty()) continue;
        if (m.image(pair.src_id).split != Split::train) continue;
        if (m.image(pair.tgt_id).split != Split::train) continue;
        out.pairs.push_back({pair.src_id, pair.tgt_id, true});
    }
    return out;
}

PairSet subsample_labeled_by_image(const DatasetManifest& m, const PairSet& labeled,
                                   double fraction, std::uint64_t seed) {
    if (fraction <= 0.0 || fraction > 1.0)
        throw InvalidSpec("labeled fraction must be in (0, 1]");
    if (fraction == 1.0) return labeled;

    std::set<std::string> kept;
    for (const auto& cls : m.classes) {
        std::vector<std::string> ids;
        for (const auto* rec : m.images_in(cls, Split::train)) ids.push_back(rec->id);
        std::sort(ids.begin(), ids.end());
        Rng rng(derive_stream({seed, fnv1a("labeled_fraction"), fnv1a(cls)}));
        rng.shuffle(ids);
        auto keep_n = static_cast<std::size_t>(
            std::ceil(fraction * static_cast<double>(ids.size())));
        for (std::size_t i = 0; i < std::min(keep_n, ids.size()); ++i) kept.insert(ids[i]);
    }
    PairSet out;
    for (const auto& p : labeled.pairs) {
        if (kept.count(p.src_id) && kept.count(p.tgt_id)) out.pairs.push_back(p);
    }
    return out;
}

PairSet sample_unlabeled_batch(const DatasetManifest& m, int per_class_budget, std::uint64_t seed,
                               int iteration) {
    return sample_unlabeled_batch(m, labeled_pairs(m), per_class_budget, seed, iteration);
}

PairSet sample_unlabeled_batch(const DatasetManifest& m, const PairSet& labeled,
                               int per_class_budget, std::uint64_t seed, int iteration) {
    if (per_class_budget < 1) throw InvalidSpec("per_class_budget must be >= 1");
    std::set<std::pair<std::string, std::string>> s_set;
    for (const auto& p : labeled.pairs) s_set.insert({p.src_id, p.tgt_id});
    std::set<std::string> excluded(m.excluded_classes.begin(), m.excluded_classes.end());

    PairSet out;
    for (const auto& cls : m.classes) {
        if (excluded.count(cls)) continue;
        PairSet universe = enumerate_pairs(m, cls);
        std::vector<PairRef> candidates;
        for (auto& p : universe.pairs) {
            if (!s_set.count({p.src_id, p.tgt_id})) candidates.push_back(p);
        }
        Rng rng(derive_stream({seed, fnv1a("unlabeled_batch"),
                               static_cast<std::uint64_t>(iteration), fnv1a(cls)}));
        rng.shuffle(candidates);
        auto take = std::min<std::size_t>(static_cast<std::size_t>(per_class_budget),
                                          candidates.size());
        for (std::size_t i = 0; i < take; ++i) out.pairs.push_back(candidates[i]);
    }
    return out;
}

void save_pairs_csv(const PairSet& set, const std::filesystem::path& path) {
    std::ofstream f(path);
    if (!f) throw IoFailure("cannot write pairs csv: " + path.string());
    f << "src_id,tgt_id,labeled\n";
    for (const auto& p : set.pairs) {
        f << p.src_id << "," << p.tgt_id << "," << (p.labeled ? 1 : 0) << "\n";
    }
}

}  // namespace matchlab
