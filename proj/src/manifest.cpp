#include "matchlab/manifest.hpp"

#include <json.hpp>

#include <fstream>
#include <set>

#include "matchlab/image_io.hpp"

namespace matchlab {

using nlohmann::json;

std::string to_string(Split s) {
    switch (s) {
        case Split::train: return "train";
        case Split::val: return "val";
        case Split::test: return "test";
    }
    return "train";
}

Split split_from_string(const std::string& s) {
    if (s == "train") return Split::train;
    if (s == "val") return Split::val;
    if (s == "test") return Split::test;
    throw ConfigError("unknown split: " + s);
}

const ImageRecord& DatasetManifest::image(const std::string& id) const {
    for (const auto& rec : images)
        if (rec.id == id) return rec;
    throw ManifestMismatch("unknown image id: " + id);
}

bool DatasetManifest::has_image(const std::string& id) const {
    for (const auto& rec : images)
        if (rec.id == id) return true;
    return false;
}

std::vector<const ImageRecord*> DatasetManifest::images_in(const std::string& class_id,
                                                           Split split) const {
    std::vector<const ImageRecord*> out;
    for (const auto& rec : images)
        if (rec.class_id == class_id && rec.split == split) out.push_back(&rec);
    return out;
}

void DatasetManifest::validate() const {
    std::set<std::string> ids;
    std::set<std::string> classes_set(classes.begin(), classes.end());
    for (const auto& rec : images) {
        if (!ids.insert(rec.id).second) throw ManifestMismatch("duplicate image id: " + rec.id);
        if (!classes_set.count(rec.class_id))
            throw ManifestMismatch("image " + rec.id + " references unknown class " + rec.class_id);
        if (rec.width < 1 || rec.height < 1)
            throw ManifestMismatch("image " + rec.id + " has non-positive extent");
    }
    for (const auto& pair : pairs) {
        const ImageRecord& s = image(pair.src_id);
        const ImageRecord& t = image(pair.tgt_id);
        if (pair.src_id == pair.tgt_id) throw ManifestMismatch("self pair: " + pair.src_id);
        if (s.class_id != t.class_id)
            throw ManifestMismatch("pair " + pair.src_id + "->" + pair.tgt_id + " crosses classes");
        if (s.split != t.split)
            throw ManifestMismatch("pair " + pair.src_id + "->" + pair.tgt_id + " crosses splits");
        for (const auto& kp : pair.keypoints) {
            if (!PixelGrid{s.height, s.width}.contains(kp.src) ||
                !PixelGrid{t.height, t.width}.contains(kp.tgt)) {
                throw ManifestMismatch("keypoint out of bounds in pair " + pair.src_id + "->" +
                                       pair.tgt_id);
            }
        }
    }
}

namespace {

json bbox_to_json(const BBox& b) { return json::array({b.x0, b.y0, b.x1, b.y1}); }

BBox bbox_from_json(const json& j) {
    return BBox{j.at(0).get<double>(), j.at(1).get<double>(), j.at(2).get<double>(),
                j.at(3).get<double>()};
}

}  // namespace

DatasetManifest load_manifest(const std::filesystem::path& path) {
    std::ifstream f(path);
    if (!f) throw IoFailure("cannot open manifest: " + path.string());
    json j;
    try {
        f >> j;
    } catch (const json::exception& e) {
        throw IoFailure("manifest parse error in " + path.string() + ": " + e.what());
    }
    DatasetManifest m;
    m.schema_version = j.at("schema_version").get<int>();
    if (m.schema_version != 1)
        throw ConfigError("unsupported manifest schema_version " +
                          std::to_string(m.schema_version));
    m.classes = j.at("classes").get<std::vector<std::string>>();
    if (j.contains("excluded_classes"))
        m.excluded_classes = j.at("excluded_classes").get<std::vector<std::string>>();
    for (const auto& ji : j.at("images")) {
        ImageRecord rec;
        rec.id = ji.at("id").get<std::string>();
        rec.path = ji.at("path").get<std::string>();
        rec.class_id = ji.at("class").get<std::string>();
        rec.split = split_from_string(ji.at("split").get<std::string>());
        rec.width = ji.at("width").get<int>();
        rec.height = ji.at("height").get<int>();
        if (ji.contains("bbox")) rec.bbox = bbox_from_json(ji.at("bbox"));
        m.images.push_back(std::move(rec));
    }
    for (const auto& jp : j.at("pairs")) {
        AnnotatedPair pair;
        pair.src_id = jp.at("src").get<std::string>();
        pair.tgt_id = jp.at("tgt").get<std::string>();
        for (const auto& jk : jp.at("keypoints")) {
            pair.keypoints.push_back(KeypointPair{{jk.at(0).get<double>(), jk.at(1).get<double>()},
                                                  {jk.at(2).get<double>(), jk.at(3).get<double>()}});
        }
        pair.tags.viewpoint = jp.value("viewpoint", "easy");
        pair.tags.scale = jp.value("scale", "easy");
        pair.tags.truncation = jp.value("truncation", "none");
        pair.tags.occlusion = jp.value("occlusion", "none");
        m.pairs.push_back(std::move(pair));
    }
    m.corruption_root = j.value("corruption_root", "");
    m.corruption_seed = j.value("corruption_seed", std::uint64_t{0});
    m.validate();
    return m;
}

void save_manifest(const DatasetManifest& m, const std::filesystem::path& path) {
    json j;
    j["schema_version"] = m.schema_version;
    j["classes"] = m.classes;
    j["excluded_classes"] = m.excluded_classes;
    json images = json::array();
    for (const auto& rec : m.images) {
        json ji;
        ji["id"] = rec.id;
        ji["path"] = rec.path;
        ji["class"] = rec.class_id;
        ji["split"] = to_string(rec.split);
        ji["width"] = rec.width;
        ji["height"] = rec.height;
        if (rec.bbox) ji["bbox"] = bbox_to_json(*rec.bbox);
        images.push_back(std::move(ji));
    }
    j["images"] = std::move(images);
    json pairs = json::array();
    for (const auto& pair : m.pairs) {
        json jp;
        jp["src"] = pair.src_id;
        jp["tgt"] = pair.tgt_id;
        json kps = json::array();
        for (const auto& kp : pair.keypoints)
            kps.push_back(json::array({kp.src.x, kp.src.y, kp.tgt.x, kp.tgt.y}));
        jp["keypoints"] = std::move(kps);
        jp["viewpoint"] = pair.tags.viewpoint;
        jp["scale"] = pair.tags.scale;
        jp["truncation"] = pair.tags.truncation;
        jp["occlusion"] = pair.tags.occlusion;
        pairs.push_back(std::move(jp));
    }
    j["pairs"] = std::move(pairs);
    if (!m.corruption_root.empty()) {
        j["corruption_root"] = m.corruption_root;
        j["corruption_seed"] = m.corruption_seed;
    }
    std::ofstream f(path);
    if (!f) throw IoFailure("cannot write manifest: " + path.string());
    f << j.dump(2) << "\n";
}

const ImageU8& LoadedDataset::image(const std::string& id) const {
    auto it = images.find(id);
    if (it == images.end()) throw ManifestMismatch("image not loaded: " + id);
    return it->second;
}

LoadedDataset load_dataset(const std::filesystem::path& manifest_path) {
    LoadedDataset ds;
    ds.manifest = load_manifest(manifest_path);
    ds.root = manifest_path.parent_path();
    for (const auto& rec : ds.manifest.images) {
        ds.images[rec.id] = load_image_u8(ds.root / rec.path);
    }
    return ds;
}

}  // namespace matchlab
