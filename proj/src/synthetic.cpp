#include "matchlab/synthetic.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>

#include "matchlab/augment.hpp"
#include "matchlab/image_io.hpp"
#include "matchlab/rng.hpp"

namespace matchlab {

using nlohmann::json;

void SynthSpec::validate() const {
    if (num_classes < 1 || images_per_class < 1 || image_size < 8 || keypoints_per_class < 1) {
        throw InvalidSpec("synth: counts must be >= 1 and image_size >= 8");
    }
    if (labeled_fraction <= 0.0 || labeled_fraction > 1.0) {
        throw InvalidSpec("synth: labeled_fraction must be in (0, 1]");
    }
    if (warp_family != "affine") {
        throw InvalidSpec("synth: warp_family must be 'affine' (oracle composition stays exact)");
    }
    if (scale_lo <= 0.0 || scale_hi < scale_lo) throw InvalidSpec("synth: bad scale range");
    if (val_per_class + test_per_class >= images_per_class && images_per_class > 1) {
        throw InvalidSpec("synth: val + test images must leave at least one train image");
    }
}

GeometricTransform OracleStore::transform(const std::string& image_id) const {
    auto it = transforms.find(image_id);
    if (it == transforms.end()) throw UnknownPair("oracle: unknown image id " + image_id);
    return GeometricTransform::from_affine(it->second);
}

PseudoLabel oracle_field(const OracleStore& store, const std::string& src_id,
                         const std::string& tgt_id, PixelGrid src_image, PixelGrid tgt_image,
                         int stride) {
    if (!store.has(src_id) || !store.has(tgt_id)) {
        throw UnknownPair("oracle_field: pair not covered by oracle store");
    }
    // x_src = T_src(T_tgt^{-1}(x_tgt))
    GeometricTransform rel =
        compose_affine(store.transform(src_id), invert_affine(store.transform(tgt_id)));

    PseudoLabel label;
    label.pair_src = src_id;
    label.pair_tgt = tgt_id;
    label.tau = 0.5;
    label.teacher_generation = 0;
    label.field.tgt_grid = {tgt_image.height / stride, tgt_image.width / stride};
    label.field.tgt_stride = stride;
    const std::size_t cells = static_cast<std::size_t>(label.field.tgt_grid.cells());
    label.field.coords.resize(cells);
    label.field.confidence.resize(cells);
    label.mask.resize(cells);
    const double half = (stride - 1) / 2.0;
    for (int cy = 0; cy < label.field.tgt_grid.height; ++cy) {
        for (int cx = 0; cx < label.field.tgt_grid.width; ++cx) {
            std::size_t j = static_cast<std::size_t>(cy) * label.field.tgt_grid.width + cx;
            Point2 center{cx * stride + half, cy * stride + half};
            Point2 src = apply_transform(rel, center);
            bool in = src_image.contains(src);
            label.field.coords[j] = src;
            label.field.confidence[j] = in ? 1.0 : 0.0;
            label.mask[j] = in ? 1 : 0;
        }
    }
    return label;
}

namespace {

// Seeded multi-octave value noise in [0, 1].
struct ValueNoise {
    std::uint64_t seed;
    double lattice(int level, int gy, int gx) const {
        std::uint64_t h = derive_stream({seed, static_cast<std::uint64_t>(level),
                                         static_cast<std::uint64_t>(gy + 1000),
                                         static_cast<std::uint64_t>(gx + 1000)});
        return static_cast<double>(h >> 11) * 0x1.0p-53;
    }
    double sample(int level, double y, double x) const {
        double cell = std::pow(2.0, 4 - level);  // 16, 8, 4, 2 px octaves
        double gy = y / cell;
        double gx = x / cell;
        int y0 = static_cast<int>(std::floor(gy));
        int x0 = static_cast<int>(std::floor(gx));
        double fy = gy - y0;
        double fx = gx - x0;
        // smoothstep weights
        fy = fy * fy * (3 - 2 * fy);
        fx = fx * fx * (3 - 2 * fx);
        double v00 = lattice(level, y0, x0);
        double v01 = lattice(level, y0, x0 + 1);
        double v10 = lattice(level, y0 + 1, x0);
        double v11 = lattice(level, y0 + 1, x0 + 1);
        return (v00 * (1 - fx) + v01 * fx) * (1 - fy) + (v10 * (1 - fx) + v11 * fx) * fy;
    }
};

Image class_base_texture(const SynthSpec& spec, int class_idx, int base_size) {
    std::uint64_t class_seed = derive_stream({spec.seed, fnv1a("texture"),
                                              static_cast<std::uint64_t>(class_idx)});
    // Random color mosaic (Voronoi patches a few pixels across) shaded by
    // value noise. Smooth noise alone is too self-similar for the matcher's
    // descriptors; the mosaic's sharp multi-orientation edges make cells
    // distinctive while staying matchable under warps.
    Image base(base_size, base_size);
    struct Site {
        double x, y;
        float color[3];
    };
    Rng site_rng(derive_stream({class_seed, fnv1a("sites")}));
    const int num_sites = std::max(16, base_size * base_size / 36);
    std::vector<Site> sites;
    sites.reserve(static_cast<std::size_t>(num_sites));
    for (int i = 0; i < num_sites; ++i) {
        Site s;
        s.x = site_rng.uniform(0, base_size);
        s.y = site_rng.uniform(0, base_size);
        for (float& c : s.color) c = static_cast<float>(site_rng.uniform(0.08, 0.92));
        sites.push_back(s);
    }
    std::vector<ValueNoise> noise;
    for (int c = 0; c < 3; ++c) {
        noise.push_back(ValueNoise{derive_stream({class_seed, static_cast<std::uint64_t>(c)})});
    }
    for (int y = 0; y < base_size; ++y) {
        for (int x = 0; x < base_size; ++x) {
            double best = 1e18;
            const Site* site = &sites.front();
            for (const Site& s : sites) {
                double d = (s.x - x) * (s.x - x) + (s.y - y) * (s.y - y);
                if (d < best) {
                    best = d;
                    site = &s;
                }
            }
            for (int c = 0; c < 3; ++c) {
                double v = 0.0, amp = 0.55, total = 0.0;
                for (int o = 0; o < spec.texture_octaves; ++o) {
                    v += amp * noise[static_cast<std::size_t>(c)].sample(o, y, x);
                    total += amp;
                    amp *= 0.55;
                }
                double shade = 0.8 + 0.4 * (v / total);  // mild multiplicative shading
                base.at(y, x, c) =
                    static_cast<float>(std::clamp(site->color[c] * shade, 0.0, 1.0));
            }
        }
    }
    // High-contrast blobs with hard rims give the descriptors corners and
    // edges to latch onto.
    Rng rng(derive_stream({class_seed, fnv1a("blobs")}));
    for (int b = 0; b < spec.texture_blobs; ++b) {
        double cx = rng.uniform(0.2, 0.8) * base_size;
        double cy = rng.uniform(0.2, 0.8) * base_size;
        double radius = rng.uniform(0.04, 0.09) * base_size;
        float color[3] = {static_cast<float>(rng.uniform(0.0, 1.0)),
                          static_cast<float>(rng.uniform(0.0, 1.0)),
                          static_cast<float>(rng.uniform(0.0, 1.0))};
        int y0 = std::max(0, static_cast<int>(cy - radius - 1));
        int y1 = std::min(base_size - 1, static_cast<int>(cy + radius + 1));
        int x0 = std::max(0, static_cast<int>(cx - radius - 1));
        int x1 = std::min(base_size - 1, static_cast<int>(cx + radius + 1));
        for (int y = y0; y <= y1; ++y) {
            for (int x = x0; x <= x1; ++x) {
                double d = std::hypot(x - cx, y - cy) / radius;
                if (d >= 1.0) continue;
                float w = d > 0.85 ? static_cast<float>((1.0 - d) / 0.15) : 1.0f;
                for (int c = 0; c < 3; ++c) {
                    base.at(y, x, c) = base.at(y, x, c) * (1 - w) + color[c] * w;
                }
            }
        }
    }
    return base;
}

// Greedy high-gradient keypoint picks on the base texture with distance
// suppression, restricted to the central region so warped copies usually
// keep them in frame.
std::vector<Point2> pick_keypoints(const Image& base, int count, std::uint64_t seed) {
    std::vector<float> gray = grayscale(base);
    const int n = base.height;
    auto g = [&](int y, int x) { return gray[static_cast<std::size_t>(y) * n + x]; };
    struct Cand {
        double mag;
        int x, y;
    };
    std::vector<Cand> cands;
    const int lo = static_cast<int>(0.28 * n);
    const int hi = static_cast<int>(0.72 * n);
    for (int y = lo; y <= hi; ++y) {
        for (int x = lo; x <= hi; ++x) {
            double gx = 0.5 * (g(y, x + 1) - g(y, x - 1));
            double gy = 0.5 * (g(y + 1, x) - g(y - 1, x));
            cands.push_back({gx * gx + gy * gy, x, y});
        }
    }
    std::sort(cands.begin(), cands.end(), [](const Cand& a, const Cand& b) {
        if (a.mag != b.mag) return a.mag > b.mag;
        return a.y != b.y ? a.y < b.y : a.x < b.x;
    });
    const double min_dist = 0.09 * n;
    std::vector<Point2> picked;
    for (const Cand& c : cands) {
        if (static_cast<int>(picked.size()) >= count) break;
        bool ok = true;
        for (const Point2& p : picked) {
            if (std::hypot(p.x - c.x, p.y - c.y) < min_dist) {
                ok = false;
                break;
            }
        }
        if (ok) picked.push_back({static_cast<double>(c.x), static_cast<double>(c.y)});
    }
    // Low-texture bases may not yield enough suppressed picks; jitter fills in.
    Rng rng(derive_stream({seed, fnv1a("kp_fill")}));
    while (static_cast<int>(picked.size()) < count) {
        picked.push_back({rng.uniform(lo, hi), rng.uniform(lo, hi)});
    }
    return picked;
}

std::string image_id(int class_idx, int image_idx) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "c%02d_i%02d", class_idx, image_idx);
    return buf;
}

std::string bucket3(double value, double edge1, double edge2) {
    if (value <= edge1) return "easy";
    if (value <= edge2) return "medi";
    return "hard";
}

// Fraction of the base's central square that lands outside the image frame.
double truncated_fraction(const GeometricTransform& t, int base_size, PixelGrid img) {
    int samples = 0, outside = 0;
    for (int gy = 0; gy < 8; ++gy) {
        for (int gx = 0; gx < 8; ++gx) {
            Point2 p{base_size * (0.25 + 0.5 * gx / 7.0), base_size * (0.25 + 0.5 * gy / 7.0)};
            Point2 q = apply_transform(t, p);
            ++samples;
            if (!img.contains(q)) ++outside;
        }
    }
    return static_cast<double>(outside) / samples;
}

}  // namespace

GeneratedDataset generate_dataset(const SynthSpec& spec) {
    spec.validate();
    GeneratedDataset ds;
    ds.manifest.schema_version = 1;
    const int base_size = spec.image_size * 2;
    ds.oracle.base_size = base_size;
    const PixelGrid img_grid{spec.image_size, spec.image_size};
    const Point2 base_center{(base_size - 1) / 2.0, (base_size - 1) / 2.0};
    const Point2 img_center{(spec.image_size - 1) / 2.0, (spec.image_size - 1) / 2.0};

    struct PerImage {
        std::string id;
        double rotation;
        double scale;
        Split split;
        bool labeled;
    };

    for (int ci = 0; ci < spec.num_classes; ++ci) {
        std::string cls = "class" + std::to_string(ci);
        ds.manifest.classes.push_back(cls);
        Image base = class_base_texture(spec, ci, base_size);
        std::uint64_t class_seed = derive_stream({spec.seed, fnv1a("class"),
                                                  static_cast<std::uint64_t>(ci)});
        std::vector<Point2> base_kps =
            pick_keypoints(base, spec.keypoints_per_class, class_seed);

        // split assignment: first train, then val, then test (ids stay stable)
        const int n = spec.images_per_class;
        const int n_train = std::max(1, n - spec.val_per_class - spec.test_per_class);

        std::vector<PerImage> infos;
        Rng warp_rng(derive_stream({class_seed, fnv1a("warps")}));
        for (int ii = 0; ii < n; ++ii) {
            PerImage info;
            info.id = image_id(ci, ii);
            info.rotation = warp_rng.uniform(-spec.rotation_max, spec.rotation_max);
            info.scale = warp_rng.uniform(spec.scale_lo, spec.scale_hi);
            Point2 tr{warp_rng.uniform(-spec.translation_max, spec.translation_max),
                      warp_rng.uniform(-spec.translation_max, spec.translation_max)};
            if (ii < n_train) {
                info.split = Split::train;
            } else if (ii < n_train + spec.val_per_class) {
                info.split = Split::val;
            } else {
                info.split = Split::test;
            }

            // T: base -> image. Rotate/scale about the base center, then move
            // the base center to the (jittered) image center.
            GeometricTransform rs =
                GeometricTransform::similarity(info.rotation, info.scale, base_center, {0, 0});
            GeometricTransform shift = GeometricTransform::translation(
                img_center.x - base_center.x + tr.x, img_center.y - base_center.y + tr.y);
            GeometricTransform t = compose_affine(shift, rs);
            ds.oracle.transforms[info.id] = t.affine;

            Image warped = warp_image(base, t, img_grid);
            // per-image photometric variation, seeded
            Rng photo_rng(derive_stream({class_seed, fnv1a("photo"),
                                         static_cast<std::uint64_t>(ii)}));
            PhotometricDraw draw;
            draw.apply = true;
            draw.brightness = photo_rng.uniform(-spec.photo_jitter, spec.photo_jitter);
            draw.contrast = photo_rng.uniform(-spec.photo_jitter, spec.photo_jitter);
            draw.saturation = photo_rng.uniform(-spec.photo_jitter, spec.photo_jitter);
            warped = apply_photometric(warped, draw);
            ds.images[info.id] = to_u8(warped);

            ImageRecord rec;
            rec.id = info.id;
            rec.path = "images/" + info.id + ".png";
            rec.class_id = cls;
            rec.split = info.split;
            rec.width = spec.image_size;
            rec.height = spec.image_size;
            // object box: the base's central half mapped into the image
            Point2 corners[4] = {{0.25 * base_size, 0.25 * base_size},
                                 {0.75 * base_size, 0.25 * base_size},
                                 {0.25 * base_size, 0.75 * base_size},
                                 {0.75 * base_size, 0.75 * base_size}};
            BBox box{1e9, 1e9, -1e9, -1e9};
            for (Point2 p : corners) {
                Point2 q = apply_transform(t, p);
                box.x0 = std::min(box.x0, q.x);
                box.y0 = std::min(box.y0, q.y);
                box.x1 = std::max(box.x1, q.x);
                box.y1 = std::max(box.y1, q.y);
            }
            box.x0 = std::clamp(box.x0, 0.0, spec.image_size - 1.0);
            box.y0 = std::clamp(box.y0, 0.0, spec.image_size - 1.0);
            box.x1 = std::clamp(box.x1, 0.0, spec.image_size - 1.0);
            box.y1 = std::clamp(box.y1, 0.0, spec.image_size - 1.0);
            rec.bbox = box;
            ds.manifest.images.push_back(rec);
            infos.push_back(info);
        }

        // labeled image subset within the train split
        std::vector<int> train_idx;
        for (int ii = 0; ii < n; ++ii)
            if (infos[static_cast<std::size_t>(ii)].split == Split::train) train_idx.push_back(ii);
        Rng label_rng(derive_stream({class_seed, fnv1a("labeled")}));
        std::vector<int> shuffled = train_idx;
        label_rng.shuffle(shuffled);
        auto keep = static_cast<std::size_t>(
            std::ceil(spec.labeled_fraction * static_cast<double>(train_idx.size())));
        for (std::size_t k = 0; k < shuffled.size(); ++k) {
            infos[static_cast<std::size_t>(shuffled[k])].labeled = k < keep;
        }

        // annotated pairs: labeled train pairs + all val/val and test/test pairs
        for (int a = 0; a < n; ++a) {
            for (int b = 0; b < n; ++b) {
                if (a == b) continue;
                const PerImage& ia = infos[static_cast<std::size_t>(a)];
                const PerImage& ib = infos[static_cast<std::size_t>(b)];
                if (ia.split != ib.split) continue;
                if (ia.split == Split::train && !(ia.labeled && ib.labeled)) continue;

                GeometricTransform ta = GeometricTransform::from_affine(ds.oracle.transforms[ia.id]);
                GeometricTransform tb = GeometricTransform::from_affine(ds.oracle.transforms[ib.id]);
                AnnotatedPair pair;
                pair.src_id = ia.id;
                pair.tgt_id = ib.id;
                // keypoints kept away from the frame edge so field transfer
                // stays inside the bilinear-exact region of the cell lattice
                const double margin = 2.5;
                auto well_inside = [&](Point2 p) {
                    return p.x >= margin && p.x <= spec.image_size - 1 - margin &&
                           p.y >= margin && p.y <= spec.image_size - 1 - margin;
                };
                for (const Point2& kp : base_kps) {
                    Point2 pa = apply_transform(ta, kp);
                    Point2 pb = apply_transform(tb, kp);
                    if (!well_inside(pa) || !well_inside(pb)) continue;
                    pair.keypoints.push_back({pa, pb});
                }
                if (pair.keypoints.empty()) continue;

                double rot_delta = std::abs(ia.rotation - ib.rotation);
                double scale_delta = std::abs(std::log(ia.scale / ib.scale));
                double rot_range = 2.0 * spec.rotation_max;
                double scale_range = std::log(spec.scale_hi / spec.scale_lo);
                pair.tags.viewpoint = bucket3(rot_delta, rot_range / 3.0, 2.0 * rot_range / 3.0);
                pair.tags.scale = bucket3(scale_delta, scale_range / 3.0, 2.0 * scale_range / 3.0);
                double trunc_a = truncated_fraction(ta, base_size, img_grid);
                double trunc_b = truncated_fraction(tb, base_size, img_grid);
                const double trunc_thresh = 0.12;
                bool src_trunc = trunc_a > trunc_thresh;
                bool tgt_trunc = trunc_b > trunc_thresh;
                pair.tags.truncation = src_trunc && tgt_trunc ? "both"
                                       : src_trunc            ? "src"
                                       : tgt_trunc            ? "tgt"
                                                              : "none";
                pair.tags.occlusion = "none";
                ds.manifest.pairs.push_back(std::move(pair));
            }
        }
    }
    ds.manifest.validate();
    return ds;
}

void write_dataset(const GeneratedDataset& ds, const std::filesystem::path& out_dir) {
    std::filesystem::create_directories(out_dir / "images");
    for (const auto& [id, img] : ds.images) {
        save_png(out_dir / "images" / (id + ".png"), img);
    }
    save_manifest(ds.manifest, out_dir / "manifest.json");
    save_oracle(ds.oracle, out_dir / "oracle.json");
}

void save_oracle(const OracleStore& store, const std::filesystem::path& path) {
    json j;
    j["schema_version"] = store.schema_version;
    j["base_size"] = store.base_size;
    json t;
    for (const auto& [id, m] : store.transforms) t[id] = m;
    j["transforms"] = std::move(t);
    std::ofstream f(path);
    if (!f) throw IoFailure("cannot write oracle store: " + path.string());
    f << j.dump(2) << "\n";
}

OracleStore load_oracle(const std::filesystem::path& path) {
    std::ifstream f(path);
    if (!f) throw IoFailure("cannot read oracle store: " + path.string());
    json j;
    f >> j;
    OracleStore store;
    store.schema_version = j.at("schema_version").get<int>();
    store.base_size = j.at("base_size").get<int>();
    for (const auto& [id, m] : j.at("transforms").items()) {
        store.transforms[id] = m.get<std::array<double, 6>>();
    }
    return store;
}

}  // namespace matchlab
