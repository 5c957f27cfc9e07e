#include "matchlab/eval.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "matchlab/image_io.hpp"
#include "matchlab/parallel.hpp"

namespace matchlab {

double pck(const std::vector<Point2>& pred, const std::vector<Point2>& gt, const PckSpec& spec,
           double frame_h, double frame_w) {
    if (pred.size() != gt.size()) throw LengthMismatch("pck: pred/gt lengths differ");
    if (pred.empty()) throw EmptyKeypoints("pck: no keypoints");
    if (frame_h <= 0 || frame_w <= 0) throw InvalidSpec("pck: frame dims must be positive");
    const double margin = spec.alpha * std::max(frame_h, frame_w);
    long correct = 0;
    for (std::size_t i = 0; i < pred.size(); ++i) {
        if (norm(pred[i] - gt[i]) <= margin) ++correct;
    }
    return static_cast<double>(correct) / static_cast<double>(pred.size());
}

double EvalReport::overall() const { return overall_at(slice_alpha); }

double EvalReport::overall_at(double alpha) const {
    for (const auto& [a, stat] : per_alpha) {
        if (a == alpha) return stat.pck();
    }
    throw InvalidSpec("EvalReport: alpha not in report");
}

std::string pair_key(const std::string& src_id, const std::string& tgt_id) {
    return src_id + "__" + tgt_id;
}

namespace {

std::vector<const AnnotatedPair*> split_pairs(const DatasetManifest& m, Split split) {
    std::vector<const AnnotatedPair*> out;
    for (const auto& pair : m.pairs) {
        if (m.image(pair.src_id).split != split) continue;
        if (pair.keypoints.empty()) continue;
        out.push_back(&pair);
    }
    return out;
}

// Normalization frame: source image dims, or the source object's bbox.
void frame_dims(const ImageRecord& src, PckNorm norm, double& h, double& w) {
    if (norm == PckNorm::bbox && src.bbox) {
        h = src.bbox->height();
        w = src.bbox->width();
    } else {
        h = src.height;
        w = src.width;
    }
}

}  // namespace

PredictionTable predict_with_params(const LoadedDataset& ds, const MatcherParams& params,
                                    Split split, int workers) {
    auto pairs = split_pairs(ds.manifest, split);
    std::vector<std::vector<Point2>> results(pairs.size());
    parallel_for(pairs.size(), workers, [&](std::size_t i) {
        const AnnotatedPair& pair = *pairs[i];
        Image src = to_float(ds.image(pair.src_id));
        Image tgt = to_float(ds.image(pair.tgt_id));
        MatchField field = match_field(params, src, tgt);
        std::vector<Point2> tgt_pts;
        tgt_pts.reserve(pair.keypoints.size());
        for (const auto& kp : pair.keypoints) tgt_pts.push_back(kp.tgt);
        results[i] = transfer_keypoints(field, tgt_pts, tgt.grid());
    });
    PredictionTable table;
    for (std::size_t i = 0; i < pairs.size(); ++i) {
        table[pair_key(pairs[i]->src_id, pairs[i]->tgt_id)] = std::move(results[i]);
    }
    return table;
}

EvalReport evaluate_report(const LoadedDataset& ds, const PredictionTable& preds,
                           const EvalOptions& opts) {
    auto pairs = split_pairs(ds.manifest, opts.split);
    if (pairs.empty()) throw MissingGroundTruth("evaluate_report: no annotated pairs in split");

    EvalReport report;
    report.slice_alpha = opts.slice_alpha;
    report.norm = opts.norm;
    for (double a : opts.alphas) report.per_alpha.push_back({a, SliceStat{}});

    for (const AnnotatedPair* pair : pairs) {
        auto it = preds.find(pair_key(pair->src_id, pair->tgt_id));
        if (it == preds.end()) {
            throw MissingGroundTruth("evaluate_report: no predictions for pair " +
                                     pair_key(pair->src_id, pair->tgt_id));
        }
        const std::vector<Point2>& p = it->second;
        if (p.size() != pair->keypoints.size()) {
            throw LengthMismatch("evaluate_report: prediction count mismatch for pair " +
                                 pair_key(pair->src_id, pair->tgt_id));
        }
        const ImageRecord& src = ds.manifest.image(pair->src_id);
        double fh, fw;
        frame_dims(src, opts.norm, fh, fw);
        const double frame_max = std::max(fh, fw);

        report.pairs += 1;
        for (std::size_t k = 0; k < p.size(); ++k) {
            const double dist = norm(p[k] - pair->keypoints[k].src);
            report.keypoints += 1;
            for (auto& [alpha, stat] : report.per_alpha) {
                stat.total += 1;
                if (dist <= alpha * frame_max) stat.correct += 1;
            }
            const bool correct_slice = dist <= opts.slice_alpha * frame_max;
            auto bump = [&](const std::string& key) {
                auto& stat = report.per_factor[key];
                stat.total += 1;
                if (correct_slice) stat.correct += 1;
            };
            auto& cls = report.per_class[src.class_id];
            cls.total += 1;
            if (correct_slice) cls.correct += 1;
            bump("viewpoint:" + pair->tags.viewpoint);
            bump("scale:" + pair->tags.scale);
            bump("truncation:" + pair->tags.truncation);
            bump("occlusion:" + pair->tags.occlusion);
        }
    }
    return report;
}

EvalReport evaluate_report(const LoadedDataset& ds, const MatcherParams& params,
                           const EvalOptions& opts) {
    return evaluate_report(ds, predict_with_params(ds, params, opts.split, opts.workers), opts);
}

void save_predictions(const PredictionTable& preds, const std::filesystem::path& path) {
    std::ofstream f(path);
    if (!f) throw IoFailure("cannot write predictions: " + path.string());
    f << "pair_id,kp_id,pred_x,pred_y\n";
    f.precision(17);
    for (const auto& [key, points] : preds) {
        for (std::size_t k = 0; k < points.size(); ++k) {
            f << key << "," << k << "," << points[k].x << "," << points[k].y << "\n";
        }
    }
}

PredictionTable load_predictions(const std::filesystem::path& path) {
    std::ifstream f(path);
    if (!f) throw IoFailure("cannot read predictions: " + path.string());
    std::string line;
    std::getline(f, line);  // header
    PredictionTable table;
    while (std::getline(f, line)) {
        if (line.empty()) continue;
        std::stringstream ss(line);
        std::string key, kp, xs, ys;
        std::getline(ss, key, ',');
        std::getline(ss, kp, ',');
        std::getline(ss, xs, ',');
        std::getline(ss, ys, ',');
        auto idx = static_cast<std::size_t>(std::stoul(kp));
        auto& vec = table[key];
        if (vec.size() <= idx) vec.resize(idx + 1);
        vec[idx] = {std::stod(xs), std::stod(ys)};
    }
    return table;
}

void save_report_csv(const EvalReport& report, const std::filesystem::path& path) {
    std::ofstream f(path);
    if (!f) throw IoFailure("cannot write report: " + path.string());
    f << "section,key,alpha,norm,pck,keypoints\n";
    f.precision(12);
    const char* norm = report.norm == PckNorm::bbox ? "bbox" : "img";
    for (const auto& [alpha, stat] : report.per_alpha) {
        f << "overall,all," << alpha << "," << norm << "," << stat.pck() << "," << stat.total
          << "\n";
    }
    for (const auto& [cls, stat] : report.per_class) {
        f << "class," << cls << "," << report.slice_alpha << "," << norm << "," << stat.pck()
          << "," << stat.total << "\n";
    }
    for (const auto& [factor, stat] : report.per_factor) {
        f << "factor," << factor << "," << report.slice_alpha << "," << norm << "," << stat.pck()
          << "," << stat.total << "\n";
    }
    f << "counts,pairs,,,," << report.pairs << "\n";
    f << "counts,keypoints,,,," << report.keypoints << "\n";
}

void save_report_text(const EvalReport& report, const std::filesystem::path& path) {
    std::ofstream f(path);
    if (!f) throw IoFailure("cannot write report: " + path.string());
    f.precision(4);
    const char* norm = report.norm == PckNorm::bbox ? "bbox" : "img";
    f << "PCK report (" << report.pairs << " pairs, " << report.keypoints << " keypoints, norm="
      << norm << ")\n\n";
    f << "alpha sweep:\n";
    for (const auto& [alpha, stat] : report.per_alpha) {
        f << "  alpha=" << alpha << "  pck=" << stat.pck() << "\n";
    }
    f << "\nper class (alpha=" << report.slice_alpha << "):\n";
    for (const auto& [cls, stat] : report.per_class) {
        f << "  " << cls << "  pck=" << stat.pck() << "  (" << stat.total << " kps)\n";
    }
    f << "\nper factor (alpha=" << report.slice_alpha << "):\n";
    for (const auto& [factor, stat] : report.per_factor) {
        f << "  " << factor << "  pck=" << stat.pck() << "  (" << stat.total << " kps)\n";
    }
}

void render_match_overlay(const ImageU8& src, const ImageU8& tgt,
                          const std::vector<KeypointPair>& keypoints,
                          const std::vector<Point2>& preds, double margin,
                          const std::filesystem::path& out_png) {
    const int gap = 4;
    ImageU8 canvas(std::max(src.height, tgt.height), src.width + gap + tgt.width, 32);
    for (int y = 0; y < src.height; ++y)
        for (int x = 0; x < src.width; ++x)
            std::copy_n(src.pixel(y, x), 3, canvas.pixel(y, x));
    for (int y = 0; y < tgt.height; ++y)
        for (int x = 0; x < tgt.width; ++x)
            std::copy_n(tgt.pixel(y, x), 3, canvas.pixel(y, x + src.width + gap));

    auto draw_line = [&](Point2 a, Point2 b, std::uint8_t r, std::uint8_t g, std::uint8_t bl) {
        const int steps = static_cast<int>(std::ceil(norm(b - a))) * 2 + 1;
        for (int i = 0; i <= steps; ++i) {
            double t = static_cast<double>(i) / steps;
            int x = static_cast<int>(std::lround(a.x + t * (b.x - a.x)));
            int y = static_cast<int>(std::lround(a.y + t * (b.y - a.y)));
            if (x < 0 || y < 0 || x >= canvas.width || y >= canvas.height) continue;
            std::uint8_t* p = canvas.pixel(y, x);
            p[0] = r;
            p[1] = g;
            p[2] = bl;
        }
    };
    for (std::size_t k = 0; k < keypoints.size() && k < preds.size(); ++k) {
        const bool ok = norm(preds[k] - keypoints[k].src) <= margin;
        Point2 from{keypoints[k].tgt.x + src.width + gap, keypoints[k].tgt.y};
        draw_line(from, preds[k], ok ? 40 : 220, ok ? 200 : 40, 40);
    }
    save_png(out_png, canvas);
}

}  // namespace matchlab
