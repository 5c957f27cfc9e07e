#include "matchlab/annotator.hpp"

#include <cstring>
#include <fstream>

namespace matchlab {

namespace {

void interp_field(const MatchField& field, Point2 image_point, Point2& coord, double& conf) {
    const PixelGrid grid = field.tgt_grid;
    const int stride = field.tgt_stride;
    double half = (stride - 1) / 2.0;
    double u = std::clamp((image_point.x - half) / stride, 0.0, static_cast<double>(grid.width - 1));
    double v = std::clamp((image_point.y - half) / stride, 0.0, static_cast<double>(grid.height - 1));
    int x0 = std::min(static_cast<int>(std::floor(u)), grid.width - 1);
    int y0 = std::min(static_cast<int>(std::floor(v)), grid.height - 1);
    int x1 = std::min(x0 + 1, grid.width - 1);
    int y1 = std::min(y0 + 1, grid.height - 1);
    double fx = u - x0;
    double fy = v - y0;
    const double w[4] = {(1 - fx) * (1 - fy), fx * (1 - fy), (1 - fx) * fy, fx * fy};
    const int idx[4] = {y0 * grid.width + x0, y0 * grid.width + x1, y1 * grid.width + x0,
                        y1 * grid.width + x1};
    coord = {0, 0};
    conf = 0;
    for (int k = 0; k < 4; ++k) {
        coord = coord + w[k] * field.coords[static_cast<std::size_t>(idx[k])];
        conf += w[k] * field.confidence[static_cast<std::size_t>(idx[k])];
    }
}

}  // namespace

std::size_t PseudoLabel::retained() const {
    std::size_t n = 0;
    for (auto m : mask) n += m ? 1 : 0;
    return n;
}

PseudoLabel annotate_pair(const MatcherParams& teacher, const Image& src, const Image& tgt,
                          double tau, int teacher_generation) {
    if (tau < 0.0 || tau >= 1.0 + 1e-12) {
        // tau = 1 is allowed operationally (masks everything); negative is not.
        if (tau < 0.0) throw InvalidSpec("annotate_pair: tau must be >= 0");
    }
    PseudoLabel label;
    label.field = match_field(teacher, src, tgt);
    label.tau = tau;
    label.teacher_generation = teacher_generation;
    label.mask.resize(label.field.cells());
    for (std::size_t i = 0; i < label.mask.size(); ++i) {
        label.mask[i] = label.field.confidence[i] > tau ? 1 : 0;
    }
    return label;
}

PseudoLabel warp_pseudo_label(const PseudoLabel& label, const GeometricTransform& t,
                              PixelGrid tgt_image_grid) {
    const int stride = label.field.tgt_stride;
    PseudoLabel out;
    out.pair_src = label.pair_src;
    out.pair_tgt = label.pair_tgt;
    out.tau = label.tau;
    out.teacher_generation = label.teacher_generation;
    out.field.tgt_grid = {tgt_image_grid.height / stride, tgt_image_grid.width / stride};
    out.field.tgt_stride = stride;

    const std::size_t cells = static_cast<std::size_t>(out.field.tgt_grid.cells());
    out.field.coords.resize(cells);
    out.field.confidence.resize(cells);
    out.mask.resize(cells);

    GeometricTransform inv;
    const bool affine = t.kind == TransformKind::affine;
    if (affine) inv = invert_affine(t);

    const double half = (stride - 1) / 2.0;
    for (int cy = 0; cy < out.field.tgt_grid.height; ++cy) {
        for (int cx = 0; cx < out.field.tgt_grid.width; ++cx) {
            std::size_t j = static_cast<std::size_t>(cy) * out.field.tgt_grid.width + cx;
            Point2 center{cx * stride + half, cy * stride + half};
            Point2 pre = affine ? apply_transform(inv, center) : invert_point(t, center);
            Point2 coord;
            double conf;
            interp_field(label.field, pre, coord, conf);
            if (!tgt_image_grid.contains(pre)) {
                out.field.coords[j] = coord;
                out.field.confidence[j] = 0.0;
                out.mask[j] = 0;
                continue;
            }
            out.field.coords[j] = coord;
            out.field.confidence[j] = conf;
            out.mask[j] = conf > label.tau ? 1 : 0;
        }
    }
    return out;
}

namespace {
constexpr char kLabelMagic[4] = {'M', 'L', 'P', 'L'};
constexpr std::uint32_t kLabelVersion = 1;

template <typename T>
void write_pod(std::ofstream& f, const T& v) {
    f.write(reinterpret_cast<const char*>(&v), sizeof(T));
}
template <typename T>
void read_pod(std::ifstream& f, T& v) {
    f.read(reinterpret_cast<char*>(&v), sizeof(T));
}

void write_str(std::ofstream& f, const std::string& s) {
    std::uint32_t n = static_cast<std::uint32_t>(s.size());
    write_pod(f, n);
    f.write(s.data(), n);
}
std::string read_str(std::ifstream& f) {
    std::uint32_t n = 0;
    read_pod(f, n);
    std::string s(n, '\0');
    f.read(s.data(), n);
    return s;
}

std::string record_name(const PseudoLabel& label) {
    return label.pair_src + "__" + label.pair_tgt + ".plbin";
}

}  // namespace

void save_pseudo_labels(const std::vector<PseudoLabel>& labels, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    std::ofstream index(dir / "index.txt");
    if (!index) throw IoFailure("cannot write pseudo-label index in " + dir.string());
    index << "matchlab-pseudo-labels v" << kLabelVersion << "\n";
    index << labels.size() << "\n";
    for (const auto& label : labels) {
        const std::string name = record_name(label);
        index << name << "\n";
        std::ofstream f(dir / name, std::ios::binary);
        if (!f) throw IoFailure("cannot write pseudo-label record " + name);
        f.write(kLabelMagic, 4);
        write_pod(f, kLabelVersion);
        write_str(f, label.pair_src);
        write_str(f, label.pair_tgt);
        std::int32_t h = label.field.tgt_grid.height;
        std::int32_t w = label.field.tgt_grid.width;
        std::int32_t stride = label.field.tgt_stride;
        std::int32_t gen = label.teacher_generation;
        write_pod(f, h);
        write_pod(f, w);
        write_pod(f, stride);
        write_pod(f, label.tau);
        write_pod(f, gen);
        for (const Point2& p : label.field.coords) {
            write_pod(f, p.x);
            write_pod(f, p.y);
        }
        for (double c : label.field.confidence) write_pod(f, c);
        // mask bitset, 8 cells per byte
        std::uint8_t acc = 0;
        int nbits = 0;
        for (std::size_t i = 0; i < label.mask.size(); ++i) {
            acc |= static_cast<std::uint8_t>((label.mask[i] ? 1 : 0) << nbits);
            if (++nbits == 8) {
                write_pod(f, acc);
                acc = 0;
                nbits = 0;
            }
        }
        if (nbits > 0) write_pod(f, acc);
        if (!f) throw IoFailure("pseudo-label write failed: " + name);
    }
}

std::vector<PseudoLabel> load_pseudo_labels(const std::filesystem::path& dir) {
    std::ifstream index(dir / "index.txt");
    if (!index) throw IoFailure("cannot read pseudo-label index in " + dir.string());
    std::string header;
    std::getline(index, header);
    std::size_t count = 0;
    index >> count;
    std::string name;
    std::getline(index, name);  // consume newline
    std::vector<PseudoLabel> out;
    out.reserve(count);
    for (std::size_t r = 0; r < count; ++r) {
        std::getline(index, name);
        std::ifstream f(dir / name, std::ios::binary);
        if (!f) throw IoFailure("cannot read pseudo-label record " + name);
        char magic[4];
        f.read(magic, 4);
        std::uint32_t version = 0;
        read_pod(f, version);
        if (std::memcmp(magic, kLabelMagic, 4) != 0 || version != kLabelVersion) {
            throw IoFailure("bad pseudo-label record: " + name);
        }
        PseudoLabel label;
        label.pair_src = read_str(f);
        label.pair_tgt = read_str(f);
        std::int32_t h, w, stride, gen;
        read_pod(f, h);
        read_pod(f, w);
        read_pod(f, stride);
        read_pod(f, label.tau);
        read_pod(f, gen);
        label.teacher_generation = gen;
        label.field.tgt_grid = {h, w};
        label.field.tgt_stride = stride;
        std::size_t cells = static_cast<std::size_t>(h) * static_cast<std::size_t>(w);
        label.field.coords.resize(cells);
        label.field.confidence.resize(cells);
        label.mask.resize(cells);
        for (auto& p : label.field.coords) {
            read_pod(f, p.x);
            read_pod(f, p.y);
        }
        for (auto& c : label.field.confidence) read_pod(f, c);
        std::uint8_t acc = 0;
        int nbits = 8;
        for (std::size_t i = 0; i < cells; ++i) {
            if (nbits == 8) {
                read_pod(f, acc);
                nbits = 0;
            }
            label.mask[i] = (acc >> nbits) & 1;
            ++nbits;
        }
        if (!f) throw IoFailure("truncated pseudo-label record: " + name);
        out.push_back(std::move(label));
    }
    return out;
}

}  // namespace matchlab
