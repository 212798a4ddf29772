#include "data.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

namespace faramtn {

namespace fs = std::filesystem;

void SyntheticSpec::validate() {
    if (channels < 1) throw ValidationError("synthetic spec: channels must be >= 1");
    if (height < 3 || width < 3) throw ValidationError("synthetic spec: image too small for the tile grid");
    if (positive_rate < 0.0 || positive_rate > 1.0) {
        throw ValidationError("synthetic spec: positive rate must be in [0,1]");
    }
    if (noise_sigma < 0.0) throw ValidationError("synthetic spec: noise sigma must be >= 0");
    const int g = grouping.group_count();
    if (g > 9) throw ValidationError("synthetic spec: at most 9 groups fit the 3x3 tile grid");

    regions.clear();
    regions.reserve(static_cast<std::size_t>(g));
    for (int i = 0; i < g; ++i) {
        const int tr = i / 3, tc = i % 3;
        Region r;
        r.row0 = tr * height / 3;
        r.col0 = tc * width / 3;
        r.rows = (tr + 1) * height / 3 - r.row0;
        r.cols = (tc + 1) * width / 3 - r.col0;
        regions.push_back(r);
    }
    const std::vector<int> sizes = grouping.group_sizes();
    for (int i = 0; i < g; ++i) {
        const Region& r = regions[static_cast<std::size_t>(i)];
        if (sizes[static_cast<std::size_t>(i)] > r.rows) {
            throw ValidationError("synthetic spec: group '" + grouping.group_name(i) + "' has " +
                                  std::to_string(sizes[static_cast<std::size_t>(i)]) +
                                  " attributes but its region has only " + std::to_string(r.rows) +
                                  " rows, so the pattern bands would overlap");
        }
    }
}

SyntheticSpec::Region SyntheticSpec::band_of(int attr_index) const {
    const int g = grouping.group_of(attr_index);
    const Region& tile = regions.at(static_cast<std::size_t>(g));
    const int m = grouping.group_sizes()[static_cast<std::size_t>(g)];
    const int q = grouping.index_within_group(attr_index);
    Region band;
    band.row0 = tile.row0 + q * tile.rows / m;
    band.rows = tile.row0 + (q + 1) * tile.rows / m - band.row0;
    band.col0 = tile.col0;
    band.cols = tile.cols;
    return band;
}

bool pattern_lit(int attr_index, int r, int c) {
    const int kind = attr_index % 4;
    const int s = 1 + attr_index / 4;
    switch (kind) {
        case 0: return r % (2 * s) < s;
        case 1: return c % (2 * s) < s;
        case 2: return (r + c) % (2 * s) < s;
        default: {
            const int period = 2 * s + 1;
            return ((r - c) % period + period) % period <= s;
        }
    }
}

SyntheticSpec SyntheticSpec::desk_default() {
    SyntheticSpec spec;
    std::vector<std::string> attrs;
    std::vector<int> assignment;
    for (int i = 0; i < 8; ++i) {
        attrs.push_back("attr_" + std::to_string(i));
        assignment.push_back(i < 4 ? 0 : 1);
    }
    spec.grouping = AttributeGrouping(std::move(attrs), {"group_0", "group_1"}, std::move(assignment));
    spec.validate();
    return spec;
}

SyntheticSpec SyntheticSpec::from_json_text(const std::string& text) {
    nlohmann::ordered_json j;
    try {
        j = nlohmann::ordered_json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        throw ParseError(std::string("synthetic spec: ") + e.what());
    }
    SyntheticSpec spec;
    for (const auto& [key, _] : j.items()) {
        if (key != "channels" && key != "height" && key != "width" && key != "grouping" &&
            key != "positive_rate" && key != "noise_sigma" && key != "seed") {
            throw ParseError("synthetic spec: unknown key '" + key + "'");
        }
    }
    if (!j.contains("grouping")) throw ParseError("synthetic spec: missing 'grouping'");
    spec.grouping = AttributeGrouping::from_json_text(j["grouping"].dump());
    spec.channels = j.value("channels", spec.channels);
    spec.height = j.value("height", spec.height);
    spec.width = j.value("width", spec.width);
    spec.positive_rate = j.value("positive_rate", spec.positive_rate);
    spec.noise_sigma = j.value("noise_sigma", spec.noise_sigma);
    spec.seed = j.value("seed", spec.seed);
    spec.validate();
    return spec;
}

std::string SyntheticSpec::to_json_text() const {
    nlohmann::ordered_json j;
    j["channels"] = channels;
    j["height"] = height;
    j["width"] = width;
    j["grouping"] = nlohmann::ordered_json::parse(grouping.to_json_text());
    j["positive_rate"] = positive_rate;
    j["noise_sigma"] = noise_sigma;
    j["seed"] = seed;
    return j.dump(2);
}

namespace {

void render_pattern(Tensor& image, const SyntheticSpec::Region& band, int attr_index) {
    for (int r = 0; r < band.rows; ++r) {
        for (int c = 0; c < band.cols; ++c) {
            if (!pattern_lit(attr_index, r, c)) continue;
            for (int ch = 0; ch < image.dim(0); ++ch) {
                image.at(ch, band.row0 + r, band.col0 + c) = 1.0;
            }
        }
    }
}

}  // namespace

Dataset generate_synthetic(const SyntheticSpec& spec, int n) {
    return generate_synthetic(spec, n, spec.seed);
}

Dataset generate_synthetic(const SyntheticSpec& spec, int n, std::uint64_t seed) {
    if (n < 1) throw ValidationError("generate_synthetic: n must be >= 1");
    SyntheticSpec local = spec;
    local.seed = seed;
    local.validate();

    const int k = local.grouping.attribute_count();

    Dataset ds;
    ds.spec = local;
    ds.samples.reserve(static_cast<std::size_t>(n));
    for (int s = 0; s < n; ++s) {
        Rng rng = Rng::derive(seed, static_cast<std::uint64_t>(s));
        Sample sample;
        sample.image = Tensor::zeros({local.channels, local.height, local.width});
        sample.labels.resize(static_cast<std::size_t>(k));
        for (int i = 0; i < k; ++i) {
            sample.labels[static_cast<std::size_t>(i)] = rng.bernoulli(local.positive_rate) ? 1 : 0;
        }
        for (int i = 0; i < k; ++i) {
            if (!sample.labels[static_cast<std::size_t>(i)]) continue;
            render_pattern(sample.image, local.band_of(i), i);
        }
        if (local.noise_sigma > 0.0) {
            for (std::int64_t p = 0; p < sample.image.size(); ++p) {
                sample.image[p] += rng.normal(0.0, local.noise_sigma);
            }
        }
        for (std::int64_t p = 0; p < sample.image.size(); ++p) {
            sample.image[p] = std::clamp(sample.image[p], 0.0, 1.0);
        }
        ds.samples.push_back(std::move(sample));
    }
    return ds;
}

// ---- persistence ------------------------------------------------------------

namespace {

constexpr char kDataMagic[4] = {'F', 'A', 'R', 'D'};
constexpr std::uint32_t kDataVersion = 1;

void write_u32(std::ostream& out, std::uint32_t v) {
    unsigned char b[4];
    for (int i = 0; i < 4; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
    out.write(reinterpret_cast<const char*>(b), 4);
}

std::uint32_t read_u32(std::istream& in) {
    unsigned char b[4];
    in.read(reinterpret_cast<char*>(b), 4);
    if (!in) throw ParseError("dataset file truncated");
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(b[i]) << (8 * i);
    return v;
}

void write_f64(std::ostream& out, const double* data, std::int64_t count) {
    static_assert(sizeof(double) == 8);
    for (std::int64_t i = 0; i < count; ++i) {
        std::uint64_t bits;
        std::memcpy(&bits, &data[i], 8);
        unsigned char b[8];
        for (int j = 0; j < 8; ++j) b[j] = static_cast<unsigned char>(bits >> (8 * j));
        out.write(reinterpret_cast<const char*>(b), 8);
    }
}

void read_f64(std::istream& in, double* data, std::int64_t count) {
    for (std::int64_t i = 0; i < count; ++i) {
        unsigned char b[8];
        in.read(reinterpret_cast<char*>(b), 8);
        if (!in) throw ParseError("dataset file truncated");
        std::uint64_t bits = 0;
        for (int j = 0; j < 8; ++j) bits |= static_cast<std::uint64_t>(b[j]) << (8 * j);
        std::memcpy(&data[i], &bits, 8);
    }
}

}  // namespace

void save_dataset(const Dataset& dataset, const std::string& dir) {
    fs::create_directories(dir);
    {
        std::ofstream spec_out(fs::path(dir) / "spec.json");
        if (!spec_out) throw IoError("cannot write " + dir + "/spec.json");
        spec_out << dataset.spec.to_json_text() << '\n';
    }
    std::ofstream out(fs::path(dir) / "data.bin", std::ios::binary);
    if (!out) throw IoError("cannot write " + dir + "/data.bin");
    out.write(kDataMagic, 4);
    write_u32(out, kDataVersion);
    write_u32(out, static_cast<std::uint32_t>(dataset.samples.size()));
    write_u32(out, static_cast<std::uint32_t>(dataset.attribute_count()));
    write_u32(out, static_cast<std::uint32_t>(dataset.spec.channels));
    write_u32(out, static_cast<std::uint32_t>(dataset.spec.height));
    write_u32(out, static_cast<std::uint32_t>(dataset.spec.width));
    for (const Sample& s : dataset.samples) {
        out.write(reinterpret_cast<const char*>(s.labels.data()),
                  static_cast<std::streamsize>(s.labels.size()));
        write_f64(out, s.image.data(), s.image.size());
    }
    if (!out) throw IoError("write failed for " + dir + "/data.bin");
}

Dataset load_dataset(const std::string& dir) {
    std::ifstream spec_in(fs::path(dir) / "spec.json");
    if (!spec_in) throw IoError("cannot read " + dir + "/spec.json");
    std::stringstream spec_text;
    spec_text << spec_in.rdbuf();

    Dataset ds;
    ds.spec = SyntheticSpec::from_json_text(spec_text.str());

    std::ifstream in(fs::path(dir) / "data.bin", std::ios::binary);
    if (!in) throw IoError("cannot read " + dir + "/data.bin");
    char magic[4];
    in.read(magic, 4);
    if (!in || std::memcmp(magic, kDataMagic, 4) != 0) {
        throw ParseError("dataset container: bad magic");
    }
    const std::uint32_t version = read_u32(in);
    if (version != kDataVersion) {
        throw ParseError("dataset container: unsupported version " + std::to_string(version));
    }
    const std::uint32_t n = read_u32(in);
    const std::uint32_t k = read_u32(in);
    const std::uint32_t c = read_u32(in);
    const std::uint32_t h = read_u32(in);
    const std::uint32_t w = read_u32(in);
    if (static_cast<int>(k) != ds.spec.grouping.attribute_count() ||
        static_cast<int>(c) != ds.spec.channels || static_cast<int>(h) != ds.spec.height ||
        static_cast<int>(w) != ds.spec.width) {
        throw ParseError("dataset container: header disagrees with spec.json");
    }
    ds.samples.resize(n);
    for (std::uint32_t s = 0; s < n; ++s) {
        Sample& sample = ds.samples[s];
        sample.labels.resize(k);
        in.read(reinterpret_cast<char*>(sample.labels.data()), k);
        if (!in) throw ParseError("dataset file truncated");
        for (std::uint8_t v : sample.labels) {
            if (v > 1) throw ParseError("dataset container: label byte out of range");
        }
        sample.image = Tensor::zeros({static_cast<int>(c), static_cast<int>(h), static_cast<int>(w)});
        read_f64(in, sample.image.data(), sample.image.size());
    }
    return ds;
}

// ---- CelebA -----------------------------------------------------------------

CelebaAttributes load_celeba_attributes(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot read " + path);
    std::string line;
    if (!std::getline(in, line)) throw ParseError(path + ": missing count line");
    long declared = 0;
    try {
        declared = std::stol(line);
    } catch (...) {
        throw ParseError(path + " line 1: expected an image count, got '" + line + "'");
    }
    if (declared < 0) throw ParseError(path + " line 1: negative image count");

    CelebaAttributes out;
    if (!std::getline(in, line)) throw ParseError(path + ": missing attribute header");
    {
        std::istringstream header(line);
        std::string name;
        while (header >> name) out.names.push_back(name);
    }
    if (out.names.empty()) throw ParseError(path + " line 2: no attribute names");

    int line_no = 2;
    while (std::getline(in, line)) {
        ++line_no;
        std::istringstream row(line);
        CelebaAttributes::Row r;
        if (!(row >> r.image_id)) continue;  // blank line
        std::string tok;
        while (row >> tok) {
            if (tok == "1") {
                r.labels.push_back(1);
            } else if (tok == "-1") {
                r.labels.push_back(0);
            } else {
                throw ParseError(path + " line " + std::to_string(line_no) + ": value '" + tok +
                                 "' is not in {-1, 1}");
            }
        }
        if (r.labels.size() != out.names.size()) {
            throw ParseError(path + " line " + std::to_string(line_no) + ": expected " +
                             std::to_string(out.names.size()) + " labels, got " +
                             std::to_string(r.labels.size()));
        }
        out.rows.push_back(std::move(r));
    }
    if (static_cast<long>(out.rows.size()) != declared) {
        throw ParseError(path + ": count line says " + std::to_string(declared) + " rows but " +
                         std::to_string(out.rows.size()) + " were found");
    }
    return out;
}

// ---- augmentation -----------------------------------------------------------

Tensor hflip(const Tensor& image) {
    if (image.rank() != 3) throw ShapeError("hflip: expected C x H x W");
    const int c = image.dim(0), h = image.dim(1), w = image.dim(2);
    Tensor out({c, h, w});
    for (int ci = 0; ci < c; ++ci) {
        for (int i = 0; i < h; ++i) {
            for (int j = 0; j < w; ++j) out.at(ci, i, j) = image.at(ci, i, w - 1 - j);
        }
    }
    return out;
}

Tensor rotate_nearest(const Tensor& image, double degrees) {
    if (image.rank() != 3) throw ShapeError("rotate: expected C x H x W");
    if (degrees == 0.0) return image;
    const int c = image.dim(0), h = image.dim(1), w = image.dim(2);
    const double rad = degrees * 3.14159265358979323846 / 180.0;
    const double cs = std::cos(rad), sn = std::sin(rad);
    const double cy = (h - 1) * 0.5, cx = (w - 1) * 0.5;
    Tensor out({c, h, w});
    for (int i = 0; i < h; ++i) {
        for (int j = 0; j < w; ++j) {
            // inverse-map the destination pixel into the source frame
            const double dy = i - cy, dx = j - cx;
            const double sy = cs * dy + sn * dx + cy;
            const double sx = -sn * dy + cs * dx + cx;
            int si = static_cast<int>(std::lround(sy));
            int sj = static_cast<int>(std::lround(sx));
            si = std::clamp(si, 0, h - 1);  // edge padding
            sj = std::clamp(sj, 0, w - 1);
            for (int ci = 0; ci < c; ++ci) out.at(ci, i, j) = image.at(ci, si, sj);
        }
    }
    return out;
}

Tensor augment(const Tensor& image, Rng& rng) {
    Tensor out = rng.bernoulli(0.5) ? hflip(image) : image;
    const double angle = rng.uniform(-10.0, 10.0);
    return rotate_nearest(out, angle);
}

}  // namespace faramtn
