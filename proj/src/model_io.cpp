#include "model_io.hpp"

#include <cstring>
#include <filesystem>
#include <fstream>

#include <json.hpp>

#include "config.hpp"

namespace faramtn {

namespace {

constexpr char kModelMagic[4] = {'F', 'A', 'R', 'M'};
constexpr std::uint32_t kModelVersion = 1;

void write_u32(std::ostream& out, std::uint32_t v) {
    unsigned char b[4];
    for (int i = 0; i < 4; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
    out.write(reinterpret_cast<const char*>(b), 4);
}

std::uint32_t read_u32(std::istream& in) {
    unsigned char b[4];
    in.read(reinterpret_cast<char*>(b), 4);
    if (!in) throw ParseError("model container truncated");
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(b[i]) << (8 * i);
    return v;
}

}  // namespace

void save_model(const std::string& path, const Model& model, const ParamMap& params) {
    const std::filesystem::path p(path);
    if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
    std::ofstream out(p, std::ios::binary);
    if (!out) throw IoError("cannot write " + path);

    nlohmann::ordered_json header;
    header["model"] = nlohmann::ordered_json::parse(model_config_to_json_text(model.config()));
    header["grouping"] = nlohmann::ordered_json::parse(model.grouping().to_json_text());
    const std::string header_text = header.dump();

    out.write(kModelMagic, 4);
    write_u32(out, kModelVersion);
    write_u32(out, static_cast<std::uint32_t>(header_text.size()));
    out.write(header_text.data(), static_cast<std::streamsize>(header_text.size()));
    write_u32(out, static_cast<std::uint32_t>(params.size()));
    for (const auto& [name, tensor] : params) {
        write_u32(out, static_cast<std::uint32_t>(name.size()));
        out.write(name.data(), static_cast<std::streamsize>(name.size()));
        write_u32(out, static_cast<std::uint32_t>(tensor.rank()));
        for (int d = 0; d < tensor.rank(); ++d) write_u32(out, static_cast<std::uint32_t>(tensor.dim(d)));
        for (std::int64_t i = 0; i < tensor.size(); ++i) {
            std::uint64_t bits;
            const double v = tensor[i];
            std::memcpy(&bits, &v, 8);
            unsigned char b[8];
            for (int j = 0; j < 8; ++j) b[j] = static_cast<unsigned char>(bits >> (8 * j));
            out.write(reinterpret_cast<const char*>(b), 8);
        }
    }
    if (!out) throw IoError("write failed for " + path);
}

LoadedModel load_model(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot read " + path);
    char magic[4];
    in.read(magic, 4);
    if (!in || std::memcmp(magic, kModelMagic, 4) != 0) {
        throw ParseError("model container: bad magic in " + path);
    }
    const std::uint32_t version = read_u32(in);
    if (version != kModelVersion) {
        throw ParseError("model container: unsupported version " + std::to_string(version));
    }
    const std::uint32_t header_len = read_u32(in);
    std::string header_text(header_len, '\0');
    in.read(header_text.data(), header_len);
    if (!in) throw ParseError("model container truncated");

    nlohmann::ordered_json header;
    try {
        header = nlohmann::ordered_json::parse(header_text);
    } catch (const nlohmann::json::parse_error& e) {
        throw ParseError(std::string("model container header: ") + e.what());
    }
    ModelConfig cfg = model_config_from_json_text(header.at("model").dump());
    AttributeGrouping grouping = AttributeGrouping::from_json_text(header.at("grouping").dump());
    Model model(std::move(cfg), std::move(grouping));

    const std::uint32_t count = read_u32(in);
    ParamMap params;
    for (std::uint32_t e = 0; e < count; ++e) {
        const std::uint32_t name_len = read_u32(in);
        std::string name(name_len, '\0');
        in.read(name.data(), name_len);
        const std::uint32_t rank = read_u32(in);
        if (rank < 1 || rank > 4) throw ParseError("model container: bad tensor rank");
        std::vector<int> shape(rank);
        for (std::uint32_t d = 0; d < rank; ++d) shape[d] = static_cast<int>(read_u32(in));
        Tensor t = Tensor::zeros(shape);
        for (std::int64_t i = 0; i < t.size(); ++i) {
            unsigned char b[8];
            in.read(reinterpret_cast<char*>(b), 8);
            if (!in) throw ParseError("model container truncated");
            std::uint64_t bits = 0;
            for (int j = 0; j < 8; ++j) bits |= static_cast<std::uint64_t>(b[j]) << (8 * j);
            double v;
            std::memcpy(&v, &bits, 8);
            t[i] = v;
        }
        params.emplace(std::move(name), std::move(t));
    }

    // every expected parameter must be present with the config-implied shape
    const auto shapes = model.param_shapes();
    if (shapes.size() != params.size()) {
        throw ShapeError("model container: parameter count does not match the config");
    }
    for (const auto& [name, shape] : shapes) {
        auto it = params.find(name);
        if (it == params.end()) throw ShapeError("model container: missing parameter '" + name + "'");
        if (it->second.shape() != shape) {
            throw ShapeError("model container: parameter '" + name + "' has the wrong shape");
        }
    }
    return LoadedModel{std::move(model), std::move(params)};
}

}  // namespace faramtn
