#pragma once

#include <filesystem>
#include <random>
#include <string>

#include "data.hpp"

namespace faramtn::testing {

// Scratch directory under the system temp root, removed on scope exit.
class TempDir {
public:
    explicit TempDir(const std::string& tag) {
        std::random_device rd;
        path_ = std::filesystem::temp_directory_path() /
                ("faramtn_" + tag + "_" + std::to_string(rd()) + std::to_string(rd()));
        std::filesystem::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    const std::filesystem::path& path() const { return path_; }
    std::string str(const std::string& sub = {}) const {
        return sub.empty() ? path_.string() : (path_ / sub).string();
    }

private:
    std::filesystem::path path_;
};

// Fixed-template nearest-pattern decoder: for each attribute, average the
// image over its band's lit template pixels and pick the nearer of the lit
// (1.0) and background (0.0) templates. Reads only the spec's declared
// layout, nothing from the generator internals.
inline std::vector<std::uint8_t> decode_labels(const SyntheticSpec& spec, const Tensor& image) {
    const int k = spec.grouping.attribute_count();
    std::vector<std::uint8_t> labels(static_cast<std::size_t>(k), 0);
    for (int i = 0; i < k; ++i) {
        const SyntheticSpec::Region band = spec.band_of(i);
        double sum = 0.0;
        int count = 0;
        for (int r = 0; r < band.rows; ++r) {
            for (int c = 0; c < band.cols; ++c) {
                if (!pattern_lit(i, r, c)) continue;
                for (int ch = 0; ch < image.dim(0); ++ch) {
                    sum += image.at(ch, band.row0 + r, band.col0 + c);
                }
                count += image.dim(0);
            }
        }
        const double mean = count > 0 ? sum / count : 0.0;
        labels[static_cast<std::size_t>(i)] = mean > 0.5 ? 1 : 0;
    }
    return labels;
}

}  // namespace faramtn::testing
