#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "grouping.hpp"
#include "rng.hpp"
#include "tensor.hpp"

namespace faramtn {

struct Sample {
    Tensor image;                      // channels x H x W, values in [0,1]
    std::vector<std::uint8_t> labels;  // K binary labels
};

// Synthetic region-attribute task. The image is split into a 3x3 tile grid
// and group g owns tile g in row-major order. The tile is sliced into one
// horizontal band per member attribute; a positive label fills its band with
// that attribute's texture (stripe orientation and period indexed by the
// attribute's global index). Bands are disjoint, so every label stays exactly
// recoverable from the noise-free image, and the textures are globally
// distinct, which keeps the task learnable under spatial pooling.
struct SyntheticSpec {
    int channels = 3;
    int height = 32;
    int width = 32;
    AttributeGrouping grouping;
    double positive_rate = 0.5;
    double noise_sigma = 0.05;
    std::uint64_t seed = 1;

    struct Region {
        int row0 = 0, col0 = 0, rows = 0, cols = 0;
    };
    // Tile of each group, derived from the grid; filled by validate().
    std::vector<Region> regions;

    // Band of attribute i inside its group's tile.
    Region band_of(int attr_index) const;

    void validate();

    static SyntheticSpec desk_default();  // 8 attributes in 2 groups, 3x32x32
    static SyntheticSpec from_json_text(const std::string& text);
    std::string to_json_text() const;
};

// Texture of attribute i at band-local pixel (r, c): stripes (horizontal,
// vertical, diagonal, anti-diagonal by i mod 4) whose period grows with i/4.
bool pattern_lit(int attr_index, int r, int c);

struct Dataset {
    SyntheticSpec spec;
    std::vector<Sample> samples;

    int attribute_count() const { return spec.grouping.attribute_count(); }
    int size() const { return static_cast<int>(samples.size()); }
};

// Deterministic in (spec, seed); sample i draws from a derived substream so
// the output is independent of generation order.
Dataset generate_synthetic(const SyntheticSpec& spec, int n);
Dataset generate_synthetic(const SyntheticSpec& spec, int n, std::uint64_t seed);

// Binary container (shape header + little-endian doubles) next to a JSON
// sidecar of the generating spec.
void save_dataset(const Dataset& dataset, const std::string& dir);
Dataset load_dataset(const std::string& dir);

// ---- CelebA attribute-file ingestion ---------------------------------------

struct CelebaAttributes {
    std::vector<std::string> names;
    struct Row {
        std::string image_id;
        std::vector<std::uint8_t> labels;
    };
    std::vector<Row> rows;
};

// Published list-attribute format: count line, header line, then one row per
// image of "<id> v1 ... vK" with every v in {-1, 1} (-1 maps to 0).
CelebaAttributes load_celeba_attributes(const std::string& path);

// ---- augmentation -----------------------------------------------------------

Tensor hflip(const Tensor& image);
// Nearest-neighbor rotation about the image center with edge padding.
Tensor rotate_nearest(const Tensor& image, double degrees);
// Train-time policy: flip with probability 0.5, rotate uniform in [-10, 10] deg.
Tensor augment(const Tensor& image, Rng& rng);

}  // namespace faramtn
