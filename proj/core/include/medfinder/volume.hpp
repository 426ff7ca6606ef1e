#pragma once

#include <cstddef>
#include <filesystem>
#include <vector>

namespace medfinder {

// 3D voxel block. Storage is float32 to match the on-disk format; math on
// voxels happens in double. Linear layout: depth outermost, then height,
// then width, i.e. index(w, h, d) = (d * height + h) * width + w.
//
// Raw (pre-curation) volumes may contain NaN voxels marking missing values;
// everything downstream of curation requires finite voxels.
struct Volume {
    std::size_t width = 0;
    std::size_t height = 0;
    std::size_t depth = 0;
    std::vector<float> voxels;

    Volume() = default;
    Volume(std::size_t w, std::size_t h, std::size_t d, float fill = 0.0f)
        : width(w), height(h), depth(d), voxels(w * h * d, fill) {}

    std::size_t size() const noexcept { return width * height * depth; }

    float at(std::size_t w, std::size_t h, std::size_t d) const noexcept {
        return voxels[(d * height + h) * width + w];
    }
    float& at(std::size_t w, std::size_t h, std::size_t d) noexcept {
        return voxels[(d * height + h) * width + w];
    }

    bool operator==(const Volume&) const = default;
};

// Volume file: ASCII header line "W H D\n", then W*H*D little-endian
// float32 values in the layout above.
Volume load_volume(const std::filesystem::path& path);
void save_volume(const std::filesystem::path& path, const Volume& v);

// Fraction of NaN voxels.
double missing_fraction(const Volume& v) noexcept;

// Copy with NaN voxels replaced by zero.
Volume imputed(const Volume& v);

bool all_finite(const Volume& v) noexcept;

} // namespace medfinder
