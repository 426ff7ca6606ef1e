#include "medfinder/volume.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

#include "medfinder/common.hpp"

namespace medfinder {

Volume load_volume(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open volume: " + path.string());
    std::string header;
    if (!std::getline(in, header)) throw DataError("missing volume header: " + path.string());
    std::istringstream hs(header);
    long long w = 0, h = 0, d = 0;
    if (!(hs >> w >> h >> d) || w < 1 || h < 1 || d < 1)
        throw DataError("bad volume header '" + header + "' in " + path.string());

    Volume v(static_cast<std::size_t>(w), static_cast<std::size_t>(h),
             static_cast<std::size_t>(d));
    in.read(reinterpret_cast<char*>(v.voxels.data()),
            static_cast<std::streamsize>(v.size() * sizeof(float)));
    if (static_cast<std::size_t>(in.gcount()) != v.size() * sizeof(float))
        throw DataError("truncated volume payload: " + path.string());
    return v;
}

void save_volume(const std::filesystem::path& path, const Volume& v) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write volume: " + path.string());
    out << v.width << ' ' << v.height << ' ' << v.depth << '\n';
    out.write(reinterpret_cast<const char*>(v.voxels.data()),
              static_cast<std::streamsize>(v.size() * sizeof(float)));
    if (!out) throw DataError("short write on volume: " + path.string());
}

double missing_fraction(const Volume& v) noexcept {
    if (v.voxels.empty()) return 0.0;
    std::size_t missing = 0;
    for (float x : v.voxels)
        if (std::isnan(x)) ++missing;
    return static_cast<double>(missing) / static_cast<double>(v.voxels.size());
}

Volume imputed(const Volume& v) {
    Volume out = v;
    for (float& x : out.voxels)
        if (std::isnan(x)) x = 0.0f;
    return out;
}

bool all_finite(const Volume& v) noexcept {
    for (float x : v.voxels)
        if (!std::isfinite(x)) return false;
    return true;
}

} // namespace medfinder
