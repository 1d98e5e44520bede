#pragma once

/// @file viz.hpp Exports first-layer encoder weights as a grid of 28x28
/// filter tiles in binary PGM (P5).

#include <cmath>
#include <cstdint>
#include <fstream>
#include <string>
#include <vector>

#include "sae/common.hpp"
#include "sae/idx.hpp"
#include "sae/matrix.hpp"

namespace sae {

struct WeightGridImage {
    std::size_t width = 0;
    std::size_t height = 0;
    std::vector<std::uint8_t> pixels;  // row-major grayscale
};

/** Lays out one min-max-normalized 28x28 tile per hidden unit.
 *
 * The grid is ceil(sqrt(m)) tiles wide. Each filter is normalized to 0..255
 * on its own range; a constant filter maps to 0, unused trailing tiles are
 * mid-gray (128).
 */
inline WeightGridImage render_weight_grid(const Matrix &w_enc) {
    if (w_enc.cols() != kImagePixels)
        throw ShapeError("render_weight_grid: weights are " + shape_str(w_enc) +
                         ", expected m x 784");
    const std::size_t m = w_enc.rows();
    const std::size_t grid_cols =
        static_cast<std::size_t>(std::ceil(std::sqrt(static_cast<double>(m))));
    const std::size_t grid_rows = (m + grid_cols - 1) / grid_cols;

    WeightGridImage img;
    img.width = grid_cols * kImageSide;
    img.height = grid_rows * kImageSide;
    img.pixels.assign(img.width * img.height, 128);

    for (std::size_t k = 0; k < m; ++k) {
        const double *f = w_enc.row(k);
        double lo = f[0], hi = f[0];
        for (std::size_t i = 1; i < kImagePixels; ++i) {
            lo = std::min(lo, f[i]);
            hi = std::max(hi, f[i]);
        }
        const double range = hi - lo;
        const std::size_t cell_r = (k / grid_cols) * kImageSide;
        const std::size_t cell_c = (k % grid_cols) * kImageSide;
        for (std::size_t i = 0; i < kImageSide; ++i) {
            std::uint8_t *row = img.pixels.data() + (cell_r + i) * img.width + cell_c;
            for (std::size_t j = 0; j < kImageSide; ++j) {
                const double v = f[i * kImageSide + j];
                row[j] = range > 0.0
                             ? static_cast<std::uint8_t>(std::lround((v - lo) / range * 255.0))
                             : std::uint8_t{0};
            }
        }
    }
    return img;
}

/// Writes the grid as binary PGM (P5, maxval 255). Identical weights give
/// bit-identical files.
inline void export_weight_grid(const Matrix &w_enc, const std::string &out_path) {
    const WeightGridImage img = render_weight_grid(w_enc);
    std::ofstream out(out_path, std::ios::binary);
    if (!out) throw IoError("cannot write " + out_path);
    const std::string header = "P5\n" + std::to_string(img.width) + " " +
                               std::to_string(img.height) + "\n255\n";
    out.write(header.data(), static_cast<std::streamsize>(header.size()));
    out.write(reinterpret_cast<const char *>(img.pixels.data()),
              static_cast<std::streamsize>(img.pixels.size()));
    if (!out) throw IoError("short write to " + out_path);
}

} // namespace sae
