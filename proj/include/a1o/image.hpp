// Copyright Contributors to the a1o project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "a1o/geometry.hpp"
#include "a1o/tensor.hpp"

#include <filesystem>
#include <vector>

namespace a1o {

/// Interleaved image with values in [0, 1]. Pixel (i, j) covers
/// [j, j+1) x [i, i+1), so its center sits at (j + 0.5, i + 0.5).
struct Image {
    int width = 0;
    int height = 0;
    int channels = 1;
    std::vector<double> data;

    Image() = default;
    Image(int w, int h, int c = 1, double fill = 0.0);

    double at(int x, int y, int c = 0) const { return data[(static_cast<std::size_t>(y) * width + x) * channels + c]; }
    double& at(int x, int y, int c = 0) { return data[(static_cast<std::size_t>(y) * width + x) * channels + c]; }
    friend bool operator==(const Image&, const Image&) = default;
};

/// Binary PGM (P5) or PPM (P6) with maxval <= 255. Throws FormatError.
Image read_pnm(const std::filesystem::path& file);
/// P5 for one channel, P6 for three; values are rounded to 8 bits.
void write_pnm(const std::filesystem::path& file, const Image& image);

/// Rounds every value to the nearest multiple of 1/255.
void quantize8(Image& image);

Image to_gray(const Image& image);
Image flip_horizontal(const Image& image);

/// Bilinear value at continuous coordinate (u, v); samples outside the image
/// repeat the border pixels.
double sample_bilinear(const Image& image, double u, double v, int c = 0);

/// Resamples `box` of a single-channel image into a [1, 1, size, size] tensor.
Tensor crop_resize(const Image& gray, const Box& box, int size);

/// Output pixel center p maps to input coordinate `out_to_in.apply(p)`.
Tensor warp(const Image& gray, const Similarity& out_to_in, int size);

Image tensor_to_image(const Tensor& patch);

}  // namespace a1o
