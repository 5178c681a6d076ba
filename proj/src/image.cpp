// Copyright Contributors to the a1o project
// SPDX-License-Identifier: Apache-2.0

#include "a1o/image.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <string>

namespace a1o {

Image::Image(int w, int h, int c, double fill)
    : width(w), height(h), channels(c), data(static_cast<std::size_t>(w) * h * c, fill)
{
    if (w <= 0 || h <= 0 || (c != 1 && c != 3)) throw DimensionError("image extents must be positive with 1 or 3 channels");
}

namespace {

// Next whitespace-delimited header token, skipping '#' comments.
std::string header_token(std::istream& in, const std::string& file)
{
    std::string tok;
    int ch;
    while ((ch = in.get()) != EOF) {
        if (ch == '#') {
            while ((ch = in.get()) != EOF && ch != '\n') {}
            continue;
        }
        if (std::isspace(ch)) {
            if (!tok.empty()) return tok;
            continue;
        }
        tok.push_back(static_cast<char>(ch));
    }
    if (tok.empty()) throw FormatError(file + ": truncated header");
    return tok;
}

int header_int(std::istream& in, const std::string& file)
{
    const auto tok = header_token(in, file);
    try {
        std::size_t used = 0;
        const int v = std::stoi(tok, &used);
        if (used != tok.size()) throw FormatError(file + ": bad header value '" + tok + "'");
        return v;
    } catch (const std::logic_error&) {
        throw FormatError(file + ": bad header value '" + tok + "'");
    }
}

}  // namespace

Image read_pnm(const std::filesystem::path& file)
{
    std::ifstream in(file, std::ios::binary);
    if (!in) throw FormatError("cannot open image " + file.string());
    const std::string name = file.string();
    const auto magic = header_token(in, name);
    int channels;
    if (magic == "P5")
        channels = 1;
    else if (magic == "P6")
        channels = 3;
    else
        throw FormatError(name + ": unsupported image type '" + magic + "' (binary PGM/PPM only)");
    const int w = header_int(in, name), h = header_int(in, name), maxval = header_int(in, name);
    if (w <= 0 || h <= 0 || maxval <= 0 || maxval > 255) throw FormatError(name + ": unsupported extents or maxval");
    Image img(w, h, channels);
    std::vector<unsigned char> raw(img.data.size());
    in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
    if (in.gcount() != static_cast<std::streamsize>(raw.size())) throw FormatError(name + ": truncated pixel data");
    for (std::size_t i = 0; i < raw.size(); ++i) img.data[i] = raw[i] / static_cast<double>(maxval);
    return img;
}

void write_pnm(const std::filesystem::path& file, const Image& image)
{
    std::ofstream out(file, std::ios::binary);
    if (!out) throw FormatError("cannot write image " + file.string());
    out << (image.channels == 1 ? "P5" : "P6") << '\n' << image.width << ' ' << image.height << "\n255\n";
    std::vector<unsigned char> raw(image.data.size());
    for (std::size_t i = 0; i < raw.size(); ++i)
        raw[i] = static_cast<unsigned char>(std::lround(std::clamp(image.data[i], 0.0, 1.0) * 255.0));
    out.write(reinterpret_cast<const char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
}

void quantize8(Image& image)
{
    for (auto& v : image.data) v = std::lround(std::clamp(v, 0.0, 1.0) * 255.0) / 255.0;
}

Image to_gray(const Image& image)
{
    if (image.channels == 1) return image;
    Image g(image.width, image.height, 1);
    for (int y = 0; y < image.height; ++y)
        for (int x = 0; x < image.width; ++x)
            g.at(x, y) = 0.299 * image.at(x, y, 0) + 0.587 * image.at(x, y, 1) + 0.114 * image.at(x, y, 2);
    return g;
}

Image flip_horizontal(const Image& image)
{
    Image f = image;
    for (int y = 0; y < image.height; ++y)
        for (int x = 0; x < image.width; ++x)
            for (int c = 0; c < image.channels; ++c) f.at(x, y, c) = image.at(image.width - 1 - x, y, c);
    return f;
}

double sample_bilinear(const Image& image, double u, double v, int c)
{
    const double fx = u - 0.5, fy = v - 0.5;
    const double x0f = std::floor(fx), y0f = std::floor(fy);
    const double ax = fx - x0f, ay = fy - y0f;
    auto px = [&](double xi, double yi) {
        const int x = static_cast<int>(std::clamp(xi, 0.0, static_cast<double>(image.width - 1)));
        const int y = static_cast<int>(std::clamp(yi, 0.0, static_cast<double>(image.height - 1)));
        return image.at(x, y, c);
    };
    const double top = (1.0 - ax) * px(x0f, y0f) + ax * px(x0f + 1, y0f);
    const double bottom = (1.0 - ax) * px(x0f, y0f + 1) + ax * px(x0f + 1, y0f + 1);
    return (1.0 - ay) * top + ay * bottom;
}

Tensor crop_resize(const Image& gray, const Box& box, int size)
{
    const double s = box.w / size;
    if (!(box.w > 0.0 && box.h > 0.0)) throw ContractError("crop_resize: box must have positive area");
    Similarity t;
    t.scale = s;
    t.tx = box.x;
    t.ty = box.y;
    if (std::abs(box.w - box.h) <= 1e-12 * box.w) return warp(gray, t, size);
    // Non-square boxes scale each axis independently.
    if (gray.channels != 1) throw DimensionError("crop_resize: expected a single-channel image");
    Tensor out(Shape{1, 1, static_cast<std::size_t>(size), static_cast<std::size_t>(size)});
    for (int i = 0; i < size; ++i)
        for (int j = 0; j < size; ++j)
            out[static_cast<std::size_t>(i * size + j)] =
                sample_bilinear(gray, box.x + (j + 0.5) * box.w / size, box.y + (i + 0.5) * box.h / size);
    return out;
}

Tensor warp(const Image& gray, const Similarity& out_to_in, int size)
{
    if (gray.channels != 1) throw DimensionError("warp: expected a single-channel image");
    if (size <= 0) throw DimensionError("warp: output size must be positive");
    Tensor out(Shape{1, 1, static_cast<std::size_t>(size), static_cast<std::size_t>(size)});
    for (int i = 0; i < size; ++i)
        for (int j = 0; j < size; ++j) {
            const Point p = out_to_in.apply({j + 0.5, i + 0.5});
            out[static_cast<std::size_t>(i * size + j)] = sample_bilinear(gray, p.x, p.y);
        }
    return out;
}

Image tensor_to_image(const Tensor& patch)
{
    if (patch.rank() != 4 || patch.extent(0) != 1 || patch.extent(1) != 1)
        throw DimensionError("tensor_to_image: expected [1, 1, H, W], got " + shape_to_string(patch.shape()));
    Image img(static_cast<int>(patch.extent(3)), static_cast<int>(patch.extent(2)));
    std::copy(patch.data().begin(), patch.data().end(), img.data.begin());
    return img;
}

}  // namespace a1o
