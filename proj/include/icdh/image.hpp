#pragma once

#include <csetjmp>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <iterator>
#include <string>
#include <vector>

#include <jpeglib.h>
#include <png.h>

#include "icdh/color.hpp"
#include "icdh/error.hpp"

namespace icdh {

/// Packed 8-bit RGB raster, row-major, no padding.
struct Image {
    int width = 0;
    int height = 0;
    std::vector<std::uint8_t> data;

    Image() = default;
    Image(int w, int h, Rgb8 fill = {}) : width(w), height(h), data(static_cast<std::size_t>(w) * h * 3)
    {
        if (w <= 0 || h <= 0) {
            throw DomainError("image dimensions must be positive");
        }
        for (std::size_t i = 0; i < data.size(); i += 3) {
            data[i] = fill.r;
            data[i + 1] = fill.g;
            data[i + 2] = fill.b;
        }
    }

    Rgb8 at(int x, int y) const noexcept
    {
        const auto* p = &data[(static_cast<std::size_t>(y) * width + x) * 3];
        return {p[0], p[1], p[2]};
    }
    void set(int x, int y, Rgb8 c) noexcept
    {
        auto* p = &data[(static_cast<std::size_t>(y) * width + x) * 3];
        p[0] = c.r;
        p[1] = c.g;
        p[2] = c.b;
    }

    friend bool operator==(const Image&, const Image&) = default;
};

using Bytes = std::vector<std::uint8_t>;

namespace detail {

struct JpegErrorManager {
    jpeg_error_mgr base;
    std::jmp_buf jump;
    char message[JMSG_LENGTH_MAX];
};

inline void jpeg_error_exit(j_common_ptr cinfo)
{
    auto* err = reinterpret_cast<JpegErrorManager*>(cinfo->err);
    (*cinfo->err->format_message)(cinfo, err->message);
    std::longjmp(err->jump, 1);
}

inline Image decode_jpeg(const Bytes& bytes)
{
    jpeg_decompress_struct cinfo{};
    JpegErrorManager err{};
    cinfo.err = jpeg_std_error(&err.base);
    err.base.error_exit = jpeg_error_exit;
    // Nothing with a non-trivial destructor may be live across setjmp.
    std::vector<std::uint8_t>* pixels = new std::vector<std::uint8_t>();
    int w = 0, h = 0;
    if (setjmp(err.jump)) {
        jpeg_destroy_decompress(&cinfo);
        delete pixels;
        throw ParseError(std::string("jpeg decode failed: ") + err.message);
    }
    jpeg_create_decompress(&cinfo);
    jpeg_mem_src(&cinfo, bytes.data(), static_cast<unsigned long>(bytes.size()));
    jpeg_read_header(&cinfo, TRUE);
    cinfo.out_color_space = JCS_RGB;
    jpeg_start_decompress(&cinfo);
    w = static_cast<int>(cinfo.output_width);
    h = static_cast<int>(cinfo.output_height);
    pixels->resize(static_cast<std::size_t>(w) * h * 3);
    while (cinfo.output_scanline < cinfo.output_height) {
        JSAMPROW row = pixels->data() + static_cast<std::size_t>(cinfo.output_scanline) * w * 3;
        jpeg_read_scanlines(&cinfo, &row, 1);
    }
    jpeg_finish_decompress(&cinfo);
    jpeg_destroy_decompress(&cinfo);

    Image img;
    img.width = w;
    img.height = h;
    img.data = std::move(*pixels);
    delete pixels;
    return img;
}

inline Image decode_png(const Bytes& bytes)
{
    png_image pi{};
    pi.version = PNG_IMAGE_VERSION;
    if (!png_image_begin_read_from_memory(&pi, bytes.data(), bytes.size())) {
        throw ParseError(std::string("png decode failed: ") + pi.message);
    }
    pi.format = PNG_FORMAT_RGB;
    Image img;
    img.width = static_cast<int>(pi.width);
    img.height = static_cast<int>(pi.height);
    img.data.resize(PNG_IMAGE_SIZE(pi));
    if (!png_image_finish_read(&pi, nullptr, img.data.data(), 0, nullptr)) {
        std::string msg = pi.message;
        png_image_free(&pi);
        throw ParseError("png decode failed: " + msg);
    }
    return img;
}

} // namespace detail

inline bool is_png(const Bytes& b) noexcept
{
    static constexpr std::uint8_t sig[8] = {0x89, 'P', 'N', 'G', 0x0D, 0x0A, 0x1A, 0x0A};
    return b.size() >= 8 && std::memcmp(b.data(), sig, 8) == 0;
}

inline bool is_jpeg(const Bytes& b) noexcept
{
    return b.size() >= 3 && b[0] == 0xFF && b[1] == 0xD8 && b[2] == 0xFF;
}

/// Decodes PNG or JPEG bytes, sniffing the format from the signature.
inline Image decode_image(const Bytes& bytes)
{
    if (is_png(bytes)) return detail::decode_png(bytes);
    if (is_jpeg(bytes)) return detail::decode_jpeg(bytes);
    throw ParseError("image is neither PNG nor JPEG");
}

inline Bytes encode_png(const Image& img)
{
    png_image pi{};
    pi.version = PNG_IMAGE_VERSION;
    pi.width = static_cast<png_uint_32>(img.width);
    pi.height = static_cast<png_uint_32>(img.height);
    pi.format = PNG_FORMAT_RGB;
    png_alloc_size_t size = 0;
    if (!png_image_write_to_memory(&pi, nullptr, &size, 0, img.data.data(), 0, nullptr)) {
        throw IoError(std::string("png encode failed: ") + pi.message);
    }
    Bytes out(size);
    if (!png_image_write_to_memory(&pi, out.data(), &size, 0, img.data.data(), 0, nullptr)) {
        throw IoError(std::string("png encode failed: ") + pi.message);
    }
    out.resize(size);
    return out;
}

inline Bytes read_file_bytes(const std::string& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw IoError("cannot open file: " + path);
    }
    return Bytes(std::istreambuf_iterator<char>(in), {});
}

inline void write_file_bytes(const std::string& path, const Bytes& bytes)
{
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw IoError("cannot write file: " + path);
    }
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) {
        throw IoError("short write: " + path);
    }
}

inline Image read_image(const std::string& path) { return decode_image(read_file_bytes(path)); }

inline void write_png(const std::string& path, const Image& img) { write_file_bytes(path, encode_png(img)); }

} // namespace icdh
