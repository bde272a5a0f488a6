#include "tamperlab/codec.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <csetjmp>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <iterator>

#include <jpeglib.h>

namespace tamperlab {

namespace fs = std::filesystem;

namespace {

bool is_png(const Bytes& b)
{
    static const std::uint8_t sig[8] = {0x89, 'P', 'N', 'G', 0x0D, 0x0A, 0x1A, 0x0A};
    return b.size() >= 8 && std::memcmp(b.data(), sig, 8) == 0;
}

bool is_jpeg(const Bytes& b)
{
    return b.size() >= 3 && b[0] == 0xFF && b[1] == 0xD8 && b[2] == 0xFF;
}

struct PngReadCursor {
    const Bytes* bytes;
    std::size_t offset;
};

void png_read_from_memory(png_structp png, png_bytep out, png_size_t count)
{
    auto* cursor = static_cast<PngReadCursor*>(png_get_io_ptr(png));
    if (cursor->offset + count > cursor->bytes->size())
        png_error(png, "truncated PNG stream");
    std::memcpy(out, cursor->bytes->data() + cursor->offset, count);
    cursor->offset += count;
}

void png_write_to_memory(png_structp png, png_bytep data, png_size_t count)
{
    auto* out = static_cast<Bytes*>(png_get_io_ptr(png));
    out->insert(out->end(), data, data + count);
}

void png_flush_noop(png_structp) {}

void png_error_jump(png_structp png, png_const_charp msg)
{
    auto* message = static_cast<std::string*>(png_get_error_ptr(png));
    if (message)
        *message = msg;
    png_longjmp(png, 1);
}

void png_warning_ignore(png_structp, png_const_charp) {}

struct RawPng {
    png_uint_32 width = 0;
    png_uint_32 height = 0;
    int channels = 0;
    int bit_depth = 0;
    bool has_alpha = false;
    std::vector<std::uint8_t> data;
};

// Locals in this frame stay trivial; libpng errors longjmp back here.
bool read_png_raw(const Bytes& bytes, RawPng& raw, std::string& message)
{
    png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, &message, png_error_jump,
                                             png_warning_ignore);
    if (!png) {
        message = "png_create_read_struct failed";
        return false;
    }
    png_infop info = png_create_info_struct(png);
    PngReadCursor cursor{&bytes, 0};
    std::vector<png_bytep> rows;

    if (setjmp(png_jmpbuf(png))) {
        png_destroy_read_struct(&png, &info, nullptr);
        return false;
    }
    png_set_read_fn(png, &cursor, png_read_from_memory);
    png_read_info(png, info);

    raw.width = png_get_image_width(png, info);
    raw.height = png_get_image_height(png, info);
    const int color_type = png_get_color_type(png, info);
    raw.bit_depth = png_get_bit_depth(png, info);
    if (color_type & PNG_COLOR_MASK_ALPHA) {
        raw.has_alpha = true;
        png_destroy_read_struct(&png, &info, nullptr);
        return true;
    }
    if (color_type == PNG_COLOR_TYPE_PALETTE) {
        png_set_palette_to_rgb(png);
        raw.bit_depth = 8;
    }
    if (color_type == PNG_COLOR_TYPE_GRAY && raw.bit_depth < 8) {
        png_set_expand_gray_1_2_4_to_8(png);
        raw.bit_depth = 8;
    }
    png_read_update_info(png, info);
    raw.channels = png_get_channels(png, info);

    const std::size_t rowbytes = png_get_rowbytes(png, info);
    raw.data.resize(rowbytes * raw.height);
    rows.resize(raw.height);
    for (png_uint_32 y = 0; y < raw.height; ++y)
        rows[y] = raw.data.data() + y * rowbytes;
    png_read_image(png, rows.data());
    png_read_end(png, nullptr);
    png_destroy_read_struct(&png, &info, nullptr);
    return true;
}

Image decode_png(const Bytes& bytes)
{
    RawPng raw;
    std::string message;
    if (!read_png_raw(bytes, raw, message))
        throw Error(Errc::decode_error, "png: " + message);
    if (raw.has_alpha)
        throw Error(Errc::unsupported_channel_count, "PNG with alpha channel");
    if (raw.channels != 1 && raw.channels != 3)
        throw Error(Errc::unsupported_channel_count,
                    "PNG with " + std::to_string(raw.channels) + " channels");

    const int channels = raw.channels;
    std::vector<Plane<double>> planes(channels, Plane<double>(raw.height, raw.width));
    std::size_t i = 0;
    for (png_uint_32 y = 0; y < raw.height; ++y) {
        for (png_uint_32 x = 0; x < raw.width; ++x) {
            for (int c = 0; c < channels; ++c) {
                if (raw.bit_depth == 16) {
                    const unsigned v = (unsigned(raw.data[2 * i]) << 8) | raw.data[2 * i + 1];
                    planes[c](y, x) = v / 65535.0;
                } else {
                    planes[c](y, x) = raw.data[i] / 255.0;
                }
                ++i;
            }
        }
    }
    return Image(std::move(planes));
}

struct JpegErrorManager {
    jpeg_error_mgr base;
    std::jmp_buf jump;
    char message[JMSG_LENGTH_MAX];
};

void jpeg_error_exit(j_common_ptr cinfo)
{
    auto* err = reinterpret_cast<JpegErrorManager*>(cinfo->err);
    (*cinfo->err->format_message)(cinfo, err->message);
    std::longjmp(err->jump, 1);
}

Image decode_jpeg(const Bytes& bytes)
{
    jpeg_decompress_struct cinfo{};
    JpegErrorManager err{};
    cinfo.err = jpeg_std_error(&err.base);
    err.base.error_exit = jpeg_error_exit;
    std::vector<std::uint8_t> buffer;
    int width = 0, height = 0, channels = 0;

    if (setjmp(err.jump)) {
        jpeg_destroy_decompress(&cinfo);
        throw Error(Errc::decode_error, std::string("jpeg: ") + err.message);
    }
    jpeg_create_decompress(&cinfo);
    jpeg_mem_src(&cinfo, bytes.data(), static_cast<unsigned long>(bytes.size()));
    jpeg_read_header(&cinfo, TRUE);
    if (cinfo.jpeg_color_space == JCS_CMYK || cinfo.jpeg_color_space == JCS_YCCK) {
        jpeg_destroy_decompress(&cinfo);
        throw Error(Errc::unsupported_channel_count, "CMYK JPEG");
    }
    jpeg_start_decompress(&cinfo);
    width = static_cast<int>(cinfo.output_width);
    height = static_cast<int>(cinfo.output_height);
    channels = cinfo.output_components;
    buffer.resize(static_cast<std::size_t>(width) * height * channels);
    while (cinfo.output_scanline < cinfo.output_height) {
        JSAMPROW row = buffer.data() + static_cast<std::size_t>(cinfo.output_scanline) * width * channels;
        jpeg_read_scanlines(&cinfo, &row, 1);
    }
    jpeg_finish_decompress(&cinfo);
    jpeg_destroy_decompress(&cinfo);

    if (channels != 1 && channels != 3)
        throw Error(Errc::unsupported_channel_count,
                    "JPEG with " + std::to_string(channels) + " channels");
    std::vector<double> data(buffer.size());
    for (std::size_t i = 0; i < buffer.size(); ++i)
        data[i] = buffer[i] / 255.0;
    return Image::from_interleaved(height, width, channels, data);
}

bool write_png_raw(Index height, Index width, int channels, int bit_depth,
                   const std::vector<std::uint8_t>& buffer, Bytes& out, std::string& message)
{
    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, &message, png_error_jump,
                                              png_warning_ignore);
    if (!png) {
        message = "png_create_write_struct failed";
        return false;
    }
    png_infop info = png_create_info_struct(png);
    const std::size_t rowbytes = static_cast<std::size_t>(width) * channels * (bit_depth / 8);

    if (setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        return false;
    }
    png_set_write_fn(png, &out, png_write_to_memory, png_flush_noop);
    png_set_IHDR(png, info, static_cast<png_uint_32>(width), static_cast<png_uint_32>(height),
                 bit_depth, channels == 1 ? PNG_COLOR_TYPE_GRAY : PNG_COLOR_TYPE_RGB,
                 PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);
    for (Index y = 0; y < height; ++y)
        png_write_row(png, const_cast<png_bytep>(buffer.data() + y * rowbytes));
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
    return true;
}

Bytes encode_png_rows(Index height, Index width, int channels, int bit_depth,
                      const std::vector<std::uint8_t>& buffer)
{
    Bytes out;
    std::string message;
    if (!write_png_raw(height, width, channels, bit_depth, buffer, out, message))
        throw Error(Errc::io_error, "png encode: " + message);
    return out;
}

std::uint8_t quantize8(double v)
{
    return static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0));
}

} // namespace

Bytes read_file(const fs::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw Error(Errc::io_error, "cannot open " + path.string());
    return Bytes(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

void write_file_atomic(const fs::path& path, const Bytes& bytes)
{
    fs::path tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out)
            throw Error(Errc::io_error, "cannot write " + tmp.string());
        out.write(reinterpret_cast<const char*>(bytes.data()),
                  static_cast<std::streamsize>(bytes.size()));
        if (!out)
            throw Error(Errc::io_error, "short write to " + tmp.string());
    }
    std::error_code ec;
    fs::rename(tmp, path, ec);
    if (ec)
        throw Error(Errc::io_error, "rename to " + path.string() + ": " + ec.message());
}

Image decode_image(const Bytes& bytes)
{
    if (is_png(bytes))
        return decode_png(bytes);
    if (is_jpeg(bytes))
        return decode_jpeg(bytes);
    throw Error(Errc::decode_error, "unrecognized image format");
}

Image load_image(const fs::path& path)
{
    const Bytes bytes = read_file(path);
    try {
        return decode_image(bytes);
    } catch (const Error& e) {
        throw Error(e.code(), path.string() + ": " + e.what());
    }
}

Bytes encode_png8(const Image& img)
{
    std::vector<std::uint8_t> buffer;
    buffer.reserve(static_cast<std::size_t>(img.height() * img.width() * img.channels()));
    for (double v : img.interleaved())
        buffer.push_back(quantize8(v));
    return encode_png_rows(img.height(), img.width(), img.channels(), 8, buffer);
}

Bytes encode_png16(const FloatMap& map)
{
    std::vector<std::uint8_t> buffer(static_cast<std::size_t>(map.size()) * 2);
    std::size_t i = 0;
    for (Index y = 0; y < map.rows(); ++y) {
        for (Index x = 0; x < map.cols(); ++x) {
            const auto v = static_cast<std::uint16_t>(
                std::lround(std::clamp(map(y, x), 0.0, 1.0) * 65535.0));
            buffer[i++] = static_cast<std::uint8_t>(v >> 8); // PNG is big-endian
            buffer[i++] = static_cast<std::uint8_t>(v & 0xFF);
        }
    }
    return encode_png_rows(map.rows(), map.cols(), 1, 16, buffer);
}

Bytes encode_mask_png(const BinaryLabel& mask)
{
    std::vector<std::uint8_t> buffer(static_cast<std::size_t>(mask.size()));
    std::size_t i = 0;
    for (Index y = 0; y < mask.rows(); ++y)
        for (Index x = 0; x < mask.cols(); ++x)
            buffer[i++] = mask(y, x) ? 255 : 0;
    return encode_png_rows(mask.rows(), mask.cols(), 1, 8, buffer);
}

void save_image(const Image& img, const fs::path& path)
{
    write_file_atomic(path, encode_png8(img));
}

void save_mask(const BinaryLabel& mask, const fs::path& path)
{
    write_file_atomic(path, encode_mask_png(mask));
}

void save_diff_map(const FloatMap& diff, const fs::path& path)
{
    write_file_atomic(path, encode_png16(diff));
}

BinaryLabel load_mask(const fs::path& path)
{
    return load_image(path).channel(0) > 0.5;
}

} // namespace tamperlab
