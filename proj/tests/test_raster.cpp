#include "doctest.h"

#include <filesystem>
#include <unistd.h>

#include "tamperlab/codec.hpp"
#include "tamperlab/raster.hpp"

namespace fs = std::filesystem;
using namespace tamperlab;

namespace {

const fs::path kData = fs::path(TAMPERLAB_TEST_DATA);

struct TempDir {
    fs::path path;
    TempDir() : path(fs::temp_directory_path() / ("tamperlab_raster_" + std::to_string(::getpid())))
    {
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
};

// Hand-assembled 8-bit gray PNG so decoding is not checked against our own encoder.
Bytes gray_png(int w, int h, std::uint8_t value)
{
    Image img(h, w, 1, value / 255.0);
    return encode_png8(img);
}

} // namespace

TEST_CASE("raster rejects channel counts other than 1 and 3")
{
    CHECK_THROWS_AS(Image(2, 2, 2), Error);
    CHECK_THROWS_AS(Image(2, 2, 4), Error);
    CHECK_NOTHROW(Image(2, 2, 1));
    CHECK_NOTHROW(Image(2, 2, 3));
    try {
        Image(1, 1, 2);
    } catch (const Error& e) {
        CHECK(e.code() == Errc::unsupported_channel_count);
    }
}

TEST_CASE("raster planes must stay within [0,1]")
{
    FloatMap p = FloatMap::Constant(2, 2, 0.5);
    p(1, 1) = 1.5;
    CHECK_THROWS_AS(gray_image(p), Error);
    p(1, 1) = -0.1;
    CHECK_THROWS_AS(gray_image(p), Error);
    p(1, 1) = 1.0;
    CHECK_NOTHROW(gray_image(p));
}

TEST_CASE("interleaved round trip keeps pixel order")
{
    std::vector<double> data = {0.0, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0, 0.25};
    const Image img = Image::from_interleaved(2, 2, 3, data);
    CHECK(img(0, 1, 0) == doctest::Approx(0.3));
    CHECK(img(1, 0, 2) == doctest::Approx(0.8));
    CHECK(img.interleaved() == data);
}

TEST_CASE("to_gray uses the standard luma weights")
{
    Image white(1, 1, 3, 1.0);
    CHECK(to_gray(white)(0, 0) == doctest::Approx(1.0));

    Image red(1, 1, 3, 0.0);
    red(0, 0, 0) = 1.0;
    CHECK(to_gray(red)(0, 0) == doctest::Approx(0.299).epsilon(1e-12));

    Image mixed(1, 1, 3, 0.0);
    mixed(0, 0, 0) = 0.2;
    mixed(0, 0, 1) = 0.4;
    mixed(0, 0, 2) = 0.6;
    CHECK(to_gray(mixed)(0, 0) == doctest::Approx(0.299 * 0.2 + 0.587 * 0.4 + 0.114 * 0.6));

    FloatMap p(2, 3);
    p << 0.1, 0.2, 0.3, 0.4, 0.5, 0.6;
    CHECK((to_gray(gray_image(p)) == p).all());
}

TEST_CASE("8-bit PNG decoding normalizes by 255")
{
    const Image black = decode_image(gray_png(2, 2, 0));
    CHECK(black.height() == 2);
    CHECK(black.width() == 2);
    CHECK((black.channel(0) == 0.0).all());
    CHECK(decode_image(gray_png(1, 1, 255))(0, 0, 0) == 1.0);
    CHECK(decode_image(gray_png(1, 1, 128))(0, 0, 0) == doctest::Approx(128.0 / 255.0).epsilon(1e-15));
    CHECK(128.0 / 255.0 == doctest::Approx(0.50196).epsilon(1e-5));
}

TEST_CASE("PNG round trips are exact on the quantization grid")
{
    Image rgb(3, 4, 3);
    for (Index y = 0; y < 3; ++y)
        for (Index x = 0; x < 4; ++x)
            for (int c = 0; c < 3; ++c)
                rgb(y, x, c) = double((y * 37 + x * 11 + c * 70) % 256) / 255.0;
    CHECK(decode_image(encode_png8(rgb)) == rgb);

    FloatMap diff(2, 3);
    diff << 0.0, 1.0, 0.123456, 0.5, 0.999, 1e-6;
    const Image back = decode_image(encode_png16(diff));
    REQUIRE(back.channels() == 1);
    CHECK(((back.channel(0) - diff).abs() <= 0.5 / 65535.0 + 1e-15).all());
}

TEST_CASE("masks save as 0/255 bytes and reload bit-exact")
{
    TempDir tmp;
    BinaryLabel all = BinaryLabel::Constant(3, 3, true);
    save_mask(all, tmp.path / "all.png");
    CHECK((load_image(tmp.path / "all.png").channel(0) == 1.0).all());
    save_mask(BinaryLabel::Constant(3, 3, false), tmp.path / "none.png");
    CHECK((load_image(tmp.path / "none.png").channel(0) == 0.0).all());

    BinaryLabel checker(2, 2);
    checker << true, false, false, true;
    save_mask(checker, tmp.path / "checker.png");
    CHECK((load_mask(tmp.path / "checker.png") == checker).all());
}

TEST_CASE("atomic write leaves only the target file")
{
    TempDir tmp;
    write_file_atomic(tmp.path / "a.bin", Bytes{1, 2, 3});
    write_file_atomic(tmp.path / "a.bin", Bytes{4, 5});
    CHECK(read_file(tmp.path / "a.bin") == Bytes{4, 5});
    CHECK(std::distance(fs::directory_iterator(tmp.path), fs::directory_iterator()) == 1);
}

TEST_CASE("JPEG decoding")
{
    const Image rgb = load_image(kData / "rgb8x8.jpg");
    CHECK(rgb.channels() == 3);
    CHECK(rgb.height() == 8);
    CHECK(rgb.width() == 8);
    CHECK(rgb(4, 4, 1) == doctest::Approx(128.0 / 255.0).epsilon(0.05));

    const Image gray = load_image(kData / "gray4x6.jpg");
    CHECK(gray.channels() == 1);
    CHECK(gray.height() == 4);
    CHECK(gray.width() == 6);
    CHECK(gray(2, 3, 0) == doctest::Approx(200.0 / 255.0).epsilon(0.01));
}

TEST_CASE("palette and low bit-depth PNGs expand")
{
    const Image pal = load_image(kData / "palette.png");
    REQUIRE(pal.channels() == 3);
    CHECK(pal(0, 0, 0) == 1.0);
    CHECK(pal(0, 0, 2) == 0.0);
    CHECK(pal(0, 1, 2) == 1.0);

    const Image bits = load_image(kData / "bilevel.png");
    REQUIRE(bits.channels() == 1);
    CHECK(bits(0, 0, 0) == 1.0);
    CHECK(bits(0, 1, 0) == 0.0);
}

TEST_CASE("decoder errors")
{
    const auto code_of = [](auto&& fn) {
        try {
            fn();
        } catch (const Error& e) {
            return e.code();
        }
        return Errc::config_error;
    };
    CHECK(code_of([] { load_image(kData / "rgba.png"); }) == Errc::unsupported_channel_count);
    CHECK(code_of([] { load_image(kData / "cmyk.jpg"); }) == Errc::unsupported_channel_count);
    CHECK(code_of([] { decode_image(Bytes{1, 2, 3, 4, 5, 6, 7, 8, 9}); }) == Errc::decode_error);
    Bytes truncated = gray_png(16, 16, 7);
    truncated.resize(truncated.size() / 2);
    CHECK(code_of([&] { decode_image(truncated); }) == Errc::decode_error);
    CHECK(code_of([] { load_image("/nonexistent/none.png"); }) == Errc::io_error);
}
