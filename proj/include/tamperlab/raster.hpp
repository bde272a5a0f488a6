#pragma once

#include <Eigen/Dense>

#include <span>
#include <string>
#include <vector>

#include "tamperlab/error.hpp"

namespace tamperlab {

using Eigen::Index;

/// Row-major single-channel array; rows are image rows.
template <typename Scalar>
using Plane = Eigen::Array<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Per-pixel difference magnitudes, probability maps.
using FloatMap = Plane<double>;

/// Per-pixel tamper flags.
using BinaryLabel = Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

template <typename Derived1, typename Derived2>
bool same_shape(const Eigen::DenseBase<Derived1>& a, const Eigen::DenseBase<Derived2>& b)
{
    return a.rows() == b.rows() && a.cols() == b.cols();
}

/// H x W x C intensity image, one plane per channel, intensities in [0,1].
///
/// Only 1 (gray) and 3 (RGB) channel images are representable.
template <typename Scalar>
class ImageRaster {
public:
    using PlaneType = Plane<Scalar>;

    ImageRaster() = default;

    ImageRaster(Index height, Index width, int channels, Scalar fill = Scalar(0))
    {
        check_channels(channels);
        if (fill < Scalar(0) || fill > Scalar(1))
            throw Error(Errc::invalid_argument, "fill intensity outside [0,1]");
        planes_.assign(channels, PlaneType::Constant(height, width, fill));
    }

    explicit ImageRaster(std::vector<PlaneType> planes) : planes_(std::move(planes))
    {
        check_channels(static_cast<int>(planes_.size()));
        for (const auto& p : planes_) {
            if (!same_shape(p, planes_.front()))
                throw Error(Errc::shape_mismatch, "channel planes differ in size");
            if (p.size() > 0 && (p.minCoeff() < Scalar(0) || p.maxCoeff() > Scalar(1)))
                throw Error(Errc::invalid_argument, "intensity outside [0,1]");
        }
    }

    /// Builds from row-major interleaved HWC data.
    static ImageRaster from_interleaved(Index height, Index width, int channels,
                                        std::span<const Scalar> data)
    {
        check_channels(channels);
        if (static_cast<Index>(data.size()) != height * width * channels)
            throw Error(Errc::shape_mismatch, "interleaved buffer length != h*w*c");
        std::vector<PlaneType> planes(channels, PlaneType(height, width));
        for (Index y = 0; y < height; ++y)
            for (Index x = 0; x < width; ++x)
                for (int c = 0; c < channels; ++c)
                    planes[c](y, x) = data[(y * width + x) * channels + c];
        return ImageRaster(std::move(planes));
    }

    Index height() const { return planes_.empty() ? 0 : planes_.front().rows(); }
    Index width() const { return planes_.empty() ? 0 : planes_.front().cols(); }
    int channels() const { return static_cast<int>(planes_.size()); }
    bool empty() const { return height() == 0 || width() == 0; }

    const PlaneType& channel(int c) const { return planes_.at(c); }
    PlaneType& channel(int c) { return planes_.at(c); }

    Scalar operator()(Index y, Index x, int c = 0) const { return planes_[c](y, x); }
    Scalar& operator()(Index y, Index x, int c = 0) { return planes_[c](y, x); }

    std::vector<Scalar> interleaved() const
    {
        std::vector<Scalar> out(static_cast<std::size_t>(height() * width() * channels()));
        std::size_t i = 0;
        for (Index y = 0; y < height(); ++y)
            for (Index x = 0; x < width(); ++x)
                for (int c = 0; c < channels(); ++c)
                    out[i++] = planes_[c](y, x);
        return out;
    }

    template <typename Other>
    ImageRaster<Other> cast() const
    {
        std::vector<Plane<Other>> planes;
        for (const auto& p : planes_)
            planes.push_back(p.template cast<Other>());
        return ImageRaster<Other>(std::move(planes));
    }

    bool same_dims(const ImageRaster& other) const
    {
        return height() == other.height() && width() == other.width();
    }

    friend bool operator==(const ImageRaster& a, const ImageRaster& b)
    {
        if (a.channels() != b.channels() || !a.same_dims(b))
            return false;
        for (int c = 0; c < a.channels(); ++c)
            if ((a.planes_[c] != b.planes_[c]).any())
                return false;
        return true;
    }

private:
    static void check_channels(int channels)
    {
        if (channels != 1 && channels != 3)
            throw Error(Errc::unsupported_channel_count,
                        "expected 1 or 3 channels, got " + std::to_string(channels));
    }

    std::vector<PlaneType> planes_;
};

using Image = ImageRaster<double>;

inline constexpr double kLumaR = 0.299;
inline constexpr double kLumaG = 0.587;
inline constexpr double kLumaB = 0.114;

/// Luma for RGB input, passthrough for gray.
template <typename Scalar>
Plane<Scalar> to_gray(const ImageRaster<Scalar>& img)
{
    if (img.channels() == 1)
        return img.channel(0);
    Plane<Scalar> g = Scalar(kLumaR) * img.channel(0) + Scalar(kLumaG) * img.channel(1)
                      + Scalar(kLumaB) * img.channel(2);
    // keep within the per-pixel channel range despite rounding
    Plane<Scalar> lo = img.channel(0).min(img.channel(1)).min(img.channel(2));
    Plane<Scalar> hi = img.channel(0).max(img.channel(1)).max(img.channel(2));
    return g.max(lo).min(hi);
}

/// Replicates a gray image into 3 channels; 3-channel input is returned as is.
template <typename Scalar>
ImageRaster<Scalar> to_rgb(const ImageRaster<Scalar>& img)
{
    if (img.channels() == 3)
        return img;
    return ImageRaster<Scalar>(std::vector<Plane<Scalar>>(3, img.channel(0)));
}

/// Wraps a single map as a gray image.
template <typename Scalar>
ImageRaster<Scalar> gray_image(Plane<Scalar> plane)
{
    return ImageRaster<Scalar>(std::vector<Plane<Scalar>>{std::move(plane)});
}

} // namespace tamperlab
