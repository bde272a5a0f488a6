#pragma once

#include <cstdint>
#include <string>

#include "tamperlab/raster.hpp"

namespace tamperlab {

inline constexpr double kDefaultTau = 0.05;
inline constexpr std::int64_t kMagnitudeLo = 2480;
inline constexpr std::int64_t kMagnitudeHi = 184500;
inline constexpr double kMinOverlap = 0.2;
inline constexpr std::int64_t kSmallBelow = 23000;
inline constexpr std::int64_t kLargeFrom = 50000;

/// How per-channel differences collapse into one value per pixel.
enum class ChannelReduction { max, mean, luma };

ChannelReduction parse_channel_reduction(const std::string& s);
std::string to_string(ChannelReduction r);

/// Per-pixel absolute discrepancy between two images of equal shape,
/// reduced over channels (max by default).
template <typename Scalar>
Plane<Scalar> diff_map(const ImageRaster<Scalar>& orig, const ImageRaster<Scalar>& gen,
                       ChannelReduction reduction = ChannelReduction::max)
{
    if (!orig.same_dims(gen) || orig.channels() != gen.channels())
        throw Error(Errc::shape_mismatch, "diff_map inputs differ in shape");
    const int nc = orig.channels();
    if (reduction == ChannelReduction::luma && nc == 3) {
        Plane<Scalar> d = Scalar(kLumaR) * (orig.channel(0) - gen.channel(0))
                          + Scalar(kLumaG) * (orig.channel(1) - gen.channel(1))
                          + Scalar(kLumaB) * (orig.channel(2) - gen.channel(2));
        return d.abs().min(Scalar(1));
    }
    Plane<Scalar> d = (orig.channel(0) - gen.channel(0)).abs();
    for (int c = 1; c < nc; ++c) {
        if (reduction == ChannelReduction::mean)
            d += (orig.channel(c) - gen.channel(c)).abs();
        else
            d = d.max((orig.channel(c) - gen.channel(c)).abs());
    }
    if (reduction == ChannelReduction::mean)
        d /= Scalar(nc);
    return d;
}

/// Strict indicator diff > tau.
template <typename Derived>
BinaryLabel threshold_label(const Eigen::ArrayBase<Derived>& diff,
                            typename Derived::Scalar tau)
{
    if (!(tau >= 0 && tau <= 1))
        throw Error(Errc::invalid_argument, "tau outside [0,1]");
    return diff > tau;
}

struct LabelArtifacts {
    FloatMap diff;
    BinaryLabel label;
    double tau = kDefaultTau;
    std::int64_t tampered_size = 0;

    static LabelArtifacts build(FloatMap diff, double tau)
    {
        LabelArtifacts a;
        a.label = threshold_label(diff, tau);
        a.diff = std::move(diff);
        a.tau = tau;
        a.tampered_size = static_cast<std::int64_t>(a.label.count());
        return a;
    }
};

struct CheckVerdict {
    std::string name;
    bool passed = false;
    double measured = 0.0;
    std::string bounds;

    friend bool operator==(const CheckVerdict&, const CheckVerdict&) = default;
};

/// Passes iff lo <= size <= hi.
CheckVerdict edit_magnitude_check(std::int64_t tampered_size, std::int64_t lo = kMagnitudeLo,
                                  std::int64_t hi = kMagnitudeHi);

/// |label & guide| / |guide|.
double overlap_ratio(const BinaryLabel& label, const BinaryLabel& guide_mask);

/// Passes iff ratio >= min_ratio (samples below it are discarded).
CheckVerdict pixel_semantic_check(double ratio, double min_ratio = kMinOverlap);

enum class SizeBucket { small, medium, large };

SizeBucket size_bucket(std::int64_t tampered_size);
std::string to_string(SizeBucket b);
SizeBucket parse_size_bucket(const std::string& s);

} // namespace tamperlab
