#include "tamperlab/labeling.hpp"

namespace tamperlab {

ChannelReduction parse_channel_reduction(const std::string& s)
{
    if (s == "max")
        return ChannelReduction::max;
    if (s == "mean")
        return ChannelReduction::mean;
    if (s == "luma")
        return ChannelReduction::luma;
    throw Error(Errc::invalid_argument, "unknown channel reduction '" + s + "'");
}

std::string to_string(ChannelReduction r)
{
    switch (r) {
    case ChannelReduction::max: return "max";
    case ChannelReduction::mean: return "mean";
    case ChannelReduction::luma: return "luma";
    }
    return "max";
}

CheckVerdict edit_magnitude_check(std::int64_t tampered_size, std::int64_t lo, std::int64_t hi)
{
    if (lo > hi)
        throw Error(Errc::invalid_argument, "magnitude bounds inverted");
    return {"magnitude", lo <= tampered_size && tampered_size <= hi,
            static_cast<double>(tampered_size),
            "[" + std::to_string(lo) + ", " + std::to_string(hi) + "]"};
}

double overlap_ratio(const BinaryLabel& label, const BinaryLabel& guide_mask)
{
    if (!same_shape(label, guide_mask))
        throw Error(Errc::shape_mismatch, "label and guide mask differ in size");
    const auto guide = guide_mask.count();
    if (guide == 0)
        throw Error(Errc::empty_mask, "guide mask has no pixels");
    return static_cast<double>((label && guide_mask).count()) / static_cast<double>(guide);
}

CheckVerdict pixel_semantic_check(double ratio, double min_ratio)
{
    if (!(ratio >= 0.0 && ratio <= 1.0))
        throw Error(Errc::invalid_argument, "overlap ratio outside [0,1]");
    return {"overlap", ratio >= min_ratio, ratio, ">= " + std::to_string(min_ratio)};
}

SizeBucket size_bucket(std::int64_t tampered_size)
{
    if (tampered_size < kSmallBelow)
        return SizeBucket::small;
    if (tampered_size < kLargeFrom)
        return SizeBucket::medium;
    return SizeBucket::large;
}

std::string to_string(SizeBucket b)
{
    switch (b) {
    case SizeBucket::small: return "small";
    case SizeBucket::medium: return "medium";
    case SizeBucket::large: return "large";
    }
    return "small";
}

SizeBucket parse_size_bucket(const std::string& s)
{
    if (s == "small")
        return SizeBucket::small;
    if (s == "medium")
        return SizeBucket::medium;
    if (s == "large")
        return SizeBucket::large;
    throw Error(Errc::invalid_argument, "unknown size bucket '" + s + "'");
}

} // namespace tamperlab
