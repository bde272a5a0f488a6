#pragma once

#include <optional>
#include <utility>

#include "tamperlab/features.hpp"
#include "tamperlab/homography.hpp"
#include "tamperlab/raster.hpp"

namespace tamperlab {

struct RectifyConfig {
    int iterations = 2000;
    double inlier_px = 3.0;
    int min_inliers = 8;
    double low_intensity = 10.0 / 255.0;
    double max_area_ratio = 0.10;
    std::uint64_t seed = 0x5eed;
    int max_features = 500;
    double ratio = 0.8;
    double fast_threshold = 0.05;
    int dilate_iterations = 2;

    FeatureParams feature_params() const;
    RansacParams ransac_params() const;
};

struct WarpResult {
    Image image;
    BinaryLabel validity; ///< false where the back-projected source is outside gen
};

/// Inverse-mapped bilinear warp of gen into an out_h x out_w frame; out(q) = gen(h^-1 q).
WarpResult warp_to_original(const Image& gen, const Homography& h, Index out_h, Index out_w);

/// Bilinear rescale with pixel-center alignment; identity when sizes match.
Image resize_bilinear(const Image& img, Index out_h, Index out_w);

/// Pixels of `seeds` reachable from the image border through 4-connected seed pixels.
BinaryLabel border_connected(const BinaryLabel& seeds);

/// Binary dilation with a 3x3 square structuring element.
BinaryLabel dilate3x3(const BinaryLabel& mask, int iterations);

struct RepairResult {
    Image image;
    double filled_fraction = 0.0; ///< flagged pixels / total, measured even when aborted
    bool applied = false;
};

/// Replaces border-connected invalid or dark (every channel < low_intensity)
/// pixels, dilated, with the original image's pixels. Leaves `aligned`
/// untouched when the flagged fraction exceeds max_area_ratio.
RepairResult repair_border(const Image& aligned, const Image& orig, const BinaryLabel& validity,
                           double low_intensity, double max_area_ratio,
                           int dilate_iterations = 2);

struct RectifyResult {
    Image aligned;
    std::optional<Homography> used_homography;
    bool fell_back = false;
    double border_filled_fraction = 0.0;
    BinaryLabel validity;
    std::size_t inlier_count = 0;
};

/// Aligns gen into orig's frame. Never throws for matching or consensus
/// failures; those fall back to gen rescaled to orig's size.
RectifyResult rectify_pair(const Image& orig, const Image& gen, const RectifyConfig& cfg = {});

} // namespace tamperlab
