#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "tamperlab/homography.hpp"
#include "tamperlab/raster.hpp"

namespace tamperlab {

struct Keypoint {
    Eigen::Vector2d pt; ///< subpixel position, x right / y down
    double angle = 0.0; ///< intensity-centroid orientation, radians
    double response = 0.0;
};

/// 256-bit rotated BRIEF descriptor.
using Descriptor = std::array<std::uint64_t, 4>;

int hamming(const Descriptor& a, const Descriptor& b);

struct FeatureParams {
    double fast_threshold = 0.05; ///< on [0,1] intensities
    int max_features = 500;
    double ratio = 0.8;           ///< Lowe ratio test
    int max_distance = 80;        ///< reject matches with more differing bits
    int min_matches = 8;
};

/// FAST-9 corners with 3x3 non-maximum suppression, ranked by Harris
/// response, refined to subpixel and oriented. At most max_features.
std::vector<Keypoint> detect_keypoints(const FloatMap& gray, const FeatureParams& params = {});

/// Steered BRIEF descriptors, one per keypoint.
std::vector<Descriptor> describe_keypoints(const FloatMap& gray,
                                           const std::vector<Keypoint>& keypoints);

/// Correspondences from generated image (src) to original image (dst),
/// sorted by score descending. Throws too_few_keypoints below
/// params.min_matches.
std::vector<Correspondence> detect_and_match(const Image& orig, const Image& gen,
                                             const FeatureParams& params = {});

} // namespace tamperlab
