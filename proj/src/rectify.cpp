#include "tamperlab/rectify.hpp"

namespace tamperlab {

FeatureParams RectifyConfig::feature_params() const
{
    FeatureParams p;
    p.fast_threshold = fast_threshold;
    p.max_features = max_features;
    p.ratio = ratio;
    p.min_matches = min_inliers;
    return p;
}

RansacParams RectifyConfig::ransac_params() const
{
    return {iterations, inlier_px, min_inliers, seed};
}

RectifyResult rectify_pair(const Image& orig, const Image& gen, const RectifyConfig& cfg)
{
    const Image gen_matched = orig.channels() == 3 ? to_rgb(gen) : gen;
    try {
        const auto matches = detect_and_match(orig, gen_matched, cfg.feature_params());
        const auto fit = estimate_homography_ransac(matches, cfg.ransac_params());
        auto warped = warp_to_original(gen_matched, fit.model, orig.height(), orig.width());
        const Image orig_matched = gen_matched.channels() == 3 ? to_rgb(orig) : orig;
        auto repaired = repair_border(warped.image, orig_matched, warped.validity,
                                      cfg.low_intensity, cfg.max_area_ratio,
                                      cfg.dilate_iterations);
        RectifyResult r;
        r.aligned = std::move(repaired.image);
        r.used_homography = fit.model;
        r.fell_back = false;
        r.border_filled_fraction = repaired.filled_fraction;
        r.validity = std::move(warped.validity);
        r.inlier_count = fit.inliers.size();
        return r;
    } catch (const Error& e) {
        if (e.code() != Errc::too_few_keypoints && e.code() != Errc::no_consensus)
            throw;
    }
    RectifyResult r;
    r.aligned = resize_bilinear(gen_matched, orig.height(), orig.width());
    r.fell_back = true;
    r.validity = BinaryLabel::Constant(orig.height(), orig.width(), true);
    return r;
}

} // namespace tamperlab
