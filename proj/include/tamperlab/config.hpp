#pragma once

#include <filesystem>
#include <string>

#include "tamperlab/concentration.hpp"
#include "tamperlab/curation.hpp"
#include "tamperlab/labeling.hpp"
#include "tamperlab/rectify.hpp"

namespace tamperlab {

struct PipelineConfig {
    double tau = kDefaultTau;
    ChannelReduction reduction = ChannelReduction::max;
    bool rectify = true;
    RectifyConfig rectify_cfg;
    FilterThresholds filters;
    ConcentrationParams concentration;
    SplitTargets split;
    int workers = 1;
    std::uint64_t seed = 0x5eed;

    void validate() const;
};

/// Applies one `key = value` setting; throws config_error for unknown keys
/// or unparsable values.
void apply_setting(PipelineConfig& cfg, const std::string& key, const std::string& value);

/// Plain-text key/value file: one `key = value` per line, `#` comments.
///
/// Keys: tau, channel_reduction, rectify, iterations, inlier_px,
/// min_inliers, low_intensity, max_area_ratio, seed, max_features,
/// ratio_test, fast_threshold, magnitude_lo, magnitude_hi, vlm_min,
/// human_min, min_overlap, grid_n, grid_coverage, density_window,
/// density_sampling, split_ratio (e.g. 4:3:3), per_class_cap, split_total,
/// type_weight.<manipulation>, workers.
PipelineConfig load_config(const std::filesystem::path& path);
PipelineConfig parse_config(const std::string& text);

} // namespace tamperlab
