#include "tamperlab/config.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

namespace tamperlab {

namespace {

std::string trim(const std::string& s)
{
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos)
        return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

template <typename T>
T parse_number(const std::string& key, const std::string& value)
{
    T out{};
    const auto* first = value.data();
    const auto* last = value.data() + value.size();
    const auto [ptr, ec] = std::from_chars(first, last, out);
    if (ec != std::errc() || ptr != last)
        throw Error(Errc::config_error, key + ": cannot parse '" + value + "'");
    return out;
}

bool parse_bool(const std::string& key, const std::string& value)
{
    if (value == "true" || value == "1" || value == "yes")
        return true;
    if (value == "false" || value == "0" || value == "no")
        return false;
    throw Error(Errc::config_error, key + ": expected a boolean, got '" + value + "'");
}

} // namespace

void PipelineConfig::validate() const
{
    if (!(tau > 0.0 && tau < 1.0))
        throw Error(Errc::config_error, "tau must lie in (0,1)");
    if (workers < 1)
        throw Error(Errc::config_error, "workers must be >= 1");
    if (filters.magnitude_lo > filters.magnitude_hi)
        throw Error(Errc::config_error, "magnitude_lo > magnitude_hi");
    if (rectify_cfg.iterations < 1 || !(rectify_cfg.inlier_px > 0))
        throw Error(Errc::config_error, "bad RANSAC parameters");
    if (!(rectify_cfg.max_area_ratio >= 0 && rectify_cfg.max_area_ratio <= 1))
        throw Error(Errc::config_error, "max_area_ratio outside [0,1]");
    for (double r : split.size_ratio)
        if (!(r > 0))
            throw Error(Errc::config_error, "split_ratio entries must be positive");
}

void apply_setting(PipelineConfig& cfg, const std::string& key, const std::string& value)
{
    try {
        if (key == "tau")
            cfg.tau = parse_number<double>(key, value);
        else if (key == "channel_reduction")
            cfg.reduction = parse_channel_reduction(value);
        else if (key == "rectify")
            cfg.rectify = parse_bool(key, value);
        else if (key == "iterations")
            cfg.rectify_cfg.iterations = parse_number<int>(key, value);
        else if (key == "inlier_px")
            cfg.rectify_cfg.inlier_px = parse_number<double>(key, value);
        else if (key == "min_inliers")
            cfg.rectify_cfg.min_inliers = parse_number<int>(key, value);
        else if (key == "low_intensity")
            cfg.rectify_cfg.low_intensity = parse_number<double>(key, value);
        else if (key == "max_area_ratio")
            cfg.rectify_cfg.max_area_ratio = parse_number<double>(key, value);
        else if (key == "seed") {
            cfg.seed = parse_number<std::uint64_t>(key, value);
            cfg.rectify_cfg.seed = cfg.seed;
        } else if (key == "max_features")
            cfg.rectify_cfg.max_features = parse_number<int>(key, value);
        else if (key == "ratio_test")
            cfg.rectify_cfg.ratio = parse_number<double>(key, value);
        else if (key == "fast_threshold")
            cfg.rectify_cfg.fast_threshold = parse_number<double>(key, value);
        else if (key == "magnitude_lo")
            cfg.filters.magnitude_lo = parse_number<std::int64_t>(key, value);
        else if (key == "magnitude_hi")
            cfg.filters.magnitude_hi = parse_number<std::int64_t>(key, value);
        else if (key == "vlm_min")
            cfg.filters.vlm_min = parse_number<int>(key, value);
        else if (key == "human_min")
            cfg.filters.human_min = parse_number<int>(key, value);
        else if (key == "min_overlap")
            cfg.filters.min_overlap = parse_number<double>(key, value);
        else if (key == "grid_n")
            cfg.concentration.grid_n = parse_number<int>(key, value);
        else if (key == "grid_coverage")
            cfg.concentration.coverage = parse_number<double>(key, value);
        else if (key == "density_window")
            cfg.concentration.window = parse_number<int>(key, value);
        else if (key == "density_sampling") {
            if (value == "tampered")
                cfg.concentration.sampling = DensitySampling::tampered;
            else if (value == "all")
                cfg.concentration.sampling = DensitySampling::all;
            else
                throw Error(Errc::config_error, key + ": expected tampered|all");
        } else if (key == "split_ratio") {
            std::istringstream in(value);
            std::string part;
            std::size_t i = 0;
            while (std::getline(in, part, ':')) {
                if (i >= 3)
                    throw Error(Errc::config_error, "split_ratio takes three entries");
                cfg.split.size_ratio[i++] = parse_number<double>(key, trim(part));
            }
            if (i != 3)
                throw Error(Errc::config_error, "split_ratio takes three entries");
        } else if (key == "per_class_cap")
            cfg.split.per_class_cap = parse_number<std::int64_t>(key, value);
        else if (key == "split_total")
            cfg.split.total = parse_number<std::int64_t>(key, value);
        else if (key.rfind("type_weight.", 0) == 0)
            cfg.split.type_weights[parse_manipulation(key.substr(12))] =
                parse_number<double>(key, value);
        else if (key == "workers")
            cfg.workers = parse_number<int>(key, value);
        else
            throw Error(Errc::config_error, "unknown key '" + key + "'");
    } catch (const Error& e) {
        if (e.code() == Errc::config_error)
            throw;
        throw Error(Errc::config_error, key + ": " + e.what());
    }
}

PipelineConfig parse_config(const std::string& text)
{
    PipelineConfig cfg;
    std::istringstream in(text);
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (const auto hash = line.find('#'); hash != std::string::npos)
            line.erase(hash);
        line = trim(line);
        if (line.empty())
            continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw Error(Errc::config_error, "line " + std::to_string(lineno) + ": expected key = value");
        apply_setting(cfg, trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
    }
    cfg.validate();
    return cfg;
}

PipelineConfig load_config(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in)
        throw Error(Errc::io_error, "cannot open config " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_config(ss.str());
}

} // namespace tamperlab
