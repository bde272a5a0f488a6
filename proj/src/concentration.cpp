#include "tamperlab/concentration.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

namespace tamperlab {

std::string to_string(ConcentrationClass c)
{
    return c == ConcentrationClass::concentrated ? "concentrated" : "diverse";
}

double grid_coverage_ratio(const BinaryLabel& mask, int grid_n, double coverage)
{
    if (grid_n < 1 || !(coverage > 0.0 && coverage <= 1.0))
        throw Error(Errc::invalid_argument, "bad grid parameters");
    const auto total = static_cast<std::int64_t>(mask.count());
    if (total == 0)
        throw Error(Errc::empty_mask, "grid coverage of an empty mask");

    const Index cell_h = std::max<Index>(mask.rows() / grid_n, 1);
    const Index cell_w = std::max<Index>(mask.cols() / grid_n, 1);
    std::vector<std::int64_t> counts(static_cast<std::size_t>(grid_n) * grid_n, 0);
    for (Index y = 0; y < mask.rows(); ++y) {
        const Index gy = std::min<Index>(y / cell_h, grid_n - 1);
        for (Index x = 0; x < mask.cols(); ++x) {
            if (mask(y, x))
                ++counts[gy * grid_n + std::min<Index>(x / cell_w, grid_n - 1)];
        }
    }

    std::vector<std::size_t> order(counts.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return counts[a] > counts[b]; });

    // small slack so e.g. 0.8 * 900 is not pushed to 721 by representation error
    const auto target = static_cast<std::int64_t>(std::ceil(coverage * double(total) - 1e-9));
    std::int64_t accumulated = 0;
    std::size_t used = 0;
    while (accumulated < target) {
        accumulated += counts[order[used]];
        ++used;
    }
    return static_cast<double>(used) / static_cast<double>(counts.size());
}

double local_density(const BinaryLabel& mask, int window, DensitySampling sampling)
{
    if (window < 1 || window % 2 == 0)
        throw Error(Errc::invalid_argument, "density window must be odd and positive");
    if (mask.count() == 0)
        throw Error(Errc::empty_mask, "local density of an empty mask");

    const Index h = mask.rows(), w = mask.cols();
    const Index r = window / 2;
    Eigen::Array<std::int64_t, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> sat =
        decltype(sat)::Zero(h + 1, w + 1);
    for (Index y = 0; y < h; ++y)
        for (Index x = 0; x < w; ++x)
            sat(y + 1, x + 1) = (mask(y, x) ? 1 : 0) + sat(y, x + 1) + sat(y + 1, x) - sat(y, x);

    const double area = static_cast<double>(window) * window;
    std::vector<double> values;
    values.reserve(sampling == DensitySampling::all ? static_cast<std::size_t>(mask.size())
                                                    : static_cast<std::size_t>(mask.count()));
    for (Index y = 0; y < h; ++y) {
        for (Index x = 0; x < w; ++x) {
            if (sampling == DensitySampling::tampered && !mask(y, x))
                continue;
            const Index y0 = std::max<Index>(y - r, 0), y1 = std::min<Index>(y + r + 1, h);
            const Index x0 = std::max<Index>(x - r, 0), x1 = std::min<Index>(x + r + 1, w);
            const auto n = sat(y1, x1) - sat(y0, x1) - sat(y1, x0) + sat(y0, x0);
            values.push_back(static_cast<double>(n) / area);
        }
    }
    const std::size_t mid = (values.size() - 1) / 2;
    std::nth_element(values.begin(), values.begin() + static_cast<std::ptrdiff_t>(mid), values.end());
    return values[mid];
}

ConcentrationScores concentration_scores(const BinaryLabel& mask, const ConcentrationParams& params)
{
    return {grid_coverage_ratio(mask, params.grid_n, params.coverage),
            local_density(mask, params.window, params.sampling)};
}

int concentration_case(const ConcentrationScores& s)
{
    if (!std::isfinite(s.r_grid) || !std::isfinite(s.r_dens))
        throw Error(Errc::invalid_argument, "non-finite concentration scores");
    if (s.r_grid <= 0.20)
        return 1;
    if (s.r_grid >= 0.50)
        return 2;
    if (s.r_dens >= 0.35)
        return 3;
    if (s.r_dens <= 0.25)
        return 4;
    return s.tie_break() <= 0.25 ? 5 : 6;
}

ConcentrationClass classify_concentration(const ConcentrationScores& scores)
{
    switch (concentration_case(scores)) {
    case 1:
    case 3:
    case 5:
        return ConcentrationClass::concentrated;
    default:
        return ConcentrationClass::diverse;
    }
}

} // namespace tamperlab
