#include "tamperlab/rectify.hpp"

#include <algorithm>
#include <cmath>
#include <deque>

namespace tamperlab {

namespace {

constexpr double kEdgeSlack = 1e-9;

double bilinear(const Plane<double>& p, double x, double y)
{
    const Index x0 = std::clamp<Index>(static_cast<Index>(std::floor(x)), 0, p.cols() - 1);
    const Index y0 = std::clamp<Index>(static_cast<Index>(std::floor(y)), 0, p.rows() - 1);
    const Index x1 = std::min<Index>(x0 + 1, p.cols() - 1);
    const Index y1 = std::min<Index>(y0 + 1, p.rows() - 1);
    const double fx = std::clamp(x - x0, 0.0, 1.0);
    const double fy = std::clamp(y - y0, 0.0, 1.0);
    const double v = (1 - fy) * ((1 - fx) * p(y0, x0) + fx * p(y0, x1))
                     + fy * ((1 - fx) * p(y1, x0) + fx * p(y1, x1));
    return std::clamp(v, 0.0, 1.0);
}

} // namespace

WarpResult warp_to_original(const Image& gen, const Homography& h, Index out_h, Index out_w)
{
    const Eigen::Matrix3d inv = h.inverse().matrix();
    const double max_x = static_cast<double>(gen.width() - 1);
    const double max_y = static_cast<double>(gen.height() - 1);

    std::vector<Plane<double>> planes(gen.channels(), Plane<double>::Zero(out_h, out_w));
    BinaryLabel validity = BinaryLabel::Constant(out_h, out_w, false);
    for (Index y = 0; y < out_h; ++y) {
        for (Index x = 0; x < out_w; ++x) {
            const Eigen::Vector3d s = inv * Eigen::Vector3d(double(x), double(y), 1.0);
            if (!(std::abs(s.z()) > 1e-12))
                continue;
            const double sx = s.x() / s.z(), sy = s.y() / s.z();
            if (sx < -kEdgeSlack || sy < -kEdgeSlack || sx > max_x + kEdgeSlack
                || sy > max_y + kEdgeSlack)
                continue;
            validity(y, x) = true;
            for (int c = 0; c < gen.channels(); ++c)
                planes[c](y, x) = bilinear(gen.channel(c), sx, sy);
        }
    }
    return {Image(std::move(planes)), std::move(validity)};
}

Image resize_bilinear(const Image& img, Index out_h, Index out_w)
{
    if (img.height() == out_h && img.width() == out_w)
        return img;
    const double sx = static_cast<double>(img.width()) / out_w;
    const double sy = static_cast<double>(img.height()) / out_h;
    std::vector<Plane<double>> planes(img.channels(), Plane<double>(out_h, out_w));
    for (Index y = 0; y < out_h; ++y) {
        const double fy = std::clamp((y + 0.5) * sy - 0.5, 0.0, double(img.height() - 1));
        for (Index x = 0; x < out_w; ++x) {
            const double fx = std::clamp((x + 0.5) * sx - 0.5, 0.0, double(img.width() - 1));
            for (int c = 0; c < img.channels(); ++c)
                planes[c](y, x) = bilinear(img.channel(c), fx, fy);
        }
    }
    return Image(std::move(planes));
}

BinaryLabel border_connected(const BinaryLabel& seeds)
{
    const Index h = seeds.rows(), w = seeds.cols();
    BinaryLabel reached = BinaryLabel::Constant(h, w, false);
    std::deque<std::pair<Index, Index>> queue;
    auto push = [&](Index y, Index x) {
        if (seeds(y, x) && !reached(y, x)) {
            reached(y, x) = true;
            queue.emplace_back(y, x);
        }
    };
    for (Index x = 0; x < w; ++x) {
        push(0, x);
        push(h - 1, x);
    }
    for (Index y = 0; y < h; ++y) {
        push(y, 0);
        push(y, w - 1);
    }
    while (!queue.empty()) {
        const auto [y, x] = queue.front();
        queue.pop_front();
        if (y > 0)
            push(y - 1, x);
        if (y + 1 < h)
            push(y + 1, x);
        if (x > 0)
            push(y, x - 1);
        if (x + 1 < w)
            push(y, x + 1);
    }
    return reached;
}

BinaryLabel dilate3x3(const BinaryLabel& mask, int iterations)
{
    BinaryLabel cur = mask;
    const Index h = mask.rows(), w = mask.cols();
    for (int it = 0; it < iterations; ++it) {
        BinaryLabel next = cur;
        for (Index y = 0; y < h; ++y)
            for (Index x = 0; x < w; ++x) {
                if (!cur(y, x))
                    continue;
                for (Index yy = std::max<Index>(y - 1, 0); yy <= std::min<Index>(y + 1, h - 1); ++yy)
                    for (Index xx = std::max<Index>(x - 1, 0); xx <= std::min<Index>(x + 1, w - 1); ++xx)
                        next(yy, xx) = true;
            }
        cur = std::move(next);
    }
    return cur;
}

RepairResult repair_border(const Image& aligned, const Image& orig, const BinaryLabel& validity,
                           double low_intensity, double max_area_ratio, int dilate_iterations)
{
    if (!aligned.same_dims(orig) || aligned.channels() != orig.channels()
        || validity.rows() != aligned.height() || validity.cols() != aligned.width())
        throw Error(Errc::shape_mismatch, "repair_border inputs differ in size");

    BinaryLabel dark = BinaryLabel::Constant(aligned.height(), aligned.width(), true);
    for (int c = 0; c < aligned.channels(); ++c)
        dark = dark && (aligned.channel(c) < low_intensity);
    const BinaryLabel seeds = (!validity) || dark;
    const BinaryLabel flagged = dilate3x3(border_connected(seeds), dilate_iterations);

    RepairResult result{aligned, 0.0, false};
    if (flagged.size() == 0)
        return result;
    result.filled_fraction = static_cast<double>(flagged.count()) / static_cast<double>(flagged.size());
    if (result.filled_fraction > max_area_ratio || result.filled_fraction == 0.0)
        return result;
    for (int c = 0; c < aligned.channels(); ++c)
        result.image.channel(c) = flagged.select(orig.channel(c), aligned.channel(c));
    result.applied = true;
    return result;
}

} // namespace tamperlab
