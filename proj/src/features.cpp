#include "tamperlab/features.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <numeric>
#include <random>

namespace tamperlab {

namespace {

constexpr int kBorder = 20;
constexpr int kOrientationRadius = 15;
constexpr int kHarrisHalfBlock = 3;
constexpr double kHarrisK = 0.04;

constexpr std::array<std::array<int, 2>, 16> kCircle = {{
    {0, -3}, {1, -3}, {2, -2}, {3, -1}, {3, 0}, {3, 1}, {2, 2}, {1, 3},
    {0, 3}, {-1, 3}, {-2, 2}, {-3, 1}, {-3, 0}, {-3, -1}, {-2, -2}, {-1, -3},
}};

struct PatternPair {
    double ax, ay, bx, by;
};

const std::vector<PatternPair>& brief_pattern()
{
    static const std::vector<PatternPair> pattern = [] {
        std::mt19937 rng(0x0B51EF);
        std::normal_distribution<double> normal(0.0, 31.0 / 5.0);
        auto draw = [&] { return std::clamp(std::round(normal(rng)), -13.0, 13.0); };
        std::vector<PatternPair> p(256);
        for (auto& pair : p) {
            do {
                pair = {draw(), draw(), draw(), draw()};
            } while (pair.ax == pair.bx && pair.ay == pair.by);
        }
        return p;
    }();
    return pattern;
}

double sample_bilinear(const FloatMap& img, double x, double y)
{
    x = std::clamp(x, 0.0, static_cast<double>(img.cols() - 1));
    y = std::clamp(y, 0.0, static_cast<double>(img.rows() - 1));
    const auto x0 = static_cast<Index>(std::floor(x));
    const auto y0 = static_cast<Index>(std::floor(y));
    const Index x1 = std::min<Index>(x0 + 1, img.cols() - 1);
    const Index y1 = std::min<Index>(y0 + 1, img.rows() - 1);
    const double fx = x - x0, fy = y - y0;
    return (1 - fy) * ((1 - fx) * img(y0, x0) + fx * img(y0, x1))
           + fy * ((1 - fx) * img(y1, x0) + fx * img(y1, x1));
}

// Score > 0 iff 9 contiguous circle pixels are all brighter or all darker than center +- t.
double fast_score(const FloatMap& g, Index y, Index x, double t)
{
    const double c = g(y, x);
    std::array<int, 16> state{};
    std::array<double, 16> value{};
    for (int i = 0; i < 16; ++i) {
        value[i] = g(y + kCircle[i][1], x + kCircle[i][0]);
        state[i] = value[i] > c + t ? 1 : (value[i] < c - t ? -1 : 0);
    }
    // quick rejection on the compass points
    int bright = 0, dark = 0;
    for (int i : {0, 4, 8, 12}) {
        bright += state[i] == 1;
        dark += state[i] == -1;
    }
    if (bright < 2 && dark < 2)
        return 0.0;

    double best = 0.0;
    for (int sign : {1, -1}) {
        int run = 0;
        bool corner = false;
        for (int i = 0; i < 32 && !corner; ++i) {
            run = state[i % 16] == sign ? run + 1 : 0;
            corner = run >= 9;
        }
        if (!corner)
            continue;
        double score = 0.0;
        for (int i = 0; i < 16; ++i)
            if (state[i] == sign)
                score += std::abs(value[i] - c) - t;
        best = std::max(best, score);
    }
    return best;
}

FloatMap harris_response(const FloatMap& g)
{
    const Index h = g.rows(), w = g.cols();
    FloatMap ixx = FloatMap::Zero(h, w), iyy = FloatMap::Zero(h, w), ixy = FloatMap::Zero(h, w);
    for (Index y = 1; y + 1 < h; ++y) {
        for (Index x = 1; x + 1 < w; ++x) {
            const double gx = (g(y - 1, x + 1) + 2 * g(y, x + 1) + g(y + 1, x + 1))
                              - (g(y - 1, x - 1) + 2 * g(y, x - 1) + g(y + 1, x - 1));
            const double gy = (g(y + 1, x - 1) + 2 * g(y + 1, x) + g(y + 1, x + 1))
                              - (g(y - 1, x - 1) + 2 * g(y - 1, x) + g(y - 1, x + 1));
            ixx(y, x) = gx * gx;
            iyy(y, x) = gy * gy;
            ixy(y, x) = gx * gy;
        }
    }
    // summed-area tables for the block sums
    auto integral = [&](const FloatMap& m) {
        FloatMap s = FloatMap::Zero(h + 1, w + 1);
        for (Index y = 0; y < h; ++y)
            for (Index x = 0; x < w; ++x)
                s(y + 1, x + 1) = m(y, x) + s(y, x + 1) + s(y + 1, x) - s(y, x);
        return s;
    };
    const FloatMap sxx = integral(ixx), syy = integral(iyy), sxy = integral(ixy);
    auto block = [&](const FloatMap& s, Index y, Index x) {
        const Index y0 = std::max<Index>(y - kHarrisHalfBlock, 0);
        const Index x0 = std::max<Index>(x - kHarrisHalfBlock, 0);
        const Index y1 = std::min<Index>(y + kHarrisHalfBlock + 1, h);
        const Index x1 = std::min<Index>(x + kHarrisHalfBlock + 1, w);
        return s(y1, x1) - s(y0, x1) - s(y1, x0) + s(y0, x0);
    };
    FloatMap r(h, w);
    for (Index y = 0; y < h; ++y) {
        for (Index x = 0; x < w; ++x) {
            const double a = block(sxx, y, x), b = block(syy, y, x), c = block(sxy, y, x);
            r(y, x) = a * b - c * c - kHarrisK * (a + b) * (a + b);
        }
    }
    return r;
}

double parabola_offset(double left, double center, double right)
{
    const double denom = left - 2 * center + right;
    if (!(denom < 0))
        return 0.0;
    return std::clamp(0.5 * (left - right) / denom, -0.5, 0.5);
}

double orientation(const FloatMap& g, Index cy, Index cx)
{
    double m10 = 0.0, m01 = 0.0;
    const int r = kOrientationRadius;
    for (int dy = -r; dy <= r; ++dy) {
        const int half = static_cast<int>(std::sqrt(double(r * r - dy * dy)));
        for (int dx = -half; dx <= half; ++dx) {
            const Index y = std::clamp<Index>(cy + dy, 0, g.rows() - 1);
            const Index x = std::clamp<Index>(cx + dx, 0, g.cols() - 1);
            m10 += dx * g(y, x);
            m01 += dy * g(y, x);
        }
    }
    return std::atan2(m01, m10);
}

FloatMap gaussian_blur(const FloatMap& g, double sigma, int radius)
{
    std::vector<double> k(2 * radius + 1);
    for (int i = -radius; i <= radius; ++i)
        k[i + radius] = std::exp(-0.5 * i * i / (sigma * sigma));
    const double norm = std::accumulate(k.begin(), k.end(), 0.0);
    for (double& v : k)
        v /= norm;
    const Index h = g.rows(), w = g.cols();
    FloatMap tmp(h, w), out(h, w);
    for (Index y = 0; y < h; ++y)
        for (Index x = 0; x < w; ++x) {
            double s = 0.0;
            for (int i = -radius; i <= radius; ++i)
                s += k[i + radius] * g(y, std::clamp<Index>(x + i, 0, w - 1));
            tmp(y, x) = s;
        }
    for (Index y = 0; y < h; ++y)
        for (Index x = 0; x < w; ++x) {
            double s = 0.0;
            for (int i = -radius; i <= radius; ++i)
                s += k[i + radius] * tmp(std::clamp<Index>(y + i, 0, h - 1), x);
            out(y, x) = s;
        }
    return out;
}

} // namespace

int hamming(const Descriptor& a, const Descriptor& b)
{
    int d = 0;
    for (std::size_t i = 0; i < a.size(); ++i)
        d += std::popcount(a[i] ^ b[i]);
    return d;
}

std::vector<Keypoint> detect_keypoints(const FloatMap& gray, const FeatureParams& params)
{
    const Index h = gray.rows(), w = gray.cols();
    if (h <= 2 * kBorder || w <= 2 * kBorder)
        return {};

    FloatMap score = FloatMap::Zero(h, w);
    for (Index y = kBorder; y < h - kBorder; ++y)
        for (Index x = kBorder; x < w - kBorder; ++x)
            score(y, x) = fast_score(gray, y, x, params.fast_threshold);

    const FloatMap harris = harris_response(gray);
    std::vector<Keypoint> candidates;
    for (Index y = kBorder; y < h - kBorder; ++y) {
        for (Index x = kBorder; x < w - kBorder; ++x) {
            const double s = score(y, x);
            if (s <= 0.0)
                continue;
            bool is_max = true;
            for (int dy = -1; dy <= 1 && is_max; ++dy)
                for (int dx = -1; dx <= 1 && is_max; ++dx) {
                    if (dx == 0 && dy == 0)
                        continue;
                    const double n = score(y + dy, x + dx);
                    // ties resolved toward the earlier pixel in raster order
                    is_max = n < s || (n == s && (dy > 0 || (dy == 0 && dx > 0)));
                }
            if (!is_max)
                continue;
            Keypoint kp;
            kp.pt = {static_cast<double>(x), static_cast<double>(y)};
            kp.response = harris(y, x);
            candidates.push_back(kp);
        }
    }

    std::stable_sort(candidates.begin(), candidates.end(),
                     [](const Keypoint& a, const Keypoint& b) { return a.response > b.response; });
    if (static_cast<int>(candidates.size()) > params.max_features)
        candidates.resize(static_cast<std::size_t>(params.max_features));

    for (auto& kp : candidates) {
        const auto x = static_cast<Index>(kp.pt.x());
        const auto y = static_cast<Index>(kp.pt.y());
        kp.pt.x() += parabola_offset(harris(y, x - 1), harris(y, x), harris(y, x + 1));
        kp.pt.y() += parabola_offset(harris(y - 1, x), harris(y, x), harris(y + 1, x));
        kp.angle = orientation(gray, y, x);
    }
    return candidates;
}

std::vector<Descriptor> describe_keypoints(const FloatMap& gray,
                                           const std::vector<Keypoint>& keypoints)
{
    const FloatMap smooth = gaussian_blur(gray, 2.0, 3);
    const auto& pattern = brief_pattern();
    std::vector<Descriptor> out;
    out.reserve(keypoints.size());
    for (const auto& kp : keypoints) {
        const double c = std::cos(kp.angle), s = std::sin(kp.angle);
        Descriptor d{};
        for (std::size_t i = 0; i < pattern.size(); ++i) {
            const auto& p = pattern[i];
            const double ia = sample_bilinear(smooth, kp.pt.x() + c * p.ax - s * p.ay,
                                              kp.pt.y() + s * p.ax + c * p.ay);
            const double ib = sample_bilinear(smooth, kp.pt.x() + c * p.bx - s * p.by,
                                              kp.pt.y() + s * p.bx + c * p.by);
            if (ia < ib)
                d[i / 64] |= std::uint64_t{1} << (i % 64);
        }
        out.push_back(d);
    }
    return out;
}

std::vector<Correspondence> detect_and_match(const Image& orig, const Image& gen,
                                             const FeatureParams& params)
{
    if (orig.empty() || gen.empty())
        throw Error(Errc::invalid_argument, "empty image");
    const FloatMap g_orig = to_gray(orig);
    const FloatMap g_gen = to_gray(gen);
    const auto kp_orig = detect_keypoints(g_orig, params);
    const auto kp_gen = detect_keypoints(g_gen, params);
    if (static_cast<int>(kp_orig.size()) < params.min_matches
        || static_cast<int>(kp_gen.size()) < params.min_matches)
        throw Error(Errc::too_few_keypoints,
                    std::to_string(kp_orig.size()) + " / " + std::to_string(kp_gen.size())
                        + " keypoints");
    const auto d_orig = describe_keypoints(g_orig, kp_orig);
    const auto d_gen = describe_keypoints(g_gen, kp_gen);

    struct Candidate {
        Correspondence c;
        int distance;
        std::size_t index;
    };
    std::vector<Candidate> found;
    for (std::size_t i = 0; i < d_gen.size(); ++i) {
        int best = 257, second = 257;
        std::size_t best_j = 0;
        for (std::size_t j = 0; j < d_orig.size(); ++j) {
            const int d = hamming(d_gen[i], d_orig[j]);
            if (d < best) {
                second = best;
                best = d;
                best_j = j;
            } else if (d < second) {
                second = d;
            }
        }
        if (best > params.max_distance || !(best < params.ratio * second))
            continue;
        const double score = 1.0 - static_cast<double>(best) / std::min(second, 256);
        found.push_back({{kp_gen[i].pt, kp_orig[best_j].pt, score}, best, i});
    }
    std::sort(found.begin(), found.end(), [](const Candidate& a, const Candidate& b) {
        if (a.c.score != b.c.score)
            return a.c.score > b.c.score;
        if (a.distance != b.distance)
            return a.distance < b.distance;
        return a.index < b.index;
    });
    if (static_cast<int>(found.size()) > params.max_features)
        found.resize(static_cast<std::size_t>(params.max_features));
    if (static_cast<int>(found.size()) < params.min_matches)
        throw Error(Errc::too_few_keypoints, std::to_string(found.size()) + " matches");

    std::vector<Correspondence> out;
    out.reserve(found.size());
    for (const auto& f : found)
        out.push_back(f.c);
    return out;
}

} // namespace tamperlab
