#include "tamperlab/homography.hpp"

#include <limits>
#include <random>

namespace tamperlab {

namespace {

// Translates the centroid to the origin and scales the mean distance to sqrt(2).
std::optional<Eigen::Matrix3d> normalizing_transform(std::span<const Correspondence> matches,
                                                     bool use_src)
{
    Eigen::Vector2d centroid = Eigen::Vector2d::Zero();
    for (const auto& c : matches)
        centroid += use_src ? c.src : c.dst;
    centroid /= static_cast<double>(matches.size());
    double mean_dist = 0.0;
    for (const auto& c : matches)
        mean_dist += ((use_src ? c.src : c.dst) - centroid).norm();
    mean_dist /= static_cast<double>(matches.size());
    if (!(mean_dist > 1e-12))
        return std::nullopt;
    const double s = std::sqrt(2.0) / mean_dist;
    Eigen::Matrix3d t;
    t << s, 0, -s * centroid.x(), 0, s, -s * centroid.y(), 0, 0, 1;
    return t;
}

bool collinear(const Eigen::Vector2d& a, const Eigen::Vector2d& b, const Eigen::Vector2d& c)
{
    const Eigen::Vector2d u = b - a;
    const Eigen::Vector2d v = c - a;
    const double cross = u.x() * v.y() - u.y() * v.x();
    return std::abs(cross) <= 1e-3 * u.norm() * v.norm() + 1e-9;
}

std::vector<std::size_t> collect_inliers(const Homography& h,
                                         std::span<const Correspondence> matches,
                                         double inlier_px, double* error_sum = nullptr)
{
    std::vector<std::size_t> inliers;
    double sum = 0.0;
    for (std::size_t i = 0; i < matches.size(); ++i) {
        const double e = reprojection_error(h, matches[i]);
        if (e < inlier_px) {
            inliers.push_back(i);
            sum += e;
        }
    }
    if (error_sum)
        *error_sum = sum;
    return inliers;
}

} // namespace

double reprojection_error(const Homography& h, const Correspondence& c)
{
    const auto p = h.map(c.src);
    if (!p)
        return std::numeric_limits<double>::infinity();
    return (*p - c.dst).norm();
}

bool degenerate_quad(const Eigen::Vector2d& a, const Eigen::Vector2d& b,
                     const Eigen::Vector2d& c, const Eigen::Vector2d& d)
{
    return collinear(a, b, c) || collinear(a, b, d) || collinear(a, c, d) || collinear(b, c, d);
}

std::optional<Homography> fit_homography_dlt(std::span<const Correspondence> matches)
{
    if (matches.size() < 4)
        return std::nullopt;
    const auto t_src = normalizing_transform(matches, true);
    const auto t_dst = normalizing_transform(matches, false);
    if (!t_src || !t_dst)
        return std::nullopt;

    const Eigen::Index n = static_cast<Eigen::Index>(matches.size());
    Eigen::Matrix<double, Eigen::Dynamic, 9> a(2 * n, 9);
    for (Eigen::Index i = 0; i < n; ++i) {
        const Eigen::Vector3d p = *t_src * matches[i].src.homogeneous();
        const Eigen::Vector3d q = *t_dst * matches[i].dst.homogeneous();
        const double x = p.x() / p.z(), y = p.y() / p.z();
        const double u = q.x() / q.z(), v = q.y() / q.z();
        a.row(2 * i) << -x, -y, -1, 0, 0, 0, u * x, u * y, u;
        a.row(2 * i + 1) << 0, 0, 0, -x, -y, -1, v * x, v * y, v;
    }
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(a, Eigen::ComputeFullV);
    const auto& sv = svd.singularValues();
    if (!(sv(7) > 1e-10 * sv(0)))
        return std::nullopt;
    const Eigen::VectorXd h = svd.matrixV().col(8);
    Eigen::Matrix3d hn;
    hn << h(0), h(1), h(2), h(3), h(4), h(5), h(6), h(7), h(8);
    const Eigen::Matrix3d m = t_dst->inverse() * hn * *t_src;
    if (std::abs(m(2, 2)) < 1e-15)
        return std::nullopt;
    return Homography::try_make(m);
}

RansacResult estimate_homography_ransac(std::span<const Correspondence> matches,
                                        const RansacParams& params)
{
    if (matches.size() < 4)
        throw Error(Errc::invalid_argument, "RANSAC needs at least 4 matches");

    std::mt19937_64 rng(params.seed);
    std::uniform_int_distribution<std::size_t> pick(0, matches.size() - 1);

    std::optional<Homography> best;
    std::size_t best_count = 0;
    double best_error = std::numeric_limits<double>::infinity();
    std::array<Correspondence, 4> sample;

    for (int it = 0; it < params.iterations; ++it) {
        std::array<std::size_t, 4> idx{};
        for (int k = 0; k < 4; ++k) {
            std::size_t candidate;
            do {
                candidate = pick(rng);
            } while (std::find(idx.begin(), idx.begin() + k, candidate) != idx.begin() + k);
            idx[k] = candidate;
            sample[k] = matches[candidate];
        }
        if (degenerate_quad(sample[0].src, sample[1].src, sample[2].src, sample[3].src)
            || degenerate_quad(sample[0].dst, sample[1].dst, sample[2].dst, sample[3].dst))
            continue;
        const auto model = fit_homography_dlt(sample);
        if (!model)
            continue;
        double error = 0.0;
        const std::size_t count = collect_inliers(*model, matches, params.inlier_px, &error).size();
        if (count > best_count || (count == best_count && count > 0 && error < best_error)) {
            best = model;
            best_count = count;
            best_error = error;
        }
    }

    const auto min_inliers = static_cast<std::size_t>(std::max(params.min_inliers, 4));
    if (!best || best_count < min_inliers)
        throw Error(Errc::no_consensus, "best consensus has " + std::to_string(best_count)
                                            + " inliers, need " + std::to_string(min_inliers));

    RansacResult result{*best, collect_inliers(*best, matches, params.inlier_px)};
    for (int round = 0; round < 10; ++round) {
        std::vector<Correspondence> subset;
        subset.reserve(result.inliers.size());
        for (std::size_t i : result.inliers)
            subset.push_back(matches[i]);
        const auto refit = fit_homography_dlt(subset);
        if (!refit)
            break;
        auto inliers = collect_inliers(*refit, matches, params.inlier_px);
        if (inliers.size() < min_inliers)
            break;
        const bool stable = inliers == result.inliers;
        result = RansacResult{*refit, std::move(inliers)};
        if (stable)
            break;
    }
    return result;
}

} // namespace tamperlab
