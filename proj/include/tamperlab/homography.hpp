#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "tamperlab/error.hpp"

namespace tamperlab {

/// Projective map from generated-image coordinates to original-image
/// coordinates. Always invertible; scaled so m(2,2) == 1 when that entry
/// is nonzero.
template <typename Scalar>
class HomographyT {
public:
    using Matrix3 = Eigen::Matrix<Scalar, 3, 3>;
    using Point = Eigen::Matrix<Scalar, 2, 1>;

    static constexpr Scalar kMinAbsDet = Scalar(1e-12);

    HomographyT() : m_(Matrix3::Identity()) {}

    explicit HomographyT(const Matrix3& m) : m_(m)
    {
        if (!m_.allFinite())
            throw Error(Errc::invalid_argument, "homography has non-finite entries");
        if (m_(2, 2) != Scalar(0))
            m_ /= m_(2, 2);
        if (std::abs(m_.determinant()) <= kMinAbsDet)
            throw Error(Errc::invalid_argument, "homography is singular");
    }

    static std::optional<HomographyT> try_make(const Matrix3& m)
    {
        try {
            return HomographyT(m);
        } catch (const Error&) {
            return std::nullopt;
        }
    }

    static HomographyT translation(Scalar dx, Scalar dy)
    {
        Matrix3 m = Matrix3::Identity();
        m(0, 2) = dx;
        m(1, 2) = dy;
        return HomographyT(m);
    }

    const Matrix3& matrix() const { return m_; }

    HomographyT inverse() const { return HomographyT(m_.inverse()); }

    /// Maps a point; returns nullopt when it lands on or behind the line at infinity.
    std::optional<Point> map(const Point& p) const
    {
        const Eigen::Matrix<Scalar, 3, 1> q = m_ * p.homogeneous();
        if (!(q.z() > Scalar(1e-12)) && !(q.z() < Scalar(-1e-12)))
            return std::nullopt;
        return q.hnormalized();
    }

    friend HomographyT operator*(const HomographyT& a, const HomographyT& b)
    {
        return HomographyT(a.m_ * b.m_);
    }

private:
    Matrix3 m_;
};

using Homography = HomographyT<double>;

struct Correspondence {
    Eigen::Vector2d src; ///< generated image
    Eigen::Vector2d dst; ///< original image
    double score = 0.0;
};

/// Forward reprojection error |H(src) - dst|; infinity when unmappable.
double reprojection_error(const Homography& h, const Correspondence& c);

/// Normalized direct linear transform over all given correspondences
/// (least squares for more than four). nullopt for degenerate input.
std::optional<Homography> fit_homography_dlt(std::span<const Correspondence> matches);

/// True when any three of the four points are (nearly) collinear.
bool degenerate_quad(const Eigen::Vector2d& a, const Eigen::Vector2d& b,
                     const Eigen::Vector2d& c, const Eigen::Vector2d& d);

struct RansacParams {
    int iterations = 2000;
    double inlier_px = 3.0;
    int min_inliers = 8;
    std::uint64_t seed = 0x5eed;
};

struct RansacResult {
    Homography model;
    std::vector<std::size_t> inliers; ///< ascending indices into the match list
};

/// Robust fit: minimal 4-point samples scored by inlier count, then an
/// iterated least-squares refit on the consensus set. Throws no_consensus
/// when fewer than min_inliers agree, invalid_argument for < 4 matches.
RansacResult estimate_homography_ransac(std::span<const Correspondence> matches,
                                        const RansacParams& params = {});

} // namespace tamperlab
