#include "doctest.h"

#include <random>

#include "tamperlab/concentration.hpp"
#include "tamperlab/labeling.hpp"

using namespace tamperlab;

TEST_CASE("diff map of identical images is zero")
{
    Image a(4, 5, 3, 0.3);
    CHECK((diff_map(a, a) == 0.0).all());
}

TEST_CASE("diff map takes the largest channel difference")
{
    Image a(2, 2, 3, 0.5), b(2, 2, 3, 0.5);
    b(1, 0, 0) = 0.7;
    b(1, 0, 2) = 0.4;
    const FloatMap d = diff_map(a, b);
    CHECK(d(1, 0) == doctest::Approx(0.2));
    CHECK(d(0, 0) == 0.0);
    CHECK(d(1, 1) == 0.0);

    CHECK(diff_map(a, b, ChannelReduction::mean)(1, 0) == doctest::Approx(0.1));
    CHECK(diff_map(a, b, ChannelReduction::luma)(1, 0)
          == doctest::Approx(std::abs(0.299 * -0.2 + 0.114 * 0.1)));

    Image zeros(3, 3, 3, 0.0), ones(3, 3, 3, 1.0);
    CHECK((diff_map(zeros, ones) == 1.0).all());
}

TEST_CASE("diff map shape checks")
{
    CHECK_THROWS_AS(diff_map(Image(2, 2, 1), Image(2, 3, 1)), Error);
    CHECK_THROWS_AS(diff_map(Image(2, 2, 1), Image(2, 2, 3)), Error);
}

TEST_CASE("channel reduction names round trip")
{
    for (auto r : {ChannelReduction::max, ChannelReduction::mean, ChannelReduction::luma})
        CHECK(parse_channel_reduction(to_string(r)) == r);
    CHECK_THROWS_AS(parse_channel_reduction("median"), Error);
}

TEST_CASE("threshold is strict")
{
    CHECK_FALSE(threshold_label(FloatMap(FloatMap::Zero(3, 3)), 0.05).any());
    FloatMap d = FloatMap::Constant(2, 2, 0.05);
    d(0, 1) = std::nextafter(0.05, 1.0);
    const BinaryLabel m = threshold_label(d, 0.05);
    CHECK(m.count() == 1);
    CHECK(m(0, 1));
    CHECK_THROWS_AS(threshold_label(d, 1.5), Error);
    CHECK_THROWS_AS(threshold_label(d, -0.1), Error);
}

TEST_CASE("labels shrink as tau grows")
{
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> u(0, 1);
    for (int t = 0; t < 50; ++t) {
        FloatMap d(16, 16);
        for (Index i = 0; i < d.size(); ++i)
            d.data()[i] = u(rng) * u(rng);
        const BinaryLabel a = threshold_label(d, 0.05), b = threshold_label(d, 0.1),
                          c = threshold_label(d, 0.2);
        CHECK_FALSE((b && !a).any());
        CHECK_FALSE((c && !b).any());
    }
}

TEST_CASE("label artifacts count tampered pixels")
{
    FloatMap d = FloatMap::Zero(10, 10);
    d.block(2, 2, 3, 4) = 0.4;
    const auto art = LabelArtifacts::build(d, 0.05);
    CHECK(art.tampered_size == 12);
    CHECK(art.label.count() == 12);
    CHECK(art.tau == 0.05);
}

TEST_CASE("edit magnitude bounds are inclusive")
{
    CHECK_FALSE(edit_magnitude_check(0).passed);
    CHECK_FALSE(edit_magnitude_check(2479).passed);
    CHECK(edit_magnitude_check(2480).passed);
    CHECK(edit_magnitude_check(184500).passed);
    CHECK_FALSE(edit_magnitude_check(184501).passed);
    CHECK_FALSE(edit_magnitude_check(200000).passed);
    CHECK(edit_magnitude_check(100000).name == "magnitude");
    CHECK(edit_magnitude_check(100000).measured == 100000.0);
}

TEST_CASE("overlap ratio")
{
    BinaryLabel guide = BinaryLabel::Constant(4, 4, false);
    guide.leftCols(2).setConstant(true); // 8 pixels
    CHECK(overlap_ratio(guide, guide) == 1.0);
    CHECK(overlap_ratio(BinaryLabel(!guide), guide) == 0.0);

    BinaryLabel label = BinaryLabel::Constant(4, 4, false);
    label(0, 0) = label(1, 1) = label(3, 0) = true; // inside
    label(0, 3) = label(2, 2) = true;               // outside
    CHECK(overlap_ratio(label, guide) == doctest::Approx(0.375));

    CHECK_THROWS_AS(overlap_ratio(label, BinaryLabel(BinaryLabel::Constant(4, 4, false))), Error);
    CHECK_THROWS_AS(overlap_ratio(label, BinaryLabel(BinaryLabel::Constant(4, 5, true))), Error);
}

TEST_CASE("pixel semantic check discards below 0.2")
{
    CHECK(pixel_semantic_check(0.375).passed);
    CHECK_FALSE(pixel_semantic_check(0.10).passed);
    CHECK(pixel_semantic_check(0.20).passed);
    CHECK_FALSE(pixel_semantic_check(std::nextafter(0.2, 0.0)).passed);
    CHECK(pixel_semantic_check(0.2).name == "overlap");
}

TEST_CASE("size buckets")
{
    CHECK(size_bucket(0) == SizeBucket::small);
    CHECK(size_bucket(22999) == SizeBucket::small);
    CHECK(size_bucket(23000) == SizeBucket::medium);
    CHECK(size_bucket(49999) == SizeBucket::medium);
    CHECK(size_bucket(50000) == SizeBucket::large);
    for (auto b : {SizeBucket::small, SizeBucket::medium, SizeBucket::large})
        CHECK(parse_size_bucket(to_string(b)) == b);
}

// ---------------------------------------------------------------------------

namespace {

// Independent grid-coverage oracle: count per cell with explicit bounds,
// then greedily take the fullest cells.
double grid_oracle(const BinaryLabel& m, int n, double coverage)
{
    const Index H = m.rows(), W = m.cols();
    std::vector<std::int64_t> counts;
    for (int gy = 0; gy < n; ++gy)
        for (int gx = 0; gx < n; ++gx) {
            const Index y0 = gy * (H / n), y1 = gy == n - 1 ? H : (gy + 1) * (H / n);
            const Index x0 = gx * (W / n), x1 = gx == n - 1 ? W : (gx + 1) * (W / n);
            std::int64_t c = 0;
            for (Index y = y0; y < y1; ++y)
                for (Index x = x0; x < x1; ++x)
                    c += m(y, x);
            counts.push_back(c);
        }
    std::sort(counts.rbegin(), counts.rend());
    const std::int64_t total = m.count();
    const auto need = static_cast<std::int64_t>(std::ceil(coverage * double(total) - 1e-9));
    std::int64_t acc = 0;
    int cells = 0;
    while (acc < need)
        acc += counts[cells++];
    return double(cells) / double(n * n);
}

double density_oracle(const BinaryLabel& m, int window)
{
    const int r = window / 2;
    std::vector<double> values;
    for (Index y = 0; y < m.rows(); ++y)
        for (Index x = 0; x < m.cols(); ++x) {
            if (!m(y, x))
                continue;
            int c = 0;
            for (int dy = -r; dy <= r; ++dy)
                for (int dx = -r; dx <= r; ++dx) {
                    const Index yy = y + dy, xx = x + dx;
                    if (yy >= 0 && yy < m.rows() && xx >= 0 && xx < m.cols())
                        c += m(yy, xx);
                }
            values.push_back(double(c) / double(window * window));
        }
    std::sort(values.begin(), values.end());
    return values[(values.size() - 1) / 2];
}

} // namespace

TEST_CASE("grid coverage examples")
{
    BinaryLabel one = BinaryLabel::Constant(100, 100, false);
    one.block(12, 12, 5, 5).setConstant(true);
    CHECK(grid_coverage_ratio(one) == doctest::Approx(0.01));

    BinaryLabel uniform = BinaryLabel::Constant(100, 100, false);
    for (int gy = 0; gy < 10; ++gy)
        for (int gx = 0; gx < 10; ++gx)
            uniform.block(gy * 10 + 3, gx * 10 + 3, 2, 2).setConstant(true);
    CHECK(grid_coverage_ratio(uniform) == doctest::Approx(0.80));

    BinaryLabel block = BinaryLabel::Constant(100, 100, false);
    block.block(30, 40, 30, 30).setConstant(true);
    CHECK(grid_coverage_ratio(block) == doctest::Approx(0.08));
}

TEST_CASE("grid coverage matches the counting oracle on odd sizes")
{
    std::mt19937_64 rng(11);
    std::uniform_int_distribution<int> side(12, 57);
    std::uniform_real_distribution<double> u(0, 1);
    for (int t = 0; t < 40; ++t) {
        const Index h = side(rng), w = side(rng);
        BinaryLabel m(h, w);
        const double p = u(rng) * 0.3;
        for (Index i = 0; i < m.size(); ++i)
            m.data()[i] = u(rng) < p;
        if (m.count() == 0)
            m(0, 0) = true;
        CHECK(grid_coverage_ratio(m) == doctest::Approx(grid_oracle(m, 10, 0.8)));
    }
}

TEST_CASE("local density examples")
{
    CHECK(local_density(BinaryLabel(BinaryLabel::Constant(100, 100, true))) == 1.0);

    BinaryLabel single = BinaryLabel::Constant(20, 20, false);
    single(10, 10) = true;
    CHECK(local_density(single) == doctest::Approx(1.0 / 49.0));

    BinaryLabel block = BinaryLabel::Constant(20, 20, false);
    block.block(8, 8, 3, 3).setConstant(true);
    CHECK(local_density(block) == doctest::Approx(9.0 / 49.0));
    CHECK(local_density(block) == doctest::Approx(density_oracle(block, 7)));
}

TEST_CASE("local density matches the window-count oracle")
{
    std::mt19937_64 rng(12);
    std::uniform_real_distribution<double> u(0, 1);
    for (int t = 0; t < 30; ++t) {
        BinaryLabel m(23, 31);
        for (Index i = 0; i < m.size(); ++i)
            m.data()[i] = u(rng) < 0.25;
        m(5, 5) = true;
        CHECK(local_density(m) == doctest::Approx(density_oracle(m, 7)));
    }
}

TEST_CASE("concentration needs a nonempty mask")
{
    CHECK_THROWS_AS(grid_coverage_ratio(BinaryLabel(BinaryLabel::Constant(10, 10, false))), Error);
    CHECK_THROWS_AS(local_density(BinaryLabel(BinaryLabel::Constant(10, 10, false))), Error);
}

TEST_CASE("decision table rows")
{
    using C = ConcentrationClass;
    CHECK(classify_concentration({0.20, 0.0}) == C::concentrated);
    CHECK(classify_concentration({0.20, 1.0}) == C::concentrated);
    CHECK(classify_concentration({0.50, 0.0}) == C::diverse);
    CHECK(classify_concentration({0.50, 1.0}) == C::diverse);
    CHECK(classify_concentration({0.30, 0.35}) == C::concentrated);
    CHECK(concentration_case({0.30, 0.35}) == 3);
    CHECK(classify_concentration({0.30, 0.25}) == C::diverse);
    CHECK(concentration_case({0.30, 0.25}) == 4);
    CHECK(ConcentrationScores{0.30, 0.30}.tie_break() == doctest::Approx(0.21));
    CHECK(classify_concentration({0.30, 0.30}) == C::concentrated);
    CHECK(concentration_case({0.30, 0.30}) == 5);
    CHECK(ConcentrationScores{0.45, 0.26}.tie_break() == doctest::Approx(0.333));
    CHECK(classify_concentration({0.45, 0.26}) == C::diverse);
    CHECK(concentration_case({0.45, 0.26}) == 6);
}

TEST_CASE("compact blob is concentrated, scattered dots are diverse")
{
    BinaryLabel blob = BinaryLabel::Constant(200, 200, false);
    blob.block(40, 60, 50, 50).setConstant(true);
    CHECK(classify_concentration(concentration_scores(blob)) == ConcentrationClass::concentrated);

    BinaryLabel dots = BinaryLabel::Constant(200, 200, false);
    for (Index y = 0; y < 200; y += 9)
        for (Index x = 0; x < 200; x += 9)
            dots(y, x) = true;
    const auto s = concentration_scores(dots);
    CHECK(s.r_grid >= 0.5);
    CHECK(classify_concentration(s) == ConcentrationClass::diverse);
}
