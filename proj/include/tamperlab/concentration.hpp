#pragma once

#include <string>

#include "tamperlab/raster.hpp"

namespace tamperlab {

/// Which filtered values the local-density median is taken over.
enum class DensitySampling {
    tampered, ///< only at tampered pixels
    all,      ///< every pixel of the map
};

struct ConcentrationParams {
    int grid_n = 10;
    double coverage = 0.8;
    int window = 7;
    DensitySampling sampling = DensitySampling::tampered;
};

struct ConcentrationScores {
    double r_grid = 0.0;
    double r_dens = 0.0;

    double tie_break() const { return r_grid * (1.0 - r_dens); }
};

enum class ConcentrationClass { concentrated, diverse };

std::string to_string(ConcentrationClass c);

/// Fraction of grid_n x grid_n cells needed to hold ceil(coverage * total)
/// tampered pixels when cells are taken in descending count order (ties by
/// row-major cell index). Edge cells absorb the size remainder.
double grid_coverage_ratio(const BinaryLabel& mask, int grid_n = 10, double coverage = 0.8);

/// Median of a zero-padded window x window box filter of the mask.
/// Even-length medians take the lower middle element.
double local_density(const BinaryLabel& mask, int window = 7,
                     DensitySampling sampling = DensitySampling::tampered);

ConcentrationScores concentration_scores(const BinaryLabel& mask,
                                         const ConcentrationParams& params = {});

/// Decision table row (1-6) matched by the scores:
///   1: r_grid <= 0.20                                  -> concentrated
///   2: r_grid >= 0.50                                  -> diverse
///   3: 0.20 < r_grid < 0.50, r_dens >= 0.35            -> concentrated
///   4: 0.20 < r_grid < 0.50, r_dens <= 0.25            -> diverse
///   5: otherwise, r_grid * (1 - r_dens) <= 0.25        -> concentrated
///   6: otherwise, r_grid * (1 - r_dens) >  0.25        -> diverse
int concentration_case(const ConcentrationScores& scores);

ConcentrationClass classify_concentration(const ConcentrationScores& scores);

} // namespace tamperlab
