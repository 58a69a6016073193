#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "subctrl/grid.hpp"

namespace subctrl {

/// Binary 8-bit portable graymap (P5), row 0 at the top.
void write_pgm(const std::filesystem::path& path, int width, int height, const std::vector<std::uint8_t>& pixels);

/// Maps values linearly to 0..255; a constant input maps to 128 everywhere.
std::vector<std::uint8_t> gray_levels(const std::vector<double>& values);

/// Heatmaps of a nodal vector. d = 1 gives a one-row image, d = 2 one image
/// with x1 to the right and x2 upwards, d >= 3 the three axis-aligned slices
/// through the middle node (x1x2, x1x3, x2x3). Masked nodes are black.
/// Returns the written file paths.
std::vector<std::filesystem::path> write_heatmaps(const GridDomain& grid, const Eigen::VectorXd& values,
                                                  const std::filesystem::path& dir, const std::string& stem);

/// CSV with a header line and one row per entry of `rows`.
void write_series(const std::filesystem::path& path, const std::string& header,
                  const std::vector<std::vector<double>>& rows);

}  // namespace subctrl
