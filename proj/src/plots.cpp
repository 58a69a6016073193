#include "subctrl/plots.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "subctrl/errors.hpp"

namespace subctrl {

void write_pgm(const std::filesystem::path& path, int width, int height, const std::vector<std::uint8_t>& pixels) {
  if (width < 1 || height < 1 || pixels.size() != static_cast<std::size_t>(width) * static_cast<std::size_t>(height)) {
    throw ConfigError("image size does not match pixel count");
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot write " + path.string());
  out << "P5\n" << width << ' ' << height << "\n255\n";
  out.write(reinterpret_cast<const char*>(pixels.data()), static_cast<std::streamsize>(pixels.size()));
}

std::vector<std::uint8_t> gray_levels(const std::vector<double>& values) {
  std::vector<std::uint8_t> out(values.size(), 128);
  if (values.empty()) return out;
  const auto [lo, hi] = std::minmax_element(values.begin(), values.end());
  const double low = *lo, range = *hi - *lo;
  if (!(range > 0.0)) return out;
  for (std::size_t i = 0; i < values.size(); ++i) {
    out[i] = static_cast<std::uint8_t>(std::lround(255.0 * (values[i] - low) / range));
  }
  return out;
}

namespace {

// Image of the plane spanned by axes (a, b) with every other axis at its
// middle node; `b` < 0 gives a single row along `a`.
void slice_image(const GridDomain& grid, const Eigen::VectorXd& values, int a, int b,
                 const std::filesystem::path& path) {
  const int d = grid.dimension();
  std::vector<int> idx(static_cast<std::size_t>(d));
  for (int k = 0; k < d; ++k) idx[k] = grid.counts()[k] / 2;
  const int width = grid.counts()[a];
  const int height = b >= 0 ? grid.counts()[b] : 1;
  std::vector<double> active_values;
  std::vector<long> active_of_pixel(static_cast<std::size_t>(width) * height, -1);
  for (int row = 0; row < height; ++row) {
    if (b >= 0) idx[b] = height - 1 - row;
    for (int col = 0; col < width; ++col) {
      idx[a] = col;
      std::size_t node = 0;
      for (int k = 0; k < d; ++k) node += static_cast<std::size_t>(idx[k]) * grid.stride(k);
      const long act = grid.active_index(node);
      if (act >= 0) {
        active_of_pixel[static_cast<std::size_t>(row) * width + col] = static_cast<long>(active_values.size());
        active_values.push_back(values[act]);
      }
    }
  }
  const auto levels = gray_levels(active_values);
  std::vector<std::uint8_t> pixels(active_of_pixel.size(), 0);
  for (std::size_t p = 0; p < pixels.size(); ++p) {
    if (active_of_pixel[p] >= 0) pixels[p] = levels[static_cast<std::size_t>(active_of_pixel[p])];
  }
  write_pgm(path, width, height, pixels);
}

}  // namespace

std::vector<std::filesystem::path> write_heatmaps(const GridDomain& grid, const Eigen::VectorXd& values,
                                                  const std::filesystem::path& dir, const std::string& stem) {
  if (values.size() != static_cast<long>(grid.active_count())) throw ConfigError("heatmap vector size mismatch");
  std::vector<std::filesystem::path> written;
  const int d = grid.dimension();
  if (d == 1) {
    written.push_back(dir / (stem + ".pgm"));
    slice_image(grid, values, 0, -1, written.back());
  } else if (d == 2) {
    written.push_back(dir / (stem + ".pgm"));
    slice_image(grid, values, 0, 1, written.back());
  } else {
    for (const auto& [a, b] : {std::pair{0, 1}, std::pair{0, 2}, std::pair{1, 2}}) {
      written.push_back(dir / (stem + "_x" + std::to_string(a + 1) + "x" + std::to_string(b + 1) + ".pgm"));
      slice_image(grid, values, a, b, written.back());
    }
  }
  return written;
}

void write_series(const std::filesystem::path& path, const std::string& header,
                  const std::vector<std::vector<double>>& rows) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write " + path.string());
  out.precision(17);
  out << header << '\n';
  for (const auto& row : rows) {
    for (std::size_t i = 0; i < row.size(); ++i) out << (i ? "," : "") << row[i];
    out << '\n';
  }
}

}  // namespace subctrl
