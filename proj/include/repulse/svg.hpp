#pragma once

#include <string>
#include <vector>

#include "repulse/matrix.hpp"

namespace repulse {

/// 800x480 canvas: one thin polyline per particle, one mean polyline, a
/// +-1 std shaded band path, and the training points as circles. Output is
/// byte-identical for identical inputs. predictions is n x G over grid_x.
std::string plot_regression_bands(const std::vector<double>& grid_x, const Matrix& predictions,
                                  const std::vector<double>& train_x,
                                  const std::vector<double>& train_y);

/// Overlaid value histograms, one series per (name, values) pair, shared
/// equal-width bins over the joint range.
std::string plot_histogram(const std::vector<std::string>& names,
                           const std::vector<std::vector<double>>& series, std::size_t bins);

/// One polyline per named curve over a shared x grid.
std::string plot_curves(const std::vector<double>& xs, const std::vector<std::string>& names,
                        const std::vector<std::vector<double>>& series,
                        const std::string& x_label, const std::string& y_label);

/// Grid of value cells over [x0,x1] x [y0,y1] with scatter points on top;
/// values in grid are row-major with rows bottom to top.
std::string plot_heatmap(const Matrix& grid, double x0, double x1, double y0, double y1,
                         const std::vector<double>& scatter_x,
                         const std::vector<double>& scatter_y,
                         const std::vector<int>& scatter_class);

}  // namespace repulse
