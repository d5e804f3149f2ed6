#include "repulse/svg.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <stdexcept>
#include <string>

namespace repulse {

namespace {

constexpr double kWidth = 800.0;
constexpr double kHeight = 480.0;
constexpr double kMarginLeft = 56.0;
constexpr double kMarginRight = 16.0;
constexpr double kMarginTop = 16.0;
constexpr double kMarginBottom = 36.0;

const char* kPalette[] = {"#4c78a8", "#f58518", "#54a24b", "#e45756",
                          "#72b7b2", "#b279a2", "#9d755d", "#bab0ac"};

std::string fmt(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.2f", v);
    return buf;
}

std::string fmt_label(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.4g", v);
    return buf;
}

struct Scale {
    double x0, x1, y0, y1;

    double px(double x) const {
        return kMarginLeft + (x - x0) / (x1 - x0) * (kWidth - kMarginLeft - kMarginRight);
    }
    double py(double y) const {
        return kHeight - kMarginBottom -
               (y - y0) / (y1 - y0) * (kHeight - kMarginTop - kMarginBottom);
    }
};

void pad_range(double& lo, double& hi) {
    if (hi - lo < 1e-12) {
        lo -= 0.5;
        hi += 0.5;
    } else {
        const double pad = 0.05 * (hi - lo);
        lo -= pad;
        hi += pad;
    }
}

std::string svg_open() {
    return "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"800\" height=\"480\" "
           "viewBox=\"0 0 800 480\">\n"
           "<rect x=\"0\" y=\"0\" width=\"800\" height=\"480\" fill=\"#ffffff\"/>\n";
}

std::string axes(const Scale& sc, const std::string& x_label, const std::string& y_label) {
    std::string out;
    const double bx0 = kMarginLeft, bx1 = kWidth - kMarginRight;
    const double by0 = kHeight - kMarginBottom, by1 = kMarginTop;
    out += "<line x1=\"" + fmt(bx0) + "\" y1=\"" + fmt(by0) + "\" x2=\"" + fmt(bx1) +
           "\" y2=\"" + fmt(by0) + "\" stroke=\"#444444\" stroke-width=\"1\"/>\n";
    out += "<line x1=\"" + fmt(bx0) + "\" y1=\"" + fmt(by0) + "\" x2=\"" + fmt(bx0) +
           "\" y2=\"" + fmt(by1) + "\" stroke=\"#444444\" stroke-width=\"1\"/>\n";
    for (int t = 0; t <= 4; ++t) {
        const double fx = sc.x0 + (sc.x1 - sc.x0) * t / 4.0;
        const double fy = sc.y0 + (sc.y1 - sc.y0) * t / 4.0;
        out += "<text x=\"" + fmt(sc.px(fx)) + "\" y=\"" + fmt(by0 + 16.0) +
               "\" font-size=\"11\" text-anchor=\"middle\" fill=\"#444444\">" + fmt_label(fx) +
               "</text>\n";
        out += "<text x=\"" + fmt(bx0 - 6.0) + "\" y=\"" + fmt(sc.py(fy) + 4.0) +
               "\" font-size=\"11\" text-anchor=\"end\" fill=\"#444444\">" + fmt_label(fy) +
               "</text>\n";
    }
    if (!x_label.empty())
        out += "<text x=\"" + fmt((bx0 + bx1) / 2.0) + "\" y=\"" + fmt(kHeight - 6.0) +
               "\" font-size=\"12\" text-anchor=\"middle\" fill=\"#222222\">" + x_label +
               "</text>\n";
    if (!y_label.empty())
        out += "<text x=\"14\" y=\"" + fmt((by0 + by1) / 2.0) +
               "\" font-size=\"12\" text-anchor=\"middle\" fill=\"#222222\" "
               "transform=\"rotate(-90 14 " +
               fmt((by0 + by1) / 2.0) + ")\">" + y_label + "</text>\n";
    return out;
}

std::string polyline(const std::vector<double>& px, const std::vector<double>& py,
                     const std::string& style) {
    std::string out = "<polyline fill=\"none\" " + style + " points=\"";
    for (std::size_t i = 0; i < px.size(); ++i) {
        if (i > 0) out.push_back(' ');
        out += fmt(px[i]) + "," + fmt(py[i]);
    }
    out += "\"/>\n";
    return out;
}

}  // namespace

std::string plot_regression_bands(const std::vector<double>& grid_x, const Matrix& predictions,
                                  const std::vector<double>& train_x,
                                  const std::vector<double>& train_y) {
    const std::size_t g = grid_x.size();
    const std::size_t n = predictions.rows;
    if (g < 2) throw std::invalid_argument("need at least 2 grid points");
    if (predictions.cols != g) throw std::invalid_argument("prediction grid width mismatch");
    if (train_x.size() != train_y.size())
        throw std::invalid_argument("train point coordinate counts differ");
    if (!predictions.all_finite()) throw std::invalid_argument("non-finite prediction");

    std::vector<double> mean(g, 0.0), sd(g, 0.0);
    for (std::size_t j = 0; j < g; ++j) {
        for (std::size_t i = 0; i < n; ++i) mean[j] += predictions(i, j);
        mean[j] /= static_cast<double>(n);
        for (std::size_t i = 0; i < n; ++i) {
            const double d = predictions(i, j) - mean[j];
            sd[j] += d * d;
        }
        sd[j] = std::sqrt(sd[j] / static_cast<double>(n));
    }

    double x0 = grid_x[0], x1 = grid_x[0];
    for (double x : grid_x) {
        x0 = std::min(x0, x);
        x1 = std::max(x1, x);
    }
    for (double x : train_x) {
        x0 = std::min(x0, x);
        x1 = std::max(x1, x);
    }
    double y0 = mean[0] - sd[0], y1 = mean[0] + sd[0];
    for (std::size_t j = 0; j < g; ++j) {
        y0 = std::min(y0, mean[j] - sd[j]);
        y1 = std::max(y1, mean[j] + sd[j]);
        for (std::size_t i = 0; i < n; ++i) {
            y0 = std::min(y0, predictions(i, j));
            y1 = std::max(y1, predictions(i, j));
        }
    }
    for (double y : train_y) {
        y0 = std::min(y0, y);
        y1 = std::max(y1, y);
    }
    pad_range(x0, x1);
    pad_range(y0, y1);
    const Scale sc{x0, x1, y0, y1};

    std::string out = svg_open();
    out += "<path class=\"band\" fill=\"#c6dbef\" fill-opacity=\"0.6\" stroke=\"none\" d=\"M";
    for (std::size_t j = 0; j < g; ++j) {
        if (j > 0) out += " L";
        out += fmt(sc.px(grid_x[j])) + " " + fmt(sc.py(mean[j] + sd[j]));
    }
    for (std::size_t j = g; j-- > 0;)
        out += " L" + fmt(sc.px(grid_x[j])) + " " + fmt(sc.py(mean[j] - sd[j]));
    out += " Z\"/>\n";

    std::vector<double> px(g), py(g);
    for (std::size_t j = 0; j < g; ++j) px[j] = sc.px(grid_x[j]);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < g; ++j) py[j] = sc.py(predictions(i, j));
        out += polyline(px, py, "stroke=\"#9ecae1\" stroke-width=\"1\" stroke-opacity=\"0.7\"");
    }
    for (std::size_t j = 0; j < g; ++j) py[j] = sc.py(mean[j]);
    out += polyline(px, py, "stroke=\"#08519c\" stroke-width=\"2\"");

    for (std::size_t i = 0; i < train_x.size(); ++i)
        out += "<circle cx=\"" + fmt(sc.px(train_x[i])) + "\" cy=\"" + fmt(sc.py(train_y[i])) +
               "\" r=\"2.5\" fill=\"#333333\"/>\n";

    out += axes(sc, "x", "y");
    out += "</svg>\n";
    return out;
}

std::string plot_histogram(const std::vector<std::string>& names,
                           const std::vector<std::vector<double>>& series, std::size_t bins) {
    if (names.size() != series.size())
        throw std::invalid_argument("histogram names and series counts differ");
    if (series.empty() || bins == 0) throw std::invalid_argument("empty histogram");
    double lo = series[0].empty() ? 0.0 : series[0][0];
    double hi = lo;
    for (const auto& s : series)
        for (double v : s) {
            lo = std::min(lo, v);
            hi = std::max(hi, v);
        }
    pad_range(lo, hi);

    std::vector<std::vector<double>> counts(series.size(), std::vector<double>(bins, 0.0));
    double max_count = 1.0;
    for (std::size_t s = 0; s < series.size(); ++s) {
        for (double v : series[s]) {
            std::size_t b = static_cast<std::size_t>((v - lo) / (hi - lo) * bins);
            if (b >= bins) b = bins - 1;
            counts[s][b] += 1.0;
        }
        for (double c : counts[s]) max_count = std::max(max_count, c);
    }

    const Scale sc{lo, hi, 0.0, max_count * 1.05};
    std::string out = svg_open();
    const double bin_w = (hi - lo) / static_cast<double>(bins);
    for (std::size_t s = 0; s < series.size(); ++s) {
        const char* color = kPalette[s % 8];
        for (std::size_t b = 0; b < bins; ++b) {
            if (counts[s][b] == 0.0) continue;
            const double rx = sc.px(lo + b * bin_w);
            const double rw = sc.px(lo + (b + 1) * bin_w) - rx;
            const double ry = sc.py(counts[s][b]);
            const double rh = sc.py(0.0) - ry;
            out += "<rect x=\"" + fmt(rx) + "\" y=\"" + fmt(ry) + "\" width=\"" + fmt(rw) +
                   "\" height=\"" + fmt(rh) + "\" fill=\"" + color +
                   "\" fill-opacity=\"0.45\"/>\n";
        }
        out += "<text x=\"" + fmt(kWidth - kMarginRight - 8.0) + "\" y=\"" +
               fmt(kMarginTop + 16.0 + 16.0 * s) +
               "\" font-size=\"12\" text-anchor=\"end\" fill=\"" + color + "\">" + names[s] +
               "</text>\n";
    }
    out += axes(sc, "value", "count");
    out += "</svg>\n";
    return out;
}

std::string plot_curves(const std::vector<double>& xs, const std::vector<std::string>& names,
                        const std::vector<std::vector<double>>& series,
                        const std::string& x_label, const std::string& y_label) {
    if (names.size() != series.size())
        throw std::invalid_argument("curve names and series counts differ");
    if (series.empty() || xs.size() < 2) throw std::invalid_argument("empty curve plot");
    double x0 = xs.front(), x1 = xs.front();
    for (double x : xs) {
        x0 = std::min(x0, x);
        x1 = std::max(x1, x);
    }
    double y0 = series[0][0], y1 = series[0][0];
    for (const auto& s : series) {
        if (s.size() != xs.size()) throw std::invalid_argument("curve length mismatch");
        for (double v : s) {
            y0 = std::min(y0, v);
            y1 = std::max(y1, v);
        }
    }
    pad_range(x0, x1);
    pad_range(y0, y1);
    const Scale sc{x0, x1, y0, y1};

    std::string out = svg_open();
    std::vector<double> px(xs.size()), py(xs.size());
    for (std::size_t j = 0; j < xs.size(); ++j) px[j] = sc.px(xs[j]);
    for (std::size_t s = 0; s < series.size(); ++s) {
        const char* color = kPalette[s % 8];
        for (std::size_t j = 0; j < xs.size(); ++j) py[j] = sc.py(series[s][j]);
        out += polyline(px, py,
                        "stroke=\"" + std::string(color) + "\" stroke-width=\"2\"");
        out += "<text x=\"" + fmt(kWidth - kMarginRight - 8.0) + "\" y=\"" +
               fmt(kMarginTop + 16.0 + 16.0 * s) +
               "\" font-size=\"12\" text-anchor=\"end\" fill=\"" + color + "\">" + names[s] +
               "</text>\n";
    }
    out += axes(sc, x_label, y_label);
    out += "</svg>\n";
    return out;
}

std::string plot_heatmap(const Matrix& grid, double x0, double x1, double y0, double y1,
                         const std::vector<double>& scatter_x,
                         const std::vector<double>& scatter_y,
                         const std::vector<int>& scatter_class) {
    if (grid.empty()) throw std::invalid_argument("empty heatmap grid");
    if (scatter_x.size() != scatter_y.size() || scatter_x.size() != scatter_class.size())
        throw std::invalid_argument("scatter arrays differ in length");
    double lo = grid.data[0], hi = grid.data[0];
    for (double v : grid.data) {
        lo = std::min(lo, v);
        hi = std::max(hi, v);
    }
    if (hi - lo < 1e-300) hi = lo + 1.0;

    const Scale sc{x0, x1, y0, y1};
    std::string out = svg_open();
    const double cw = (x1 - x0) / static_cast<double>(grid.cols);
    const double ch = (y1 - y0) / static_cast<double>(grid.rows);
    for (std::size_t r = 0; r < grid.rows; ++r) {
        for (std::size_t c = 0; c < grid.cols; ++c) {
            const double f = (grid(r, c) - lo) / (hi - lo);
            // Light-to-dark blue ramp.
            const int red = static_cast<int>(std::lround(247.0 - f * (247.0 - 8.0)));
            const int green = static_cast<int>(std::lround(251.0 - f * (251.0 - 48.0)));
            const int blue = static_cast<int>(std::lround(255.0 - f * (255.0 - 107.0)));
            char color[8];
            std::snprintf(color, sizeof(color), "#%02x%02x%02x", red, green, blue);
            const double rx = sc.px(x0 + c * cw);
            const double ry = sc.py(y0 + (r + 1) * ch);
            const double rw = sc.px(x0 + (c + 1) * cw) - rx;
            const double rh = sc.py(y0 + r * ch) - ry;
            out += "<rect x=\"" + fmt(rx) + "\" y=\"" + fmt(ry) + "\" width=\"" + fmt(rw) +
                   "\" height=\"" + fmt(rh) + "\" fill=\"" + color + "\"/>\n";
        }
    }
    for (std::size_t i = 0; i < scatter_x.size(); ++i) {
        const char* color = kPalette[static_cast<std::size_t>(scatter_class[i]) % 8];
        out += "<circle cx=\"" + fmt(sc.px(scatter_x[i])) + "\" cy=\"" +
               fmt(sc.py(scatter_y[i])) + "\" r=\"2.5\" fill=\"" + color +
               "\" stroke=\"#222222\" stroke-width=\"0.5\"/>\n";
    }
    out += axes(sc, "x", "y");
    out += "</svg>\n";
    return out;
}

}  // namespace repulse
