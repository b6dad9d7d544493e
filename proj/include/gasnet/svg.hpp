#pragma once

// Minimal static SVG line charts (fixed 800x600 viewport, optional log-y
// axis, legend block). No external dependencies; charts are build artifacts,
// not an interactive UI.

#include <algorithm>
#include <cmath>
#include <fstream>
#include <ostream>
#include <string>
#include <vector>

#include "gasnet/errors.hpp"

namespace gasnet::svg {

struct Series {
    std::string label;
    std::vector<double> x;
    std::vector<double> y;
};

inline std::string escape(const std::string& s) {
    std::string out;
    for (char c : s) {
        if (c == '&') out += "&amp;";
        else if (c == '<') out += "&lt;";
        else if (c == '>') out += "&gt;";
        else out += c;
    }
    return out;
}

inline const char* palette(size_t i) {
    static const char* colors[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd",
                                   "#ff7f0e", "#8c564b", "#17becf", "#7f7f7f"};
    return colors[i % 8];
}

struct LineChart {
    std::string title, xlabel, ylabel;
    bool log_y = false;
    std::vector<Series> series;

    void add(const std::string& label, const std::vector<double>& xs,
             const std::vector<double>& ys) {
        series.push_back({label, xs, ys});
    }

    void render(std::ostream& os, double ox, double oy, double width, double height) const {
        const double ml = 72, mr = 150, mt = 28, mb = 42;
        const double pw = width - ml - mr, ph = height - mt - mb;

        double xmin = 1e300, xmax = -1e300, ymin = 1e300, ymax = -1e300;
        for (const auto& s : series)
            for (size_t i = 0; i < s.x.size(); ++i) {
                double yv = s.y[i];
                if (!std::isfinite(s.x[i]) || !std::isfinite(yv)) continue;
                if (log_y && yv <= 0.0) continue;
                xmin = std::min(xmin, s.x[i]);
                xmax = std::max(xmax, s.x[i]);
                double ty = log_y ? std::log10(yv) : yv;
                ymin = std::min(ymin, ty);
                ymax = std::max(ymax, ty);
            }
        if (xmin > xmax) { xmin = 0; xmax = 1; }
        if (ymin > ymax) { ymin = 0; ymax = 1; }
        if (xmax == xmin) xmax = xmin + 1;
        if (ymax == ymin) { ymax += 0.5; ymin -= 0.5; }

        auto px = [&](double v) { return ox + ml + (v - xmin) / (xmax - xmin) * pw; };
        auto py = [&](double v) { return oy + mt + (ymax - v) / (ymax - ymin) * ph; };

        os << "<g font-family=\"sans-serif\" font-size=\"11\">\n";
        os << "<rect x=\"" << ox + ml << "\" y=\"" << oy + mt << "\" width=\"" << pw
           << "\" height=\"" << ph << "\" fill=\"white\" stroke=\"#333\"/>\n";
        os << "<text x=\"" << ox + ml << "\" y=\"" << oy + mt - 10
           << "\" font-size=\"13\" font-weight=\"bold\">" << escape(title) << "</text>\n";

        // ticks
        auto nice = [](double span, int target) {
            double raw = span / target;
            double mag = std::pow(10.0, std::floor(std::log10(raw)));
            double norm = raw / mag;
            double step = norm < 1.5 ? 1.0 : norm < 3.5 ? 2.0 : norm < 7.5 ? 5.0 : 10.0;
            return step * mag;
        };
        double xstep = nice(xmax - xmin, 6);
        for (double v = std::ceil(xmin / xstep) * xstep; v <= xmax + 1e-9 * xstep; v += xstep) {
            os << "<line x1=\"" << px(v) << "\" y1=\"" << oy + mt + ph << "\" x2=\"" << px(v)
               << "\" y2=\"" << oy + mt + ph + 4 << "\" stroke=\"#333\"/>\n";
            char buf[32];
            snprintf(buf, sizeof(buf), "%g", v);
            os << "<text x=\"" << px(v) << "\" y=\"" << oy + mt + ph + 16
               << "\" text-anchor=\"middle\">" << buf << "</text>\n";
        }
        if (log_y) {
            int lo = int(std::floor(ymin)), hi = int(std::ceil(ymax));
            int stride = std::max(1, (hi - lo) / 8);
            for (int e = lo; e <= hi; e += stride) {
                if (e < ymin - 1e-9 || e > ymax + 1e-9) continue;
                os << "<line x1=\"" << ox + ml - 4 << "\" y1=\"" << py(e) << "\" x2=\""
                   << ox + ml << "\" y2=\"" << py(e) << "\" stroke=\"#333\"/>\n"
                   << "<line x1=\"" << ox + ml << "\" y1=\"" << py(e) << "\" x2=\""
                   << ox + ml + pw << "\" y2=\"" << py(e)
                   << "\" stroke=\"#ddd\" stroke-dasharray=\"3,3\"/>\n";
                os << "<text x=\"" << ox + ml - 8 << "\" y=\"" << py(e) + 4
                   << "\" text-anchor=\"end\">1e" << e << "</text>\n";
            }
        } else {
            double ystep = nice(ymax - ymin, 5);
            for (double v = std::ceil(ymin / ystep) * ystep; v <= ymax + 1e-9 * ystep;
                 v += ystep) {
                os << "<line x1=\"" << ox + ml - 4 << "\" y1=\"" << py(v) << "\" x2=\""
                   << ox + ml << "\" y2=\"" << py(v) << "\" stroke=\"#333\"/>\n";
                char buf[32];
                snprintf(buf, sizeof(buf), "%g", v);
                os << "<text x=\"" << ox + ml - 8 << "\" y=\"" << py(v) + 4
                   << "\" text-anchor=\"end\">" << buf << "</text>\n";
            }
        }
        os << "<text x=\"" << ox + ml + pw / 2 << "\" y=\"" << oy + mt + ph + 32
           << "\" text-anchor=\"middle\">" << escape(xlabel) << "</text>\n";
        os << "<text x=\"" << ox + 16 << "\" y=\"" << oy + mt + ph / 2
           << "\" text-anchor=\"middle\" transform=\"rotate(-90 " << ox + 16 << " "
           << oy + mt + ph / 2 << ")\">" << escape(ylabel) << "</text>\n";

        // polylines (finite segments only)
        for (size_t si = 0; si < series.size(); ++si) {
            const Series& s = series[si];
            std::string points;
            auto flush = [&]() {
                if (!points.empty()) {
                    os << "<polyline fill=\"none\" stroke=\"" << palette(si)
                       << "\" stroke-width=\"1.5\" points=\"" << points << "\"/>\n";
                    points.clear();
                }
            };
            for (size_t i = 0; i < s.x.size(); ++i) {
                double yv = s.y[i];
                bool ok = std::isfinite(s.x[i]) && std::isfinite(yv) && (!log_y || yv > 0.0);
                if (!ok) { flush(); continue; }
                double ty = log_y ? std::log10(yv) : yv;
                char buf[64];
                snprintf(buf, sizeof(buf), "%.2f,%.2f ", px(s.x[i]), py(ty));
                points += buf;
            }
            flush();
        }

        // legend
        double lx = ox + ml + pw + 10, ly = oy + mt + 6;
        for (size_t si = 0; si < series.size(); ++si) {
            os << "<line x1=\"" << lx << "\" y1=\"" << ly + double(si) * 16 << "\" x2=\""
               << lx + 18 << "\" y2=\"" << ly + double(si) * 16 << "\" stroke=\"" << palette(si)
               << "\" stroke-width=\"2\"/>\n";
            os << "<text x=\"" << lx + 24 << "\" y=\"" << ly + double(si) * 16 + 4 << "\">"
               << escape(series[si].label) << "</text>\n";
        }
        os << "</g>\n";
    }
};

/// Writes charts stacked vertically into one 800x600 document.
inline void write_charts(const std::string& path, const std::vector<LineChart>& charts) {
    std::ofstream os(path);
    if (!os) throw ParseError("cannot open '" + path + "' for writing");
    const double w = 800, h = 600;
    os << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
    os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << w << "\" height=\"" << h
       << "\" viewBox=\"0 0 " << w << " " << h << "\">\n";
    os << "<rect width=\"" << w << "\" height=\"" << h << "\" fill=\"white\"/>\n";
    if (!charts.empty()) {
        double each = h / double(charts.size());
        for (size_t i = 0; i < charts.size(); ++i)
            charts[i].render(os, 0.0, double(i) * each, w, each);
    }
    os << "</svg>\n";
}

inline void write_chart(const std::string& path, const LineChart& chart) {
    write_charts(path, {chart});
}

}  // namespace gasnet::svg
