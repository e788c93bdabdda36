#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "ulbench/errors.hpp"
#include "ulbench/harness.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace ulbench {

namespace {

// Plots are derived artifacts; the sidecar text files carry the contract.
// Numbers are serialized exactly as the trajectory files serialize them.
std::string num(double x) { return json(x).dump(); }

constexpr double kPi = 3.14159265358979323846;

std::string frac_str(double fraction) {
    char buf[16];
    std::snprintf(buf, sizeof(buf), "%.2f", fraction);
    return buf;
}

const char* method_color(UnlearnMethod m) {
    switch (m) {
        case UnlearnMethod::grad_ascent: return "#d62728";
        case UnlearnMethod::grad_diff: return "#1f77b4";
        case UnlearnMethod::kl_min: return "#2ca02c";
        case UnlearnMethod::pref_opt: return "#9467bd";
    }
    return "#000000";
}

struct Canvas {
    std::ostringstream svg;
    double width, height, margin;
    double x_lo, x_hi, y_lo, y_hi;

    Canvas(double w, double h, double m, double xlo, double xhi, double ylo, double yhi)
        : width(w), height(h), margin(m), x_lo(xlo), x_hi(xhi), y_lo(ylo), y_hi(yhi) {
        svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << w << "\" height=\"" << h
            << "\" viewBox=\"0 0 " << w << " " << h << "\">\n";
        svg << "<rect width=\"" << w << "\" height=\"" << h << "\" fill=\"white\"/>\n";
    }

    double px(double x) const {
        return margin + (x - x_lo) / (x_hi - x_lo) * (width - 2 * margin);
    }
    double py(double y) const {
        return height - margin - (y - y_lo) / (y_hi - y_lo) * (height - 2 * margin);
    }

    void axes(const std::string& x_label, const std::string& y_label) {
        svg << "<line x1=\"" << margin << "\" y1=\"" << height - margin << "\" x2=\""
            << width - margin << "\" y2=\"" << height - margin
            << "\" stroke=\"black\" stroke-width=\"1\"/>\n";
        svg << "<line x1=\"" << margin << "\" y1=\"" << margin << "\" x2=\"" << margin << "\" y2=\""
            << height - margin << "\" stroke=\"black\" stroke-width=\"1\"/>\n";
        svg << "<text x=\"" << width / 2 << "\" y=\"" << height - 8
            << "\" font-size=\"12\" text-anchor=\"middle\">" << x_label << "</text>\n";
        svg << "<text x=\"14\" y=\"" << height / 2
            << "\" font-size=\"12\" text-anchor=\"middle\" transform=\"rotate(-90 14 "
            << height / 2 << ")\">" << y_label << "</text>\n";
    }

    void tick_x(double x, const std::string& label) {
        svg << "<line x1=\"" << px(x) << "\" y1=\"" << height - margin << "\" x2=\"" << px(x)
            << "\" y2=\"" << height - margin + 4 << "\" stroke=\"black\"/>\n";
        svg << "<text x=\"" << px(x) << "\" y=\"" << height - margin + 16
            << "\" font-size=\"10\" text-anchor=\"middle\">" << label << "</text>\n";
    }

    void tick_y(double y, const std::string& label) {
        svg << "<line x1=\"" << margin - 4 << "\" y1=\"" << py(y) << "\" x2=\"" << margin
            << "\" y2=\"" << py(y) << "\" stroke=\"black\"/>\n";
        svg << "<text x=\"" << margin - 6 << "\" y=\"" << py(y) + 3
            << "\" font-size=\"10\" text-anchor=\"end\">" << label << "</text>\n";
    }

    void circle(double x, double y, double r, const std::string& color) {
        svg << "<circle cx=\"" << px(x) << "\" cy=\"" << py(y) << "\" r=\"" << r << "\" fill=\""
            << color << "\" fill-opacity=\"0.75\"/>\n";
    }

    void square(double x, double y, double half, const std::string& color) {
        svg << "<rect x=\"" << px(x) - half << "\" y=\"" << py(y) - half << "\" width=\""
            << 2 * half << "\" height=\"" << 2 * half << "\" fill=\"" << color << "\"/>\n";
    }

    void star(double x, double y, double r, const std::string& color) {
        const double cx = px(x), cy = py(y);
        svg << "<path d=\"M";
        for (int i = 0; i < 10; ++i) {
            const double ang = -kPi / 2 + i * kPi / 5;
            const double rad = i % 2 == 0 ? r : r * 0.45;
            svg << (i ? " L" : "") << cx + rad * std::cos(ang) << " " << cy + rad * std::sin(ang);
        }
        svg << " Z\" fill=\"" << color << "\"/>\n";
    }

    void polyline(const std::vector<std::pair<double, double>>& pts, const std::string& color) {
        svg << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.5\" points=\"";
        for (const auto& [x, y] : pts) svg << px(x) << "," << py(y) << " ";
        svg << "\"/>\n";
    }

    void text(double raw_x, double raw_y, const std::string& s, const std::string& color) {
        svg << "<text x=\"" << raw_x << "\" y=\"" << raw_y << "\" font-size=\"11\" fill=\"" << color
            << "\">" << s << "</text>\n";
    }

    void finish(const std::string& path) {
        svg << "</svg>\n";
        std::ofstream f(path);
        if (!f) throw Error("cannot open plot for writing: " + path);
        f << svg.str();
    }
};

// Forget quality spans many orders of magnitude; the plane uses log10(p)
// with a floor so zero-ish p-values stay on the canvas.
double log_fq(double p) { return std::log10(std::max(p, 1e-30)); }

void plane_plot(const std::vector<Trajectory>& trajectories, double retain_utility,
                const std::string& path, double y_floor) {
    double x_lo = 0.0, x_hi = 0.0;
    for (const auto& t : trajectories)
        for (const auto& p : t.points) x_hi = std::max(x_hi, p.model_utility);
    x_hi = std::max({x_hi, retain_utility, 1e-6}) * 1.1;

    Canvas c(640, 480, 56, x_lo, x_hi, y_floor, 0.4);
    c.axes("Model Utility", "log10 Forget Quality");
    for (int i = 0; i <= 4; ++i) c.tick_x(x_hi * i / 4.0, num(std::round(x_hi * i / 4.0 * 100) / 100));
    for (double y = std::ceil(y_floor); y <= 0.0; y += std::max(1.0, std::floor(-y_floor / 6.0)))
        c.tick_y(y, num(y));

    int legend_row = 0;
    for (const auto& t : trajectories) {
        const std::string color = method_color(t.method);
        for (const auto& p : t.points) {
            const double y = std::max(log_fq(p.forget_quality), y_floor);
            // marker size encodes the epoch
            c.circle(p.model_utility, y, 3.0 + 1.3 * p.epoch, color);
        }
        c.text(560, 24 + 14 * legend_row++, method_name(t.method), color);
    }
    if (!trajectories.empty()) {
        const auto& first = trajectories.front().points.front();
        c.square(first.model_utility, std::max(log_fq(first.forget_quality), y_floor), 5, "black");
    }
    c.star(retain_utility, 0.0, 9, "black");
    c.finish(path);
}

}  // namespace

void emit_plots(const std::vector<Trajectory>& trajectories, double retain_model_utility,
                const std::string& out_dir) {
    if (trajectories.empty()) throw InvalidArgumentError("emit_plots: no trajectories");
    const fs::path out(out_dir);

    plane_plot(trajectories, retain_model_utility, (out / "plane.svg").string(), -30.0);
    // Zoomed variant of the high-forget-quality region.
    plane_plot(trajectories, retain_model_utility, (out / "plane_zoom.svg").string(), -4.0);

    {
        std::ofstream side(out / "plane.txt");
        side << "# method epoch model_utility forget_quality\n";
        for (const auto& t : trajectories) {
            for (const auto& p : t.points)
                side << method_name(t.method) << " " << p.epoch << " " << num(p.model_utility)
                     << " " << num(p.forget_quality) << "\n";
        }
        side << "retain_star " << num(retain_model_utility) << " " << num(1.0) << "\n";
    }
    {
        std::ifstream src(out / "plane.txt");
        std::ofstream zoom_side(out / "plane_zoom.txt");
        zoom_side << src.rdbuf();
    }

    // Per-dataset metric-vs-epoch curves, one figure per method.
    const char* dataset_names[4] = {"forget", "retain", "real_authors", "world_facts"};
    const char* metric_names[3] = {"probability", "rouge", "truth_ratio"};
    for (const auto& t : trajectories) {
        const int panel_w = 220, panel_h = 170, cols = 4;
        Canvas c(panel_w * cols, panel_h * 3, 0, 0, 1, 0, 1);
        std::ofstream side(out / ("curves_" + method_name(t.method) + "_" + frac_str(t.fraction) +
                                  ".txt"));
        side << "# dataset metric epoch value\n";
        for (int mi = 0; mi < 3; ++mi) {
            for (int di = 0; di < 4; ++di) {
                double vmax = 1e-9;
                auto value_of = [&](const TrajectoryPoint& p) {
                    const ScaledMeans& m = di == 0   ? p.forget_raw
                                           : di == 1 ? p.retain_raw
                                           : di == 2 ? p.real_authors_raw
                                                     : p.world_facts_raw;
                    return mi == 0 ? m.probability : mi == 1 ? m.rouge : m.truth_ratio;
                };
                for (const auto& p : t.points) vmax = std::max(vmax, value_of(p));
                const double ox = di * panel_w, oy = mi * panel_h;
                c.svg << "<rect x=\"" << ox + 34 << "\" y=\"" << oy + 22 << "\" width=\""
                      << panel_w - 44 << "\" height=\"" << panel_h - 40
                      << "\" fill=\"none\" stroke=\"#888\"/>\n";
                c.text(ox + 36, oy + 16,
                       std::string(dataset_names[di]) + " " + metric_names[mi], "#333");
                std::vector<std::pair<double, double>> pts;
                const int last_epoch = t.points.back().epoch;
                for (const auto& p : t.points) {
                    const double vx = ox + 34 + (panel_w - 44) * (last_epoch ? static_cast<double>(p.epoch) / last_epoch : 0.0);
                    const double vy = oy + panel_h - 18 - (panel_h - 40) * (value_of(p) / vmax);
                    pts.emplace_back(vx, vy);
                    side << dataset_names[di] << " " << metric_names[mi] << " " << p.epoch << " "
                         << num(value_of(p)) << "\n";
                }
                c.svg << "<polyline fill=\"none\" stroke=\"" << method_color(t.method)
                      << "\" stroke-width=\"1.5\" points=\"";
                for (const auto& [x, y] : pts) c.svg << x << "," << y << " ";
                c.svg << "\"/>\n";
                for (const auto& [x, y] : pts)
                    c.svg << "<circle cx=\"" << x << "\" cy=\"" << y
                          << "\" r=\"2.5\" fill=\"" << method_color(t.method) << "\"/>\n";
            }
        }
        c.finish((out / ("curves_" + method_name(t.method) + "_" + frac_str(t.fraction) + ".svg"))
                     .string());
    }
}

}  // namespace ulbench
