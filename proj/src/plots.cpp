#include "labelbudget/plots.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <set>

#include <fmt/format.h>

#include "labelbudget/error.hpp"

namespace labelbudget {

namespace {

constexpr double kCanvasWidth = 820.0;
constexpr double kCanvasHeight = 500.0;

std::string num(double v) { return fmt::format("{:.3f}", v); }

struct Rgb {
    double r, g, b;
};

// Three-stop viridis approximation.
std::string ramp_color(double t) {
    static constexpr std::array<Rgb, 3> stops{{{68, 1, 84}, {33, 145, 140}, {253, 231, 37}}};
    t = std::clamp(t, 0.0, 1.0);
    const double s = t * 2.0;
    const auto i = static_cast<std::size_t>(std::min(s, 1.0 + 1e-12 > s ? s : 1.0));
    const std::size_t lo = std::min<std::size_t>(i, 1);
    const double f = s - static_cast<double>(lo);
    const auto& a = stops[lo];
    const auto& b = stops[lo + 1];
    return fmt::format("#{:02x}{:02x}{:02x}", static_cast<int>(std::lround(a.r + f * (b.r - a.r))),
                       static_cast<int>(std::lround(a.g + f * (b.g - a.g))),
                       static_cast<int>(std::lround(a.b + f * (b.b - a.b))));
}

constexpr std::array<const char*, 8> kPalette{"#1f77b4", "#ff7f0e", "#2ca02c", "#d62728",
                                              "#9467bd", "#8c564b", "#e377c2", "#7f7f7f"};

std::string marker(int shape, double x, double y, const std::string& fill, const char* cls) {
    constexpr double r = 5.0;
    switch (shape % 5) {
        case 0:
            return fmt::format("<circle class=\"{}\" cx=\"{}\" cy=\"{}\" r=\"{}\" fill=\"{}\"/>", cls, num(x), num(y),
                               num(r), fill);
        case 1:
            return fmt::format("<rect class=\"{}\" x=\"{}\" y=\"{}\" width=\"{}\" height=\"{}\" fill=\"{}\"/>", cls,
                               num(x - r), num(y - r), num(2 * r), num(2 * r), fill);
        case 2:
            return fmt::format("<polygon class=\"{}\" points=\"{},{} {},{} {},{}\" fill=\"{}\"/>", cls, num(x),
                               num(y - r), num(x + r), num(y + r), num(x - r), num(y + r), fill);
        case 3:
            return fmt::format("<polygon class=\"{}\" points=\"{},{} {},{} {},{} {},{}\" fill=\"{}\"/>", cls, num(x),
                               num(y - r), num(x + r), num(y), num(x), num(y + r), num(x - r), num(y), fill);
        default:
            return fmt::format("<polygon class=\"{}\" points=\"{},{} {},{} {},{}\" fill=\"{}\"/>", cls, num(x),
                               num(y + r), num(x + r), num(y - r), num(x - r), num(y - r), fill);
    }
}

double nice_upper(double v) { return std::ceil(v * 10.0 - 1e-9) / 10.0; }
double nice_lower(double v) { return std::floor(v * 10.0 + 1e-9) / 10.0; }

std::string open_svg(const std::string& title) {
    return fmt::format(
        "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
        "<svg xmlns=\"http://www.w3.org/2000/svg\" version=\"1.1\" width=\"{0}\" height=\"{1}\" "
        "viewBox=\"0 0 {0} {1}\">\n"
        "<rect x=\"0\" y=\"0\" width=\"{0}\" height=\"{1}\" fill=\"#ffffff\"/>\n"
        "<text x=\"{2}\" y=\"22\" font-family=\"sans-serif\" font-size=\"15\" text-anchor=\"middle\">{3}</text>\n",
        kCanvasWidth, kCanvasHeight, kCanvasWidth / 2, title);
}

// Frame rectangle, ticks, labels; opens the plot-area group.
std::string axes(const PlotFrame& f, const std::string& x_label, const std::string& y_label) {
    std::string s = fmt::format(
        "<rect class=\"frame\" x=\"{}\" y=\"{}\" width=\"{}\" height=\"{}\" fill=\"none\" stroke=\"#333333\"/>\n",
        num(f.left), num(f.top), num(f.width), num(f.height));
    s += "<g class=\"ticks\" font-family=\"sans-serif\" font-size=\"11\" fill=\"#333333\">\n";
    for (int i = 0; i <= 5; ++i) {
        const double xv = f.x_min + (f.x_max - f.x_min) * i / 5.0;
        const double yv = f.y_min + (f.y_max - f.y_min) * i / 5.0;
        s += fmt::format("<line x1=\"{0}\" y1=\"{1}\" x2=\"{0}\" y2=\"{2}\" stroke=\"#333333\"/>"
                         "<text x=\"{0}\" y=\"{3}\" text-anchor=\"middle\">{4:.2f}</text>\n",
                         num(f.px(xv)), num(f.top + f.height), num(f.top + f.height + 5), num(f.top + f.height + 18),
                         xv);
        s += fmt::format("<line x1=\"{0}\" y1=\"{1}\" x2=\"{2}\" y2=\"{1}\" stroke=\"#333333\"/>"
                         "<text x=\"{3}\" y=\"{4}\" text-anchor=\"end\">{5:.2f}</text>\n",
                         num(f.left - 5), num(f.py(yv)), num(f.left), num(f.left - 8), num(f.py(yv) + 4), yv);
    }
    s += "</g>\n";
    s += fmt::format("<text x=\"{}\" y=\"{}\" font-family=\"sans-serif\" font-size=\"13\" "
                     "text-anchor=\"middle\">{}</text>\n",
                     num(f.left + f.width / 2), num(f.top + f.height + 38), x_label);
    s += fmt::format("<text x=\"18\" y=\"{0}\" font-family=\"sans-serif\" font-size=\"13\" text-anchor=\"middle\" "
                     "transform=\"rotate(-90 18 {0})\">{1}</text>\n",
                     num(f.top + f.height / 2), y_label);
    s += fmt::format("<g class=\"plot-area\" data-x-min=\"{}\" data-x-max=\"{}\" data-y-min=\"{}\" data-y-max=\"{}\" "
                     "data-left=\"{}\" data-top=\"{}\" data-width=\"{}\" data-height=\"{}\">\n",
                     format_number(f.x_min), format_number(f.x_max), format_number(f.y_min), format_number(f.y_max),
                     format_number(f.left), format_number(f.top), format_number(f.width), format_number(f.height));
    return s;
}

std::string polyline(const PlotFrame& f, std::span<const std::pair<double, double>> pts, const char* cls,
                     const std::string& stroke, double stroke_width) {
    std::string p;
    for (const auto& [x, y] : pts) {
        if (!p.empty()) p += ' ';
        p += num(f.px(x)) + "," + num(f.py(y));
    }
    return fmt::format("<polyline class=\"{}\" points=\"{}\" fill=\"none\" stroke=\"{}\" stroke-width=\"{}\"/>\n", cls, p,
                       stroke, stroke_width);
}

std::string label_value(double v) { return format_number(std::round(v * 1000.0) / 1000.0); }

}  // namespace

std::string render_trajectory_svg(std::span<const ExperimentPoint> points, EffortAxis axis,
                                  const Trajectory& trajectory) {
    const auto pts = perf_points(points, axis);
    if (pts.empty()) throw DomainError("render_trajectory_svg: no valid result points");
    const bool qd = axis == EffortAxis::quality_diversity;

    PlotFrame f;
    double x_hi = 1.0;
    double y_hi = 1.1;
    double y_lo = 0.0;
    for (const auto& p : pts) {
        x_hi = std::max(x_hi, p.effort);
        y_hi = std::max(y_hi, p.perf_norm * 1.05);
        y_lo = std::min(y_lo, p.perf_norm);
    }
    f.x_max = nice_upper(x_hi);
    f.y_max = nice_upper(y_hi);
    f.y_min = nice_lower(y_lo);

    // color virtue is continuous, marker virtue is categorical
    std::set<double> marker_values;
    double c_lo = 1e300;
    double c_hi = -1e300;
    for (const auto& p : pts) {
        const auto& v = *p.virtues;
        marker_values.insert(qd ? v.diversity : v.completeness);
        const double c = qd ? v.quality_pct : v.diversity;
        c_lo = std::min(c_lo, c);
        c_hi = std::max(c_hi, c);
    }
    const std::vector<double> marker_list(marker_values.begin(), marker_values.end());
    auto color_of = [&](const VirtueSnapshot& v) {
        const double c = qd ? v.quality_pct : v.diversity;
        return ramp_color(c_hi > c_lo ? (c - c_lo) / (c_hi - c_lo) : 1.0);
    };
    auto shape_of = [&](const VirtueSnapshot& v) {
        const double m = qd ? v.diversity : v.completeness;
        return static_cast<int>(std::lower_bound(marker_list.begin(), marker_list.end(), m) - marker_list.begin());
    };

    std::string s = open_svg(qd ? "Optimal trajectory: quality vs diversity" : "Optimal trajectory: completeness vs diversity");
    s += axes(f, qd ? "effort (diversity x quality)" : "effort (diversity x completeness)", "normalized performance");
    std::vector<std::pair<double, double>> line;
    for (const auto& v : trajectory.vertices) line.emplace_back(v.effort, v.perf_norm);
    s += polyline(f, line, "trajectory", "#d62728", 2.0);
    for (const auto& p : pts)
        s += marker(shape_of(*p.virtues), f.px(p.effort), f.py(p.perf_norm), color_of(*p.virtues), "marker") + "\n";
    s += "</g>\n";

    // legend
    const double lx = f.left + f.width + 20;
    double ly = f.top + 10;
    s += "<g class=\"legend\" font-family=\"sans-serif\" font-size=\"11\">\n";
    s += fmt::format("<text x=\"{}\" y=\"{}\">marker: {}</text>\n", num(lx), num(ly), qd ? "diversity" : "completeness");
    for (std::size_t i = 0; i < marker_list.size(); ++i) {
        ly += 18;
        s += marker(static_cast<int>(i), lx + 6, ly - 4, "#555555", "legend-marker");
        s += fmt::format("<text x=\"{}\" y=\"{}\">{}</text>\n", num(lx + 18), num(ly), label_value(marker_list[i]));
    }
    ly += 28;
    s += fmt::format("<text x=\"{}\" y=\"{}\">color: {}</text>\n", num(lx), num(ly), qd ? "quality %" : "diversity");
    for (int i = 0; i <= 4; ++i) {
        ly += 16;
        const double t = i / 4.0;
        s += fmt::format("<rect class=\"legend-swatch\" x=\"{}\" y=\"{}\" width=\"12\" height=\"12\" fill=\"{}\"/>"
                         "<text x=\"{}\" y=\"{}\">{}</text>\n",
                         num(lx), num(ly - 10), ramp_color(t), num(lx + 18), num(ly),
                         label_value(c_lo + t * (c_hi - c_lo)));
    }
    s += "</g>\n</svg>\n";
    return s;
}

std::string render_importance_svg(std::span<const ImportanceSeries> series, EffortAxis axis) {
    if (series.empty()) throw DomainError("render_importance_svg: no series");
    PlotFrame f;
    double lo = 1e300;
    double hi = -1e300;
    for (const auto& s : series)
        for (const auto& p : s.points) {
            lo = std::min(lo, p.perf_norm);
            hi = std::max(hi, p.perf_norm);
        }
    if (lo > hi) throw DomainError("render_importance_svg: empty series");
    f.x_min = nice_lower(lo - 0.05);
    f.x_max = std::max(nice_upper(hi + 0.05), f.x_min + 0.1);
    f.y_min = 0.0;
    f.y_max = 1.1;

    std::string s = open_svg(axis == EffortAxis::quality_diversity ? "Importance of quality and diversity"
                                                                   : "Importance of completeness and diversity");
    s += axes(f, "normalized performance", "virtue value (fraction)");
    double ly = f.top + 10;
    std::string legend = "<g class=\"legend\" font-family=\"sans-serif\" font-size=\"11\">\n";
    for (const auto& ser : series) {
        // diversity blue, the other virtue orange
        const std::string color = ser.virtue == Virtue::diversity ? "#1f77b4" : "#ff7f0e";
        const double scale = ser.virtue == Virtue::quality ? 0.01 : 1.0;
        std::vector<std::pair<double, double>> line;
        for (const auto& p : ser.points) line.emplace_back(p.perf_norm, p.value * scale);
        s += polyline(f, line, "series", color, 2.0);
        for (const auto& [x, y] : line) s += marker(0, f.px(x), f.py(y), color, "marker") + "\n";
        legend += fmt::format("<line x1=\"{0}\" y1=\"{1}\" x2=\"{2}\" y2=\"{1}\" stroke=\"{3}\" stroke-width=\"2\"/>"
                              "<text x=\"{4}\" y=\"{5}\">{6}</text>\n",
                              num(f.left + f.width + 20), num(ly), num(f.left + f.width + 40), color,
                              num(f.left + f.width + 46), num(ly + 4), to_string(ser.virtue));
        ly += 18;
    }
    s += "</g>\n" + legend + "</g>\n</svg>\n";
    return s;
}

std::string render_saturation_svg(std::span<const SaturationResult> rows) {
    PlotFrame f;
    double hi = 1.1;
    double lo = 0.0;
    for (const auto& r : rows)
        for (const auto& p : r.curve.points) {
            hi = std::max(hi, p.perf_norm * 1.05);
            lo = std::min(lo, p.perf_norm);
        }
    f.y_max = nice_upper(hi);
    f.y_min = nice_lower(lo);
    std::string s = open_svg("Saturation of performance with diversity");
    s += axes(f, "diversity", "normalized performance");
    std::string legend = "<g class=\"legend\" font-family=\"sans-serif\" font-size=\"11\">\n";
    double ly = f.top + 10;
    for (std::size_t i = 0; i < rows.size(); ++i) {
        const auto& r = rows[i];
        const std::string color = kPalette[i % kPalette.size()];
        std::vector<std::pair<double, double>> line;
        for (const auto& p : r.curve.points) line.emplace_back(p.value, p.perf_norm);
        s += polyline(f, line, "curve", color, 1.5);
        for (const auto& [x, y] : line) s += marker(0, f.px(x), f.py(y), color, "marker") + "\n";
        if (r.saturation) {
            const auto it = std::find_if(r.curve.points.begin(), r.curve.points.end(),
                                         [&](const CurvePoint& p) { return p.value == *r.saturation; });
            s += fmt::format("<circle class=\"saturation\" cx=\"{}\" cy=\"{}\" r=\"9\" fill=\"none\" stroke=\"{}\" "
                             "stroke-width=\"2\"/>\n",
                             num(f.px(it->value)), num(f.py(it->perf_norm)), color);
        }
        legend += fmt::format("<line x1=\"{0}\" y1=\"{1}\" x2=\"{2}\" y2=\"{1}\" stroke=\"{3}\" stroke-width=\"2\"/>"
                              "<text x=\"{4}\" y=\"{5}\">c={6} q={7}</text>\n",
                              num(f.left + f.width + 20), num(ly), num(f.left + f.width + 40), color,
                              num(f.left + f.width + 46), num(ly + 4), label_value(r.curve.completeness),
                              label_value(r.curve.quality_level));
        ly += 18;
    }
    s += "</g>\n" + legend + "</g>\n</svg>\n";
    return s;
}

PlotSet render_plots(std::span<const ExperimentPoint> points, EffortAxis axis, double epsilon, int window) {
    if (points.empty()) throw DomainError("render_plots: empty results");
    const auto pts = perf_points(points, axis);
    if (pts.empty()) throw DomainError("render_plots: no valid result points");
    const auto trajectory = optimal_trajectory(pts);
    const auto virtues = compared_virtues(axis);
    const auto series = importance_curves(trajectory, virtues);
    const auto saturation = saturation_table(points, epsilon, window);
    return {render_trajectory_svg(points, axis, trajectory), render_importance_svg(series, axis),
            render_saturation_svg(saturation)};
}

}  // namespace labelbudget
