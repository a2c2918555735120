#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>

#include "concept_monitor/errors.hpp"
#include "concept_monitor/report.hpp"

namespace concept_monitor::report {
namespace {

constexpr double kWidth = 640, kHeight = 480;
constexpr double kLeft = 64, kRight = 24, kTop = 40, kBottom = 56;

const char* const kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e",
                                "#17becf", "#8c564b", "#e377c2", "#bcbd22", "#7f7f7f"};

std::string num(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.3f", v);
    std::string s = buf;
    if (s == "-0.000") s = "0.000";
    return s;
}

std::string escape(const std::string& text) {
    std::string out;
    for (char ch : text) {
        switch (ch) {
            case '&': out += "&amp;"; break;
            case '<': out += "&lt;"; break;
            case '>': out += "&gt;"; break;
            case '"': out += "&quot;"; break;
            default: out += ch;
        }
    }
    return out;
}

struct Range {
    double lo = std::numeric_limits<double>::infinity();
    double hi = -std::numeric_limits<double>::infinity();
    void add(double v) {
        lo = std::min(lo, v);
        hi = std::max(hi, v);
    }
    void finish() {
        if (!(lo <= hi)) lo = 0, hi = 1;
        if (hi - lo < 1e-12) {
            const double pad = std::max(std::abs(lo) * 0.1, 0.5);
            lo -= pad;
            hi += pad;
        } else {
            const double pad = 0.05 * (hi - lo);
            lo -= pad;
            hi += pad;
        }
    }
};

struct Frame {
    Range x, y;
    double px(double v) const { return kLeft + (v - x.lo) / (x.hi - x.lo) * (kWidth - kLeft - kRight); }
    double py(double v) const { return kHeight - kBottom - (v - y.lo) / (y.hi - y.lo) * (kHeight - kTop - kBottom); }
};

std::string header(const std::string& title) {
    std::string s = "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + num(kWidth) + "\" height=\"" + num(kHeight) +
                    "\" viewBox=\"0 0 " + num(kWidth) + " " + num(kHeight) + "\" font-family=\"sans-serif\">\n";
    s += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    s += "<text x=\"" + num(kWidth / 2) + "\" y=\"24.000\" font-size=\"16\" text-anchor=\"middle\">" + escape(title) +
         "</text>\n";
    return s;
}

std::string axes(const Frame& f, const std::string& x_label, const std::string& y_label, bool log_x = false) {
    const double x0 = kLeft, x1 = kWidth - kRight, y0 = kHeight - kBottom, y1 = kTop;
    std::string s = "<g class=\"axes\" stroke=\"black\" stroke-width=\"1\">\n";
    s += "<line x1=\"" + num(x0) + "\" y1=\"" + num(y0) + "\" x2=\"" + num(x1) + "\" y2=\"" + num(y0) + "\"/>\n";
    s += "<line x1=\"" + num(x0) + "\" y1=\"" + num(y0) + "\" x2=\"" + num(x0) + "\" y2=\"" + num(y1) + "\"/>\n";
    s += "</g>\n<g class=\"ticks\" font-size=\"10\">\n";
    for (int i = 0; i <= 4; ++i) {
        const double tx = f.x.lo + (f.x.hi - f.x.lo) * i / 4.0;
        const double ty = f.y.lo + (f.y.hi - f.y.lo) * i / 4.0;
        char lx[32], ly[32];
        std::snprintf(lx, sizeof lx, "%.3g", log_x ? std::pow(10.0, tx) : tx);
        std::snprintf(ly, sizeof ly, "%.3g", ty);
        s += "<text x=\"" + num(f.px(tx)) + "\" y=\"" + num(y0 + 14) + "\" text-anchor=\"middle\">" + lx + "</text>\n";
        s += "<text x=\"" + num(x0 - 4) + "\" y=\"" + num(f.py(ty) + 3) + "\" text-anchor=\"end\">" + ly + "</text>\n";
    }
    s += "</g>\n";
    s += "<text x=\"" + num((x0 + x1) / 2) + "\" y=\"" + num(kHeight - 16) + "\" font-size=\"12\" text-anchor=\"middle\">" +
         escape(x_label) + "</text>\n";
    s += "<text x=\"16.000\" y=\"" + num((y0 + y1) / 2) + "\" font-size=\"12\" text-anchor=\"middle\" transform=\"rotate(-90 16.000 " +
         num((y0 + y1) / 2) + ")\">" + escape(y_label) + "</text>\n";
    return s;
}

std::string star(double cx, double cy, double r, const std::string& word) {
    std::string pts;
    for (int k = 0; k < 10; ++k) {
        const double rad = (k % 2 == 0) ? r : r * 0.45;
        const double ang = -M_PI / 2 + k * M_PI / 5;
        if (k) pts += ' ';
        pts += num(cx + rad * std::cos(ang)) + "," + num(cy + rad * std::sin(ang));
    }
    return "<polygon class=\"anchor\" points=\"" + pts + "\" fill=\"#ffd700\" stroke=\"black\" stroke-width=\"0.8\"><title>" +
           escape(word) + "</title></polygon>\n<text x=\"" + num(cx + r + 2) + "\" y=\"" + num(cy + 4) +
           "\" font-size=\"10\">" + escape(word) + "</text>\n";
}

}  // namespace

std::string embedding_svg(const telemetry::Snapshot& s, std::span<const std::size_t> highlighted) {
    Frame f;
    for (const auto& n : s.neurons) f.x.add(n.coords[0]), f.y.add(n.coords[1]);
    for (const auto& a : s.anchors) f.x.add(a.coords[0]), f.y.add(a.coords[1]);
    f.x.finish();
    f.y.finish();

    std::string out = header(s.layer + " @ epoch " + std::to_string(s.epoch) + " (d_anchor " + num(s.d_anchor) + ")");
    out += axes(f, "component 1", "component 2");
    out += "<g class=\"neurons\">\n";
    for (const auto& n : s.neurons) {
        const auto it = std::find(highlighted.begin(), highlighted.end(), n.index);
        const bool hi = it != highlighted.end();
        const char* fill = hi ? kPalette[static_cast<std::size_t>(it - highlighted.begin()) % std::size(kPalette)] : "#9e9e9e";
        out += "<circle class=\"neuron\" cx=\"" + num(f.px(n.coords[0])) + "\" cy=\"" + num(f.py(n.coords[1])) +
               "\" r=\"" + (hi ? "5" : "3") + "\" fill=\"" + fill + "\"><title>#" + std::to_string(n.index) + " " +
               escape(n.concept_word) + " " + num(n.similarity) + "</title></circle>\n";
    }
    out += "</g>\n<g class=\"anchors\">\n";
    for (const auto& a : s.anchors) out += star(f.px(a.coords[0]), f.py(a.coords[1]), 8, a.word);
    out += "</g>\n</svg>\n";
    return out;
}

std::string category_bars_svg(const telemetry::CategoryStats& stats, const std::string& title) {
    Frame f;
    f.x.lo = 0;
    f.x.hi = static_cast<double>(store::kCategoryCount);
    f.y.lo = 0;
    f.y.hi = 1;
    for (const auto& c : stats.per_category) f.y.hi = std::max(f.y.hi, c.percentage * 1.1);

    std::string out = header(title);
    const double x0 = kLeft, y0 = kHeight - kBottom;
    out += "<line x1=\"" + num(x0) + "\" y1=\"" + num(y0) + "\" x2=\"" + num(kWidth - kRight) + "\" y2=\"" + num(y0) +
           "\" stroke=\"black\"/>\n";
    out += "<text x=\"16.000\" y=\"" + num((y0 + kTop) / 2) + "\" font-size=\"12\" text-anchor=\"middle\" transform=\"rotate(-90 16.000 " +
           num((y0 + kTop) / 2) + ")\">% of neurons in layer</text>\n";
    for (std::size_t i = 0; i < store::kCategoryCount; ++i) {
        const auto& c = stats.per_category[i];
        const double left = f.px(static_cast<double>(i) + 0.15), right = f.px(static_cast<double>(i) + 0.85);
        const double top = f.py(c.percentage);
        const std::string name(store::category_name(c.category));
        out += "<rect class=\"bar\" x=\"" + num(left) + "\" y=\"" + num(top) + "\" width=\"" + num(right - left) +
               "\" height=\"" + num(y0 - top) + "\" fill=\"" + kPalette[i] + "\"><title>" + name + " " +
               std::to_string(c.count) + "</title></rect>\n";
        out += "<text x=\"" + num((left + right) / 2) + "\" y=\"" + num(y0 + 14) + "\" font-size=\"11\" text-anchor=\"middle\">" +
               name + "</text>\n";
        out += "<text x=\"" + num((left + right) / 2) + "\" y=\"" + num(top - 4) + "\" font-size=\"10\" text-anchor=\"middle\">" +
               num(c.percentage) + "</text>\n";
    }
    out += "</svg>\n";
    return out;
}

std::string trajectory_svg(const telemetry::TrackResult& t) {
    Frame f;
    for (const auto& tr : t.trajectories)
        for (const auto& p : tr.points) f.x.add(p.coords[0]), f.y.add(p.coords[1]);
    for (std::size_t a = 0; a < t.anchor_coords.rows(); ++a) f.x.add(t.anchor_coords(a, 0)), f.y.add(t.anchor_coords(a, 1));
    f.x.finish();
    f.y.finish();

    std::string out = header(t.layer + " neuron trajectories");
    out += axes(f, "component 1", "component 2");
    for (std::size_t k = 0; k < t.trajectories.size(); ++k) {
        const auto& tr = t.trajectories[k];
        const char* color = kPalette[k % std::size(kPalette)];
        std::string pts;
        for (const auto& p : tr.points) {
            if (!pts.empty()) pts += ' ';
            pts += num(f.px(p.coords[0])) + "," + num(f.py(p.coords[1]));
        }
        out += "<g class=\"trajectory\">\n<polyline points=\"" + pts + "\" fill=\"none\" stroke=\"" + color +
               "\" stroke-width=\"1.5\"/>\n";
        for (const auto& p : tr.points)
            out += "<circle class=\"neuron\" cx=\"" + num(f.px(p.coords[0])) + "\" cy=\"" + num(f.py(p.coords[1])) +
                   "\" r=\"3\" fill=\"" + color + "\"><title>#" + std::to_string(tr.neuron) + " epoch " +
                   std::to_string(p.epoch) + " " + escape(p.concept_word) + "</title></circle>\n";
        if (!tr.points.empty()) {
            const auto& last = tr.points.back();
            out += "<text x=\"" + num(f.px(last.coords[0]) + 5) + "\" y=\"" + num(f.py(last.coords[1]) - 5) +
                   "\" font-size=\"10\" fill=\"" + color + "\">#" + std::to_string(tr.neuron) + "</text>\n";
        }
        out += "</g>\n";
    }
    out += "<g class=\"anchors\">\n";
    for (std::size_t a = 0; a < t.anchor_coords.rows(); ++a)
        out += star(f.px(t.anchor_coords(a, 0)), f.py(t.anchor_coords(a, 1)), 8, t.anchor_words[a]);
    out += "</g>\n</svg>\n";
    return out;
}

std::string curve_svg(std::span<const Series> series, const CurveOptions& options) {
    auto xv = [&](double x) {
        if (!options.log_x) return x;
        if (!(x > 0)) throw InputError("log-scale axis needs positive x values");
        return std::log10(x);
    };
    Frame f;
    for (const auto& s : series) {
        if (s.x.size() != s.y.size()) throw InputError("series '" + s.name + "' has mismatched x/y lengths");
        for (std::size_t i = 0; i < s.x.size(); ++i) f.x.add(xv(s.x[i])), f.y.add(s.y[i]);
    }
    f.x.finish();
    f.y.finish();

    std::string out = header(options.title);
    out += axes(f, options.x_label, options.y_label, options.log_x);
    for (std::size_t k = 0; k < series.size(); ++k) {
        const auto& s = series[k];
        const char* color = kPalette[k % std::size(kPalette)];
        std::string pts;
        for (std::size_t i = 0; i < s.x.size(); ++i) {
            if (!pts.empty()) pts += ' ';
            pts += num(f.px(xv(s.x[i]))) + "," + num(f.py(s.y[i]));
        }
        out += "<polyline class=\"series\" points=\"" + pts + "\" fill=\"none\" stroke=\"" + color +
               "\" stroke-width=\"1.5\"/>\n";
        out += "<text x=\"" + num(kWidth - kRight - 4) + "\" y=\"" + num(kTop + 14.0 * static_cast<double>(k + 1)) +
               "\" font-size=\"11\" text-anchor=\"end\" fill=\"" + color + "\">" + escape(s.name) + "</text>\n";
    }
    out += "</svg>\n";
    return out;
}

}  // namespace concept_monitor::report
