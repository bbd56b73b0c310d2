#include "gfm_cli/svg.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <limits>
#include <stdexcept>

namespace gfm::cli {

namespace {

constexpr int kPowerIterations = 500;
constexpr std::size_t kColorChunks = 12;

double dot(const std::vector<double>& a, const std::vector<double>& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

void normalize_sign(std::vector<double>& v) {
    std::size_t arg = 0;
    for (std::size_t i = 1; i < v.size(); ++i) {
        if (std::abs(v[i]) > std::abs(v[arg])) arg = i;
    }
    if (v[arg] < 0.0) {
        for (double& x : v) x = -x;
    }
}

std::vector<double> leading_axis(const std::vector<double>& cov, std::size_t d,
                                 const std::vector<double>* orthogonal_to) {
    std::vector<double> v(d);
    for (std::size_t i = 0; i < d; ++i) v[i] = 1.0 + 0.1 * static_cast<double>(i);
    std::vector<double> next(d);
    for (int it = 0; it < kPowerIterations; ++it) {
        if (orthogonal_to != nullptr) {
            const double p = dot(v, *orthogonal_to);
            for (std::size_t i = 0; i < d; ++i) v[i] -= p * (*orthogonal_to)[i];
        }
        for (std::size_t r = 0; r < d; ++r) {
            double s = 0.0;
            for (std::size_t c = 0; c < d; ++c) s += cov[r * d + c] * v[c];
            next[r] = s;
        }
        const double norm = std::sqrt(dot(next, next));
        if (!(norm > 1e-300)) return {};
        for (std::size_t i = 0; i < d; ++i) v[i] = next[i] / norm;
    }
    normalize_sign(v);
    return v;
}

std::vector<double> unit(std::size_t d, std::size_t k) {
    std::vector<double> e(d, 0.0);
    e[k] = 1.0;
    return e;
}

// viridis-like ramp through five anchors
std::string time_color(double u) {
    static constexpr std::array<std::array<double, 3>, 5> anchors{{
        {68, 1, 84}, {59, 82, 139}, {33, 145, 140}, {94, 201, 98}, {253, 231, 37}}};
    u = std::clamp(u, 0.0, 1.0) * 4.0;
    const auto k = std::min<std::size_t>(3, static_cast<std::size_t>(u));
    const double f = u - static_cast<double>(k);
    char buf[8];
    std::snprintf(buf, sizeof buf, "#%02x%02x%02x",
                  static_cast<int>(std::lround(anchors[k][0] + f * (anchors[k + 1][0] - anchors[k][0]))),
                  static_cast<int>(std::lround(anchors[k][1] + f * (anchors[k + 1][1] - anchors[k][1]))),
                  static_cast<int>(std::lround(anchors[k][2] + f * (anchors[k + 1][2] - anchors[k][2]))));
    return buf;
}

std::string fmt(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.2f", v);
    return buf;
}

std::string tick(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.3g", v);
    return buf;
}

std::string escape(const std::string& s) {
    std::string out;
    for (char c : s) {
        switch (c) {
            case '&': out += "&amp;"; break;
            case '<': out += "&lt;"; break;
            case '>': out += "&gt;"; break;
            case '"': out += "&quot;"; break;
            default: out += c;
        }
    }
    return out;
}

}  // namespace

Projection principal_axes(const traj::TrajectoryDataset& ds) {
    const std::size_t d = ds.dim();
    Projection p{std::vector<double>(d, 0.0), {}, {}};
    const std::size_t rows = ds.count() * ds.length();
    for (std::size_t r = 0; r < rows; ++r) {
        for (std::size_t c = 0; c < d; ++c) p.mean[c] += ds.data()[r * d + c];
    }
    for (double& m : p.mean) m /= static_cast<double>(rows);
    std::vector<double> cov(d * d, 0.0);
    for (std::size_t r = 0; r < rows; ++r) {
        for (std::size_t a = 0; a < d; ++a) {
            const double xa = ds.data()[r * d + a] - p.mean[a];
            for (std::size_t b = 0; b < d; ++b) cov[a * d + b] += xa * (ds.data()[r * d + b] - p.mean[b]);
        }
    }
    p.axis1 = leading_axis(cov, d, nullptr);
    if (p.axis1.empty()) p.axis1 = unit(d, 0);
    p.axis2 = leading_axis(cov, d, &p.axis1);
    if (p.axis2.empty()) p.axis2 = unit(d, p.axis1[0] == 1.0 ? 1 : 0);
    return p;
}

std::string trajectory_svg(const traj::TrajectoryDataset& ds,
                           const std::map<std::size_t, std::vector<double>>& forecasts,
                           const PlotOptions& options) {
    if (ds.count() == 0 || ds.length() == 0) throw std::invalid_argument("cannot plot an empty dataset");
    if (ds.dim() < 2) throw std::invalid_argument("plot needs at least two weight dimensions");
    const std::size_t d = ds.dim();
    const bool pca = d > 2;
    const Projection proj = pca ? principal_axes(ds) : Projection{};

    auto project = [&](std::span<const double> w) -> std::array<double, 2> {
        if (!pca) return {w[0], w[1]};
        double a = 0.0, b = 0.0;
        for (std::size_t i = 0; i < d; ++i) {
            a += (w[i] - proj.mean[i]) * proj.axis1[i];
            b += (w[i] - proj.mean[i]) * proj.axis2[i];
        }
        return {a, b};
    };

    const std::size_t n = options.max_trajectories > 0 ? std::min(options.max_trajectories, ds.count())
                                                       : ds.count();
    const std::size_t t = ds.length();
    std::vector<std::array<double, 2>> pts(n * t);
    double lo_x = std::numeric_limits<double>::infinity(), hi_x = -lo_x, lo_y = lo_x, hi_y = -lo_x;
    auto extend = [&](const std::array<double, 2>& p) {
        lo_x = std::min(lo_x, p[0]);
        hi_x = std::max(hi_x, p[0]);
        lo_y = std::min(lo_y, p[1]);
        hi_y = std::max(hi_y, p[1]);
    };
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t k = 0; k < t; ++k) {
            pts[i * t + k] = project(ds.row(i, k));
            extend(pts[i * t + k]);
        }
    }
    std::vector<std::pair<std::size_t, std::array<double, 2>>> marks;
    for (const auto& [idx, w] : forecasts) {
        if (idx >= n) continue;
        if (w.size() != d) throw std::invalid_argument("forecast dimension does not match the dataset");
        marks.emplace_back(idx, project(w));
        extend(marks.back().second);
    }
    if (!(hi_x > lo_x)) { lo_x -= 1.0; hi_x += 1.0; }
    if (!(hi_y > lo_y)) { lo_y -= 1.0; hi_y += 1.0; }
    const double pad_x = 0.05 * (hi_x - lo_x), pad_y = 0.05 * (hi_y - lo_y);
    lo_x -= pad_x; hi_x += pad_x; lo_y -= pad_y; hi_y += pad_y;

    const double left = 70, right = 20, top = 40, bottom = 55;
    const double pw = options.width - left - right, ph = options.height - top - bottom;
    auto sx = [&](double x) { return left + (x - lo_x) / (hi_x - lo_x) * pw; };
    auto sy = [&](double y) { return top + (hi_y - y) / (hi_y - lo_y) * ph; };

    const std::string x_label = pca ? "principal coordinate 1" : "slope (w[0])";
    const std::string y_label = pca ? "principal coordinate 2" : "intercept (w[1])";
    std::string title = options.title;
    if (title.empty()) title = std::to_string(ds.count()) + " trajectories, D = " + std::to_string(d);
    if (pca) title += " (first two principal coordinates)";

    std::string s;
    s += "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
    s += "<svg xmlns=\"http://www.w3.org/2000/svg\" version=\"1.1\" width=\"" + std::to_string(options.width) +
         "\" height=\"" + std::to_string(options.height) + "\">\n";
    s += "<title>" + escape(title) + "</title>\n";
    s += "<rect x=\"0\" y=\"0\" width=\"" + std::to_string(options.width) + "\" height=\"" +
         std::to_string(options.height) + "\" fill=\"white\"/>\n";
    s += "<text x=\"" + fmt(options.width / 2.0) + "\" y=\"22\" text-anchor=\"middle\" font-family=\"sans-serif\" "
         "font-size=\"14\">" + escape(title) + "</text>\n";
    s += "<rect x=\"" + fmt(left) + "\" y=\"" + fmt(top) + "\" width=\"" + fmt(pw) + "\" height=\"" + fmt(ph) +
         "\" fill=\"none\" stroke=\"#444\"/>\n";
    for (int k = 0; k <= 4; ++k) {
        const double fx = lo_x + (hi_x - lo_x) * k / 4.0;
        const double fy = lo_y + (hi_y - lo_y) * k / 4.0;
        s += "<text x=\"" + fmt(sx(fx)) + "\" y=\"" + fmt(top + ph + 16) +
             "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"10\">" + tick(fx) + "</text>\n";
        s += "<text x=\"" + fmt(left - 6) + "\" y=\"" + fmt(sy(fy) + 3) +
             "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"10\">" + tick(fy) + "</text>\n";
    }
    s += "<text x=\"" + fmt(left + pw / 2) + "\" y=\"" + fmt(options.height - 12.0) +
         "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"12\">" + x_label + "</text>\n";
    s += "<text x=\"16\" y=\"" + fmt(top + ph / 2) + "\" text-anchor=\"middle\" font-family=\"sans-serif\" "
         "font-size=\"12\" transform=\"rotate(-90 16 " + fmt(top + ph / 2) + ")\">" + y_label + "</text>\n";

    const std::size_t chunks = std::min<std::size_t>(kColorChunks, t > 1 ? t - 1 : 1);
    for (std::size_t i = 0; i < n; ++i) {
        s += "<g id=\"traj" + std::to_string(i) + "\" fill=\"none\" stroke-width=\"1\">\n";
        for (std::size_t c = 0; c < chunks && t > 1; ++c) {
            const std::size_t a = c * (t - 1) / chunks;
            const std::size_t b = (c + 1) * (t - 1) / chunks;
            s += "<polyline stroke=\"" + time_color((a + b) / 2.0 / static_cast<double>(t - 1)) + "\" points=\"";
            for (std::size_t k = a; k <= b; ++k) {
                if (k > a) s += ' ';
                s += fmt(sx(pts[i * t + k][0])) + "," + fmt(sy(pts[i * t + k][1]));
            }
            s += "\"/>\n";
        }
        const auto& last = pts[i * t + t - 1];
        s += "<circle cx=\"" + fmt(sx(last[0])) + "\" cy=\"" + fmt(sy(last[1])) + "\" r=\"2.5\" fill=\"#111\"/>\n";
        s += "</g>\n";
    }
    for (const auto& [idx, p] : marks) {
        const double cx = sx(p[0]), cy = sy(p[1]);
        s += "<path id=\"forecast" + std::to_string(idx) + "\" d=\"M" + fmt(cx - 4) + " " + fmt(cy - 4) + " L" +
             fmt(cx + 4) + " " + fmt(cy + 4) + " M" + fmt(cx - 4) + " " + fmt(cy + 4) + " L" + fmt(cx + 4) + " " +
             fmt(cy - 4) + "\" stroke=\"#d62728\" stroke-width=\"1.5\"/>\n";
    }
    const double lx = left + pw - 150, ly = top + 10;
    for (int k = 0; k < 10; ++k) {
        s += "<rect x=\"" + fmt(lx + 10.0 * k) + "\" y=\"" + fmt(ly) + "\" width=\"10\" height=\"8\" fill=\"" +
             time_color(k / 9.0) + "\"/>\n";
    }
    s += "<text x=\"" + fmt(lx) + "\" y=\"" + fmt(ly + 20) + "\" font-family=\"sans-serif\" font-size=\"10\">step 0</text>\n";
    s += "<text x=\"" + fmt(lx + 100) + "\" y=\"" + fmt(ly + 20) +
         "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"10\">step " + std::to_string(t - 1) + "</text>\n";
    if (!marks.empty()) {
        s += "<text x=\"" + fmt(lx + 110) + "\" y=\"" + fmt(ly + 8) +
             "\" font-family=\"sans-serif\" font-size=\"10\" fill=\"#d62728\">x forecast</text>\n";
    }
    s += "</svg>\n";
    return s;
}

}  // namespace gfm::cli
