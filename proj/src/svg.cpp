#include "epls/svg.hpp"

#include <algorithm>
#include <cstdio>

namespace epls {

namespace {

constexpr float kScale = 40.0f; // SVG units per world unit

std::string num(float v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.3f", static_cast<double>(v));
    return buf;
}

struct Mapper {
    float min_x, max_y;
    float sx(float x) const { return (x - min_x) * kScale; }
    float sy(float y) const { return (max_y - y) * kScale; } // world y up, SVG y down
};

std::string path_d(const std::vector<WorldPoint>& pts, const Mapper& m) {
    std::string d;
    for (std::size_t i = 0; i < pts.size(); ++i) {
        d += i == 0 ? "M" : " L";
        d += num(m.sx(pts[i].first));
        d += ",";
        d += num(m.sy(pts[i].second));
    }
    return d;
}

} // namespace

std::string trajectory_svg(const TrackSpec& track, const std::vector<WorldPoint>& executed,
                           const std::vector<std::vector<WorldPoint>>& plans) {
    float min_x = track.xs[0], max_x = track.xs[0];
    float min_y = track.ys[0], max_y = track.ys[0];
    for (std::size_t i = 0; i < track.xs.size(); ++i) {
        min_x = std::min(min_x, track.xs[i]);
        max_x = std::max(max_x, track.xs[i]);
        min_y = std::min(min_y, track.ys[i]);
        max_y = std::max(max_y, track.ys[i]);
    }
    const float margin = track.half_width + 0.5f;
    min_x -= margin;
    max_x += margin;
    min_y -= margin;
    max_y += margin;
    const Mapper m{min_x, max_y};
    const float w = (max_x - min_x) * kScale;
    const float h = (max_y - min_y) * kScale;

    std::vector<WorldPoint> center(track.xs.size());
    for (std::size_t i = 0; i < center.size(); ++i) center[i] = {track.xs[i], track.ys[i]};

    std::string svg;
    svg += "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
    svg += "<svg xmlns=\"http://www.w3.org/2000/svg\" version=\"1.1\" width=\"" + num(w) + "\" height=\"" +
           num(h) + "\" viewBox=\"0 0 " + num(w) + " " + num(h) + "\">\n";
    svg += "<rect width=\"100%\" height=\"100%\" fill=\"#fbfbf8\"/>\n";

    svg += "<g id=\"track\">\n<path d=\"" + path_d(center, m) + "\" fill=\"none\" stroke=\"#c8c8c8\"" +
           " stroke-width=\"" + num(2.0f * track.half_width * kScale) +
           "\" stroke-linecap=\"round\" stroke-linejoin=\"round\"/>\n</g>\n";

    if (!plans.empty()) {
        svg += "<g id=\"plans\">\n";
        for (const auto& p : plans)
            if (p.size() >= 2)
                svg += "<path d=\"" + path_d(p, m) +
                       "\" fill=\"none\" stroke=\"#4a90d9\" stroke-width=\"1.2\" stroke-opacity=\"0.35\"/>\n";
        svg += "</g>\n";
    }

    svg += "<g id=\"executed\">\n<path d=\"" + path_d(executed, m) +
           "\" fill=\"none\" stroke=\"#d0342c\" stroke-width=\"2\"/>\n</g>\n";
    svg += "</svg>\n";
    return svg;
}

} // namespace epls
