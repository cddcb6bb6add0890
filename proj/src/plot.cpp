#include "diffplan/plot.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>
#include <vector>

#include "diffplan/envs.hpp"
#include "diffplan/errors.hpp"

namespace diffplan {

namespace {

std::string fmt(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.4f", v);
    return buf;
}

struct Csv {
    std::vector<std::string> header;
    std::vector<std::vector<double>> rows;
};

Csv read_csv(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw IoError("cannot open '" + path + "'");
    Csv csv;
    std::string line;
    if (!std::getline(is, line) || line.empty())
        throw IoError("'" + path + "': empty input file");
    std::istringstream hs(line);
    std::string cell;
    while (std::getline(hs, cell, ',')) csv.header.push_back(cell);
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        std::istringstream ls(line);
        std::vector<double> row;
        while (std::getline(ls, cell, ',')) row.push_back(std::strtod(cell.c_str(), nullptr));
        if (row.size() != csv.header.size())
            throw IoError("'" + path + "': ragged row");
        csv.rows.push_back(std::move(row));
    }
    if (csv.rows.empty()) throw IoError("'" + path + "': no data rows");
    return csv;
}

struct SvgBuilder {
    std::ostringstream os;

    SvgBuilder(double w, double h) {
        os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << fmt(w) << "\" height=\""
           << fmt(h) << "\" viewBox=\"0 0 " << fmt(w) << " " << fmt(h) << "\">\n";
        os << "<rect width=\"" << fmt(w) << "\" height=\"" << fmt(h) << "\" fill=\"white\"/>\n";
    }

    void rect(double x, double y, double w, double h, const std::string& fill) {
        os << "<rect x=\"" << fmt(x) << "\" y=\"" << fmt(y) << "\" width=\"" << fmt(w)
           << "\" height=\"" << fmt(h) << "\" fill=\"" << fill << "\"/>\n";
    }

    void circle(double x, double y, double r, const std::string& fill) {
        os << "<circle cx=\"" << fmt(x) << "\" cy=\"" << fmt(y) << "\" r=\"" << fmt(r)
           << "\" fill=\"" << fill << "\"/>\n";
    }

    void polyline(const std::vector<std::pair<double, double>>& pts, const std::string& stroke,
                  double width) {
        os << "<polyline fill=\"none\" stroke=\"" << stroke << "\" stroke-width=\""
           << fmt(width) << "\" points=\"";
        for (size_t i = 0; i < pts.size(); ++i) {
            if (i) os << ' ';
            os << fmt(pts[i].first) << ',' << fmt(pts[i].second);
        }
        os << "\"/>\n";
    }

    void line(double x1, double y1, double x2, double y2, const std::string& stroke) {
        os << "<line x1=\"" << fmt(x1) << "\" y1=\"" << fmt(y1) << "\" x2=\"" << fmt(x2)
           << "\" y2=\"" << fmt(y2) << "\" stroke=\"" << stroke << "\"/>\n";
    }

    void text(double x, double y, const std::string& s, int size = 12) {
        os << "<text x=\"" << fmt(x) << "\" y=\"" << fmt(y) << "\" font-size=\"" << size
           << "\" font-family=\"sans-serif\">" << s << "</text>\n";
    }

    std::string finish() {
        os << "</svg>\n";
        return os.str();
    }
};

// Maps positions into a panel with y flipped (SVG y grows downward).
struct PanelMap {
    double x0, y0, side;
    double lo_x, hi_x, lo_y, hi_y;

    std::pair<double, double> operator()(double x, double y) const {
        const double u = (x - lo_x) / (hi_x - lo_x);
        const double v = (y - lo_y) / (hi_y - lo_y);
        return {x0 + u * side, y0 + (1.0 - v) * side};
    }
};

void draw_maze_panel(SvgBuilder& svg, const PanelMap& map, const Environment& env) {
    svg.rect(map.x0, map.y0, map.side, map.side, "#f2f2f2");
    for (const WallBox& w : env.walls()) {
        const auto [ax, ay] = map(w.xlo, w.yhi);
        const auto [bx, by] = map(w.xhi, w.ylo);
        svg.rect(ax, ay, bx - ax, by - ay, "#707070");
    }
}

}  // namespace

std::string render_denoising_svg(const std::string& snapshots_csv,
                                 const std::string& env_name) {
    const Csv csv = read_csv(snapshots_csv);
    if (csv.header.size() < 3 || csv.header[0] != "i" || csv.header[1] != "t")
        throw IoError("snapshots csv: expected header i,t,<dims...>");
    auto env = make_env(env_name);
    const int pd = env->position_dim();

    // Group rows by diffusion step, preserving file order of first appearance.
    std::vector<int> order;
    std::map<int, std::vector<const std::vector<double>*>> blocks;
    for (const auto& row : csv.rows) {
        const int i = static_cast<int>(row[0]);
        if (!blocks.count(i)) order.push_back(i);
        blocks[i].push_back(&row);
    }

    const double side = 160.0, pad = 24.0;
    const int n = static_cast<int>(order.size());
    SvgBuilder svg(pad + (side + pad) * n, side + 2 * pad + 16);

    const auto [lo, hi] = env->position_bounds();
    for (int p = 0; p < n; ++p) {
        const int i = order[p];
        PanelMap map{pad + (side + pad) * p, pad, side, 0, 1, 0, 1};
        std::vector<std::pair<double, double>> pts;
        if (pd >= 2) {
            map.lo_x = lo[0];
            map.hi_x = hi[0];
            map.lo_y = lo[1];
            map.hi_y = hi[1];
            draw_maze_panel(svg, map, *env);
            for (const auto* row : blocks[i]) pts.push_back(map((*row)[2], (*row)[3]));
        } else {
            // 1-D task: plot position against the planning step.
            map.lo_x = 0;
            map.hi_x = static_cast<double>(blocks[i].size());
            map.lo_y = lo[0];
            map.hi_y = hi[0];
            svg.rect(map.x0, map.y0, map.side, map.side, "#f2f2f2");
            for (const auto* row : blocks[i]) pts.push_back(map((*row)[1], (*row)[2]));
        }
        svg.polyline(pts, "#1f77b4", 1.5);
        svg.text(map.x0, pad + side + 16, "i=" + std::to_string(i));
    }
    return svg.finish();
}

std::string render_maze_svg(const std::string& plan_csv, const std::string& env_name) {
    const Csv csv = read_csv(plan_csv);
    if (csv.header.size() < 2 || csv.header[0] != "t")
        throw IoError("plan csv: expected header t,<dims...>");
    auto env = make_env(env_name);
    if (env->position_dim() < 2)
        throw IoError("maze plot requires an environment with 2-D positions");

    const double side = 320.0, pad = 24.0;
    SvgBuilder svg(side + 2 * pad, side + 2 * pad);
    const auto [lo, hi] = env->position_bounds();
    PanelMap map{pad, pad, side, lo[0], hi[0], lo[1], hi[1]};
    draw_maze_panel(svg, map, *env);

    std::vector<std::pair<double, double>> pts;
    for (const auto& row : csv.rows) pts.push_back(map(row[1], row[2]));
    svg.polyline(pts, "#1f77b4", 2.0);
    if (!pts.empty()) {
        svg.circle(pts.front().first, pts.front().second, 5.0, "#2ca02c");
        svg.circle(pts.back().first, pts.back().second, 5.0, "#d62728");
    }
    if (auto goal = env->goal()) {
        const auto [gx, gy] = map((*goal)[0], (*goal)[1]);
        svg.circle(gx, gy, 7.0, "none");
        svg.os << "<circle cx=\"" << fmt(gx) << "\" cy=\"" << fmt(gy)
               << "\" r=\"7.0\" fill=\"none\" stroke=\"#d62728\" stroke-width=\"2\"/>\n";
    }
    return svg.finish();
}

std::string render_sweep_svg(const std::string& sweep_csv) {
    const Csv csv = read_csv(sweep_csv);
    if (csv.header.size() < 5 || csv.header[0] != "k")
        throw IoError("sweep csv: expected header k,episodes,mean_return,stderr,success_rate");

    std::vector<std::pair<double, double>> data;  // (k, success_rate)
    for (const auto& row : csv.rows) data.emplace_back(row[0], row[4]);
    std::sort(data.begin(), data.end());

    const double w = 420.0, h = 300.0, ml = 56.0, mb = 44.0, mt = 20.0, mr = 20.0;
    SvgBuilder svg(w, h);
    const double kmax = std::max(1.0, data.back().first);

    auto map = [&](double k, double s) {
        const double x = ml + (k / kmax) * (w - ml - mr);
        const double y = mt + (1.0 - s) * (h - mt - mb);
        return std::make_pair(x, y);
    };

    svg.line(ml, h - mb, w - mr, h - mb, "#000000");
    svg.line(ml, mt, ml, h - mb, "#000000");
    for (int tick = 0; tick <= 4; ++tick) {
        const double s = tick / 4.0;
        const auto [tx, ty] = map(0, s);
        svg.line(ml - 4, ty, ml, ty, "#000000");
        svg.text(8, ty + 4, fmt(s).substr(0, 4));
    }
    std::vector<std::pair<double, double>> pts;
    for (const auto& [k, s] : data) {
        pts.push_back(map(k, s));
        svg.circle(pts.back().first, pts.back().second, 3.5, "#1f77b4");
        svg.text(pts.back().first - 6, h - mb + 16, "k=" + std::to_string(static_cast<int>(k)));
    }
    svg.polyline(pts, "#1f77b4", 1.5);
    svg.text(ml, h - 8, "denoising budget k");
    svg.text(8, 14, "success rate");
    return svg.finish();
}

void write_text_file(const std::string& path, const std::string& content) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw IoError("cannot open '" + path + "' for writing");
    os << content;
    if (!os) throw IoError("write failed for '" + path + "'");
}

}  // namespace diffplan
