#include "kdpose/report.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

#include "kdpose/error.hpp"

namespace kdpose {

void write_text_file(const std::string& path, const std::string& content) {
    std::ofstream out(path);
    if (!out) raise(ErrorCode::io, "cannot open " + path + " for writing");
    out << content;
    if (!out) raise(ErrorCode::io, "short write to " + path);
}

std::string svg_bar_chart(const std::string& title, const std::vector<std::string>& labels,
                          const std::vector<double>& values) {
    require(labels.size() == values.size(), ErrorCode::invalid_argument,
            "svg_bar_chart: labels and values differ in length");
    const int width = 640, height = 400;
    const int left = 60, right = 20, top = 50, bottom = 60;
    const int plot_w = width - left - right;
    const int plot_h = height - top - bottom;
    const std::size_t n = values.size();

    std::ostringstream svg;
    svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\""
        << height << "\" viewBox=\"0 0 " << width << " " << height << "\">\n";
    svg << "<rect width=\"" << width << "\" height=\"" << height << "\" fill=\"white\"/>\n";
    svg << "<text x=\"" << width / 2 << "\" y=\"28\" font-family=\"sans-serif\" font-size=\"16\""
        << " text-anchor=\"middle\">" << title << "</text>\n";

    for (int tick = 0; tick <= 100; tick += 25) {
        const double y = top + plot_h * (1.0 - tick / 100.0);
        svg << "<line x1=\"" << left << "\" y1=\"" << y << "\" x2=\"" << left + plot_w
            << "\" y2=\"" << y << "\" stroke=\"#dddddd\"/>\n";
        svg << "<text x=\"" << left - 8 << "\" y=\"" << y + 4
            << "\" font-family=\"sans-serif\" font-size=\"11\" text-anchor=\"end\">" << tick
            << "</text>\n";
    }

    const double slot = n > 0 ? static_cast<double>(plot_w) / n : plot_w;
    for (std::size_t i = 0; i < n; ++i) {
        const double v = std::min(100.0, std::max(0.0, values[i]));
        const double bar_w = slot * 0.6;
        const double x = left + slot * i + slot * 0.2;
        const double bar_h = plot_h * v / 100.0;
        const double y = top + plot_h - bar_h;
        char val[32];
        std::snprintf(val, sizeof(val), "%.2f", values[i]);
        svg << "<rect x=\"" << x << "\" y=\"" << y << "\" width=\"" << bar_w << "\" height=\""
            << bar_h << "\" fill=\"#4878a8\"/>\n";
        svg << "<text x=\"" << x + bar_w / 2 << "\" y=\"" << y - 5
            << "\" font-family=\"sans-serif\" font-size=\"11\" text-anchor=\"middle\">" << val
            << "</text>\n";
        svg << "<text x=\"" << x + bar_w / 2 << "\" y=\"" << top + plot_h + 16
            << "\" font-family=\"sans-serif\" font-size=\"11\" text-anchor=\"middle\">"
            << labels[i] << "</text>\n";
    }
    svg << "<line x1=\"" << left << "\" y1=\"" << top << "\" x2=\"" << left << "\" y2=\""
        << top + plot_h << "\" stroke=\"black\"/>\n";
    svg << "<line x1=\"" << left << "\" y1=\"" << top + plot_h << "\" x2=\"" << left + plot_w
        << "\" y2=\"" << top + plot_h << "\" stroke=\"black\"/>\n";
    svg << "</svg>\n";
    return svg.str();
}

} // namespace kdpose
