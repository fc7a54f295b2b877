#pragma once

#include <string>
#include <vector>

namespace kdpose {

void write_text_file(const std::string& path, const std::string& content);

/// Self-contained SVG bar chart; values are percentages in [0, 100].
std::string svg_bar_chart(const std::string& title, const std::vector<std::string>& labels,
                          const std::vector<double>& values);

} // namespace kdpose
