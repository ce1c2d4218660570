/* Copyright 2026 The ENOS Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/

#ifndef ENOS_SVG_HPP
#define ENOS_SVG_HPP

#include <iomanip>
#include <sstream>
#include <string>
#include <vector>

namespace enos {

struct ScatterPoint {
  double x = 0.0, y = 0.0;
  std::string label;
  bool marked = false;  // drawn as a cross instead of a dot
};

// Dependency-free scatter plot with axes, ticks, and point labels.
inline std::string render_scatter_svg(const std::vector<ScatterPoint>& pts,
                                      const std::string& x_label, const std::string& y_label,
                                      const std::string& title) {
  const int w = 640, h = 480, ml = 70, mr = 30, mt = 50, mb = 60;
  double xmin = 0.0, xmax = 1.0, ymin = 0.0, ymax = 1.0;
  if (!pts.empty()) {
    xmin = xmax = pts[0].x;
    ymin = ymax = pts[0].y;
    for (const auto& p : pts) {
      xmin = std::min(xmin, p.x);
      xmax = std::max(xmax, p.x);
      ymin = std::min(ymin, p.y);
      ymax = std::max(ymax, p.y);
    }
  }
  double xpad = (xmax - xmin) * 0.08 + 1e-9, ypad = (ymax - ymin) * 0.08 + 1e-9;
  xmin -= xpad; xmax += xpad; ymin -= ypad; ymax += ypad;
  auto sx = [&](double x) { return ml + (x - xmin) / (xmax - xmin) * (w - ml - mr); };
  auto sy = [&](double y) { return h - mb - (y - ymin) / (ymax - ymin) * (h - mt - mb); };
  std::ostringstream os;
  os << std::fixed << std::setprecision(2);
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << w << "\" height=\"" << h
     << "\">\n<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  os << "<text x=\"" << w / 2 << "\" y=\"25\" text-anchor=\"middle\" font-size=\"16\">" << title
     << "</text>\n";
  // axes
  os << "<line x1=\"" << ml << "\" y1=\"" << h - mb << "\" x2=\"" << w - mr << "\" y2=\""
     << h - mb << "\" stroke=\"black\"/>\n";
  os << "<line x1=\"" << ml << "\" y1=\"" << mt << "\" x2=\"" << ml << "\" y2=\"" << h - mb
     << "\" stroke=\"black\"/>\n";
  for (int i = 0; i <= 5; ++i) {
    double xv = xmin + (xmax - xmin) * i / 5.0;
    double yv = ymin + (ymax - ymin) * i / 5.0;
    os << "<line x1=\"" << sx(xv) << "\" y1=\"" << h - mb << "\" x2=\"" << sx(xv) << "\" y2=\""
       << h - mb + 5 << "\" stroke=\"black\"/>\n";
    os << "<text x=\"" << sx(xv) << "\" y=\"" << h - mb + 20
       << "\" text-anchor=\"middle\" font-size=\"11\">" << xv << "</text>\n";
    os << "<line x1=\"" << ml - 5 << "\" y1=\"" << sy(yv) << "\" x2=\"" << ml << "\" y2=\""
       << sy(yv) << "\" stroke=\"black\"/>\n";
    os << "<text x=\"" << ml - 8 << "\" y=\"" << sy(yv) + 4
       << "\" text-anchor=\"end\" font-size=\"11\">" << yv << "</text>\n";
  }
  os << "<text x=\"" << (ml + w - mr) / 2 << "\" y=\"" << h - 15
     << "\" text-anchor=\"middle\" font-size=\"13\">" << x_label << "</text>\n";
  os << "<text x=\"18\" y=\"" << (mt + h - mb) / 2
     << "\" text-anchor=\"middle\" font-size=\"13\" transform=\"rotate(-90 18 "
     << (mt + h - mb) / 2 << ")\">" << y_label << "</text>\n";
  for (const auto& p : pts) {
    double px = sx(p.x), py = sy(p.y);
    if (p.marked) {
      os << "<line x1=\"" << px - 4 << "\" y1=\"" << py - 4 << "\" x2=\"" << px + 4 << "\" y2=\""
         << py + 4 << "\" stroke=\"crimson\" stroke-width=\"2\"/>\n";
      os << "<line x1=\"" << px - 4 << "\" y1=\"" << py + 4 << "\" x2=\"" << px + 4 << "\" y2=\""
         << py - 4 << "\" stroke=\"crimson\" stroke-width=\"2\"/>\n";
    } else {
      os << "<circle cx=\"" << px << "\" cy=\"" << py << "\" r=\"4\" fill=\"steelblue\"/>\n";
    }
    if (!p.label.empty())
      os << "<text x=\"" << px + 6 << "\" y=\"" << py - 6 << "\" font-size=\"10\">" << p.label
         << "</text>\n";
  }
  os << "</svg>\n";
  return os.str();
}

}  // namespace enos

#endif  // ENOS_SVG_HPP
