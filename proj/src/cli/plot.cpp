#include <algorithm>
#include <cmath>
#include <iomanip>
#include <sstream>

#include "pit/cli.hpp"

namespace pit {

namespace {

struct Panel {
  double x0, y0, w, h;
};

void draw_panel(std::ostringstream& os, const Panel& p, const std::vector<ParetoPoint>& pts,
                const std::vector<bool>& on_front, bool macs, const std::string& metric) {
  std::vector<double> xs, ys;
  for (const auto& q : pts) {
    xs.push_back(std::log10(std::max<double>(1.0, static_cast<double>(macs ? q.macs : q.params))));
    ys.push_back(q.metric_value);
  }
  const auto [xmin_it, xmax_it] = std::minmax_element(xs.begin(), xs.end());
  const auto [ymin_it, ymax_it] = std::minmax_element(ys.begin(), ys.end());
  double xmin = std::floor(*xmin_it), xmax = std::ceil(*xmax_it);
  if (xmax <= xmin) xmax = xmin + 1;
  double ymin = *ymin_it, ymax = *ymax_it;
  const double pad = std::max(1e-9, (ymax - ymin) * 0.1);
  ymin -= pad;
  ymax += pad;
  const auto px = [&](double x) { return p.x0 + (x - xmin) / (xmax - xmin) * p.w; };
  const auto py = [&](double y) { return p.y0 + p.h - (y - ymin) / (ymax - ymin) * p.h; };

  os << "<rect x='" << p.x0 << "' y='" << p.y0 << "' width='" << p.w << "' height='" << p.h
     << "' fill='none' stroke='#444'/>\n";
  for (double e = xmin; e <= xmax; e += 1.0) {
    os << "<text x='" << px(e) << "' y='" << p.y0 + p.h + 16 << "' font-size='11' text-anchor='middle'>1e"
       << static_cast<int>(e) << "</text>\n";
  }
  for (int i = 0; i <= 4; ++i) {
    const double y = ymin + (ymax - ymin) * i / 4.0;
    os << "<text x='" << p.x0 - 6 << "' y='" << py(y) + 4 << "' font-size='11' text-anchor='end'>"
       << std::setprecision(4) << y << "</text>\n";
  }
  os << "<text x='" << p.x0 + p.w / 2 << "' y='" << p.y0 + p.h + 34 << "' font-size='12' text-anchor='middle'>"
     << (macs ? "MACs" : "weights") << "</text>\n";
  os << "<text x='" << p.x0 - 44 << "' y='" << p.y0 + p.h / 2 << "' font-size='12' text-anchor='middle' transform='rotate(-90 "
     << p.x0 - 44 << " " << p.y0 + p.h / 2 << ")'>" << metric << "</text>\n";
  for (std::size_t i = 0; i < pts.size(); ++i) {
    os << "<circle cx='" << px(xs[i]) << "' cy='" << py(ys[i]) << "' r='4' stroke='#1f77b4' fill='"
       << (on_front[i] ? "#1f77b4" : "white") << "'><title>lambda " << pts[i].lambda << "</title></circle>\n";
  }
}

}  // namespace

std::string pareto_svg(const std::vector<ParetoPoint>& points, const std::vector<std::size_t>& front) {
  std::vector<ParetoPoint> ok;
  std::vector<bool> on_front;
  for (std::size_t i = 0; i < points.size(); ++i) {
    if (points[i].failed()) continue;
    ok.push_back(points[i]);
    on_front.push_back(std::find(front.begin(), front.end(), i) != front.end());
  }
  std::ostringstream os;
  os << "<svg xmlns='http://www.w3.org/2000/svg' width='860' height='340' font-family='sans-serif'>\n"
     << "<rect width='860' height='340' fill='white'/>\n";
  if (!ok.empty()) {
    const std::string metric = ok.front().metric_name;
    draw_panel(os, {70, 20, 330, 260}, ok, on_front, false, metric);
    draw_panel(os, {500, 20, 330, 260}, ok, on_front, true, metric);
  }
  os << "</svg>\n";
  return os.str();
}

}  // namespace pit
