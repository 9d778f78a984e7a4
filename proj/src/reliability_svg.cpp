#include "calibkit/reliability_svg.hpp"

#include <charconv>
#include <cmath>

#include <fmt/format.h>

#include "calibkit/error.hpp"

namespace calibkit {
namespace {

// Shortest decimal that parses back to the same double.
std::string exact(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

std::string escape_xml(std::string_view s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out.push_back(c);
    }
  }
  return out;
}

}  // namespace

double point_radius(const RenderStyle& style, std::size_t sample_count) {
  return style.base_radius + style.radius_scale * std::log(1.0 + static_cast<double>(sample_count));
}

std::string render_reliability(const CalibrationReport& report, const RenderStyle& style) {
  if (report.bins.empty()) throw Error("cannot render a reliability diagram without bins");

  const double left = style.margin;
  const double right = style.width - style.margin;
  const double top = style.margin;
  const double bottom = style.height - style.margin;
  const auto px = [&](double v) { return left + v * (right - left); };
  const auto py = [&](double v) { return bottom - v * (bottom - top); };
  const std::string x_label = style.standard_axes ? "Confidence" : "Accuracy";
  const std::string y_label = style.standard_axes ? "Accuracy" : "Confidence";

  std::string svg;
  auto out = std::back_inserter(svg);
  fmt::format_to(out,
                 "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{0}\" height=\"{1}\" "
                 "viewBox=\"0 0 {0} {1}\" font-family=\"sans-serif\" font-size=\"12\">\n",
                 style.width, style.height);
  fmt::format_to(out, "<rect width=\"{}\" height=\"{}\" fill=\"white\"/>\n", style.width,
                 style.height);
  if (!style.title.empty())
    fmt::format_to(out, "<text class=\"title\" x=\"{:.3f}\" y=\"{:.3f}\" font-size=\"14\">{}</text>\n",
                   left, top - 30.0, escape_xml(style.title));
  fmt::format_to(out,
                 "<text class=\"metrics\" x=\"{:.3f}\" y=\"{:.3f}\" data-em=\"{}\" data-ece=\"{}\">"
                 "{} EM={:.3f} ECE={:.2f}</text>\n",
                 left, top - 12.0, exact(report.overall_accuracy), exact(report.ece),
                 to_string(report.level), report.overall_accuracy, report.ece);

  // Frame and ticks as one path.
  std::string path = fmt::format("M{:.3f} {:.3f}H{:.3f}V{:.3f}H{:.3f}Z", left, top, right, bottom,
                                 left);
  for (int i = 0; i <= 5; ++i) {
    const double v = i / 5.0;
    path += fmt::format("M{:.3f} {:.3f}v5M{:.3f} {:.3f}h-5", px(v), bottom, left, py(v));
  }
  fmt::format_to(out, "<path class=\"axes\" d=\"{}\" fill=\"none\" stroke=\"black\"/>\n", path);
  for (int i = 0; i <= 5; ++i) {
    const double v = i / 5.0;
    fmt::format_to(out,
                   "<text class=\"tick\" x=\"{:.3f}\" y=\"{:.3f}\" text-anchor=\"middle\">{:.1f}</text>\n",
                   px(v), bottom + 18.0, v);
    fmt::format_to(out,
                   "<text class=\"tick\" x=\"{:.3f}\" y=\"{:.3f}\" text-anchor=\"end\">{:.1f}</text>\n",
                   left - 8.0, py(v) + 4.0, v);
  }
  fmt::format_to(out,
                 "<text class=\"axis-label\" x=\"{:.3f}\" y=\"{:.3f}\" text-anchor=\"middle\">{}</text>\n",
                 (left + right) / 2.0, bottom + 38.0, x_label);
  fmt::format_to(out,
                 "<text class=\"axis-label\" x=\"{:.3f}\" y=\"{:.3f}\" text-anchor=\"middle\" "
                 "transform=\"rotate(-90 {:.3f} {:.3f})\">{}</text>\n",
                 left - 38.0, (top + bottom) / 2.0, left - 38.0, (top + bottom) / 2.0, y_label);
  fmt::format_to(out,
                 "<line class=\"identity\" x1=\"{:.3f}\" y1=\"{:.3f}\" x2=\"{:.3f}\" y2=\"{:.3f}\" "
                 "stroke=\"gray\" stroke-dasharray=\"4 4\"/>\n",
                 px(0.0), py(0.0), px(1.0), py(1.0));

  for (const auto& bin : report.bins) {
    const double x = style.standard_axes ? bin.mean_confidence : bin.mean_accuracy;
    const double y = style.standard_axes ? bin.mean_accuracy : bin.mean_confidence;
    fmt::format_to(out,
                   "<circle class=\"bin\" cx=\"{:.3f}\" cy=\"{:.3f}\" r=\"{:.3f}\" "
                   "data-count=\"{}\" data-confidence=\"{}\" data-accuracy=\"{}\" "
                   "fill=\"steelblue\" fill-opacity=\"0.7\"/>\n",
                   px(x), py(y), point_radius(style, bin.sample_count), bin.sample_count,
                   exact(bin.mean_confidence), exact(bin.mean_accuracy));
  }
  svg += "</svg>\n";
  return svg;
}

}  // namespace calibkit
