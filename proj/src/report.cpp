#include "caring/report.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include <fmt/format.h>

#include "caring/error.hpp"

namespace caring {

namespace {

constexpr double kMarginLeft = 70.0;
constexpr double kMarginRight = 20.0;
constexpr double kMarginTop = 40.0;
constexpr double kMarginBottom = 60.0;

// Fixed-point coordinates keep the output stable and readable.
std::string px(double v) { return fmt::format("{:.2f}", v); }
std::string num(double v) { return fmt::format("{:.4f}", v); }

std::string xml_escape(const std::string& s) {
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

std::string open_svg(const DiagramStyle& style, const std::string& title) {
  std::string out = "<?xml version=\"1.0\" encoding=\"UTF-8\" standalone=\"no\"?>\n";
  out += fmt::format(
      "<svg xmlns=\"http://www.w3.org/2000/svg\" version=\"1.1\" width=\"{0}\" height=\"{1}\" "
      "viewBox=\"0 0 {0} {1}\">\n",
      style.width_px, style.height_px);
  out += fmt::format("<title>{}</title>\n", xml_escape(title));
  out += fmt::format("<rect class=\"background\" x=\"0\" y=\"0\" width=\"{}\" height=\"{}\" fill=\"#ffffff\"/>\n",
                     style.width_px, style.height_px);
  out += fmt::format(
      "<text x=\"{}\" y=\"{}\" font-family=\"sans-serif\" font-size=\"16\" text-anchor=\"middle\">{}</text>\n",
      px(style.width_px / 2.0), px(kMarginTop / 2.0 + 6.0), xml_escape(title));
  return out;
}

// Frame, ticks at 0, 0.2, ..., 1 on both axes, and axis titles.
std::string axes(const PlotArea& area, const std::string& x_title, const std::string& y_title, double y_max) {
  std::string out;
  out += fmt::format("<rect class=\"frame\" x=\"{}\" y=\"{}\" width=\"{}\" height=\"{}\" fill=\"none\" "
                     "stroke=\"#000000\" stroke-width=\"1\"/>\n",
                     px(area.left), px(area.top), px(area.width), px(area.height));
  for (int t = 0; t <= 5; ++t) {
    const double f = t / 5.0;
    const double x = area.left + f * area.width;
    const double y = area.bottom() - f * area.height;
    out += fmt::format("<line x1=\"{0}\" y1=\"{1}\" x2=\"{0}\" y2=\"{2}\" stroke=\"#000000\"/>\n", px(x),
                       px(area.bottom()), px(area.bottom() + 5.0));
    out += fmt::format(
        "<text x=\"{}\" y=\"{}\" font-family=\"sans-serif\" font-size=\"11\" text-anchor=\"middle\">{:.1f}</text>\n",
        px(x), px(area.bottom() + 18.0), f);
    out += fmt::format("<line x1=\"{0}\" y1=\"{1}\" x2=\"{2}\" y2=\"{1}\" stroke=\"#000000\"/>\n",
                       px(area.left - 5.0), px(y), px(area.left));
    out += fmt::format(
        "<text x=\"{}\" y=\"{}\" font-family=\"sans-serif\" font-size=\"11\" text-anchor=\"end\">{:.2f}</text>\n",
        px(area.left - 8.0), px(y + 4.0), f * y_max);
  }
  out += fmt::format(
      "<text x=\"{}\" y=\"{}\" font-family=\"sans-serif\" font-size=\"13\" text-anchor=\"middle\">{}</text>\n",
      px(area.left + area.width / 2.0), px(area.bottom() + 42.0), xml_escape(x_title));
  const double cy = area.top + area.height / 2.0;
  out += fmt::format(
      "<text x=\"{0}\" y=\"{1}\" font-family=\"sans-serif\" font-size=\"13\" text-anchor=\"middle\" "
      "transform=\"rotate(-90 {0} {1})\">{2}</text>\n",
      px(area.left - 48.0), px(cy), xml_escape(y_title));
  return out;
}

}  // namespace

void DiagramStyle::validate() const {
  const PlotArea a = plot_area(*this);
  if (width_px <= 0 || height_px <= 0 || a.width <= 0.0 || a.height <= 0.0) {
    throw InvalidArgument(fmt::format("diagram size {}x{} too small", width_px, height_px));
  }
}

PlotArea plot_area(const DiagramStyle& style) {
  return PlotArea{kMarginLeft, kMarginTop, style.width_px - kMarginLeft - kMarginRight,
                  style.height_px - kMarginTop - kMarginBottom};
}

std::string render_reliability_svg(const CalibrationReport& report, const DiagramStyle& style) {
  style.validate();
  if (report.bins.empty()) throw InvalidArgument("report has no bins");
  const PlotArea area = plot_area(style);

  std::string out = open_svg(style, "Reliability diagram");
  for (std::size_t i = 0; i < report.bins.size(); ++i) {
    const BinStats& b = report.bins[i];
    const double x = area.left + b.lo * area.width;
    const double w = (b.hi - b.lo) * area.width;
    const double h = b.count > 0 ? b.acc * area.height : 0.0;
    out += fmt::format(
        "<rect class=\"bar\" data-bin=\"{}\" data-count=\"{}\" x=\"{}\" y=\"{}\" width=\"{}\" height=\"{}\" "
        "fill=\"{}\" stroke=\"#1f3f7a\" stroke-width=\"0.5\"/>\n",
        i, b.count, px(x), px(area.bottom() - h), px(w), px(h), style.bar_color);
  }
  for (std::size_t i = 0; i < report.bins.size(); ++i) {
    const BinStats& b = report.bins[i];
    if (b.count == 0) continue;
    const double x = area.left + b.lo * area.width;
    const double w = (b.hi - b.lo) * area.width;
    const double y_hi = area.bottom() - std::max(b.acc, b.avg_conf) * area.height;
    const double gap = std::abs(b.acc - b.avg_conf) * area.height;
    out += fmt::format(
        "<rect class=\"gap\" data-bin=\"{}\" x=\"{}\" y=\"{}\" width=\"{}\" height=\"{}\" fill=\"{}\" "
        "fill-opacity=\"0.35\" stroke=\"{}\" stroke-width=\"0.5\"/>\n",
        i, px(x), px(y_hi), px(w), px(gap), style.gap_color, style.gap_color);
  }
  out += fmt::format(
      "<line class=\"diagonal\" x1=\"{}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"{}\" stroke-width=\"1.5\" "
      "stroke-dasharray=\"6,4\"/>\n",
      px(area.left), px(area.bottom()), px(area.left + area.width), px(area.top), style.diagonal_color);
  out += axes(area, "Confidence", "Accuracy", 1.0);
  if (style.annotate_ece) {
    out += fmt::format(
        "<text class=\"ece\" x=\"{}\" y=\"{}\" font-family=\"sans-serif\" font-size=\"14\">ECE = {}</text>\n",
        px(area.left + 10.0), px(area.top + 20.0), num(report.ece));
  }
  out += "</svg>\n";
  return out;
}

std::string render_histogram_svg(std::span<const double> confidences, std::size_t bins,
                                 const HistogramMarkers& markers, const DiagramStyle& style) {
  style.validate();
  if (bins < 1) throw InvalidArgument("bin count must be >= 1");
  std::vector<std::size_t> counts(bins, 0);
  for (double c : confidences) counts[bin_index(c, bins)] += 1;
  const auto total = static_cast<double>(std::max<std::size_t>(confidences.size(), 1));
  const std::size_t peak = *std::max_element(counts.begin(), counts.end());
  const double y_max = peak > 0 ? static_cast<double>(peak) / total : 1.0;

  const PlotArea area = plot_area(style);
  std::string out = open_svg(style, "Confidence histogram");
  const double w = area.width / static_cast<double>(bins);
  for (std::size_t i = 0; i < bins; ++i) {
    const double frac = static_cast<double>(counts[i]) / total;
    const double h = frac / y_max * area.height;
    out += fmt::format(
        "<rect class=\"hist-bar\" data-bin=\"{}\" data-count=\"{}\" x=\"{}\" y=\"{}\" width=\"{}\" height=\"{}\" "
        "fill=\"{}\" stroke=\"#1f3f7a\" stroke-width=\"0.5\"/>\n",
        i, counts[i], px(area.left + i * w), px(area.bottom() - h), px(w), px(h), style.bar_color);
  }
  auto marker = [&](const char* cls, double value, const char* color, const char* label, double dy) {
    const double x = area.left + std::clamp(value, 0.0, 1.0) * area.width;
    out += fmt::format(
        "<line class=\"{0}\" x1=\"{2}\" y1=\"{3}\" x2=\"{2}\" y2=\"{4}\" stroke=\"{1}\" stroke-width=\"2\" "
        "stroke-dasharray=\"8,5\"/>\n",
        cls, color, px(x), px(area.top), px(area.bottom()));
    out += fmt::format(
        "<text x=\"{}\" y=\"{}\" font-family=\"sans-serif\" font-size=\"12\" fill=\"{}\" text-anchor=\"end\">{} = "
        "{}</text>\n",
        px(x - 4.0), px(area.top + dy), color, label, num(value));
  };
  if (markers.mean_confidence) marker("marker-confidence", *markers.mean_confidence, "#d62728", "avg conf", 16.0);
  if (markers.accuracy) marker("marker-accuracy", *markers.accuracy, "#1f77b4", "accuracy", 32.0);
  out += axes(area, "Confidence", "Fraction of samples", y_max);
  out += "</svg>\n";
  return out;
}

namespace {

std::vector<const PerClassRow*> rows_by_support(const CalibrationReport& report) {
  std::vector<const PerClassRow*> rows;
  for (const auto& r : report.per_class) rows.push_back(&r);
  std::stable_sort(rows.begin(), rows.end(), [](const PerClassRow* a, const PerClassRow* b) {
    if (a->support != b->support) return a->support > b->support;
    return a->index < b->index;
  });
  return rows;
}

std::string class_label(const PerClassRow& r) { return r.name ? *r.name : std::to_string(r.index); }

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

}  // namespace

std::string render_class_table(const CalibrationReport& report) {
  std::string out = "class,support,accuracy,avg_confidence,delta_acc,ece\n";
  for (const PerClassRow* r : rows_by_support(report)) {
    if (r->support == 0) {
      out += fmt::format("{},0,,,,\n", csv_field(class_label(*r)));
      continue;
    }
    out += fmt::format("{},{},{},{},{},{}\n", csv_field(class_label(*r)), r->support, num(r->acc),
                       num(r->avg_conf), num(r->delta_acc), num(r->ece));
  }
  return out;
}

std::string render_class_markdown(const CalibrationReport& report) {
  std::string out = "| class | support | accuracy | avg_confidence | delta_acc | ece |\n";
  out += "|---|---:|---:|---:|---:|---:|\n";
  for (const PerClassRow* r : rows_by_support(report)) {
    std::string label = class_label(*r);
    std::string escaped;
    for (char c : label) {
      if (c == '|') escaped += '\\';
      escaped += c;
    }
    if (r->support == 0) {
      out += fmt::format("| {} | 0 |  |  |  |  |\n", escaped);
      continue;
    }
    out += fmt::format("| {} | {} | {} | {} | {} | {} |\n", escaped, r->support, num(r->acc), num(r->avg_conf),
                       num(r->delta_acc), num(r->ece));
  }
  return out;
}

}  // namespace caring
