#pragma once

// SVG reliability diagrams and confidence histograms, plus per-class tables.
// Output is a pure function of the inputs: identical calls give identical bytes.

#include <cstddef>
#include <optional>
#include <span>
#include <string>

#include "caring/metrics.hpp"

namespace caring {

struct DiagramStyle {
  int width_px = 600;
  int height_px = 600;
  std::string bar_color = "#4878d0";
  std::string gap_color = "#e45756";
  std::string diagonal_color = "#555555";
  bool annotate_ece = true;

  void validate() const;
};

// Inner plotting rectangle in pixels; y grows downwards as in SVG.
struct PlotArea {
  double left = 0.0;
  double top = 0.0;
  double width = 0.0;
  double height = 0.0;

  double bottom() const noexcept { return top + height; }
};

PlotArea plot_area(const DiagramStyle& style);

// Bars at height acc per bin (zero height for empty bins, class "bar"), the
// shaded gap to each non-empty bin's mean confidence (class "gap"), the
// identity diagonal (class "diagonal") and an optional ECE annotation.
std::string render_reliability_svg(const CalibrationReport& report, const DiagramStyle& style = {});

struct HistogramMarkers {
  std::optional<double> mean_confidence;
  std::optional<double> accuracy;
};

// Fraction of samples per confidence bin (class "hist-bar"), with dashed
// vertical markers for mean confidence and accuracy when given.
std::string render_histogram_svg(std::span<const double> confidences, std::size_t bins,
                                 const HistogramMarkers& markers = {}, const DiagramStyle& style = {});

// class,support,accuracy,avg_confidence,delta_acc,ece sorted by support
// (descending, ties by class index). Support-0 rows leave metric cells blank.
std::string render_class_table(const CalibrationReport& report);
std::string render_class_markdown(const CalibrationReport& report);

}  // namespace caring
