#pragma once

// Self-contained SVG figures: a time-domain overlay with an error panel, and
// a two-panel Bode plot on a logarithmic frequency axis. Output bytes depend
// only on the input data. Each figure carries a <metadata> JSON block with
// the numbers it was drawn from.

#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "hmor/bode.hpp"
#include "json.hpp"

namespace hmor {

struct OverlayStyle {
  std::string title;
  std::string y_label;
  std::string ref_label = "reference";
  std::string test_label = "model";
};

// Top panel: reference and test against t. Bottom panel: test - reference.
std::string overlay_svg(std::span<const double> t, std::span<const double> reference,
                        std::span<const double> test, const OverlayStyle& style);

struct BodeCurve {
  std::string label;
  std::vector<BodePoint> points;
};

std::string bode_svg(const std::vector<BodeCurve>& curves, const std::string& title);

// Parsed <metadata> block of an SVG produced here.
nlohmann::json svg_metadata(const std::string& svg);

void emit_plot(const std::filesystem::path& path, const std::string& svg);

}  // namespace hmor
