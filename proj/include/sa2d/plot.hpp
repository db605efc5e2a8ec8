#pragma once

#include <filesystem>
#include <optional>

#include "sa2d/dataset.hpp"
#include "sa2d/scoring.hpp"

namespace sa2d {

// Renders the normalized score curve to a PNG: anomaly spans shaded,
// threshold line, one x step per frame.
void plot_score_curve(const ScoreSeries& series, const std::optional<FrameAnnotation>& annotation,
                      const std::filesystem::path& path);

}  // namespace sa2d
