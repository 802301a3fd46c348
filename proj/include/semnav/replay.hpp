#pragma once

#include <string>
#include <vector>

#include "semnav/eval.hpp"
#include "semnav/scene.hpp"

namespace semnav {

std::string trace_to_json_string(const EpisodeTrace& trace);
// Throws ParseError("bad-record: ...") on malformed input.
EpisodeTrace trace_from_json_string(const std::string& text);
void save_trace(const EpisodeTrace& trace, const std::string& path);
EpisodeTrace load_trace(const std::string& path);

// One ASCII grid per frame (steps + 1 of them): '#' walls, 'T' cells of
// target-category objects, 'o' other objects, '+' current sub-goals,
// agent ids 0..9 on top. Each frame is prefixed by a header line with the
// frame number and the actions taken that round.
std::vector<std::string> render_text_frames(const EpisodeTrace& trace,
                                            const Scene& scene);

// The whole episode as one SVG document: floor plan, per-agent colored
// path with one dot per step, spawn squares, sub-goal crosses, and a
// ring per Found event. Valid standalone XML.
std::string render_svg(const EpisodeTrace& trace, const Scene& scene);

}  // namespace semnav
