#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cstdio>
#include <string>
#include <vector>

#include "semnav/error.hpp"
#include "semnav/eval.hpp"
#include "semnav/replay.hpp"

using namespace semnav;

namespace {

Scene corridor_scene() {
  Scene s;
  s.id = "replay-cor";
  s.l = 40;
  s.w = 8;
  s.walls.assign(320, 0);
  for (int x = 0; x < 40; ++x) {
    s.walls[cell_index(x, 0, 40)] = 1;
    s.walls[cell_index(x, 7, 40)] = 1;
  }
  for (int y = 0; y < 8; ++y) {
    s.walls[cell_index(0, y, 40)] = 1;
    s.walls[cell_index(39, y, 40)] = 1;
  }
  s.vocab = {"Box", "Ball"};
  ObjectInstance box;
  box.id = 0;
  box.category = 0;
  box.footprint = {Cell{30, 4}};
  s.objects.push_back(box);
  ObjectInstance ball;
  ball.id = 1;
  ball.category = 1;
  ball.footprint = {Cell{10, 2}};
  s.objects.push_back(ball);
  s.validate();
  return s;
}

// One real greedy episode so the trace has the shapes production gives it.
EpisodeTrace recorded_trace(const Scene& s) {
  TaskSpec t;
  t.scene_id = s.id;
  t.targets = {0};
  t.spawn_cells = {Cell{3, 4}};
  t.spawn_headings = {0};
  EpisodeConfig cfg;
  cfg.max_steps = 400;
  EpisodeTrace trace;
  const EpisodeResult r =
      run_episode(s, t, cfg, nullptr, nullptr, nullptr, 17, &trace);
  REQUIRE(r.success);
  return trace;
}

bool traces_equal(const EpisodeTrace& a, const EpisodeTrace& b) {
  if (a.scene_id != b.scene_id || a.task_id != b.task_id || a.l != b.l ||
      a.w != b.w || a.targets != b.targets ||
      a.found_events != b.found_events || a.frames.size() != b.frames.size())
    return false;
  for (size_t t = 0; t < a.frames.size(); ++t) {
    const auto& fa = a.frames[t];
    const auto& fb = b.frames[t];
    if (fa.actions != fb.actions || fa.done != fb.done ||
        fa.poses.size() != fb.poses.size() ||
        fa.subgoals.size() != fb.subgoals.size())
      return false;
    for (size_t i = 0; i < fa.poses.size(); ++i)
      if (!(fa.poses[i].cell == fb.poses[i].cell) ||
          fa.poses[i].heading != fb.poses[i].heading ||
          fa.poses[i].pitch != fb.poses[i].pitch)
        return false;
    for (size_t i = 0; i < fa.subgoals.size(); ++i)
      if (!(fa.subgoals[i] == fb.subgoals[i])) return false;
  }
  return true;
}

}  // namespace

TEST_CASE("traces survive the json round trip byte for byte") {
  const Scene s = corridor_scene();
  const EpisodeTrace trace = recorded_trace(s);
  const std::string dumped = trace_to_json_string(trace);
  const EpisodeTrace back = trace_from_json_string(dumped);
  CHECK(traces_equal(trace, back));
  CHECK(trace_to_json_string(back) == dumped);
}

TEST_CASE("malformed trace documents are rejected with bad-record") {
  const Scene s = corridor_scene();
  const EpisodeTrace trace = recorded_trace(s);

  CHECK_THROWS_AS(trace_from_json_string("{nope"), ParseError);
  CHECK_THROWS_AS(trace_from_json_string("{}"), ParseError);

  EpisodeTrace doctored = trace;
  doctored.l = 0;
  CHECK_THROWS_WITH_AS(trace_from_json_string(trace_to_json_string(doctored)),
                       "bad-record: dims", ParseError);

  doctored = trace;
  doctored.frames.clear();
  CHECK_THROWS_WITH_AS(trace_from_json_string(trace_to_json_string(doctored)),
                       "bad-record: no frames", ParseError);

  doctored = trace;
  doctored.frames[1].actions.pop_back();
  CHECK_THROWS_WITH_AS(trace_from_json_string(trace_to_json_string(doctored)),
                       "bad-record: ragged frame", ParseError);

  doctored = trace;
  doctored.frames[1].poses[0].cell.x = doctored.l;
  CHECK_THROWS_WITH_AS(trace_from_json_string(trace_to_json_string(doctored)),
                       "bad-record: pose off grid", ParseError);
}

TEST_CASE("traces load from disk and missing paths are named") {
  const Scene s = corridor_scene();
  const EpisodeTrace trace = recorded_trace(s);
  const std::string path = "/tmp/semnav_replay_test.json";
  save_trace(trace, path);
  const EpisodeTrace back = load_trace(path);
  CHECK(traces_equal(trace, back));
  std::remove(path.c_str());

  CHECK_THROWS_WITH_AS(load_trace("/tmp/no-such-trace.json"),
                       "cannot-open: /tmp/no-such-trace.json", ParseError);
}

TEST_CASE("text frames stamp walls, objects, sub-goals, and agents") {
  const Scene s = corridor_scene();
  const EpisodeTrace trace = recorded_trace(s);
  const auto frames = render_text_frames(trace, s);
  REQUIRE(frames.size() == trace.frames.size());

  // Every frame is a header plus w rows of l characters.
  for (const std::string& f : frames) {
    std::vector<std::string> lines;
    std::string line;
    for (char c : f) {
      if (c == '\n') {
        lines.push_back(line);
        line.clear();
      } else {
        line.push_back(c);
      }
    }
    REQUIRE(lines.size() == static_cast<size_t>(s.w) + 1);
    for (size_t i = 1; i < lines.size(); ++i)
      CHECK(lines[i].size() == static_cast<size_t>(s.l));
  }

  // Frame zero: bare header, border walls, labeled objects, agent at spawn.
  CHECK(frames[0].substr(0, 8) == "frame 0\n");
  CHECK(frames[0].find('|') == std::string::npos);
  const auto row = [&](size_t frame, int y) {
    size_t start = frames[frame].find('\n') + 1;
    for (int i = 0; i < y; ++i) start = frames[frame].find('\n', start) + 1;
    return frames[frame].substr(start, static_cast<size_t>(s.l));
  };
  CHECK(row(0, 0) == std::string(40, '#'));
  CHECK(row(0, 4)[30] == 'T');
  CHECK(row(0, 2)[10] == 'o');
  CHECK(row(0, 4)[3] == '0');

  // Later headers carry one action name per agent.
  CHECK(frames[1].find("frame 1 | ") == 0);
  bool subgoal_seen = false;
  for (const std::string& f : frames)
    if (f.find('+') != std::string::npos) subgoal_seen = true;
  CHECK(subgoal_seen);

  Scene other = corridor_scene();
  other.id = "not-the-one";
  CHECK_THROWS_WITH_AS(render_text_frames(trace, other), "trace-scene-mismatch",
                       std::invalid_argument);
}

TEST_CASE("the svg rendering is one self-closing document") {
  const Scene s = corridor_scene();
  const EpisodeTrace trace = recorded_trace(s);
  const std::string svg = render_svg(trace, s);

  CHECK(svg.rfind("<?xml version=\"1.0\"", 0) == 0);
  CHECK(svg.find("<svg xmlns=\"http://www.w3.org/2000/svg\"") != std::string::npos);
  CHECK(svg.substr(svg.size() - 7) == "</svg>\n");

  // Quotes pair up and every tag closes; enough to keep viewers happy.
  CHECK(std::count(svg.begin(), svg.end(), '"') % 2 == 0);
  CHECK(std::count(svg.begin(), svg.end(), '<') ==
        std::count(svg.begin(), svg.end(), '>'));

  // One path polyline and one spawn marker for the single agent.
  size_t polylines = 0;
  for (size_t pos = svg.find("<polyline"); pos != std::string::npos;
       pos = svg.find("<polyline", pos + 1))
    polylines += 1;
  CHECK(polylines == 1);

  // The found ring and its label come from the episode's Found event.
  CHECK(svg.find("stroke=\"#1d9e3f\"") != std::string::npos);
  CHECK(svg.find(">Box</text>") != std::string::npos);

  Scene other = corridor_scene();
  other.id = "not-the-one";
  CHECK_THROWS_WITH_AS(render_svg(trace, other), "trace-scene-mismatch",
                       std::invalid_argument);
}
