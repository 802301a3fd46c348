#include "semnav/replay.hpp"

#include <json.hpp>

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "semnav/error.hpp"

namespace semnav {

using nlohmann::json;

std::string trace_to_json_string(const EpisodeTrace& trace) {
  json j;
  j["scene_id"] = trace.scene_id;
  j["task_id"] = trace.task_id;
  j["dims"] = {trace.l, trace.w};
  j["targets"] = trace.targets;
  json frames = json::array();
  for (const EpisodeTrace::Frame& f : trace.frames) {
    json jf;
    json poses = json::array();
    for (const Pose& p : f.poses)
      poses.push_back({p.cell.x, p.cell.y, p.heading, p.pitch});
    jf["poses"] = std::move(poses);
    jf["actions"] = f.actions;
    json subgoals = json::array();
    for (const Cell& c : f.subgoals) subgoals.push_back({c.x, c.y});
    jf["subgoals"] = std::move(subgoals);
    json done = json::array();
    for (uint8_t d : f.done) done.push_back(static_cast<int>(d));
    jf["done"] = std::move(done);
    frames.push_back(std::move(jf));
  }
  j["frames"] = std::move(frames);
  json events = json::array();
  for (const auto& [cat, agent, step] : trace.found_events)
    events.push_back({cat, agent, step});
  j["found_events"] = std::move(events);
  return j.dump(2) + "\n";
}

EpisodeTrace trace_from_json_string(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw ParseError(std::string("bad-record: ") + e.what());
  }
  EpisodeTrace trace;
  try {
    trace.scene_id = j.at("scene_id").get<std::string>();
    trace.task_id = j.at("task_id").get<std::string>();
    trace.l = j.at("dims").at(0).get<int>();
    trace.w = j.at("dims").at(1).get<int>();
    trace.targets = j.at("targets").get<std::vector<int>>();
    for (const json& jf : j.at("frames")) {
      EpisodeTrace::Frame f;
      for (const json& jp : jf.at("poses")) {
        Pose p;
        p.cell.x = jp.at(0).get<int>();
        p.cell.y = jp.at(1).get<int>();
        p.heading = jp.at(2).get<int>();
        p.pitch = jp.at(3).get<int>();
        f.poses.push_back(p);
      }
      f.actions = jf.at("actions").get<std::vector<int>>();
      for (const json& jc : jf.at("subgoals"))
        f.subgoals.push_back(Cell{jc.at(0).get<int>(), jc.at(1).get<int>()});
      for (const json& jd : jf.at("done"))
        f.done.push_back(static_cast<uint8_t>(jd.get<int>()));
      trace.frames.push_back(std::move(f));
    }
    for (const json& je : j.at("found_events"))
      trace.found_events.emplace_back(je.at(0).get<int>(), je.at(1).get<int>(),
                                      je.at(2).get<int>());
  } catch (const json::exception& e) {
    throw ParseError(std::string("bad-record: ") + e.what());
  }
  if (trace.l < 1 || trace.w < 1) throw ParseError("bad-record: dims");
  if (trace.frames.empty()) throw ParseError("bad-record: no frames");
  const size_t n = trace.frames[0].poses.size();
  for (const EpisodeTrace::Frame& f : trace.frames) {
    if (f.poses.size() != n || f.actions.size() != n ||
        f.subgoals.size() != n || f.done.size() != n)
      throw ParseError("bad-record: ragged frame");
    for (const Pose& p : f.poses)
      if (p.cell.x < 0 || p.cell.x >= trace.l || p.cell.y < 0 ||
          p.cell.y >= trace.w)
        throw ParseError("bad-record: pose off grid");
  }
  return trace;
}

void save_trace(const EpisodeTrace& trace, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ParseError("cannot-open: " + path);
  out << trace_to_json_string(trace);
}

EpisodeTrace load_trace(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot-open: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return trace_from_json_string(ss.str());
}

namespace {

void check_scene_match(const EpisodeTrace& trace, const Scene& scene) {
  if (scene.l != trace.l || scene.w != trace.w || scene.id != trace.scene_id)
    throw std::invalid_argument("trace-scene-mismatch");
}

bool is_target_category(const EpisodeTrace& trace, int cat) {
  return std::find(trace.targets.begin(), trace.targets.end(), cat) !=
         trace.targets.end();
}

}  // namespace

std::vector<std::string> render_text_frames(const EpisodeTrace& trace,
                                            const Scene& scene) {
  check_scene_match(trace, scene);
  // Static background once; frames stamp the moving parts on a copy.
  std::vector<std::string> base(static_cast<size_t>(trace.w),
                                std::string(static_cast<size_t>(trace.l), '.'));
  for (int y = 0; y < trace.w; ++y)
    for (int x = 0; x < trace.l; ++x) {
      if (scene.wall(x, y)) {
        base[static_cast<size_t>(y)][static_cast<size_t>(x)] = '#';
      } else {
        const int oi = scene.object_at(x, y);
        if (oi >= 0)
          base[static_cast<size_t>(y)][static_cast<size_t>(x)] =
              is_target_category(trace,
                                 scene.objects[static_cast<size_t>(oi)].category)
                  ? 'T'
                  : 'o';
      }
    }

  std::vector<std::string> out;
  for (size_t t = 0; t < trace.frames.size(); ++t) {
    const EpisodeTrace::Frame& f = trace.frames[t];
    std::vector<std::string> grid = base;
    for (const Cell& sg : f.subgoals)
      if (sg.x >= 0 && sg.y >= 0 && sg.x < trace.l && sg.y < trace.w)
        grid[static_cast<size_t>(sg.y)][static_cast<size_t>(sg.x)] = '+';
    for (size_t i = 0; i < f.poses.size(); ++i)
      grid[static_cast<size_t>(f.poses[i].cell.y)]
          [static_cast<size_t>(f.poses[i].cell.x)] =
              static_cast<char>('0' + (i % 10));
    std::string s = "frame " + std::to_string(t);
    if (t > 0) {
      s += " |";
      for (size_t i = 0; i < f.actions.size(); ++i) {
        s += " ";
        s += f.actions[i] < 0
                 ? "-"
                 : action_name(static_cast<Action>(f.actions[i]));
      }
    }
    s += "\n";
    for (const std::string& row : grid) s += row + "\n";
    out.push_back(std::move(s));
  }
  return out;
}

namespace {

const char* kAgentColors[5] = {"#d43d3d", "#3b6fd4", "#2f9e44", "#d4943b",
                               "#8f4bc9"};

std::string px(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.1f", v);
  return buf;
}

}  // namespace

std::string render_svg(const EpisodeTrace& trace, const Scene& scene) {
  check_scene_match(trace, scene);
  const double s = 8.0;  // pixels per cell
  std::string svg;
  svg += "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
  svg += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" +
         px(trace.l * s) + "\" height=\"" + px(trace.w * s) + "\" viewBox=\"0 0 " +
         px(trace.l * s) + " " + px(trace.w * s) + "\">\n";
  svg += "<rect width=\"100%\" height=\"100%\" fill=\"#fdfdf8\"/>\n";

  for (int y = 0; y < trace.w; ++y)
    for (int x = 0; x < trace.l; ++x)
      if (scene.wall(x, y))
        svg += "<rect x=\"" + px(x * s) + "\" y=\"" + px(y * s) + "\" width=\"" +
               px(s) + "\" height=\"" + px(s) + "\" fill=\"#31343a\"/>\n";
  for (const ObjectInstance& o : scene.objects) {
    const bool tgt = is_target_category(trace, o.category);
    for (const Cell& c : o.footprint)
      svg += "<rect x=\"" + px(c.x * s) + "\" y=\"" + px(c.y * s) +
             "\" width=\"" + px(s) + "\" height=\"" + px(s) + "\" fill=\"" +
             (tgt ? "#f3b33d" : "#b9c0c9") + "\"/>\n";
  }

  const size_t n = trace.frames.empty() ? 0 : trace.frames[0].poses.size();
  auto cx = [&](const Cell& c) { return (c.x + 0.5) * s; };
  auto cy = [&](const Cell& c) { return (c.y + 0.5) * s; };

  for (size_t i = 0; i < n; ++i) {
    const char* color = kAgentColors[i % 5];
    std::string points;
    for (const EpisodeTrace::Frame& f : trace.frames) {
      if (!points.empty()) points += " ";
      points += px(cx(f.poses[i].cell)) + "," + px(cy(f.poses[i].cell));
    }
    svg += "<polyline points=\"" + points + "\" fill=\"none\" stroke=\"" +
           color + "\" stroke-width=\"1.5\" stroke-opacity=\"0.8\"/>\n";
    for (const EpisodeTrace::Frame& f : trace.frames)
      svg += "<circle cx=\"" + px(cx(f.poses[i].cell)) + "\" cy=\"" +
             px(cy(f.poses[i].cell)) + "\" r=\"1.5\" fill=\"" + color + "\"/>\n";
    // Spawn marker.
    const Cell s0 = trace.frames[0].poses[i].cell;
    svg += "<rect x=\"" + px(cx(s0) - 3.5) + "\" y=\"" + px(cy(s0) - 3.5) +
           "\" width=\"7\" height=\"7\" fill=\"none\" stroke=\"" + color +
           "\" stroke-width=\"1.5\"/>\n";
    // Sub-goal crosses, once per distinct pick.
    Cell prev{-1, -1};
    for (const EpisodeTrace::Frame& f : trace.frames) {
      const Cell sg = f.subgoals[i];
      if (sg.x < 0 || (sg == prev)) continue;
      prev = sg;
      const double gx = cx(sg), gy = cy(sg);
      svg += "<path d=\"M " + px(gx - 3) + " " + px(gy - 3) + " L " +
             px(gx + 3) + " " + px(gy + 3) + " M " + px(gx - 3) + " " +
             px(gy + 3) + " L " + px(gx + 3) + " " + px(gy - 3) +
             "\" stroke=\"" + color + "\" stroke-width=\"1.2\"/>\n";
    }
  }

  for (const auto& [cat, agent, step] : trace.found_events) {
    if (step < 0 || step >= static_cast<int>(trace.frames.size())) continue;
    const Pose& p =
        trace.frames[static_cast<size_t>(step)].poses[static_cast<size_t>(agent)];
    svg += "<circle cx=\"" + px(cx(p.cell)) + "\" cy=\"" + px(cy(p.cell)) +
           "\" r=\"6\" fill=\"none\" stroke=\"#1d9e3f\" stroke-width=\"2\"/>\n";
    const std::string label =
        cat >= 0 && cat < static_cast<int>(scene.vocab.size())
            ? scene.vocab[static_cast<size_t>(cat)]
            : std::to_string(cat);
    svg += "<text x=\"" + px(cx(p.cell) + 7) + "\" y=\"" + px(cy(p.cell) + 3) +
           "\" font-size=\"8\" fill=\"#1d9e3f\">" + label + "</text>\n";
  }

  svg += "</svg>\n";
  return svg;
}

}  // namespace semnav
