#include "stackel/io.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>
#include <unordered_map>

#include "json.hpp"

namespace stackel::io {

using nlohmann::json;
namespace fs = std::filesystem;

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

void write_file(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
  if (!out.flush()) throw std::runtime_error("failed writing " + path.string());
}

namespace {

json parse_json(const std::string& text, const std::string& what) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw ParseError(what + ": " + e.what());
  }
}

Cents integer_field(const json& v, const std::string& where) {
  if (!v.is_number_integer()) throw ParseError(where + " must be an integer");
  return v.get<Cents>();
}

const json& member(const json& obj, const char* key, const std::string& where) {
  if (!obj.is_object() || !obj.contains(key))
    throw ParseError(where + ": missing field \"" + key + "\"");
  return obj.at(key);
}

std::string string_field(const json& v, const std::string& where) {
  if (!v.is_string()) throw ParseError(where + " must be a string");
  return v.get<std::string>();
}

}  // namespace

GameTree parse_tree(const std::string& text) {
  json doc = parse_json(text, "tree");
  if (!doc.is_object()) throw ParseError("tree: top level must be an object");
  const json& list = member(doc, "nodes", "tree");
  if (!list.is_array()) throw ParseError("tree: \"nodes\" must be an array");
  std::string root = string_field(member(doc, "root", "tree"), "tree: \"root\"");

  std::unordered_map<std::string, NodeId> ids;
  std::vector<Node> nodes;
  std::vector<std::vector<std::pair<std::string, std::string>>> edges;
  for (std::size_t i = 0; i < list.size(); ++i) {
    const json& jn = list[i];
    std::string where = "node #" + std::to_string(i);
    std::string id = string_field(member(jn, "id", where), where + " \"id\"");
    where = "node " + id;
    if (!ids.emplace(id, static_cast<NodeId>(nodes.size())).second)
      throw ParseError(where + ": duplicate id");
    Node n;
    n.id = id;
    std::string owner = string_field(member(jn, "owner", where), where + " \"owner\"");
    auto parsed = parse_owner(owner);
    if (!parsed) throw ParseError(where + ": unknown owner '" + owner + "'");
    n.owner = *parsed;
    std::vector<std::pair<std::string, std::string>> kids;
    if (jn.contains("children")) {
      const json& ch = jn.at("children");
      if (!ch.is_object()) throw ParseError(where + ": \"children\" must be an object");
      for (const auto& [action, target] : ch.items())
        kids.emplace_back(action, string_field(target, where + " child '" + action + "'"));
    }
    if (jn.contains("reward") && !jn.at("reward").is_null()) {
      const json& r = jn.at("reward");
      if (!r.is_array() || r.size() != 2) throw ParseError(where + ": \"reward\" must be [leader, follower]");
      n.reward = PayoffPair{integer_field(r[0], where + " reward[0]"),
                            integer_field(r[1], where + " reward[1]")};
    }
    nodes.push_back(std::move(n));
    edges.push_back(std::move(kids));
  }
  GameTree tree;
  tree.reserve(nodes.size());
  for (auto& n : nodes) tree.add_node(std::move(n));
  for (std::size_t i = 0; i < edges.size(); ++i)
    for (const auto& [action, target] : edges[i]) {
      auto it = ids.find(target);
      if (it == ids.end())
        throw ParseError("node " + tree.node(static_cast<NodeId>(i)).id + ": child '" + action +
                         "' refers to unknown node " + target);
      tree.add_edge(static_cast<NodeId>(i), action, it->second);
    }
  auto r = ids.find(root);
  if (r == ids.end()) throw ParseError("tree: root " + root + " is not a node");
  tree.set_root(r->second);
  auto report = validate_tree(tree);
  if (!report.ok()) throw ParseError("tree: " + report.errors.front());
  return tree;
}

GameTree import_tree(const fs::path& path) { return parse_tree(read_file(path)); }

std::string tree_to_json(const GameTree& tree) {
  std::ostringstream os;
  os << "{\"root\": " << json(tree.node(tree.root()).id).dump() << ", \"nodes\": [\n";
  for (std::size_t i = 0; i < tree.size(); ++i) {
    const Node& n = tree.node(static_cast<NodeId>(i));
    json jn;
    jn["id"] = n.id;
    jn["owner"] = to_string(n.owner);
    if (!n.is_leaf()) {
      json ch = json::object();
      for (const auto& e : n.children) ch[e.action] = tree.node(e.child).id;
      jn["children"] = ch;
    }
    if (n.reward) jn["reward"] = {n.reward->leader, n.reward->follower};
    os << "  " << jn.dump() << (i + 1 < tree.size() ? ",\n" : "\n");
  }
  os << "]}\n";
  return os.str();
}

std::string frontier_csv(const std::vector<NamedFrontier>& frontiers) {
  std::ostringstream os;
  os << "kind,node_id,leader_lo,follower_lo,leader_hi,follower_hi\n";
  for (const auto& nf : frontiers) {
    const Frontier& f = *nf.frontier;
    for (const auto& p : f.points) {
      std::string l = cents_to_dollars(p.leader), fo = cents_to_dollars(p.follower);
      os << "point," << nf.node_id << ',' << l << ',' << fo << ',' << l << ',' << fo << '\n';
    }
    for (const auto& s : f.segments) {
      const auto& a = f.points[s.lo];
      const auto& b = f.points[s.hi];
      os << "segment," << nf.node_id << ',' << cents_to_dollars(a.leader) << ','
         << cents_to_dollars(a.follower) << ',' << cents_to_dollars(b.leader) << ','
         << cents_to_dollars(b.follower) << '\n';
    }
  }
  return os.str();
}

std::string policy_to_json(const GameTree& tree, const LeaderPolicy& policy,
                           const std::optional<Rational>& theta, const TargetPoint& target) {
  json doc;
  doc["theta"] = theta ? json(to_string(*theta)) : json("inf");
  doc["target"] = {{"leader", to_string(target.leader)}, {"follower", to_string(target.follower)}};
  json pol = json::object();
  for (const auto& [id, probs] : policy.probs) {
    const Node& n = tree.node(id);
    json row = json::object();
    for (std::size_t i = 0; i < probs.size(); ++i)
      if (probs[i] != 0) row[n.children[i].action] = to_string(probs[i]);
    pol[n.id] = row;
  }
  doc["policy"] = pol;
  return doc.dump(1) + "\n";
}

LeaderPolicy parse_policy(const GameTree& tree, const std::string& text) {
  json doc = parse_json(text, "policy");
  const json& pol = member(doc, "policy", "policy");
  if (!pol.is_object()) throw ParseError("policy: \"policy\" must be an object");
  std::unordered_map<std::string, NodeId> ids;
  for (NodeId i = 0; i < tree.size(); ++i) ids.emplace(tree.node(i).id, i);
  LeaderPolicy out;
  for (const auto& [node_id, row] : pol.items()) {
    auto it = ids.find(node_id);
    if (it == ids.end()) throw ParseError("policy: unknown node " + node_id);
    const Node& n = tree.node(it->second);
    std::vector<Rational> probs(n.children.size());
    for (const auto& [action, p] : row.items()) {
      int k = n.child_index(action);
      if (k < 0) throw ParseError("policy: node " + node_id + " has no action '" + action + "'");
      try {
        probs[static_cast<std::size_t>(k)] = parse_rational(string_field(p, "probability"));
      } catch (const std::exception& e) {
        throw ParseError("policy: node " + node_id + " action '" + action + "': " + e.what());
      }
    }
    out.probs.emplace(it->second, std::move(probs));
  }
  return out;
}

namespace {

template <typename F>
void each_config_field(F&& f, bridge::BridgeConfig& c) {
  f("horizon_rounds", c.horizon_rounds);
  f("base_reward", c.base_reward);
  f("per_step_cost", c.per_step_cost);
  f("theta", c.theta);
  f("backward_from_before", c.backward_from_before);
  f("crash_leaves", c.crash_leaves);
  f("approach_cells", c.approach_cells);
  f("bridge_cells", c.bridge_cells);
  f("close_start", c.close_start);
  f("far_start", c.far_start);
  f("tick_ms", c.tick_ms);
  f("seconds_per_step", c.seconds_per_step);
  f("round_limit_s", c.round_limit_s);
}

}  // namespace

bridge::BridgeConfig parse_bridge_config(const std::string& text) {
  json doc = parse_json(text, "config");
  if (!doc.is_object()) throw ParseError("config: top level must be an object");
  bridge::BridgeConfig cfg;
  std::set<std::string> known{"sdc_start", "human_start"};
  each_config_field(
      [&](const char* key, auto& field) {
        known.insert(key);
        if (!doc.contains(key)) return;
        const json& v = doc.at(key);
        using T = std::decay_t<decltype(field)>;
        if constexpr (std::is_same_v<T, bool>) {
          if (!v.is_boolean()) throw ParseError(std::string("config: ") + key + " must be a boolean");
          field = v.get<bool>();
        } else {
          field = static_cast<T>(integer_field(v, std::string("config: ") + key));
        }
      },
      cfg);
  for (auto [key, field] : {std::pair{"sdc_start", &cfg.sdc_start}, {"human_start", &cfg.human_start}}) {
    if (!doc.contains(key)) continue;
    auto p = bridge::parse_pos(string_field(doc.at(key), std::string("config: ") + key));
    if (!p) throw ParseError(std::string("config: ") + key + " is not a position");
    *field = *p;
  }
  for (const auto& [key, v] : doc.items())
    if (!known.count(key)) throw ParseError("config: unknown field \"" + key + "\"");
  auto errs = cfg.validate();
  if (!errs.empty()) throw ParseError("config: " + errs.front());
  return cfg;
}

std::string bridge_config_to_json(const bridge::BridgeConfig& cfg) {
  json doc;
  bridge::BridgeConfig c = cfg;
  each_config_field([&](const char* key, auto& field) { doc[key] = field; }, c);
  doc["sdc_start"] = bridge::to_string(cfg.sdc_start);
  doc["human_start"] = bridge::to_string(cfg.human_start);
  return doc.dump(1) + "\n";
}

std::string plan_to_json(const bridge::PunishmentPlan& plan) {
  json doc;
  doc["theta"] = plan.theta();
  doc["target"] = {{"leader", to_string(plan.target().leader)},
                   {"follower", to_string(plan.target().follower)}};
  json nodes = json::array();
  for (const auto& n : plan.nodes()) {
    json edges = json::array();
    for (const auto& e : n.edges)
      edges.push_back({bridge::to_string(e.step), e.child, to_string(e.prob)});
    nodes.push_back({static_cast<int>(n.at.sdc), static_cast<int>(n.at.human),
                     static_cast<int>(n.at.to_move), n.at.round, to_string(n.owner),
                     n.payoff.leader, n.payoff.follower, edges});
  }
  doc["nodes"] = nodes;
  return doc.dump() + "\n";
}

bridge::PunishmentPlan parse_plan(const std::string& text) {
  json doc = parse_json(text, "plan");
  try {
    TargetPoint target;
    target.leader = parse_rational(doc.at("target").at("leader").get<std::string>());
    target.follower = parse_rational(doc.at("target").at("follower").get<std::string>());
    std::vector<bridge::PlanNode> nodes;
    const json& list = doc.at("nodes");
    for (std::size_t i = 0; i < list.size(); ++i) {
      const json& jn = list[i];
      bridge::PlanNode n;
      auto pos = [&](int k) {
        int v = jn.at(k).get<int>();
        if (v < 0 || v > 3) throw ParseError("plan: node " + std::to_string(i) + " bad position");
        return static_cast<bridge::Pos>(v);
      };
      n.at.sdc = pos(0);
      n.at.human = pos(1);
      n.at.to_move = jn.at(2).get<int>() == 0 ? bridge::Mover::kSdc : bridge::Mover::kHuman;
      n.at.round = jn.at(3).get<std::uint8_t>();
      auto owner = parse_owner(jn.at(4).get<std::string>());
      if (!owner) throw ParseError("plan: node " + std::to_string(i) + " bad owner");
      n.owner = *owner;
      n.payoff = {jn.at(5).get<Cents>(), jn.at(6).get<Cents>()};
      for (const auto& je : jn.at(7)) {
        auto step = bridge::parse_step(je.at(0).get<std::string>());
        auto child = je.at(1).get<std::uint32_t>();
        if (!step || child >= list.size())
          throw ParseError("plan: node " + std::to_string(i) + " bad edge");
        n.edges.push_back({*step, child, parse_rational(je.at(2).get<std::string>())});
      }
      nodes.push_back(std::move(n));
    }
    return bridge::PunishmentPlan(std::move(nodes), doc.at("theta").get<Cents>(), target);
  } catch (const json::exception& e) {
    throw ParseError(std::string("plan: ") + e.what());
  }
}

std::string episode_to_json(const bridge::EpisodeRecord& ep, const SessionInfo& session) {
  json doc;
  doc["session"] = session.session_id;
  doc["group"] = session.group;
  doc["human"] = session.human;
  doc["episode_index"] = ep.episode_index;
  doc["start_assignment"] = bridge::to_string(ep.start);
  doc["mode"] = bridge::to_string(ep.mode);
  doc["rng_seed"] = ep.rng_seed;
  json ticks = json::array();
  for (const auto& t : ep.ticks)
    ticks.push_back({{"tick", t.tick},
                     {"sdc_cell", t.sdc_cell},
                     {"human_cell", t.human_cell},
                     {"sdc_action", bridge::to_string(t.sdc_action)},
                     {"human_action", bridge::to_string(t.human_action)},
                     {"human_rejected", t.human_rejected},
                     {"horn", t.horn}});
  doc["ticks"] = ticks;
  doc["sdc_finish_s"] = ep.sdc_finish_s ? json(*ep.sdc_finish_s) : json(nullptr);
  doc["human_finish_s"] = ep.human_finish_s ? json(*ep.human_finish_s) : json(nullptr);
  doc["payoff_cents"] = {{"sdc", ep.sdc_cents}, {"human", ep.human_cents}};
  doc["verdict"] = {{"bullied", ep.verdict.bullied},
                    {"condition", ep.verdict.condition
                                      ? json(bridge::to_string(*ep.verdict.condition))
                                      : json(nullptr)}};
  json samples = json::array();
  for (const auto& s : ep.samples)
    samples.push_back({{"tick", s.tick}, {"round", s.round}, {"action", s.action}, {"draw", s.draw}});
  doc["samples"] = samples;
  return doc.dump();
}

bridge::EpisodeRecord parse_episode(const std::string& line, SessionInfo* session) {
  json doc = parse_json(line, "episode");
  try {
    bridge::EpisodeRecord ep;
    if (session) {
      session->session_id = doc.at("session").get<std::string>();
      session->group = doc.at("group").get<std::string>();
      session->human = doc.at("human").get<std::string>();
    }
    ep.episode_index = doc.at("episode_index").get<int>();
    ep.start = doc.at("start_assignment").get<std::string>() == "sdc-close"
                   ? bridge::StartAssignment::kSdcClose
                   : bridge::StartAssignment::kHumanClose;
    auto mode = bridge::parse_mode(doc.at("mode").get<std::string>());
    if (!mode) throw ParseError("episode: bad mode");
    ep.mode = *mode;
    ep.rng_seed = doc.at("rng_seed").get<std::uint64_t>();
    for (const auto& t : doc.at("ticks")) {
      bridge::TickRecord r;
      r.tick = t.at("tick").get<int>();
      r.sdc_cell = t.at("sdc_cell").get<int>();
      r.human_cell = t.at("human_cell").get<int>();
      auto sa = bridge::parse_step(t.at("sdc_action").get<std::string>());
      auto ha = bridge::parse_step(t.at("human_action").get<std::string>());
      if (!sa || !ha) throw ParseError("episode: bad action in tick " + std::to_string(r.tick));
      r.sdc_action = *sa;
      r.human_action = *ha;
      r.human_rejected = t.value("human_rejected", false);
      r.horn = t.at("horn").get<bool>();
      ep.ticks.push_back(r);
    }
    if (!doc.at("sdc_finish_s").is_null()) ep.sdc_finish_s = doc.at("sdc_finish_s").get<double>();
    if (!doc.at("human_finish_s").is_null())
      ep.human_finish_s = doc.at("human_finish_s").get<double>();
    ep.sdc_cents = doc.at("payoff_cents").at("sdc").get<Cents>();
    ep.human_cents = doc.at("payoff_cents").at("human").get<Cents>();
    ep.verdict.bullied = doc.at("verdict").at("bullied").get<bool>();
    const json& cond = doc.at("verdict").at("condition");
    if (!cond.is_null())
      ep.verdict.condition = cond.get<std::string>() == "forced_backoff"
                                 ? bridge::BullyCondition::kForcedBackoff
                                 : bridge::BullyCondition::kBlocked;
    for (const auto& s : doc.value("samples", json::array()))
      ep.samples.push_back({s.at("tick").get<int>(), s.at("round").get<int>(),
                            s.at("action").get<std::string>(), s.at("draw").get<double>()});
    return ep;
  } catch (const json::exception& e) {
    throw ParseError(std::string("episode: ") + e.what());
  }
}

std::string episodes_jsonl(const harness::SessionRecord& s, const std::string& session_id) {
  SessionInfo info{session_id, harness::to_string(s.group), s.human};
  std::string out;
  for (const auto& ep : s.episodes) out += episode_to_json(ep, info) + "\n";
  return out;
}

int LoggedSession::bully_count() const {
  return static_cast<int>(std::count_if(episodes.begin(), episodes.end(),
                                        [](const auto& e) { return e.verdict.bullied; }));
}

std::vector<LoggedSession> load_sessions(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw std::runtime_error("not a directory: " + dir.string());
  std::vector<fs::path> files;
  for (const auto& entry : fs::recursive_directory_iterator(dir))
    if (entry.is_regular_file() && entry.path().filename() == "episodes.jsonl")
      files.push_back(entry.path());
  std::sort(files.begin(), files.end());
  std::vector<LoggedSession> out;
  for (const auto& f : files) {
    std::istringstream in(read_file(f));
    LoggedSession s;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      if (line.empty()) continue;
      try {
        s.episodes.push_back(parse_episode(line, &s.info));
      } catch (const ParseError& e) {
        throw ParseError(f.string() + ":" + std::to_string(lineno) + ": " + e.what());
      }
    }
    if (!s.episodes.empty()) out.push_back(std::move(s));
  }
  return out;
}

}  // namespace stackel::io
