// Command-line front door: solving, the bridge game, simulation, statistics
// and the game server.

#include <cstdlib>
#include <filesystem>
#include <iomanip>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "stackel/bridge.hpp"
#include "stackel/harness.hpp"
#include "stackel/io.hpp"
#include "stackel/server.hpp"

namespace fs = std::filesystem;
using namespace stackel;

namespace {

constexpr int kInfeasible = 2;
constexpr int kParseError = 3;

std::optional<Rational> parse_theta(const std::string& text) {
  if (text == "inf" || text == "+inf") return std::nullopt;
  try {
    return parse_rational(text);
  } catch (const std::exception&) {
    throw io::ParseError("theta must be cents or inf: " + text);
  }
}

std::uint64_t effective_seed(std::uint64_t flag) {
  if (const char* env = std::getenv("STACKEL_SEED")) {
    try {
      return std::stoull(env);
    } catch (const std::exception&) {
      throw io::ParseError(std::string("STACKEL_SEED is not an integer: ") + env);
    }
  }
  return flag;
}

bridge::BridgeConfig load_config(const std::string& path) {
  if (path.empty()) return {};
  return io::parse_bridge_config(io::read_file(path));
}

std::shared_ptr<const bridge::PunishmentPlan> load_plan(const bridge::BridgeConfig& cfg,
                                                        const std::string& path) {
  if (!path.empty() && fs::exists(path)) {
    auto plan = io::parse_plan(io::read_file(path));
    if (plan.theta() != cfg.theta)
      throw io::ParseError("plan file " + path + " was solved for a different theta");
    return std::make_shared<const bridge::PunishmentPlan>(std::move(plan));
  }
  std::cerr << "solving the bridge game at theta=" << cfg.theta << " cents...\n";
  auto plan = std::make_shared<const bridge::PunishmentPlan>(bridge::PunishmentPlan::build(cfg));
  if (!path.empty()) io::write_file(path, io::plan_to_json(*plan));
  return plan;
}

int cmd_solve(const std::string& tree_path, const std::string& theta_text,
              const std::string& out, const std::string& csv) {
  GameTree tree = io::import_tree(tree_path);
  auto theta = parse_theta(theta_text);
  FrontierSolution sol = solve_frontier(tree);
  TargetPoint target = theta ? extract_punishment(sol.root(), PunishmentQuery::cap(*theta))
                             : extract_equilibrium(sol.root());
  LeaderPolicy policy = unroll_policy(sol, target);
  io::write_file(out, io::policy_to_json(tree, policy, theta, target));
  if (!csv.empty()) {
    std::vector<io::NamedFrontier> rows;
    for (NodeId id = 0; id < tree.size(); ++id)
      if (const Frontier* f = sol.find(id)) rows.push_back({tree.node(id).id, f});
    io::write_file(csv, io::frontier_csv(rows));
  }
  std::cout << "target leader=" << cents_to_dollars(target.leader)
            << " follower=" << cents_to_dollars(target.follower) << "\n";
  return 0;
}

int cmd_bridge_solve(const std::string& theta_text, const std::string& config, bool regime,
                     const std::string& csv, const std::string& plan_out) {
  bridge::BridgeConfig cfg = load_config(config);
  auto theta = parse_theta(theta_text);
  if (theta) {
    if (denominator(*theta) != 1) throw io::ParseError("bridge theta must be whole cents");
    cfg.theta = numerator(*theta).convert_to<Cents>();
  }
  bridge::BridgeTree bt = bridge::build_bridge_tree(cfg);
  auto rep = validate_tree(bt.tree);
  std::cout << bridge::ruleset_description(cfg) << "\n";
  std::cout << "nodes=" << bt.tree.size() << " leaves=" << rep.leaf_count << "\n";
  SolveOptions opts;
  opts.retain_all = false;
  opts.retain_depth = 12;
  FrontierSolution sol = solve_frontier(bt.tree, opts);
  std::cout << "max_segments=" << sol.stats().max_segments << "\n";
  if (!csv.empty()) io::write_file(csv, io::frontier_csv({{bt.tree.node(bt.tree.root()).id, &sol.root()}}));
  auto report = bridge::classify_regime(bt, sol, theta);
  std::cout << "target leader=" << cents_to_dollars(report.target.leader)
            << " follower=" << cents_to_dollars(report.target.follower) << "\n";
  if (regime)
    std::cout << bridge::to_string(report.regime) << " block_steps=" << report.block_steps << "\n";
  if (!plan_out.empty()) {
    if (!theta) throw io::ParseError("a punishment plan needs a finite theta");
    auto plan = bridge::PunishmentPlan::from_policy(bt, report.policy, cfg.theta, report.target);
    io::write_file(plan_out, io::plan_to_json(plan));
  }
  return 0;
}

int cmd_simulate(const std::string& human, const std::string& group_text, int episodes,
                 std::uint64_t seed_flag, const std::string& out, int sessions,
                 const std::string& config, const std::string& plan_path) {
  bridge::BridgeConfig cfg = load_config(config);
  harness::Group group;
  if (group_text == "control")
    group = harness::Group::kControl;
  else if (group_text == "experimental")
    group = harness::Group::kExperimental;
  else
    throw io::ParseError("group must be control or experimental");
  std::unique_ptr<harness::HumanModel> model;
  try {
    model = harness::make_human_model(human);
  } catch (const std::invalid_argument& e) {
    throw io::ParseError(e.what());
  }
  std::uint64_t seed = effective_seed(seed_flag);
  std::shared_ptr<const bridge::PunishmentPlan> plan;
  if (group == harness::Group::kExperimental) plan = load_plan(cfg, plan_path);
  std::mt19937_64 seeds(seed);
  for (int k = 0; k < sessions; ++k) {
    auto h = model->clone();
    auto s = harness::run_session(*h, group, episodes, cfg, plan, seeds());
    std::ostringstream id;
    id << group_text << '-' << human << '-' << std::setw(3) << std::setfill('0') << k;
    std::string sid = id.str();
    std::replace(sid.begin(), sid.end(), ':', '_');
    io::write_file(fs::path(out) / "sessions" / sid / "episodes.jsonl", io::episodes_jsonl(s, sid));
    std::cout << sid << " bullies=" << s.bully_count() << "\n";
  }
  return 0;
}

int cmd_stats(const std::string& logs, bool fisher, const std::string& csv) {
  auto sessions = io::load_sessions(logs);
  std::vector<int> control, experimental;
  for (const auto& s : sessions)
    (s.info.group == "control" ? control : experimental).push_back(s.bully_count());
  std::cout << "sessions control=" << control.size() << " experimental=" << experimental.size()
            << "\n";
  auto curve = [](const std::vector<int>& counts) -> std::optional<harness::PersistenceCurve> {
    if (std::none_of(counts.begin(), counts.end(), [](int c) { return c > 0; })) return std::nullopt;
    return harness::bully_persistence(counts);
  };
  auto pc = curve(control), pe = curve(experimental);
  if (!csv.empty()) {
    std::size_t top = std::max(pc ? pc->fraction.size() : 0, pe ? pe->fraction.size() : 0);
    std::ostringstream os;
    os << "k,control,experimental\n" << std::fixed << std::setprecision(6);
    for (std::size_t k = 1; k <= top; ++k) {
      os << k << ',';
      if (pc) os << pc->at(static_cast<int>(k));
      os << ',';
      if (pe) os << pe->at(static_cast<int>(k));
      os << '\n';
    }
    io::write_file(csv, os.str());
  }
  auto t = harness::tabulate(control, experimental);
  std::cout << "bullied once: control=" << t.n[0][0] << " experimental=" << t.n[0][1] << "\n"
            << "bullied more: control=" << t.n[1][0] << " experimental=" << t.n[1][1] << "\n";
  if (fisher) {
    try {
      std::cout << "fisher_p=" << std::fixed << std::setprecision(6) << harness::fisher_exact(t)
                << "\n";
    } catch (const std::invalid_argument& e) {
      std::cout << "fisher_p=n/a (" << e.what() << ")\n";
    }
  }
  return 0;
}

int cmd_serve(int port, const std::string& theta_text, const std::string& config,
              const std::string& out, const std::string& static_dir, const std::string& plan_path,
              std::uint64_t seed_flag) {
  bridge::BridgeConfig cfg = load_config(config);
  auto theta = parse_theta(theta_text);
  if (!theta || denominator(*theta) != 1) throw io::ParseError("serve needs whole-cent theta");
  cfg.theta = numerator(*theta).convert_to<Cents>();
  server::ServerOptions opts;
  opts.port = static_cast<unsigned short>(port);
  opts.config = cfg;
  opts.plan = load_plan(cfg, plan_path);
  opts.out_dir = out;
  opts.static_dir = static_dir;
  opts.seed = effective_seed(seed_flag);
  server::GameServer srv(opts);
  std::cout << "listening on port " << srv.port() << std::endl;
  srv.run();
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Stackelberg punishments in alternating-move games"};
  app.require_subcommand(1);

  std::string tree, theta = "inf", out, csv;
  auto* solve = app.add_subcommand("solve", "Solve a game tree and write the leader policy");
  solve->add_option("--tree", tree, "tree file")->required();
  solve->add_option("--theta", theta, "follower cap in cents, or inf");
  solve->add_option("--out", out, "policy file")->required();
  solve->add_option("--frontier-csv", csv, "frontier export");

  auto* bridge_cmd = app.add_subcommand("bridge", "The one-lane bridge game");
  bridge_cmd->require_subcommand(1);
  std::string b_theta = "2", b_config, b_csv, b_plan;
  bool b_regime = false;
  auto* bsolve = bridge_cmd->add_subcommand("solve", "Solve the abstract bridge game");
  bsolve->add_option("--theta", b_theta, "follower cap in cents, or inf");
  bsolve->add_option("--config", b_config, "bridge config file");
  bsolve->add_flag("--regime", b_regime, "print the punishment regime and block length");
  bsolve->add_option("--frontier-csv", b_csv, "root frontier export");
  bsolve->add_option("--plan-out", b_plan, "write the live punishment plan");

  std::string human, group, s_out, s_config, s_plan;
  int episodes = 20, sessions = 1;
  std::uint64_t seed = 0;
  auto* sim = app.add_subcommand("simulate", "Run scripted sessions");
  sim->add_option("--human", human, "always-bully|always-fair|adaptive:N|scripted:ACTIONS|best-response")
      ->required();
  sim->add_option("--group", group, "control|experimental")->required();
  sim->add_option("--episodes", episodes, "episodes per session")->check(CLI::PositiveNumber);
  sim->add_option("--seed", seed, "session seed (STACKEL_SEED overrides)");
  sim->add_option("--out", s_out, "log directory")->required();
  sim->add_option("--sessions", sessions, "number of sessions")->check(CLI::PositiveNumber);
  sim->add_option("--config", s_config, "bridge config file");
  sim->add_option("--plan", s_plan, "punishment plan cache");

  std::string logs, p_csv;
  bool fisher = false;
  auto* stats = app.add_subcommand("stats", "Statistics over episode logs");
  stats->add_option("--logs", logs, "log directory")->required();
  stats->add_flag("--fisher", fisher, "Fisher exact test on the bullying table");
  stats->add_option("--persistence-csv", p_csv, "persistence curves");

  int port = 8080;
  std::string v_theta = "2", v_config, v_out = "server-logs", v_static, v_plan;
  std::uint64_t v_seed = 0;
  auto* serve = app.add_subcommand("serve", "Run the game server");
  serve->add_option("--port", port, "TCP port (0 picks one)");
  serve->add_option("--theta", v_theta, "follower cap in cents");
  serve->add_option("--config", v_config, "bridge config file");
  serve->add_option("--out", v_out, "log directory");
  serve->add_option("--static", v_static, "web client directory served at /");
  serve->add_option("--plan", v_plan, "punishment plan cache");
  serve->add_option("--seed", v_seed, "server seed (STACKEL_SEED overrides)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : kParseError;
  }

  try {
    if (*solve) return cmd_solve(tree, theta, out, csv);
    if (*bsolve) return cmd_bridge_solve(b_theta, b_config, b_regime, b_csv, b_plan);
    if (*sim) return cmd_simulate(human, group, episodes, seed, s_out, sessions, s_config, s_plan);
    if (*stats) return cmd_stats(logs, fisher, p_csv);
    if (*serve) return cmd_serve(port, v_theta, v_config, v_out, v_static, v_plan, v_seed);
  } catch (const InfeasibleCap& e) {
    std::cerr << "infeasible theta: " << e.what() << "\n";
    return kInfeasible;
  } catch (const io::ParseError& e) {
    std::cerr << "parse error: " << e.what() << "\n";
    return kParseError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
