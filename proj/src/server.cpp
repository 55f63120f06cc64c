#include "stackel/server.hpp"

#include <deque>
#include <fstream>
#include <map>
#include <sstream>

#include <boost/asio.hpp>
#include <boost/beast/core.hpp>
#include <boost/beast/http.hpp>
#include <boost/beast/websocket.hpp>

#include "json.hpp"
#include "stackel/io.hpp"

namespace stackel::server {

namespace fs = std::filesystem;
using nlohmann::json;

// ---------------------------------------------------------------------------
// Session

Session::Session(std::string id, const bridge::BridgeConfig& cfg,
                 std::shared_ptr<const bridge::PunishmentPlan> plan, std::uint64_t seed,
                 int episodes, fs::path dir)
    : id_(std::move(id)),
      cfg_(cfg),
      plan_(std::move(plan)),
      seed_(seed),
      episodes_(episodes),
      dir_(std::move(dir)),
      seeds_(seed) {
  if (!dir_.empty() && !fs::exists(dir_ / "session.json")) {
    json meta{{"session_id", id_},
              {"seed", seed_},
              {"episodes", episodes_},
              {"config", json::parse(io::bridge_config_to_json(cfg_))}};
    io::write_file(dir_ / "session.json", meta.dump(1) + "\n");
  }
}

std::unique_ptr<Session> Session::restore(const std::string& id, const fs::path& dir,
                                          std::shared_ptr<const bridge::PunishmentPlan> plan) {
  if (!fs::exists(dir / "session.json")) return nullptr;
  json meta = json::parse(io::read_file(dir / "session.json"));
  auto cfg = io::parse_bridge_config(meta.at("config").dump());
  auto s = std::make_unique<Session>(id, cfg, std::move(plan), meta.at("seed").get<std::uint64_t>(),
                                     meta.at("episodes").get<int>(), dir);
  if (fs::exists(dir / "episodes.jsonl")) {
    std::istringstream in(io::read_file(dir / "episodes.jsonl"));
    std::string line;
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      auto ep = io::parse_episode(line);
      s->seeds_();
      s->mode_ = bridge::next_mode(s->mode_, ep.verdict);
      s->cumulative_ += ep.human_cents;
      s->log_.push_back(std::move(ep));
      ++s->next_index_;
    }
  }
  return s;
}

std::string Session::joined_message() const {
  json m{{"type", "joined"},
         {"session_id", id_},
         {"episodes", episodes_},
         {"next_episode", next_index_},
         {"tick_ms", cfg_.tick_ms},
         {"approach_cells", cfg_.approach_cells},
         {"bridge_cells", cfg_.bridge_cells},
         {"cumulative_cents", cumulative_}};
  return m.dump();
}

std::string Session::state_message() const {
  const auto& s = episode_->state();
  json m{{"type", "state"},
         {"episode", index_},
         {"tick", s.tick},
         {"sdc_cell", s.sdc_cell},
         {"human_cell", s.human_cell},
         {"horn", s.horn},
         {"elapsed_s", s.episode_elapsed_s},
         {"cumulative_cents", cumulative_}};
  return m.dump();
}

std::vector<std::string> Session::start_episode() {
  if (episode_) return {state_message()};
  if (next_index_ >= episodes_) {
    json payoffs = json::array();
    for (const auto& e : log_) payoffs.push_back(e.human_cents);
    json m{{"type", "session_end"},
           {"summary", {{"episodes", log_.size()}, {"payoffs", payoffs}, {"total_cents", cumulative_}}}};
    ended_ = true;
    return {m.dump()};
  }
  index_ = next_index_++;
  auto start = index_ % 2 == 0 ? bridge::StartAssignment::kSdcClose
                               : bridge::StartAssignment::kHumanClose;
  episode_.emplace(cfg_, plan_, mode_, start, index_, seeds_());
  latched_ = bridge::Step::kStay;
  return {state_message()};
}

void Session::latch(int episode, bridge::Step action) {
  if (episode_ && episode == index_) latched_ = action;
}

std::vector<std::string> Session::tick() {
  if (!episode_) return {};
  episode_->step(latched_);
  latched_ = bridge::Step::kStay;
  std::vector<std::string> out{state_message()};
  if (!episode_->done()) return out;
  bridge::EpisodeRecord rec = episode_->record();
  episode_.reset();
  if (!dir_.empty()) {
    std::ofstream log(dir_ / "episodes.jsonl", std::ios::app | std::ios::binary);
    log << io::episode_to_json(rec, {id_, "experimental", "live"}) << "\n";
    log.flush();
    if (!log) throw std::runtime_error("cannot append to the episode log of session " + id_);
  }
  cumulative_ += rec.human_cents;
  mode_ = bridge::next_mode(mode_, rec.verdict);
  json m{{"type", "episode_end"},
         {"episode", rec.episode_index},
         {"payoff_cents", rec.human_cents},
         {"bullied", rec.verdict.bullied},
         {"next_mode_visible", false},
         {"cumulative_cents", cumulative_}};
  out.push_back(m.dump());
  log_.push_back(std::move(rec));
  return out;
}

// ---------------------------------------------------------------------------
// Network layer

namespace asio = boost::asio;
namespace beast = boost::beast;
namespace http = beast::http;
namespace websocket = beast::websocket;
using tcp = asio::ip::tcp;

namespace {

class Connection;

// Owns a Session and its tick timer; confined to the io_context thread.
class LiveSession : public std::enable_shared_from_this<LiveSession> {
 public:
  LiveSession(asio::io_context& ioc, std::unique_ptr<Session> s, int wall_tick_ms, bool lockstep)
      : session_(std::move(s)), timer_(ioc), wall_ms_(wall_tick_ms), lockstep_(lockstep) {}

  Session& session() { return *session_; }
  void attach(const std::shared_ptr<Connection>& c);
  void detach(const Connection* c);
  void input(int episode, int tick, bridge::Step action);

 private:
  void deliver(const std::vector<std::string>& frames);
  void begin_episode();
  void schedule();
  void advance();

  std::unique_ptr<Session> session_;
  asio::steady_timer timer_;
  int wall_ms_;
  bool lockstep_;
  std::weak_ptr<Connection> conn_;
};

}  // namespace

struct GameServer::Impl : std::enable_shared_from_this<GameServer::Impl> {
  ServerOptions opts;
  asio::io_context ioc{1};
  tcp::acceptor acceptor{ioc};
  std::map<std::string, std::shared_ptr<LiveSession>> sessions;
  std::mt19937_64 id_source{std::random_device{}()};
  std::uint64_t created = 0;

  void accept();
  std::string handle(const std::shared_ptr<Connection>& c, const std::string& text);
  std::string new_id() {
    std::ostringstream os;
    os << std::hex << id_source() << id_source();
    return os.str();
  }
};

namespace {

std::string error_frame(const std::string& message) {
  return json{{"type", "error"}, {"message", message}}.dump();
}

class Connection : public std::enable_shared_from_this<Connection> {
 public:
  Connection(tcp::socket socket, std::shared_ptr<GameServer::Impl> srv)
      : ws_(std::move(socket)), srv_(std::move(srv)) {}

  void start(http::request<http::string_body> req) {
    ws_.async_accept(req, [self = shared_from_this()](beast::error_code ec) {
      if (!ec) self->read();
    });
  }

  void send(std::string frame) {
    outbox_.push_back(std::move(frame));
    if (outbox_.size() == 1) write();
  }

  void bind(std::shared_ptr<LiveSession> s) { session_ = std::move(s); }
  std::shared_ptr<LiveSession> bound() const { return session_.lock(); }

 private:
  void read() {
    ws_.async_read(buffer_, [self = shared_from_this()](beast::error_code ec, std::size_t) {
      if (ec) {
        if (auto s = self->session_.lock()) s->detach(self.get());
        return;
      }
      std::string text = beast::buffers_to_string(self->buffer_.data());
      self->buffer_.consume(self->buffer_.size());
      std::string reply = self->srv_->handle(self, text);
      if (!reply.empty()) self->send(reply);
      self->read();
    });
  }

  void write() {
    ws_.text(true);
    ws_.async_write(asio::buffer(outbox_.front()),
                    [self = shared_from_this()](beast::error_code ec, std::size_t) {
                      if (ec) return;
                      self->outbox_.pop_front();
                      if (!self->outbox_.empty()) self->write();
                    });
  }

  websocket::stream<beast::tcp_stream> ws_;
  beast::flat_buffer buffer_;
  std::deque<std::string> outbox_;
  std::shared_ptr<GameServer::Impl> srv_;
  std::weak_ptr<LiveSession> session_;
};

void LiveSession::attach(const std::shared_ptr<Connection>& c) {
  conn_ = c;
  c->bind(shared_from_this());
  c->send(session_->joined_message());
  if (session_->in_episode()) return;
  begin_episode();
}

void LiveSession::detach(const Connection* c) {
  if (conn_.lock().get() == c) conn_.reset();
}

void LiveSession::deliver(const std::vector<std::string>& frames) {
  if (auto c = conn_.lock())
    for (const auto& f : frames) c->send(f);
}

void LiveSession::begin_episode() {
  deliver(session_->start_episode());
  if (session_->in_episode()) schedule();
}

void LiveSession::schedule() {
  if (lockstep_) return;
  timer_.expires_after(std::chrono::milliseconds(wall_ms_));
  timer_.async_wait([self = shared_from_this()](beast::error_code ec) {
    if (!ec) self->advance();
  });
}

void LiveSession::advance() {
  deliver(session_->tick());
  if (session_->in_episode()) {
    schedule();
  } else if (!conn_.expired()) {
    // Episodes start only with a participant present; a session left
    // without one waits at the boundary for a resume.
    begin_episode();
  }
}

void LiveSession::input(int episode, int tick, bridge::Step action) {
  session_->latch(episode, action);
  if (lockstep_ && session_->in_episode() && episode == session_->episode_index() &&
      tick == session_->current_tick())
    advance();
}

class HttpConnection : public std::enable_shared_from_this<HttpConnection> {
 public:
  HttpConnection(tcp::socket socket, std::shared_ptr<GameServer::Impl> srv)
      : stream_(std::move(socket)), srv_(std::move(srv)) {}

  void start() { read(); }

 private:
  void read() {
    req_ = {};
    stream_.expires_after(std::chrono::seconds(30));
    http::async_read(stream_, buffer_, req_,
                     [self = shared_from_this()](beast::error_code ec, std::size_t) {
                       if (ec) return;
                       if (websocket::is_upgrade(self->req_)) {
                         self->stream_.expires_never();
                         std::make_shared<Connection>(self->stream_.release_socket(), self->srv_)
                             ->start(std::move(self->req_));
                         return;
                       }
                       self->respond();
                     });
  }

  static std::string mime(const fs::path& p) {
    auto ext = p.extension().string();
    if (ext == ".html") return "text/html";
    if (ext == ".js" || ext == ".mjs") return "application/javascript";
    if (ext == ".css") return "text/css";
    if (ext == ".json") return "application/json";
    if (ext == ".svg") return "image/svg+xml";
    if (ext == ".png") return "image/png";
    if (ext == ".wav") return "audio/wav";
    if (ext == ".mp3") return "audio/mpeg";
    return "application/octet-stream";
  }

  void respond() {
    auto res = std::make_shared<http::response<http::string_body>>();
    res->version(req_.version());
    res->keep_alive(req_.keep_alive());
    std::string target(req_.target());
    target = target.substr(0, target.find('?'));
    res->set(http::field::content_type, "text/plain");
    if (req_.method() != http::verb::get && req_.method() != http::verb::head) {
      res->result(http::status::method_not_allowed);
      res->body() = "method not allowed\n";
    } else if (target == "/healthz") {
      res->result(http::status::ok);
      res->body() = "ok\n";
    } else {
      serve_static(*res, target);
    }
    res->prepare_payload();
    http::async_write(stream_, *res, [self = shared_from_this(), res](beast::error_code ec, std::size_t) {
      if (ec) return;
      if (res->keep_alive())
        self->read();
      else
        self->stream_.socket().shutdown(tcp::socket::shutdown_send, ec);
    });
  }

  void serve_static(http::response<http::string_body>& res, std::string target) {
    const fs::path& root = srv_->opts.static_dir;
    if (target.empty() || target.back() == '/') target += "index.html";
    fs::path rel = fs::path(target).relative_path().lexically_normal();
    bool escapes = rel.empty() || *rel.begin() == "..";
    fs::path file = root / rel;
    if (root.empty() || escapes || !fs::is_regular_file(file)) {
      res.result(http::status::not_found);
      res.body() = "not found\n";
      return;
    }
    res.result(http::status::ok);
    res.set(http::field::content_type, mime(file));
    res.body() = io::read_file(file);
  }

  beast::tcp_stream stream_;
  beast::flat_buffer buffer_;
  http::request<http::string_body> req_;
  std::shared_ptr<GameServer::Impl> srv_;
};

bool valid_id(const std::string& id) {
  return !id.empty() && id.size() <= 64 &&
         id.find_first_not_of("0123456789abcdef") == std::string::npos;
}

}  // namespace

void GameServer::Impl::accept() {
  acceptor.async_accept([self = shared_from_this()](beast::error_code ec, tcp::socket socket) {
    if (ec) return;
    std::make_shared<HttpConnection>(std::move(socket), self)->start();
    self->accept();
  });
}

std::string GameServer::Impl::handle(const std::shared_ptr<Connection>& c, const std::string& text) {
  json msg;
  try {
    msg = json::parse(text);
  } catch (const json::parse_error& e) {
    return error_frame(std::string("malformed frame: ") + e.what());
  }
  std::string type = msg.value("type", "");
  int wall = opts.wall_tick_ms > 0 ? opts.wall_tick_ms : opts.config.tick_ms;
  try {
    if (type == "join") {
      if (c->bound()) return error_frame("connection already has a session");
      if (sessions.size() >= opts.max_sessions) return error_frame("capacity exceeded");
      bridge::BridgeConfig cfg = opts.config;
      if (msg.contains("config") && !msg["config"].is_null()) {
        json merged = json::parse(io::bridge_config_to_json(opts.config));
        for (const auto& [k, v] : msg["config"].items()) merged[k] = v;
        cfg = io::parse_bridge_config(merged.dump());
        bool same_game = cfg.horizon_rounds == opts.config.horizon_rounds &&
                         cfg.base_reward == opts.config.base_reward &&
                         cfg.per_step_cost == opts.config.per_step_cost &&
                         cfg.theta == opts.config.theta &&
                         cfg.sdc_start == opts.config.sdc_start &&
                         cfg.human_start == opts.config.human_start &&
                         cfg.backward_from_before == opts.config.backward_from_before &&
                         cfg.crash_leaves == opts.config.crash_leaves;
        if (!same_game) return error_frame("config may only change live-game fields");
      }
      std::string id = new_id();
      std::uint64_t seed = opts.seed + created++;
      auto s = std::make_unique<Session>(id, cfg, opts.plan, seed, opts.episodes,
                                         opts.out_dir / "sessions" / id);
      auto live = std::make_shared<LiveSession>(ioc, std::move(s), wall, opts.lockstep);
      sessions.emplace(id, live);
      live->attach(c);
      return {};
    }
    if (type == "resume") {
      std::string id = msg.value("session_id", "");
      if (c->bound()) return error_frame("connection already has a session");
      auto it = sessions.find(id);
      if (it == sessions.end() && valid_id(id)) {
        auto s = Session::restore(id, opts.out_dir / "sessions" / id, opts.plan);
        if (s) {
          auto live = std::make_shared<LiveSession>(ioc, std::move(s), wall, opts.lockstep);
          it = sessions.emplace(id, live).first;
        }
      }
      if (it == sessions.end()) return error_frame("unknown session " + id);
      it->second->attach(c);
      return {};
    }
    if (type == "input") {
      auto live = c->bound();
      if (!live) return error_frame("join or resume first");
      auto action = bridge::parse_step(msg.value("action", ""));
      if (!action) return error_frame("action must be forward, stay or backward");
      live->input(msg.value("episode", -1), msg.value("tick", -1), *action);
      return {};
    }
  } catch (const std::exception& e) {
    return error_frame(e.what());
  }
  return error_frame("unknown message type '" + type + "'");
}

GameServer::GameServer(ServerOptions opts) : impl_(std::make_shared<Impl>()) {
  if (!opts.plan) throw std::invalid_argument("server needs a punishment plan");
  impl_->opts = std::move(opts);
  tcp::endpoint ep(asio::ip::make_address(impl_->opts.address), impl_->opts.port);
  impl_->acceptor.open(ep.protocol());
  impl_->acceptor.set_option(asio::socket_base::reuse_address(true));
  impl_->acceptor.bind(ep);
  impl_->acceptor.listen();
  impl_->accept();
}

GameServer::~GameServer() { stop(); }

unsigned short GameServer::port() const { return impl_->acceptor.local_endpoint().port(); }

void GameServer::run() { impl_->ioc.run(); }

void GameServer::stop() { impl_->ioc.stop(); }

}  // namespace stackel::server
