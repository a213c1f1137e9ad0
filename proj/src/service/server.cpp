/*
 * Copyright 2026 The coplank Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include "coplank/service/server.hpp"

#include "coplank/errors.hpp"

#include <boost/asio.hpp>
#include <boost/beast/core.hpp>
#include <boost/beast/http.hpp>
#include <boost/beast/websocket.hpp>
#include <json.hpp>

#include <atomic>
#include <chrono>
#include <condition_variable>
#include <deque>
#include <iostream>
#include <map>
#include <mutex>
#include <thread>

namespace coplank::service {

namespace beast = boost::beast;
namespace http = beast::http;
namespace websocket = beast::websocket;
namespace net = boost::asio;
using tcp = net::ip::tcp;
using nlohmann::json;

using Logger = std::function<void(const std::string&)>;

namespace {

class WsConnection;

// Owns one Session and its control thread. The Session object itself is
// touched only by that thread once the loop runs.
class LiveSession {
public:
    LiveSession(Session session, std::string checkpoint, double time_scale, std::filesystem::path log_dir,
                Logger log)
        : session_(std::move(session)),
          id_(session_.id()),
          checkpoint_(std::move(checkpoint)),
          time_scale_(time_scale),
          log_dir_(std::move(log_dir)),
          log_(std::move(log)),
          mode_(static_cast<int>(session_.mode()))
    {
    }
    ~LiveSession() { stop(); }

    const std::string& id() const { return id_; }

    bool attach(const std::shared_ptr<WsConnection>& conn);
    void detach(const WsConnection* conn);
    bool connected() const
    {
        std::lock_guard lk(mu_);
        return !conn_.expired();
    }

    /// Network thread: latest hand command wins, control messages queue.
    void receive(ClientMessage m)
    {
        std::lock_guard lk(mu_);
        if (auto* h = std::get_if<HandCommand>(&m)) {
            hand_ = *h;
        } else {
            control_.push_back(std::move(m));
        }
    }

    void stop();

    SessionInfo info() const
    {
        SessionInfo i;
        i.id = id_;
        i.checkpoint = checkpoint_;
        i.mode = static_cast<Mode>(mode_.load());
        i.frames = frames_.load();
        i.connected = connected();
        return i;
    }

private:
    void loop();
    void publish(std::string text);

    Session session_;
    const std::string id_;
    const std::string checkpoint_;
    const double time_scale_;
    const std::filesystem::path log_dir_;
    Logger log_;

    mutable std::mutex mu_;
    std::condition_variable cv_;
    std::optional<HandCommand> hand_;
    std::deque<ClientMessage> control_;
    std::weak_ptr<WsConnection> conn_;
    bool started_ = false;
    bool stopping_ = false;
    std::thread thread_;

    std::atomic<int> mode_;
    std::atomic<std::int64_t> frames_{0};
};

class WsConnection : public std::enable_shared_from_this<WsConnection> {
public:
    WsConnection(tcp::socket&& socket, std::shared_ptr<LiveSession> live, Logger log)
        : ws_(std::move(socket)), live_(std::move(live)), log_(std::move(log))
    {
    }

    void start(http::request<http::string_body> req)
    {
        ws_.set_option(websocket::stream_base::timeout::suggested(beast::role_type::server));
        ws_.async_accept(req, beast::bind_front_handler(&WsConnection::on_accept, shared_from_this()));
    }

    // Called from any thread. An unsent state frame is replaced, never queued.
    void send_state(std::string text)
    {
        net::post(ws_.get_executor(), [self = shared_from_this(), t = std::move(text)]() mutable {
            self->latest_ = std::move(t);
            self->has_latest_ = true;
            self->flush();
        });
    }

    void send_error(std::string text)
    {
        net::post(ws_.get_executor(), [self = shared_from_this(), t = std::move(text)]() mutable {
            self->errors_.push_back(std::move(t));
            self->flush();
        });
    }

    void close()
    {
        net::post(ws_.get_executor(), [self = shared_from_this()] {
            if (self->closing_) return;
            self->closing_ = true;
            self->ws_.async_close(websocket::close_code::normal, [self](beast::error_code) {});
        });
    }

private:
    void on_accept(beast::error_code ec)
    {
        if (ec) return;
        if (!live_->attach(shared_from_this())) {
            errors_.push_back(encode_error("session " + live_->id() + " already has a client"));
            closing_after_flush_ = true;
            flush();
            return;
        }
        do_read();
    }

    void do_read()
    {
        ws_.async_read(buffer_, beast::bind_front_handler(&WsConnection::on_read, shared_from_this()));
    }

    void on_read(beast::error_code ec, std::size_t)
    {
        if (ec) {
            live_->detach(this);
            return;
        }
        const std::string text = beast::buffers_to_string(buffer_.data());
        buffer_.consume(buffer_.size());
        try {
            ClientMessage m = parse_client_message(text);
            if (const auto* u = std::get_if<UnknownMessage>(&m)) {
                if (log_) log_("session " + live_->id() + ": ignoring unknown message type '" + u->type + "'");
            } else {
                live_->receive(std::move(m));
            }
        } catch (const LoadError& e) {
            errors_.push_back(encode_error(e.what()));
            flush();
        }
        do_read();
    }

    void flush()
    {
        if (writing_ || closing_) return;
        if (!errors_.empty()) {
            out_ = std::move(errors_.front());
            errors_.pop_front();
        } else if (has_latest_) {
            out_ = std::move(latest_);
            has_latest_ = false;
        } else {
            if (closing_after_flush_) close();
            return;
        }
        writing_ = true;
        ws_.text(true);
        ws_.async_write(net::buffer(out_), beast::bind_front_handler(&WsConnection::on_write, shared_from_this()));
    }

    void on_write(beast::error_code ec, std::size_t)
    {
        writing_ = false;
        if (ec) return;
        flush();
    }

    websocket::stream<beast::tcp_stream> ws_;
    std::shared_ptr<LiveSession> live_;
    Logger log_;
    beast::flat_buffer buffer_;
    std::string out_;
    std::string latest_;
    bool has_latest_ = false;
    std::deque<std::string> errors_;
    bool writing_ = false;
    bool closing_ = false;
    bool closing_after_flush_ = false;
};

bool LiveSession::attach(const std::shared_ptr<WsConnection>& conn)
{
    std::lock_guard lk(mu_);
    if (!conn_.expired() || stopping_) return false;
    conn_ = conn;
    if (!started_) {
        started_ = true;
        thread_ = std::thread([this] { loop(); });
    }
    return true;
}

void LiveSession::detach(const WsConnection* conn)
{
    std::lock_guard lk(mu_);
    if (conn_.lock().get() == conn) conn_.reset();
}

void LiveSession::publish(std::string text)
{
    std::shared_ptr<WsConnection> c;
    {
        std::lock_guard lk(mu_);
        c = conn_.lock();
    }
    if (c) c->send_state(std::move(text));
}

void LiveSession::loop()
{
    using clock = std::chrono::steady_clock;
    const auto period = std::chrono::duration_cast<clock::duration>(
        std::chrono::duration<double>(session_.control_period() * time_scale_));
    publish(encode_state(session_.initial_frame()));
    auto next = clock::now();
    for (;;) {
        next += period;
        if (clock::now() > next + period) next = clock::now(); // fell behind: skip, never burst
        std::optional<HandCommand> hand;
        std::deque<ClientMessage> control;
        {
            std::unique_lock lk(mu_);
            if (cv_.wait_until(lk, next, [this] { return stopping_; })) break;
            hand.swap(hand_);
            control.swap(control_);
        }
        for (const ClientMessage& m : control) {
            session_.apply(m);
            if (std::holds_alternative<ResetCommand>(m)) publish(encode_state(session_.initial_frame()));
        }
        const StateFrame f = session_.tick(hand);
        mode_ = static_cast<int>(session_.mode());
        frames_ = session_.metrics().frames;
        publish(encode_state(f));
    }
}

void LiveSession::stop()
{
    std::shared_ptr<WsConnection> c;
    {
        std::lock_guard lk(mu_);
        if (stopping_) return;
        stopping_ = true;
        c = conn_.lock();
    }
    cv_.notify_all();
    if (thread_.joinable()) thread_.join();
    if (c) c->close();
    if (!log_dir_.empty() && session_.metrics().frames > 0) {
        try {
            std::filesystem::create_directories(log_dir_);
            session_.write_log(log_dir_ / ("session_" + id_ + ".csv"));
        } catch (const std::exception& e) {
            if (log_) log_(std::string("frame log not written: ") + e.what());
        }
    }
}

json info_json(const SessionInfo& i)
{
    return json{{"id", i.id},
                {"checkpoint", i.checkpoint},
                {"mode", to_string(i.mode)},
                {"frames", i.frames},
                {"connected", i.connected}};
}

} // namespace

std::filesystem::path resolve_checkpoint(const std::filesystem::path& dir, const std::string& name)
{
    if (name.empty() || name.find('/') != std::string::npos || name.find('\\') != std::string::npos ||
        name == "." || name == "..")
        throw LoadError("invalid checkpoint name '" + name + "'");
    for (const std::string& candidate : {name, name + ".txt"}) {
        const auto p = dir / candidate;
        if (std::filesystem::is_regular_file(p)) return p;
    }
    throw LoadError("no checkpoint named '" + name + "' in " + dir.string());
}

struct Server::Impl : std::enable_shared_from_this<Server::Impl> {
    explicit Impl(ServerOptions o) : opt(std::move(o)), acceptor(ioc) {}

    ServerOptions opt;
    net::io_context ioc;
    tcp::acceptor acceptor;
    std::thread net_thread;
    unsigned short bound_port = 0;

    mutable std::mutex mu;
    std::map<std::string, std::shared_ptr<LiveSession>> live;
    int next_id = 1;

    std::mutex stop_mu;
    std::condition_variable stop_cv;
    bool stopped = false;
    bool finished = false;

    void log(const std::string& msg) const
    {
        if (opt.log) opt.log(msg);
    }

    std::shared_ptr<LiveSession> find(const std::string& id) const
    {
        std::lock_guard lk(mu);
        const auto it = live.find(id);
        return it == live.end() ? nullptr : it->second;
    }

    std::string create(const std::string& name)
    {
        const auto path = resolve_checkpoint(opt.checkpoint_dir, name);
        std::string id;
        {
            std::lock_guard lk(mu);
            id = "s" + std::to_string(next_id++);
        }
        Session s = Session::open(id, path, opt.scenario, opt.session);
        auto ls = std::make_shared<LiveSession>(std::move(s), name, opt.time_scale, opt.log_dir, opt.log);
        std::lock_guard lk(mu);
        live.emplace(id, std::move(ls));
        log("session " + id + " created from " + path.string());
        return id;
    }

    std::vector<SessionInfo> list() const
    {
        std::vector<std::shared_ptr<LiveSession>> copy;
        {
            std::lock_guard lk(mu);
            for (const auto& [id, s] : live) copy.push_back(s);
        }
        std::vector<SessionInfo> out;
        for (const auto& s : copy) out.push_back(s->info());
        return out;
    }

    void do_accept();
};

namespace {

class HttpConnection : public std::enable_shared_from_this<HttpConnection> {
public:
    HttpConnection(tcp::socket&& socket, std::shared_ptr<Server::Impl> server)
        : stream_(std::move(socket)), server_(std::move(server))
    {
    }

    void start()
    {
        stream_.expires_after(std::chrono::seconds(30));
        http::async_read(stream_, buffer_, req_,
                         beast::bind_front_handler(&HttpConnection::on_read, shared_from_this()));
    }

private:
    void on_read(beast::error_code ec, std::size_t)
    {
        if (ec) return;
        const std::string target(req_.target());
        if (websocket::is_upgrade(req_)) {
            const std::string prefix = "/sessions/";
            const std::string suffix = "/ws";
            if (target.rfind(prefix, 0) == 0 && target.size() > prefix.size() + suffix.size() &&
                target.compare(target.size() - suffix.size(), suffix.size(), suffix) == 0) {
                const std::string id =
                    target.substr(prefix.size(), target.size() - prefix.size() - suffix.size());
                auto live = server_->find(id);
                if (!live) return respond(http::status::not_found, error_body("no session '" + id + "'"));
                if (live->connected())
                    return respond(http::status::conflict, error_body("session '" + id + "' already has a client"));
                stream_.expires_never();
                std::make_shared<WsConnection>(stream_.release_socket(), std::move(live), server_->opt.log)
                    ->start(std::move(req_));
                return;
            }
            return respond(http::status::not_found, error_body("no WebSocket endpoint at " + target));
        }

        if (target == "/sessions" && req_.method() == http::verb::get) {
            json arr = json::array();
            for (const SessionInfo& i : server_->list()) arr.push_back(info_json(i));
            return respond(http::status::ok, json{{"sessions", arr}}.dump());
        }
        if (target == "/sessions" && req_.method() == http::verb::post) {
            std::string name;
            try {
                const json body = json::parse(req_.body());
                name = body.at("checkpoint").get<std::string>();
            } catch (const json::exception&) {
                return respond(http::status::bad_request,
                               error_body("body must be a JSON object with a string 'checkpoint'"));
            }
            try {
                const std::string id = server_->create(name);
                return respond(http::status::created, json{{"id", id}, {"ws", "/sessions/" + id + "/ws"}}.dump());
            } catch (const Error& e) {
                return respond(http::status::bad_request, error_body(e.what()));
            }
        }
        if (target == "/sessions")
            return respond(http::status::method_not_allowed, error_body("use GET or POST on /sessions"));
        respond(http::status::not_found, error_body("no endpoint at " + target));
    }

    static std::string error_body(const std::string& msg) { return encode_error(msg); }

    void respond(http::status status, std::string body)
    {
        res_ = std::make_shared<http::response<http::string_body>>(status, req_.version());
        res_->set(http::field::content_type, "application/json");
        res_->keep_alive(false);
        res_->body() = std::move(body);
        res_->prepare_payload();
        http::async_write(stream_, *res_, [self = shared_from_this()](beast::error_code, std::size_t) {
            beast::error_code ignored;
            self->stream_.socket().shutdown(tcp::socket::shutdown_send, ignored);
        });
    }

    beast::tcp_stream stream_;
    std::shared_ptr<Server::Impl> server_;
    beast::flat_buffer buffer_;
    http::request<http::string_body> req_;
    std::shared_ptr<http::response<http::string_body>> res_;
};

} // namespace

void Server::Impl::do_accept()
{
    acceptor.async_accept([self = shared_from_this()](beast::error_code ec, tcp::socket socket) {
        if (ec) return; // acceptor closed
        std::make_shared<HttpConnection>(std::move(socket), self)->start();
        self->do_accept();
    });
}

Server::Server(ServerOptions options)
{
    if (!(options.time_scale > 0.0)) throw ConfigError("time_scale must be positive");
    if (!options.log) options.log = [](const std::string& m) { std::cerr << "coplank serve: " << m << '\n'; };
    options.scenario.validate();
    impl_ = std::make_shared<Impl>(std::move(options));
}

Server::~Server()
{
    stop();
}

void Server::start()
{
    beast::error_code ec;
    const auto address = net::ip::make_address(impl_->opt.address, ec);
    if (ec) throw ConfigError("bad listen address '" + impl_->opt.address + "'");
    const tcp::endpoint ep(address, impl_->opt.port);
    impl_->acceptor.open(ep.protocol(), ec);
    if (!ec) impl_->acceptor.set_option(net::socket_base::reuse_address(true), ec);
    if (!ec) impl_->acceptor.bind(ep, ec);
    if (!ec) impl_->acceptor.listen(net::socket_base::max_listen_connections, ec);
    if (ec) throw IoError("cannot listen on " + impl_->opt.address + ":" + std::to_string(impl_->opt.port) + ": " +
                          ec.message());
    impl_->bound_port = impl_->acceptor.local_endpoint().port();
    impl_->do_accept();
    impl_->net_thread = std::thread([impl = impl_] { impl->ioc.run(); });
    impl_->log("listening on " + impl_->opt.address + ":" + std::to_string(impl_->bound_port));
}

void Server::stop()
{
    if (!impl_) return;
    {
        std::lock_guard lk(impl_->stop_mu);
        if (impl_->stopped) return;
        impl_->stopped = true;
    }
    std::map<std::string, std::shared_ptr<LiveSession>> sessions;
    {
        std::lock_guard lk(impl_->mu);
        sessions.swap(impl_->live);
    }
    for (auto& [id, s] : sessions) s->stop();
    net::post(impl_->ioc, [impl = impl_] {
        beast::error_code ignored;
        impl->acceptor.close(ignored);
    });
    if (impl_->net_thread.joinable()) {
        // Give close frames a moment to leave before tearing the loop down.
        std::this_thread::sleep_for(std::chrono::milliseconds(50));
        impl_->ioc.stop();
        impl_->net_thread.join();
    }
    {
        std::lock_guard lk(impl_->stop_mu);
        impl_->finished = true;
    }
    impl_->stop_cv.notify_all();
}

void Server::wait()
{
    std::unique_lock lk(impl_->stop_mu);
    impl_->stop_cv.wait(lk, [this] { return impl_->finished; });
}

unsigned short Server::port() const
{
    return impl_->bound_port;
}

std::string Server::create_session(const std::string& checkpoint_name)
{
    return impl_->create(checkpoint_name);
}

std::vector<SessionInfo> Server::sessions() const
{
    return impl_->list();
}

} // namespace coplank::service
