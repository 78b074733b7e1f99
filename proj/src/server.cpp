/*
 * Copyright 2026 The tignn Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *    http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */
#include "tignn/server.hpp"

#include <boost/asio.hpp>
#include <boost/beast/core.hpp>
#include <boost/beast/websocket.hpp>

#include <chrono>
#include <deque>
#include <future>
#include <map>
#include <memory>
#include <mutex>
#include <ostream>
#include <thread>

namespace tignn {

namespace {

namespace net = boost::asio;
namespace beast = boost::beast;
namespace ws = beast::websocket;
using tcp = net::ip::tcp;

struct Inbound {
  enum Kind { Connect, Text, Disconnect } kind;
  long conn;
  std::string text;
};

class Hub;

class Connection : public std::enable_shared_from_this<Connection> {
 public:
  Connection(tcp::socket socket, Hub& hub, long id) : ws_(std::move(socket)), hub_(hub), id_(id) {}

  void start();
  void send(std::shared_ptr<const std::string> msg);
  void close();
  long id() const { return id_; }

 private:
  void read();
  void write_next();
  void drop(const char* where, beast::error_code ec);

  ws::stream<beast::tcp_stream> ws_;
  Hub& hub_;
  long id_;
  beast::flat_buffer buffer_;
  std::deque<std::shared_ptr<const std::string>> outbox_;
  bool open_ = false;
  bool dropped_ = false;
};

// Lives on the io thread except for push/pop, which the sim thread uses.
class Hub {
 public:
  explicit Hub(std::ostream* log) : log_(log) {}

  // New connections get frames only after their hello went out.
  void add(const std::shared_ptr<Connection>& c) { pending_[c->id()] = c; }
  void activate(long id) {
    if (auto node = pending_.extract(id)) conns_.insert(std::move(node));
  }
  void remove(long id) {
    if (conns_.erase(id) + pending_.erase(id)) push({Inbound::Disconnect, id, {}});
  }
  std::shared_ptr<Connection> find(long id) const {
    if (auto it = conns_.find(id); it != conns_.end()) return it->second;
    if (auto it = pending_.find(id); it != pending_.end()) return it->second;
    return nullptr;
  }
  void broadcast(const std::shared_ptr<const std::string>& msg) {
    for (auto& [id, c] : conns_) c->send(msg);
  }
  void close_all() {
    for (auto& [id, c] : conns_) c->close();
    for (auto& [id, c] : pending_) c->close();
  }

  void push(Inbound m) {
    std::lock_guard lock(mutex_);
    queue_.push_back(std::move(m));
  }
  std::deque<Inbound> drain() {
    std::lock_guard lock(mutex_);
    return std::exchange(queue_, {});
  }

  void log(const std::string& line) {
    if (!log_) return;
    std::lock_guard lock(log_mutex_);
    *log_ << line << std::endl;
  }

 private:
  std::ostream* log_;
  std::map<long, std::shared_ptr<Connection>> conns_, pending_;
  std::mutex mutex_, log_mutex_;
  std::deque<Inbound> queue_;
};

void Connection::start() {
  ws_.set_option(ws::stream_base::timeout::suggested(beast::role_type::server));
  ws_.async_accept([self = shared_from_this()](beast::error_code ec) {
    if (ec) return self->drop("handshake", ec);
    self->open_ = true;
    self->hub_.add(self);
    self->hub_.push({Inbound::Connect, self->id_, {}});
    self->hub_.log("client " + std::to_string(self->id_) + " connected");
    self->read();
    self->write_next();
  });
}

void Connection::read() {
  ws_.async_read(buffer_, [self = shared_from_this()](beast::error_code ec, std::size_t) {
    if (ec) return self->drop("read", ec);
    self->hub_.push({Inbound::Text, self->id_, beast::buffers_to_string(self->buffer_.data())});
    self->buffer_.consume(self->buffer_.size());
    self->read();
  });
}

void Connection::send(std::shared_ptr<const std::string> msg) {
  if (dropped_) return;
  outbox_.push_back(std::move(msg));
  if (open_ && outbox_.size() == 1) write_next();
}

void Connection::write_next() {
  if (outbox_.empty() || dropped_) return;
  ws_.text(true);
  ws_.async_write(net::buffer(*outbox_.front()), [self = shared_from_this()](beast::error_code ec, std::size_t) {
    if (ec) return self->drop("write", ec);
    self->outbox_.pop_front();
    self->write_next();
  });
}

void Connection::close() {
  if (!open_ || dropped_) return;
  ws_.async_close(ws::close_code::going_away, [self = shared_from_this()](beast::error_code) {});
}

void Connection::drop(const char* where, beast::error_code ec) {
  if (dropped_) return;
  dropped_ = true;
  outbox_.clear();
  if (ec != ws::error::closed) hub_.log("client " + std::to_string(id_) + " " + where + ": " + ec.message());
  hub_.log("client " + std::to_string(id_) + " disconnected");
  hub_.remove(id_);
}

void accept_loop(tcp::acceptor& acceptor, Hub& hub, long& next_id) {
  acceptor.async_accept([&acceptor, &hub, &next_id](beast::error_code ec, tcp::socket socket) {
    if (ec == net::error::operation_aborted) return;
    if (ec) {
      hub.log(std::string("accept: ") + ec.message());
    } else {
      std::make_shared<Connection>(std::move(socket), hub, next_id++)->start();
    }
    accept_loop(acceptor, hub, next_id);
  });
}

}  // namespace

void serve(Session& session, const ServeOptions& options) {
  net::io_context ioc;
  Hub hub(options.log);

  tcp::acceptor acceptor(ioc);
  beast::error_code ec;
  const auto address = net::ip::make_address(options.host, ec);
  if (ec) throw IoError("serve: bad host '" + options.host + "': " + ec.message());
  const tcp::endpoint endpoint(address, options.port);
  acceptor.open(endpoint.protocol(), ec);
  if (!ec) acceptor.set_option(net::socket_base::reuse_address(true), ec);
  if (!ec) acceptor.bind(endpoint, ec);
  if (!ec) acceptor.listen(net::socket_base::max_listen_connections, ec);
  if (ec) {
    throw IoError("serve: cannot listen on " + options.host + ":" + std::to_string(options.port) + ": " +
                  ec.message());
  }
  const unsigned short port = acceptor.local_endpoint().port();

  std::atomic<bool> stop{false};
  net::signal_set signals(ioc);
  if (options.handle_signals) {
    signals.add(SIGINT);
    signals.add(SIGTERM);
    signals.async_wait([&](beast::error_code e, int) {
      if (!e) stop = true;
    });
  }

  long next_id = 1;
  accept_loop(acceptor, hub, next_id);
  auto guard = net::make_work_guard(ioc);
  std::promise<void> io_done;
  auto io_finished = io_done.get_future();
  std::thread io([&] {
    ioc.run();
    io_done.set_value();
  });

  hub.log("listening on ws://" + options.host + ":" + std::to_string(port) + " (tick_dt " +
          std::to_string(session.tick_dt()) + " s, " + std::to_string(session.config().tick_hz) + " Hz)");
  if (options.on_listening) options.on_listening(port);

  auto send_to = [&](long id, const nlohmann::json& msg) {
    auto text = std::make_shared<const std::string>(msg.dump());
    net::post(ioc, [&hub, id, text] {
      if (auto c = hub.find(id)) c->send(text);
    });
  };

  const auto period = std::chrono::duration<double>(1.0 / session.config().tick_hz);
  auto next = std::chrono::steady_clock::now();
  try {
    while (!stop && !(options.stop && *options.stop) && (options.max_ticks == 0 || session.tick_index() < options.max_ticks)) {
      for (auto& m : hub.drain()) {
        if (m.kind == Inbound::Connect) {
          auto text = std::make_shared<const std::string>(session.hello().dump());
          net::post(ioc, [&hub, id = m.conn, text] {
            if (auto c = hub.find(id)) c->send(text);
            hub.activate(id);
          });
        } else if (m.kind == Inbound::Text) {
          for (const auto& reply : session.handle_message(std::string_view(m.text))) send_to(m.conn, reply);
        }
      }
      std::vector<nlohmann::json> notices;
      const nlohmann::json frame = session.tick(&notices);
      for (const auto& n : notices) {
        hub.log("tick " + std::to_string(session.tick_index()) + ": " + n.value("text", std::string()));
        auto text = std::make_shared<const std::string>(n.dump());
        net::post(ioc, [&hub, text] { hub.broadcast(text); });
      }
      auto text = std::make_shared<const std::string>(frame.dump());
      net::post(ioc, [&hub, text] { hub.broadcast(text); });

      next += std::chrono::duration_cast<std::chrono::steady_clock::duration>(period);
      const auto now = std::chrono::steady_clock::now();
      if (next > now)
        std::this_thread::sleep_until(next);
      else
        next = now;  // overrun: keep the fixed step, drop the lost wall time
    }
  } catch (...) {
    net::post(ioc, [&] {
      acceptor.close();
      hub.close_all();
      signals.cancel();
    });
    guard.reset();
    io.join();
    throw;
  }

  hub.log("stopping at tick " + std::to_string(session.tick_index()));
  net::post(ioc, [&] {
    acceptor.close();
    hub.close_all();
    signals.cancel();
  });
  guard.reset();
  // Close handshakes get a short grace period.
  if (io_finished.wait_for(std::chrono::seconds(2)) != std::future_status::ready) ioc.stop();
  io.join();
}

}  // namespace tignn
