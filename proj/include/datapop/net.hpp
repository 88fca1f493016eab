// Copyright 2026 The DataPop Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Socket transports for ServerCore: newline-delimited JSON over TCP, and one
// JSON message per text frame over WebSocket for browser clients. Everything
// runs on a single io_context thread, so ServerCore needs no locking.

#pragma once

#include <boost/asio.hpp>
#include <boost/beast/core.hpp>
#include <boost/beast/websocket.hpp>

#include <chrono>
#include <deque>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>

#include "datapop/server_core.hpp"

namespace datapop::net {

namespace asio = boost::asio;
namespace beast = boost::beast;
namespace websocket = beast::websocket;
using tcp = asio::ip::tcp;

inline constexpr std::size_t kMaxLineBytes = 64 * 1024;

inline Timestamp wall_clock_now() {
  return std::chrono::duration_cast<Duration>(
      std::chrono::system_clock::now().time_since_epoch());
}

class Link {
 public:
  virtual ~Link() = default;
  virtual void deliver(const Message& msg) = 0;
  virtual void close() = 0;
};

namespace detail {

// Common callbacks a link uses to talk back to the server.
struct Hooks {
  std::function<void(ConnectionId, std::string_view)> on_line;
  std::function<void(ConnectionId)> on_closed;
};

class LineLink : public Link, public std::enable_shared_from_this<LineLink> {
 public:
  LineLink(tcp::socket socket, ConnectionId id, Hooks hooks)
      : socket_(std::move(socket)), buffer_(kMaxLineBytes), id_(id), hooks_(std::move(hooks)) {}

  void start() { read(); }

  void deliver(const Message& msg) override {
    if (closed_) return;
    queue_.push_back(encode_message(msg));
    if (queue_.size() == 1) write();
  }

  void close() override {
    if (closed_) return;
    closed_ = true;
    beast::error_code ignored;
    socket_.shutdown(tcp::socket::shutdown_both, ignored);
    socket_.close(ignored);
    hooks_.on_closed(id_);
  }

 private:
  void read() {
    asio::async_read_until(
        socket_, buffer_, '\n',
        [self = shared_from_this()](beast::error_code ec, std::size_t n) {
          if (ec) return self->close();
          std::string line(asio::buffers_begin(self->buffer_.data()),
                           asio::buffers_begin(self->buffer_.data()) +
                               static_cast<std::ptrdiff_t>(n));
          self->buffer_.consume(n);
          if (line.find_first_not_of(" \t\r\n") != std::string::npos) {
            self->hooks_.on_line(self->id_, line);
          }
          if (!self->closed_) self->read();
        });
  }

  void write() {
    asio::async_write(socket_, asio::buffer(queue_.front()),
                      [self = shared_from_this()](beast::error_code ec, std::size_t) {
                        if (ec) return self->close();
                        self->queue_.pop_front();
                        if (!self->queue_.empty()) self->write();
                      });
  }

  tcp::socket socket_;
  asio::streambuf buffer_;
  ConnectionId id_;
  Hooks hooks_;
  std::deque<std::string> queue_;
  bool closed_ = false;
};

class FrameLink : public Link, public std::enable_shared_from_this<FrameLink> {
 public:
  FrameLink(tcp::socket socket, ConnectionId id, Hooks hooks)
      : ws_(std::move(socket)), id_(id), hooks_(std::move(hooks)) {}

  void start() {
    ws_.read_message_max(kMaxLineBytes);
    ws_.text(true);
    ws_.async_accept([self = shared_from_this()](beast::error_code ec) {
      if (ec) return self->close();
      self->accepted_ = true;
      if (!self->queue_.empty()) self->write();
      self->read();
    });
  }

  void deliver(const Message& msg) override {
    if (closed_) return;
    queue_.push_back(encode_frame(msg));
    if (accepted_ && queue_.size() == 1) write();
  }

  void close() override {
    if (closed_) return;
    closed_ = true;
    beast::error_code ignored;
    beast::get_lowest_layer(ws_).shutdown(tcp::socket::shutdown_both, ignored);
    beast::get_lowest_layer(ws_).close(ignored);
    hooks_.on_closed(id_);
  }

 private:
  void read() {
    ws_.async_read(buffer_, [self = shared_from_this()](beast::error_code ec, std::size_t) {
      if (ec) return self->close();
      const std::string frame = beast::buffers_to_string(self->buffer_.data());
      self->buffer_.consume(self->buffer_.size());
      self->hooks_.on_line(self->id_, frame);
      if (!self->closed_) self->read();
    });
  }

  void write() {
    ws_.async_write(asio::buffer(queue_.front()),
                    [self = shared_from_this()](beast::error_code ec, std::size_t) {
                      if (ec) return self->close();
                      self->queue_.pop_front();
                      if (!self->queue_.empty()) self->write();
                    });
  }

  websocket::stream<tcp::socket> ws_;
  beast::flat_buffer buffer_;
  ConnectionId id_;
  Hooks hooks_;
  std::deque<std::string> queue_;
  bool accepted_ = false;
  bool closed_ = false;
};

}  // namespace detail

struct ListenOptions {
  std::string address = "127.0.0.1";
  std::uint16_t line_port = 0;  // 0 picks a free port
  std::optional<std::uint16_t> ws_port;
  Duration tick_interval{100};
  std::function<Timestamp()> clock = wall_clock_now;
};

class Server {
 public:
  Server(asio::io_context& io, ServerCore& core, ListenOptions options)
      : core_(core),
        options_(std::move(options)),
        line_acceptor_(io, endpoint(options_.line_port)),
        timer_(io) {
    if (options_.ws_port) {
      ws_acceptor_.emplace(io, endpoint(*options_.ws_port));
    }
  }

  std::uint16_t line_port() const { return line_acceptor_.local_endpoint().port(); }
  std::optional<std::uint16_t> ws_port() const {
    if (!ws_acceptor_) return std::nullopt;
    return ws_acceptor_->local_endpoint().port();
  }
  std::size_t connections() const { return links_.size(); }

  void start() {
    accept_lines();
    if (ws_acceptor_) accept_frames();
    schedule_tick();
  }

  void stop() {
    stopped_ = true;
    beast::error_code ignored;
    line_acceptor_.close(ignored);
    if (ws_acceptor_) ws_acceptor_->close(ignored);
    timer_.cancel();
    auto links = links_;
    for (auto& [id, link] : links) link->close();
  }

 private:
  tcp::endpoint endpoint(std::uint16_t port) const {
    return {asio::ip::make_address(options_.address), port};
  }

  detail::Hooks hooks() {
    return {[this](ConnectionId id, std::string_view line) {
              dispatch(core_.handle_line(id, line, options_.clock()));
            },
            [this](ConnectionId id) {
              links_.erase(id);
              dispatch(core_.disconnect(id, options_.clock()));
            }};
  }

  void accept_lines() {
    line_acceptor_.async_accept([this](beast::error_code ec, tcp::socket socket) {
      if (stopped_) return;
      if (!ec) {
        const ConnectionId id = core_.connect(options_.clock());
        auto link = std::make_shared<detail::LineLink>(std::move(socket), id, hooks());
        links_[id] = link;
        link->start();
      }
      accept_lines();
    });
  }

  void accept_frames() {
    ws_acceptor_->async_accept([this](beast::error_code ec, tcp::socket socket) {
      if (stopped_) return;
      if (!ec) {
        const ConnectionId id = core_.connect(options_.clock());
        auto link = std::make_shared<detail::FrameLink>(std::move(socket), id, hooks());
        links_[id] = link;
        link->start();
      }
      accept_frames();
    });
  }

  void schedule_tick() {
    timer_.expires_after(options_.tick_interval);
    timer_.async_wait([this](beast::error_code ec) {
      if (ec || stopped_) return;
      dispatch(core_.tick(options_.clock()));
      for (ConnectionId id : core_.take_dropped()) {
        if (auto it = links_.find(id); it != links_.end()) {
          auto link = it->second;  // close() erases the map entry
          link->close();
        }
      }
      schedule_tick();
    });
  }

  void dispatch(const std::vector<Delivery>& deliveries) {
    for (const auto& d : deliveries) {
      if (auto it = links_.find(d.connection); it != links_.end()) {
        it->second->deliver(d.message);
      }
    }
  }

  ServerCore& core_;
  ListenOptions options_;
  tcp::acceptor line_acceptor_;
  std::optional<tcp::acceptor> ws_acceptor_;
  asio::steady_timer timer_;
  std::map<ConnectionId, std::shared_ptr<Link>> links_;
  bool stopped_ = false;
};

}  // namespace datapop::net
