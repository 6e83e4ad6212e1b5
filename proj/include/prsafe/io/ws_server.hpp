#pragma once

#include <deque>
#include <memory>
#include <mutex>
#include <set>
#include <string>
#include <thread>

#include <boost/asio/ip/tcp.hpp>
#include <boost/asio/post.hpp>
#include <boost/asio/strand.hpp>
#include <boost/beast/core.hpp>
#include <boost/beast/websocket.hpp>

#include "prsafe/io/session.hpp"

namespace prsafe::io {

namespace net = boost::asio;
namespace beast = boost::beast;
namespace websocket = beast::websocket;
using tcp = net::ip::tcp;

/// WebSocket front end of a Session. All socket work happens on one I/O
/// thread; the control thread only posts wake-ups.
class TelemetryServer {
 public:
  TelemetryServer(Session& session, unsigned short port, const std::string& address = "127.0.0.1")
      : session_(session), acceptor_(ioc_, {net::ip::make_address(address), port}) {
    session_.set_notifier([this] { net::post(ioc_, [this] { flush_all(); }); });
  }

  ~TelemetryServer() { stop(); }

  unsigned short port() const { return acceptor_.local_endpoint().port(); }

  void start() {
    accept();
    thread_ = std::thread([this] { ioc_.run(); });
  }

  void stop() {
    if (!thread_.joinable()) return;
    net::post(ioc_, [this] {
      beast::error_code ec;
      acceptor_.close(ec);
      for (const auto& c : connections_) c->close();
    });
    ioc_.stop();
    thread_.join();
    session_.set_notifier({});
  }

 private:
  class Connection : public std::enable_shared_from_this<Connection> {
   public:
    Connection(TelemetryServer& server, tcp::socket socket) : server_(server), ws_(std::move(socket)) {}

    void open() {
      ws_.set_option(websocket::stream_base::timeout::suggested(beast::role_type::server));
      ws_.async_accept([self = shared_from_this()](beast::error_code ec) {
        if (ec) return self->finish();
        self->id_ = self->server_.session_.connect();
        self->open_ = true;
        self->read();
        self->flush();
      });
    }

    void flush() {
      if (open_) write();
    }

    void close() {
      if (!open_) return;
      beast::error_code ec;
      ws_.next_layer().close(ec);
    }

   private:
    void read() {
      ws_.async_read(buffer_, [self = shared_from_this()](beast::error_code ec, std::size_t) {
        if (ec) return self->finish();
        self->server_.session_.submit(self->id_, beast::buffers_to_string(self->buffer_.data()));
        self->buffer_.consume(self->buffer_.size());
        self->flush();
        self->read();
      });
    }

    // Pulls from the session only when idle, so a slow socket leaves the
    // backlog in the session's bounded queue.
    void write() {
      if (writing_) return;
      if (out_.empty()) {
        for (auto& f : server_.session_.drain(id_)) out_.push_back(std::move(f));
      }
      if (out_.empty()) return;
      writing_ = true;
      ws_.text(true);
      ws_.async_write(net::buffer(out_.front()), [self = shared_from_this()](beast::error_code ec, std::size_t) {
        self->writing_ = false;
        if (ec) return self->finish();
        self->out_.pop_front();
        self->write();
      });
    }

    void finish() {
      if (open_) server_.session_.disconnect(id_);
      open_ = false;
      server_.connections_.erase(shared_from_this());
    }

    TelemetryServer& server_;
    websocket::stream<tcp::socket> ws_;
    beast::flat_buffer buffer_;
    std::deque<std::string> out_;
    Session::ClientId id_ = 0;
    bool open_ = false;
    bool writing_ = false;
  };

  void accept() {
    acceptor_.async_accept([this](beast::error_code ec, tcp::socket socket) {
      if (ec) return;
      auto c = std::make_shared<Connection>(*this, std::move(socket));
      connections_.insert(c);
      c->open();
      accept();
    });
  }

  void flush_all() {
    for (const auto& c : std::set<std::shared_ptr<Connection>>(connections_)) c->flush();
  }

  Session& session_;
  net::io_context ioc_{1};
  tcp::acceptor acceptor_;
  std::set<std::shared_ptr<Connection>> connections_;
  std::thread thread_;
};

}  // namespace prsafe::io
