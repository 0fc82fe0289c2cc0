#pragma once

#include <algorithm>
#include <condition_variable>
#include <cstdint>
#include <deque>
#include <functional>
#include <memory>
#include <mutex>
#include <string>
#include <utility>

#include <json.hpp>

#include "fedpat/common.hpp"

namespace fedpat {

// One protocol message. On the wire: 4-byte big-endian unsigned length,
// then that many bytes of UTF-8 JSON {type, round, client_id, payload}.
// Types: HELLO (client joins, dimension + participant check), GLOBAL
// (round-0 broadcast of the shared run parameters), UPDATE (client's
// encrypted centers), SUM (aggregated encrypted centers), BYE.
struct Message {
  std::string type;
  int round = 0;
  std::string client_id;
  nlohmann::json payload = nlohmann::json::object();
};

inline constexpr std::uint32_t kMaxFrameBytes = 1u << 28;  // 256 MiB cap

inline std::string encode_frame(const Message& m) {
  const nlohmann::json j{{"type", m.type},
                         {"round", m.round},
                         {"client_id", m.client_id},
                         {"payload", m.payload}};
  const std::string body = j.dump();
  if (body.size() > kMaxFrameBytes) {
    throw ProtocolError("frame body exceeds the size cap");
  }
  const auto len = static_cast<std::uint32_t>(body.size());
  std::string frame;
  frame.reserve(4 + body.size());
  frame.push_back(static_cast<char>((len >> 24) & 0xff));
  frame.push_back(static_cast<char>((len >> 16) & 0xff));
  frame.push_back(static_cast<char>((len >> 8) & 0xff));
  frame.push_back(static_cast<char>(len & 0xff));
  frame += body;
  return frame;
}

// Reads exactly `len` bytes into `dst`; returns false on clean EOF before
// any byte arrives, throws mid-read.
using ByteReader = std::function<bool(char* dst, std::size_t len)>;

inline Message decode_frame(const ByteReader& read_exact) {
  unsigned char hdr[4];
  if (!read_exact(reinterpret_cast<char*>(hdr), 4)) {
    throw ProtocolError("peer closed the connection");
  }
  const std::uint32_t len = (std::uint32_t(hdr[0]) << 24) |
                            (std::uint32_t(hdr[1]) << 16) |
                            (std::uint32_t(hdr[2]) << 8) | std::uint32_t(hdr[3]);
  if (len == 0 || len > kMaxFrameBytes) {
    throw ProtocolError("frame length out of range");
  }
  std::string body(len, '\0');
  if (!read_exact(body.data(), len)) {
    throw ProtocolError("connection closed mid-frame");
  }
  nlohmann::json j = nlohmann::json::parse(body, nullptr, false);
  if (j.is_discarded() || !j.is_object()) {
    throw ProtocolError("frame body is not a JSON object");
  }
  Message m;
  try {
    m.type = j.at("type").get<std::string>();
    m.round = j.at("round").get<int>();
    m.client_id = j.at("client_id").get<std::string>();
    m.payload = j.value("payload", nlohmann::json::object());
  } catch (const nlohmann::json::exception& e) {
    throw ProtocolError(std::string("frame missing required fields: ") +
                        e.what());
  }
  return m;
}

class FrameTransport {
 public:
  virtual ~FrameTransport() = default;
  virtual void send(const Message& m) = 0;
  virtual Message recv() = 0;
  virtual void close() {}
};

namespace detail {

struct FrameQueue {
  std::mutex mu;
  std::condition_variable cv;
  std::deque<std::string> frames;
  bool closed = false;

  void push(std::string frame) {
    {
      std::lock_guard<std::mutex> lock(mu);
      if (closed) throw ProtocolError("channel closed");
      frames.push_back(std::move(frame));
    }
    cv.notify_one();
  }

  // Blocks for the next frame; empty optional means closed and drained.
  bool pop(std::string& out) {
    std::unique_lock<std::mutex> lock(mu);
    cv.wait(lock, [&] { return !frames.empty() || closed; });
    if (frames.empty()) return false;
    out = std::move(frames.front());
    frames.pop_front();
    return true;
  }

  void close_queue() {
    {
      std::lock_guard<std::mutex> lock(mu);
      closed = true;
    }
    cv.notify_all();
  }
};

}  // namespace detail

// In-process channel end. Frames still pass through encode_frame /
// decode_frame, so simulations exercise the exact wire codec.
class QueueTransport final : public FrameTransport {
 public:
  QueueTransport(std::shared_ptr<detail::FrameQueue> out,
                 std::shared_ptr<detail::FrameQueue> in)
      : out_(std::move(out)), in_(std::move(in)) {}

  ~QueueTransport() override { close(); }

  void send(const Message& m) override { out_->push(encode_frame(m)); }

  Message recv() override {
    return decode_frame([this](char* dst, std::size_t len) {
      std::size_t got = 0;
      while (got < len) {
        if (pos_ == buf_.size()) {
          if (!in_->pop(buf_)) {
            if (got == 0) return false;
            throw ProtocolError("channel closed mid-frame");
          }
          pos_ = 0;
        }
        const std::size_t take = std::min(len - got, buf_.size() - pos_);
        std::copy_n(buf_.data() + pos_, take, dst + got);
        pos_ += take;
        got += take;
      }
      return true;
    });
  }

  void close() override {
    out_->close_queue();
    in_->close_queue();
  }

 private:
  std::shared_ptr<detail::FrameQueue> out_, in_;
  std::string buf_;
  std::size_t pos_ = 0;
};

// A connected pair of in-process endpoints.
inline std::pair<std::unique_ptr<FrameTransport>, std::unique_ptr<FrameTransport>>
make_duplex_pair() {
  auto a2b = std::make_shared<detail::FrameQueue>();
  auto b2a = std::make_shared<detail::FrameQueue>();
  return {std::make_unique<QueueTransport>(a2b, b2a),
          std::make_unique<QueueTransport>(b2a, a2b)};
}

}  // namespace fedpat
