#include "primematch/net.h"

#include <arpa/inet.h>
#include <netdb.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <sodium.h>
#include <sys/socket.h>
#include <unistd.h>

#include <algorithm>
#include <cstring>
#include <sstream>

#include "primematch/sodium_init.h"

namespace primematch {

std::string_view msg_type_name(MsgType t) {
  switch (t) {
    case MsgType::Hello: return "Hello";
    case MsgType::Welcome: return "Welcome";
    case MsgType::RegisterOrders: return "RegisterOrders";
    case MsgType::RegisterAck: return "RegisterAck";
    case MsgType::PairStart: return "PairStart";
    case MsgType::AuctionDone: return "AuctionDone";
    case MsgType::Abort: return "Abort";
    case MsgType::RouteError: return "RouteError";
    case MsgType::Fill: return "Fill";
    case MsgType::Handshake1: return "Handshake1";
    case MsgType::Handshake2: return "Handshake2";
    case MsgType::Handshake3: return "Handshake3";
    case MsgType::Sealed: return "Sealed";
    case MsgType::CoinCommit: return "CoinCommit";
    case MsgType::CoinReveal: return "CoinReveal";
    case MsgType::CoinOpen: return "CoinOpen";
    case MsgType::ShareExchange: return "ShareExchange";
    case MsgType::CommittedShares: return "CommittedShares";
    case MsgType::DShares: return "DShares";
    case MsgType::DSharesMalicious: return "DSharesMalicious";
    case MsgType::Verdict: return "Verdict";
    case MsgType::Reveal: return "Reveal";
    case MsgType::MinNotice: return "MinNotice";
    case MsgType::SessionDone: return "SessionDone";
    case MsgType::B2CStatement: return "B2CStatement";
    case MsgType::B2CReply: return "B2CReply";
    case MsgType::B2CVerdict: return "B2CVerdict";
    case MsgType::B2CClientReveal: return "B2CClientReveal";
    case MsgType::B2COutcome: return "B2COutcome";
  }
  return "Unknown";
}

bool is_known_msg_type(uint16_t t) { return msg_type_name(static_cast<MsgType>(t)) != "Unknown"; }

// ---------------------------------------------------------------------------
// Frames

Bytes encode_frame(const Frame& f, size_t max_frame) {
  const size_t len = 1 + 2 + f.body.size();
  if (4 + len > max_frame) throw DecodeError("frame exceeds size limit");
  ByteWriter w;
  w.put_u32(static_cast<uint32_t>(len));
  w.put_u8(f.version);
  w.put_u16(f.type);
  w.put_raw(f.body);
  return std::move(w).bytes();
}

Frame decode_frame(std::span<const uint8_t> bytes, size_t max_frame) {
  if (bytes.size() > max_frame) throw DecodeError("frame exceeds size limit");
  ByteReader r(bytes);
  const uint32_t len = r.get_u32();
  if (len < 3) throw DecodeError("frame length too small");
  if (size_t{len} + 4 > max_frame) throw DecodeError("frame exceeds size limit");
  if (r.remaining() != len) throw DecodeError("frame length does not match payload");
  Frame f;
  f.version = r.get_u8();
  if (f.version != kWireVersion) throw DecodeError("unsupported frame version " + std::to_string(f.version));
  f.type = r.get_u16();
  auto body = r.get_raw(len - 3);
  f.body.assign(body.begin(), body.end());
  return f;
}

void FrameBuffer::append(std::span<const uint8_t> data) { buf_.insert(buf_.end(), data.begin(), data.end()); }

std::optional<Frame> FrameBuffer::next() {
  if (buf_.size() < 4) return std::nullopt;
  const uint32_t len = (uint32_t{buf_[0]} << 24) | (uint32_t{buf_[1]} << 16) | (uint32_t{buf_[2]} << 8) | buf_[3];
  if (size_t{len} + 4 > max_frame_) throw DecodeError("frame exceeds size limit");
  if (buf_.size() < size_t{len} + 4) return std::nullopt;
  Frame f = decode_frame(std::span<const uint8_t>(buf_.data(), len + 4), max_frame_);
  buf_.erase(buf_.begin(), buf_.begin() + len + 4);
  return f;
}

// ---------------------------------------------------------------------------
// Envelopes

Bytes Envelope::header_bytes() const {
  ByteWriter w;
  w.put_u16(static_cast<uint16_t>(type));
  w.put_u64(session);
  w.put_u64(auction);
  w.put_u32(sender);
  w.put_u32(recipient);
  w.put_u64(seq);
  w.put_u8(flags);
  return std::move(w).bytes();
}

Frame envelope_to_frame(const Envelope& e) {
  ByteWriter w;
  w.put_u64(e.session);
  w.put_u64(e.auction);
  w.put_u32(e.sender);
  w.put_u32(e.recipient);
  w.put_u64(e.seq);
  w.put_u8(e.flags);
  w.put_raw(e.payload);
  return Frame{kWireVersion, static_cast<uint16_t>(e.type), std::move(w).bytes()};
}

Envelope envelope_from_frame(const Frame& f) {
  if (!is_known_msg_type(f.type)) throw DecodeError("unknown message type " + std::to_string(f.type));
  ByteReader r(f.body);
  Envelope e;
  e.type = static_cast<MsgType>(f.type);
  e.session = r.get_u64();
  e.auction = r.get_u64();
  e.sender = r.get_u32();
  e.recipient = r.get_u32();
  e.seq = r.get_u64();
  e.flags = r.get_u8();
  auto rest = r.get_raw(r.remaining());
  e.payload.assign(rest.begin(), rest.end());
  return e;
}

// ---------------------------------------------------------------------------
// Mailbox / Endpoint

void Mailbox::push(Envelope e) {
  {
    std::lock_guard lock(mu_);
    if (closed_) return;
    queue_.push_back(std::move(e));
  }
  cv_.notify_all();
}

Envelope Mailbox::pop(uint64_t session, std::chrono::milliseconds timeout) {
  auto matches = [session](const Envelope& e) {
    return session == kAnySession || e.session == session || e.type == MsgType::RouteError;
  };
  std::unique_lock lock(mu_);
  auto it = queue_.end();
  const bool ready = cv_.wait_for(lock, timeout, [&] {
    it = std::find_if(queue_.begin(), queue_.end(), matches);
    return it != queue_.end() || closed_;
  });
  if (it == queue_.end()) throw TransportError(ready ? "connection closed" : "receive timed out");
  Envelope e = std::move(*it);
  queue_.erase(it);
  return e;
}

void Mailbox::close() {
  {
    std::lock_guard lock(mu_);
    closed_ = true;
  }
  cv_.notify_all();
}

void Endpoint::send(Envelope e) {
  e.sender = id_;
  {
    std::lock_guard lock(seq_mu_);
    e.seq = ++next_out_[{e.session, e.recipient}];
  }
  transmit(e);
}

Envelope Endpoint::recv(uint64_t session, std::chrono::milliseconds timeout) {
  Envelope e;
  try {
    e = inbox_.pop(session, timeout);
  } catch (const TransportError& err) {
    throw ProtocolAbort(AbortReason::Timeout, session, err.what());
  }
  if (e.type == MsgType::RouteError) throw ProtocolAbort(AbortReason::RouteError, e.session, "recipient unreachable");
  std::lock_guard lock(seq_mu_);
  auto& last = last_in_[{e.session, e.sender}];
  if (e.seq <= last)
    throw ProtocolAbort(AbortReason::ReplayDetected, e.session,
                        "sequence " + std::to_string(e.seq) + " after " + std::to_string(last) + " from party " +
                            std::to_string(e.sender));
  last = e.seq;
  return e;
}

// ---------------------------------------------------------------------------
// Router

void Router::attach(PartyId id, Sink sink) {
  std::lock_guard lock(mu_);
  sinks_[id] = std::move(sink);
}

void Router::detach(PartyId id) {
  std::lock_guard lock(mu_);
  sinks_.erase(id);
}

bool Router::attached(PartyId id) const {
  std::lock_guard lock(mu_);
  return sinks_.count(id) != 0;
}

void Router::set_adversary(Adversary a) {
  std::lock_guard lock(mu_);
  adversary_ = std::move(a);
}

void Router::set_recording(bool on) {
  std::lock_guard lock(mu_);
  recording_ = on;
}

std::vector<RelayRecord> Router::records() const {
  std::lock_guard lock(mu_);
  return records_;
}

void Router::clear_records() {
  std::lock_guard lock(mu_);
  records_.clear();
}

RelayMetrics Router::metrics() const {
  std::lock_guard lock(mu_);
  return metrics_;
}

std::string Router::metrics_text() const {
  RelayMetrics m = metrics();
  std::ostringstream os;
  os << "primematch_envelopes_total " << m.envelopes << "\n"
     << "primematch_relayed_total " << m.relayed << "\n"
     << "primematch_bytes_total " << m.bytes << "\n"
     << "primematch_relayed_bytes_total " << m.relayed_bytes << "\n"
     << "primematch_route_errors_total " << m.route_errors << "\n";
  return os.str();
}

void Router::route(const Envelope& e) {
  Adversary adv;
  {
    std::lock_guard lock(mu_);
    adv = adversary_;
  }
  if (!adv) {
    deliver(e);
    return;
  }
  for (const auto& out : adv(e)) deliver(out);
}

void Router::deliver(const Envelope& e) {
  Sink sink;
  std::optional<Envelope> bounce;
  {
    std::lock_guard lock(mu_);
    const bool relayed = e.recipient != kServerId;
    metrics_.envelopes++;
    metrics_.bytes += e.payload.size();
    if (relayed) {
      metrics_.relayed++;
      metrics_.relayed_bytes += e.payload.size();
    }
    if (recording_) records_.push_back(RelayRecord{e, relayed});
    if (auto it = sinks_.find(e.recipient); it != sinks_.end()) {
      sink = it->second;
    } else {
      metrics_.route_errors++;
      auto back = sinks_.find(e.sender);
      if (back == sinks_.end() || e.type == MsgType::RouteError) return;
      Envelope err;
      err.type = MsgType::RouteError;
      err.session = e.session;
      err.auction = e.auction;
      err.sender = kServerId;
      err.recipient = e.sender;
      ByteWriter w;
      w.put_u32(e.recipient);
      err.payload = std::move(w).bytes();
      bounce = std::move(err);
      sink = back->second;
    }
  }
  sink(bounce ? *bounce : e);
}

// ---------------------------------------------------------------------------
// LocalNetwork

namespace {

class LocalEndpoint : public Endpoint {
 public:
  LocalEndpoint(PartyId id, std::shared_ptr<Router> router) : Endpoint(id), router_(std::move(router)) {}
  ~LocalEndpoint() override { router_->detach(id()); }

  void close() override {
    router_->detach(id());
    Endpoint::close();
  }

 protected:
  void transmit(const Envelope& e) override { router_->route(e); }

 private:
  std::shared_ptr<Router> router_;
};

}  // namespace

std::shared_ptr<Endpoint> LocalNetwork::connect(PartyId id) {
  auto ep = std::make_shared<LocalEndpoint>(id, router_);
  std::weak_ptr<LocalEndpoint> weak = ep;
  router_->attach(id, [weak](const Envelope& e) {
    if (auto p = weak.lock()) p->inbox().push(e);
  });
  return ep;
}

// ---------------------------------------------------------------------------
// TCP

namespace {

void write_all(int fd, std::span<const uint8_t> data) {
  size_t off = 0;
  while (off < data.size()) {
    ssize_t n = ::send(fd, data.data() + off, data.size() - off, MSG_NOSIGNAL);
    if (n <= 0) {
      if (n < 0 && errno == EINTR) continue;
      throw TransportError("socket write failed");
    }
    off += static_cast<size_t>(n);
  }
}

void set_nodelay(int fd) {
  int one = 1;
  ::setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof(one));
}

// Reads frames until EOF or error, handing each decoded envelope to `on`.
template <class F>
void read_frames(int fd, size_t max_frame, F&& on) {
  FrameBuffer fb(max_frame);
  std::array<uint8_t, 64 * 1024> buf{};
  while (true) {
    ssize_t n = ::recv(fd, buf.data(), buf.size(), 0);
    if (n < 0 && errno == EINTR) continue;
    if (n <= 0) return;
    fb.append(std::span<const uint8_t>(buf.data(), static_cast<size_t>(n)));
    while (auto f = fb.next()) on(envelope_from_frame(*f));
  }
}

class ServerLocalEndpoint : public Endpoint {
 public:
  ServerLocalEndpoint(std::shared_ptr<Router> router) : Endpoint(kServerId), router_(std::move(router)) {}

 protected:
  void transmit(const Envelope& e) override { router_->route(e); }

 private:
  std::shared_ptr<Router> router_;
};

class TcpClientEndpoint : public Endpoint {
 public:
  TcpClientEndpoint(PartyId id, int fd, size_t max_frame) : Endpoint(id), fd_(fd), max_frame_(max_frame) {}
  ~TcpClientEndpoint() override { close(); }

  void start() {
    reader_ = std::thread([this] {
      try {
        read_frames(fd_, max_frame_, [this](Envelope e) { inbox().push(std::move(e)); });
      } catch (const Error&) {
      }
      inbox().close();
    });
  }

  void close() override {
    std::call_once(closed_, [this] {
      ::shutdown(fd_, SHUT_RDWR);
      if (reader_.joinable()) reader_.join();
      ::close(fd_);
      Endpoint::close();
    });
  }

 protected:
  void transmit(const Envelope& e) override {
    Bytes bytes = encode_frame(envelope_to_frame(e), max_frame_);
    std::lock_guard lock(write_mu_);
    write_all(fd_, bytes);
  }

 private:
  int fd_;
  size_t max_frame_;
  std::thread reader_;
  std::mutex write_mu_;
  std::once_flag closed_;
};

}  // namespace

struct TcpServer::Conn {
  int fd = -1;
  PartyId id = 0;
  bool registered = false;
  std::mutex write_mu;
  std::thread reader;
};

TcpServer::TcpServer(const std::string& host, uint16_t port, size_t max_frame)
    : max_frame_(max_frame), router_(std::make_shared<Router>()) {
  listen_fd_ = ::socket(AF_INET, SOCK_STREAM, 0);
  if (listen_fd_ < 0) throw TransportError("socket() failed");
  int one = 1;
  ::setsockopt(listen_fd_, SOL_SOCKET, SO_REUSEADDR, &one, sizeof(one));
  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_port = htons(port);
  if (::inet_pton(AF_INET, host.c_str(), &addr.sin_addr) != 1) {
    ::close(listen_fd_);
    throw TransportError("invalid listen address " + host);
  }
  if (::bind(listen_fd_, reinterpret_cast<sockaddr*>(&addr), sizeof(addr)) != 0) {
    ::close(listen_fd_);
    throw TransportError("bind to " + host + ":" + std::to_string(port) + " failed");
  }
  if (::listen(listen_fd_, 64) != 0) {
    ::close(listen_fd_);
    throw TransportError("listen failed");
  }
  socklen_t len = sizeof(addr);
  ::getsockname(listen_fd_, reinterpret_cast<sockaddr*>(&addr), &len);
  port_ = ntohs(addr.sin_port);

  auto local = std::make_shared<ServerLocalEndpoint>(router_);
  local_ = local;
  std::weak_ptr<ServerLocalEndpoint> weak = local;
  router_->attach(kServerId, [weak](const Envelope& e) {
    if (auto p = weak.lock()) p->inbox().push(e);
  });
  acceptor_ = std::thread([this] { accept_loop(); });
}

TcpServer::~TcpServer() { stop(); }

void TcpServer::stop() {
  std::vector<std::shared_ptr<Conn>> conns;
  {
    std::lock_guard lock(mu_);
    if (stopping_) return;
    stopping_ = true;
    conns = conns_;
  }
  ::shutdown(listen_fd_, SHUT_RDWR);
  ::close(listen_fd_);
  if (acceptor_.joinable()) acceptor_.join();
  for (auto& c : conns) ::shutdown(c->fd, SHUT_RDWR);
  for (auto& c : conns) {
    if (c->reader.joinable()) c->reader.join();
    ::close(c->fd);
  }
  local_->close();
  cv_.notify_all();
}

void TcpServer::accept_loop() {
  while (true) {
    int fd = ::accept(listen_fd_, nullptr, nullptr);
    if (fd < 0) {
      if (errno == EINTR) continue;
      return;
    }
    set_nodelay(fd);
    auto conn = std::make_shared<Conn>();
    conn->fd = fd;
    std::lock_guard lock(mu_);
    if (stopping_) {
      ::close(fd);
      return;
    }
    conns_.push_back(conn);
    conn->reader = std::thread([this, conn] { serve(conn); });
  }
}

void TcpServer::serve(std::shared_ptr<Conn> conn) {
  try {
    read_frames(conn->fd, max_frame_, [&](Envelope e) {
      if (!conn->registered) {
        if (e.type != MsgType::Hello || e.sender == kServerId) return;
        conn->id = e.sender;
        conn->registered = true;
        std::weak_ptr<Conn> weak = conn;
        const size_t max_frame = max_frame_;
        router_->attach(conn->id, [weak, max_frame](const Envelope& out) {
          auto c = weak.lock();
          if (!c) return;
          Bytes bytes = encode_frame(envelope_to_frame(out), max_frame);
          std::lock_guard lock(c->write_mu);
          try {
            write_all(c->fd, bytes);
          } catch (const TransportError&) {
          }
        });
        {
          std::lock_guard lock(mu_);
          hello_order_.push_back(conn->id);
        }
        cv_.notify_all();
        return;
      }
      // A connection may only speak for the party it registered as.
      if (e.sender != conn->id) return;
      router_->route(e);
    });
  } catch (const Error&) {
  }
  if (conn->registered) router_->detach(conn->id);
}

std::vector<PartyId> TcpServer::wait_for_clients(size_t count, std::chrono::milliseconds timeout) {
  std::unique_lock lock(mu_);
  cv_.wait_for(lock, timeout, [&] { return hello_order_.size() >= count || stopping_; });
  return hello_order_;
}

std::vector<PartyId> TcpServer::clients() const {
  std::lock_guard lock(mu_);
  return hello_order_;
}

std::shared_ptr<Endpoint> tcp_connect(const std::string& host, uint16_t port, PartyId id,
                                      std::chrono::milliseconds timeout, size_t max_frame) {
  addrinfo hints{};
  hints.ai_family = AF_INET;
  hints.ai_socktype = SOCK_STREAM;
  addrinfo* res = nullptr;
  if (::getaddrinfo(host.c_str(), std::to_string(port).c_str(), &hints, &res) != 0 || res == nullptr)
    throw TransportError("cannot resolve " + host);
  const auto deadline = std::chrono::steady_clock::now() + timeout;
  int fd = -1;
  while (true) {
    fd = ::socket(res->ai_family, res->ai_socktype, res->ai_protocol);
    if (fd >= 0 && ::connect(fd, res->ai_addr, res->ai_addrlen) == 0) break;
    if (fd >= 0) ::close(fd);
    fd = -1;
    if (std::chrono::steady_clock::now() >= deadline) break;
    std::this_thread::sleep_for(std::chrono::milliseconds(50));
  }
  ::freeaddrinfo(res);
  if (fd < 0) throw TransportError("cannot connect to " + host + ":" + std::to_string(port));
  set_nodelay(fd);
  auto ep = std::make_shared<TcpClientEndpoint>(id, fd, max_frame);
  ep->start();
  Envelope hello;
  hello.type = MsgType::Hello;
  hello.recipient = kServerId;
  ep->send(hello);
  return ep;
}

// ---------------------------------------------------------------------------
// Secure channel

namespace {

using Key32 = std::array<uint8_t, 32>;

std::array<uint8_t, crypto_aead_chacha20poly1305_ietf_NPUBBYTES> nonce_for(uint64_t ctr) {
  std::array<uint8_t, crypto_aead_chacha20poly1305_ietf_NPUBBYTES> n{};
  for (int i = 0; i < 8; ++i) n[4 + i] = static_cast<uint8_t>(ctr >> (56 - 8 * i));
  return n;
}

Bytes aead_seal(const Key32& key, uint64_t ctr, std::span<const uint8_t> pt, std::span<const uint8_t> ad) {
  Bytes out(pt.size() + crypto_aead_chacha20poly1305_ietf_ABYTES);
  unsigned long long len = 0;
  auto nonce = nonce_for(ctr);
  crypto_aead_chacha20poly1305_ietf_encrypt(out.data(), &len, pt.data(), pt.size(), ad.data(), ad.size(), nullptr,
                                            nonce.data(), key.data());
  out.resize(len);
  return out;
}

std::optional<Bytes> aead_open(const Key32& key, uint64_t ctr, std::span<const uint8_t> ct,
                               std::span<const uint8_t> ad) {
  if (ct.size() < crypto_aead_chacha20poly1305_ietf_ABYTES) return std::nullopt;
  Bytes out(ct.size() - crypto_aead_chacha20poly1305_ietf_ABYTES);
  unsigned long long len = 0;
  auto nonce = nonce_for(ctr);
  if (crypto_aead_chacha20poly1305_ietf_decrypt(out.data(), &len, nullptr, ct.data(), ct.size(), ad.data(),
                                                ad.size(), nonce.data(), key.data()) != 0)
    return std::nullopt;
  out.resize(len);
  return out;
}

Bytes confirm_ad(std::string_view label, const Point& a, const Point& b) {
  ByteWriter w;
  w.put_string(label);
  w.put_raw(a.bytes());
  w.put_raw(b.bytes());
  return std::move(w).bytes();
}

}  // namespace

Bytes SecureChannel::seal(std::span<const uint8_t> plaintext, std::span<const uint8_t> ad) {
  if (failed_) throw UsageError("seal on a failed channel");
  return aead_seal(send_key_, send_ctr_++, plaintext, ad);
}

Bytes SecureChannel::open(std::span<const uint8_t> ciphertext, std::span<const uint8_t> ad, uint64_t session) {
  if (failed_) throw ProtocolAbort(AbortReason::ChannelAuthFailed, session, "channel already failed");
  auto pt = aead_open(recv_key_, recv_ctr_, ciphertext, ad);
  if (!pt) {
    failed_ = true;
    throw ProtocolAbort(AbortReason::ChannelAuthFailed, session, "sealed payload failed authentication");
  }
  recv_ctr_++;
  return *pt;
}

Handshake::Handshake(bool initiator, uint64_t session, ChaChaStream& rng, std::span<const uint8_t> psk)
    : initiator_(initiator), session_(session), psk_(psk.begin(), psk.end()) {
  ensure_sodium();
  eph_ = Scalar::random_nonzero(rng);
  eph_pub_ = Point::base_mul(eph_);
}

void Handshake::derive(const Point& peer) {
  peer_pub_ = peer;
  Point shared = peer * eph_;
  if (peer.is_identity() || shared.is_identity())
    throw ProtocolAbort(AbortReason::HandshakeFailed, session_, "degenerate key share");
  const Point& a = initiator_ ? eph_pub_ : peer;
  const Point& b = initiator_ ? peer : eph_pub_;
  ByteWriter w;
  w.put_string("primematch-channel-v1");
  w.put_u64(session_);
  w.put_raw(a.bytes());
  w.put_raw(b.bytes());
  w.put_raw(shared.bytes());
  Bytes key_material = std::move(w).bytes();
  std::array<uint8_t, 32> psk_key{};
  if (!psk_.empty()) crypto_generichash(psk_key.data(), psk_key.size(), psk_.data(), psk_.size(), nullptr, 0);
  std::array<uint8_t, 64> okm{};
  crypto_generichash(okm.data(), okm.size(), key_material.data(), key_material.size(),
                     psk_.empty() ? nullptr : psk_key.data(), psk_.empty() ? 0 : psk_key.size());
  std::copy_n(okm.begin(), 32, i2r_.begin());
  std::copy_n(okm.begin() + 32, 32, r2i_.begin());
  sodium_memzero(okm.data(), okm.size());
}

Bytes Handshake::hello() {
  if (!initiator_) throw UsageError("hello() is the initiator's first message");
  return Bytes(eph_pub_.bytes().begin(), eph_pub_.bytes().end());
}

Bytes Handshake::respond(std::span<const uint8_t> msg1) {
  if (initiator_) throw UsageError("respond() is the responder's message");
  Point a;
  try {
    a = Point::from_bytes(msg1);
  } catch (const DecodeError& e) {
    throw ProtocolAbort(AbortReason::HandshakeFailed, session_, e.what());
  }
  derive(a);
  Bytes out(eph_pub_.bytes().begin(), eph_pub_.bytes().end());
  Bytes tag = aead_seal(r2i_, 0, {}, confirm_ad("confirm-r", a, eph_pub_));
  out.insert(out.end(), tag.begin(), tag.end());
  return out;
}

Bytes Handshake::finish(std::span<const uint8_t> msg2) {
  if (!initiator_) throw UsageError("finish() is the initiator's second message");
  if (msg2.size() != Point::kSize + crypto_aead_chacha20poly1305_ietf_ABYTES)
    throw ProtocolAbort(AbortReason::HandshakeFailed, session_, "bad handshake reply length");
  Point b;
  try {
    b = Point::from_bytes(msg2.subspan(0, Point::kSize));
  } catch (const DecodeError& e) {
    throw ProtocolAbort(AbortReason::HandshakeFailed, session_, e.what());
  }
  derive(b);
  if (!aead_open(r2i_, 0, msg2.subspan(Point::kSize), confirm_ad("confirm-r", eph_pub_, b)))
    throw ProtocolAbort(AbortReason::HandshakeFailed, session_, "responder key confirmation failed");
  done_ = true;
  return aead_seal(i2r_, 0, {}, confirm_ad("confirm-i", eph_pub_, b));
}

void Handshake::confirm(std::span<const uint8_t> msg3) {
  if (initiator_) throw UsageError("confirm() is the responder's last step");
  if (!aead_open(i2r_, 0, msg3, confirm_ad("confirm-i", peer_pub_, eph_pub_)))
    throw ProtocolAbort(AbortReason::HandshakeFailed, session_, "initiator key confirmation failed");
  done_ = true;
}

SecureChannel Handshake::channel() const {
  if (!done_) throw UsageError("handshake not complete");
  SecureChannel c;
  c.send_key_ = initiator_ ? i2r_ : r2i_;
  c.recv_key_ = initiator_ ? r2i_ : i2r_;
  return c;
}

}  // namespace primematch
