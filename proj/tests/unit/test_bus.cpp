#include <doctest.h>

#include <arpa/inet.h>
#include <netinet/in.h>
#include <sys/socket.h>
#include <unistd.h>

#include <random>
#include <thread>

#include "tma/bus/envelope.hpp"
#include "tma/bus/inproc.hpp"
#include "tma/bus/tcp.hpp"

using namespace tma::bus;
using namespace std::chrono_literals;

namespace {

std::vector<std::uint8_t> bytes(std::initializer_list<int> v) {
  std::vector<std::uint8_t> out;
  for (int b : v) out.push_back(static_cast<std::uint8_t>(b));
  return out;
}

std::string random_topic(std::mt19937_64& rng) {
  static const std::vector<std::string> pieces{"/", "a", "z", "led", "_", "-", "0", "\xC3\xA9", "\xE2\x82\xAC",
                                               "\xF0\x9F\x9A\x97", " ", "."};
  std::uniform_int_distribution<std::size_t> pick(0, pieces.size() - 1), len(1, 12);
  std::string t;
  for (std::size_t i = len(rng); i > 0; --i) t += pieces[pick(rng)];
  if (t.front() == '$') t.front() = '/';
  return t;
}

Envelope random_envelope(std::mt19937_64& rng) {
  std::uniform_int_distribution<std::size_t> len(0, 300);
  std::uniform_int_distribution<int> byte(0, 255);
  Envelope e{random_topic(rng), rng(), rng(), {}};
  e.payload.resize(len(rng));
  for (auto& b : e.payload) b = static_cast<std::uint8_t>(byte(rng));
  return e;
}

std::vector<Envelope> drain(Subscription& sub, std::size_t expected, std::chrono::milliseconds per_wait = 2000ms) {
  std::vector<Envelope> out;
  while (out.size() < expected) {
    auto e = sub.receive(per_wait);
    if (!e) break;
    out.push_back(std::move(*e));
  }
  return out;
}

std::span<const std::uint8_t> one(const std::uint8_t& b) { return {&b, 1}; }

struct TcpFixture {
  Broker broker{Endpoint{"127.0.0.1", 0}};
  Endpoint address() const { return Endpoint{"127.0.0.1", broker.port()}; }
};

}  // namespace

TEST_CASE("envelope roundtrip examples") {
  const Envelope led{"/led/status", 0, 0, bytes({1})};
  CHECK(decode_envelope(encode_envelope(led)) == led);
  const Envelope empty{"/telemetry", 5, 123456789, {}};
  CHECK(decode_envelope(encode_envelope(empty)) == empty);
}

TEST_CASE("wire layout is big-endian length, topic, seq, timestamp, payload") {
  const auto wire = encode_envelope({"/a", 1, 2, bytes({0xAB})});
  const auto expected = bytes({0, 0, 0, 21, 0, 2, '/', 'a', 0, 0, 0, 0, 0, 0, 0, 1, 0, 0, 0, 0, 0, 0, 0, 2, 0xAB});
  CHECK(wire == expected);
}

TEST_CASE("roundtrip property over random envelopes") {
  std::mt19937_64 rng(2024);
  for (int i = 0; i < 10000; ++i) {
    const auto e = random_envelope(rng);
    REQUIRE(is_valid_topic(e.topic));
    CHECK(decode_envelope(encode_envelope(e)) == e);
  }
}

TEST_CASE("decode errors name the field") {
  auto field_of = [](const std::vector<std::uint8_t>& frame) {
    try {
      decode_envelope(frame);
    } catch (const DecodeError& e) {
      return e.field();
    }
    return std::string("none");
  };
  auto good = encode_envelope({"/abc", 1, 2, bytes({9, 9})});
  CHECK(field_of(bytes({0, 0})) == "frame_length");
  auto longer = good;
  longer.push_back(0);
  CHECK(field_of(longer) == "frame_length");
  CHECK(field_of(bytes({0, 0, 0, 1, 0})) == "topic_length");
  CHECK(field_of(bytes({0, 0, 0, 3, 0, 5, 'a'})) == "topic");
  CHECK(field_of(bytes({0, 0, 0, 3, 0, 1, 0xFF})) == "topic");
  CHECK(field_of(bytes({0, 0, 0, 3, 0, 1, '\n'})) == "topic");
  CHECK(field_of(bytes({0, 0, 0, 2, 0, 0})) == "topic");
  CHECK(field_of(bytes({0, 0, 0, 5, 0, 1, 'a', 0, 0})) == "seq");
  CHECK(field_of(bytes({0, 0, 0, 13, 0, 1, 'a', 0, 0, 0, 0, 0, 0, 0, 0, 1, 2})) == "timestamp_ns");
  CHECK(field_of(bytes({0x01, 0, 0, 1})) == "frame_length");  // over 16 MiB
}

TEST_CASE("encode rejects bad topics and oversized frames") {
  CHECK_THROWS_AS(encode_envelope({"", 0, 0, {}}), std::invalid_argument);
  CHECK_THROWS_AS(encode_envelope({"a\x01", 0, 0, {}}), std::invalid_argument);
  CHECK_THROWS_AS(encode_envelope({"\xC3", 0, 0, {}}), std::invalid_argument);
  CHECK_THROWS_AS(encode_envelope({"/x", 0, 0, std::vector<std::uint8_t>(kMaxFrameLength, 0)}), std::length_error);
  CHECK(is_valid_utf8("\xE2\x82\xAC"));
  CHECK_FALSE(is_valid_utf8("\xED\xA0\x80"));  // surrogate
  CHECK_FALSE(is_valid_utf8("\xC0\xAF"));      // overlong
}

TEST_CASE("fuzzed decode never crashes") {
  std::mt19937_64 rng(77);
  std::uniform_int_distribution<int> byte(0, 255);
  std::uniform_int_distribution<std::size_t> len(0, 64);
  std::size_t ok = 0, rejected = 0;
  for (int i = 0; i < 20000; ++i) {
    std::vector<std::uint8_t> frame;
    if (i % 2 == 0) {
      frame.resize(len(rng));
      for (auto& b : frame) b = static_cast<std::uint8_t>(byte(rng));
    } else {
      frame = encode_envelope(random_envelope(rng));
      std::uniform_int_distribution<std::size_t> at(0, frame.size() - 1);
      for (int flips = 1 + i % 4; flips > 0; --flips) frame[at(rng)] = static_cast<std::uint8_t>(byte(rng));
      if (i % 3 == 0) frame.resize(at(rng));
    }
    try {
      const auto e = decode_envelope(frame);
      CHECK(encode_envelope(e) == frame);
      ++ok;
    } catch (const DecodeError&) {
      ++rejected;
    }
  }
  CHECK(ok + rejected == 20000);
  CHECK(rejected > 0);
}

TEST_CASE("frame assembler reassembles a byte-at-a-time stream") {
  std::mt19937_64 rng(5);
  std::vector<Envelope> sent;
  std::vector<std::uint8_t> stream;
  for (int i = 0; i < 50; ++i) {
    sent.push_back(random_envelope(rng));
    const auto f = encode_envelope(sent.back());
    stream.insert(stream.end(), f.begin(), f.end());
  }
  FrameAssembler assembler;
  std::vector<Envelope> got;
  for (auto b : stream) {
    assembler.feed(std::span(&b, 1));
    while (auto f = assembler.next_frame()) got.push_back(decode_envelope(*f));
  }
  CHECK(got == sent);
  CHECK(assembler.buffered() == 0);

  FrameAssembler hostile;
  hostile.feed(bytes({0x7F, 0xFF, 0xFF, 0xFF}));
  CHECK_THROWS_AS(hostile.next_frame(), DecodeError);
}

TEST_CASE("QoS parsing and defaults") {
  CHECK(parse_qos("lossless").is_lossless());
  CHECK(parse_qos("keep_last:3") == TopicQos::keep_last(3));
  CHECK_THROWS(parse_qos("keep_last:0"));
  CHECK_THROWS(parse_qos("keep_last:x"));
  CHECK_THROWS(parse_qos("best_effort"));
  CHECK(to_string(TopicQos::keep_last(2)) == "keep_last:2");
  CHECK(default_qos("/camera/frame") == TopicQos::keep_last(1));
  CHECK(default_qos("/led/status").is_lossless());
  CHECK(default_qos("/telemetry").is_lossless());
}

TEST_CASE("keep_last mailbox never holds more than N") {
  Mailbox box(TopicQos::keep_last(3));
  for (std::uint64_t i = 0; i < 100; ++i) {
    box.push({"/t", i, 0, {}});
    CHECK(box.pending() <= 3);
  }
  CHECK(box.dropped() == 97);
  CHECK(box.pop(0ms)->seq == 97);
}

TEST_CASE("in-process bus semantics") {
  InProcBus bus;
  SUBCASE("fan-out to two subscribers in order") {
    auto a = bus.subscribe("/led/status", TopicQos::lossless());
    auto b = bus.subscribe("/led/status", TopicQos::lossless());
    for (std::uint8_t v : {0, 1, 1}) bus.publish("/led/status", one(v), 0);
    for (auto* s : {&a, &b}) {
      const auto got = drain(*s, 3);
      REQUIRE(got.size() == 3);
      CHECK(got[1].payload == bytes({1}));
      CHECK(got[2].seq == 2);
    }
  }
  SUBCASE("topic isolation") {
    auto sub = bus.subscribe("/b", TopicQos::lossless());
    bus.publish("/a", bytes({1}), 0);
    CHECK_FALSE(sub.try_receive());
  }
  SUBCASE("publish with no subscribers succeeds") { CHECK(bus.publish("/nobody", {}, 0).seq == 0); }
  SUBCASE("late keep_last subscriber gets the retained value first") {
    for (std::uint8_t i = 0; i < 5; ++i) bus.publish("/r", one(i), i);
    auto late = bus.subscribe("/r", TopicQos::keep_last(1));
    auto lossless = bus.subscribe("/r", TopicQos::lossless());
    const auto first = late.try_receive();
    REQUIRE(first);
    CHECK(first->seq == 4);
    CHECK_FALSE(lossless.try_receive());
  }
  SUBCASE("closed handle receives nothing") {
    auto sub = bus.subscribe("/c", TopicQos::lossless());
    sub.close();
    bus.publish("/c", bytes({1}), 0);
    CHECK_FALSE(sub.try_receive());
    CHECK(bus.hub()->subscriber_count("/c") == 0);
  }
  SUBCASE("reserved topics are refused") {
    CHECK_THROWS_AS(bus.publish("$subscribe", {}, 0), std::invalid_argument);
    CHECK_THROWS_AS(bus.subscribe("$suback"), std::invalid_argument);
  }
}

TEST_CASE("in-process lossless FIFO") {
  InProcBus bus;
  auto sub = bus.subscribe("/fifo", TopicQos::lossless());
  for (int i = 0; i < 1000; ++i) bus.publish("/fifo", {}, static_cast<std::uint64_t>(i));
  const auto got = drain(sub, 1000, 0ms);
  REQUIRE(got.size() == 1000);
  for (std::size_t i = 0; i < got.size(); ++i) CHECK(got[i].seq == i);
}

TEST_CASE("concurrent publishers keep per-topic sequence numbers unique and ordered") {
  InProcBus bus;
  auto sub = bus.subscribe("/mt", TopicQos::lossless());
  std::vector<std::thread> threads;
  for (int t = 0; t < 4; ++t) {
    threads.emplace_back([&bus] {
      for (int i = 0; i < 500; ++i) bus.publish("/mt", {}, 0);
    });
  }
  for (auto& t : threads) t.join();
  const auto got = drain(sub, 2000, 0ms);
  REQUIRE(got.size() == 2000);
  for (std::size_t i = 0; i < got.size(); ++i) CHECK(got[i].seq == i);
}

TEST_CASE("endpoint parsing") {
  CHECK(parse_endpoint("127.0.0.1:7447") == Endpoint{"127.0.0.1", 7447});
  CHECK(parse_endpoint("localhost:0").port == 0);
  CHECK_THROWS(parse_endpoint("nohost"));
  CHECK_THROWS(parse_endpoint(":80"));
  CHECK_THROWS(parse_endpoint("h:99999"));
  CHECK_THROWS(parse_endpoint("h:8a"));
}

TEST_CASE("TCP broker fan-out and isolation") {
  TcpFixture fx;
  TcpClient publisher(fx.address());
  TcpClient c1(fx.address()), c2(fx.address());
  auto s1 = c1.subscribe("/led/status", TopicQos::lossless());
  auto s2 = c2.subscribe("/led/status", TopicQos::lossless());
  auto other = c2.subscribe("/b", TopicQos::lossless());
  for (std::uint8_t v : {0, 1, 0, 1}) publisher.publish("/led/status", one(v), 10);
  publisher.publish("/a", bytes({7}), 0);
  for (auto* s : {&s1, &s2}) {
    const auto got = drain(*s, 4);
    REQUIRE(got.size() == 4);
    for (std::size_t i = 0; i < 4; ++i) {
      CHECK(got[i].seq == i);
      CHECK(got[i].payload == bytes({static_cast<int>(i % 2)}));
      CHECK(got[i].timestamp_ns == 10);
    }
  }
  CHECK_FALSE(other.receive(100ms));
}

TEST_CASE("TCP lossless FIFO of 1000 envelopes") {
  TcpFixture fx;
  TcpClient publisher(fx.address()), subscriber(fx.address());
  auto sub = subscriber.subscribe("/fifo", TopicQos::lossless());
  for (int i = 0; i < 1000; ++i) publisher.publish("/fifo", bytes({i % 256}), 0);
  const auto got = drain(sub, 1000);
  REQUIRE(got.size() == 1000);
  for (std::size_t i = 0; i < got.size(); ++i) CHECK(got[i].seq == i);
}

TEST_CASE("TCP retained value, keep_last and close") {
  TcpFixture fx;
  TcpClient publisher(fx.address());
  for (std::uint8_t i = 0; i < 5; ++i) publisher.publish("/r", one(i), i);
  TcpClient late(fx.address());
  auto sub = late.subscribe("/r", TopicQos::keep_last(1));
  const auto first = sub.receive(2000ms);
  REQUIRE(first);
  CHECK(first->seq == 4);
  CHECK(first->payload == bytes({4}));

  auto closed = late.subscribe("/c", TopicQos::lossless());
  closed.close();
  publisher.publish("/c", bytes({1}), 0);
  CHECK_FALSE(closed.receive(100ms));
}

TEST_CASE("TCP and in-process transports deliver the same sequence") {
  std::mt19937_64 rng(8);
  std::vector<Envelope> script;
  for (int i = 0; i < 300; ++i) {
    Envelope e = random_envelope(rng);
    e.topic = (i % 3 == 0) ? "/x" : "/y";
    script.push_back(e);
  }
  auto run = [&](Bus& pub, Bus& subscriber) {
    auto x = subscriber.subscribe("/x", TopicQos::lossless());
    auto y = subscriber.subscribe("/y", TopicQos::lossless());
    for (const auto& e : script) pub.publish(e.topic, e.payload, e.timestamp_ns);
    auto gx = drain(x, 100);
    auto gy = drain(y, 200);
    gx.insert(gx.end(), gy.begin(), gy.end());
    return gx;
  };
  InProcBus inproc;
  const auto expected = run(inproc, inproc);
  TcpFixture fx;
  TcpClient pub(fx.address()), subscriber(fx.address());
  CHECK(run(pub, subscriber) == expected);
  CHECK(expected.size() == 300);
}

TEST_CASE("broker drops a client that sends garbage and keeps serving") {
  TcpFixture fx;
  TcpClient good_sub(fx.address());
  auto sub = good_sub.subscribe("/ok", TopicQos::lossless());

  const int fd = ::socket(AF_INET, SOCK_STREAM, 0);
  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_port = htons(fx.broker.port());
  ::inet_pton(AF_INET, "127.0.0.1", &addr.sin_addr);
  REQUIRE(::connect(fd, reinterpret_cast<sockaddr*>(&addr), sizeof(addr)) == 0);
  const auto junk = bytes({0, 0, 0, 3, 0, 1, 0xFF});  // invalid UTF-8 topic
  REQUIRE(::send(fd, junk.data(), junk.size(), MSG_NOSIGNAL) == static_cast<ssize_t>(junk.size()));
  std::uint8_t buf[16];
  CHECK(::recv(fd, buf, sizeof(buf), 0) == 0);  // broker closed us
  ::close(fd);
  CHECK(fx.broker.dropped_connections() == 1);

  TcpClient pub(fx.address());
  pub.publish("/ok", bytes({1}), 0);
  CHECK(sub.receive(2000ms));
}

TEST_CASE("unreachable broker fails after bounded retries") {
  std::uint16_t port = 0;
  {
    Broker probe(Endpoint{"127.0.0.1", 0});
    port = probe.port();
  }
  const auto start = std::chrono::steady_clock::now();
  CHECK_THROWS_AS(TcpClient(Endpoint{"127.0.0.1", port}, RetryPolicy{3, 10ms, 2.0}), BusError);
  CHECK(std::chrono::steady_clock::now() - start >= 30ms);
}

TEST_CASE("losing the broker surfaces as errors") {
  auto broker = std::make_unique<Broker>(Endpoint{"127.0.0.1", 0});
  TcpClient client(Endpoint{"127.0.0.1", broker->port()});
  auto sub = client.subscribe("/x", TopicQos::lossless());
  broker.reset();
  CHECK_THROWS_AS(sub.receive(2000ms), DisconnectedError);
  CHECK_THROWS_AS(client.publish("/x", {}, 0), DisconnectedError);
  CHECK_THROWS_AS(client.subscribe("/y", TopicQos::lossless()), DisconnectedError);
}

TEST_CASE("binding a taken port is a startup error") {
  Broker first(Endpoint{"127.0.0.1", 0});
  CHECK_THROWS_AS(Broker(Endpoint{"127.0.0.1", first.port()}), BusError);
}
