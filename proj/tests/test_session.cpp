#include <atomic>
#include <thread>

#include <boost/asio/connect.hpp>
#include <gtest/gtest.h>

#include "prsafe/io/session.hpp"
#include "prsafe/io/ws_server.hpp"
#include "support.hpp"

using namespace prsafe;
using io::json;
namespace net = io::net;
namespace beast = io::beast;
namespace websocket = io::websocket;
using tcp = net::ip::tcp;

namespace {

ScenarioConfig interactive_config() {
  ScenarioConfig c;
  c.geometry = prsafe::testing::explicit_geometry();
  c.reference = ReferenceTrajectory::constant(Pose{-0.2, 0.75, 0.0, -0.64});
  c.interactive = true;
  c.duration = 2.0;
  return c;
}

std::vector<json> frames_of(io::Session& s, io::Session::ClientId id, const char* type = "frame") {
  std::vector<json> out;
  for (const auto& text : s.drain(id)) {
    json j = json::parse(text);
    if (j["type"] == type) out.push_back(std::move(j));
  }
  return out;
}

}  // namespace

TEST(Command, ForceIsClampedToSensorRange) {
  const auto c = io::parse_command(R"({"type":"force","payload":{"fx":500,"fz":-2000,"my":1,"mz":-45},"client_time":3.5})",
                                   ForceSensorParams{}.range);
  EXPECT_EQ(c.type, io::CommandType::force);
  EXPECT_EQ(c.force.vector(), Vec4(330, -990, 1, -30));
  EXPECT_EQ(c.client_time, 3.5);
  EXPECT_EQ(io::parse_command(R"({"type":"force","payload":[1,2,3,4]})", ForceSensorParams{}.range).force.vector(),
            Vec4(1, 2, 3, 4));
}

TEST(Command, UnknownAndMalformedAreRejected) {
  const Vec4 r = ForceSensorParams{}.range;
  EXPECT_THROW(io::parse_command(R"({"type":"teleport"})", r), io::ProtocolError);
  EXPECT_THROW(io::parse_command("{not json", r), io::ProtocolError);
  EXPECT_THROW(io::parse_command(R"({"type":"force"})", r), io::ProtocolError);
  EXPECT_THROW(io::parse_command(R"({"type":"load_scenario","payload":3})", r), io::ProtocolError);
  EXPECT_EQ(io::parse_command(R"({"type":"pause"})", r).type, io::CommandType::pause);
}

TEST(Session, RunsWithoutClients) {
  io::Session s(interactive_config());
  while (s.advance()) {
  }
  EXPECT_EQ(s.log().size(), 200u);
}

TEST(Session, FramesAreDecimatedAndDerivedFromRecords) {
  io::Session s(interactive_config());
  const auto id = s.connect();
  for (int i = 0; i < 20; ++i) s.advance();
  const auto frames = frames_of(s, id);
  ASSERT_EQ(frames.size(), 10u);
  for (const auto& f : frames) {
    const auto tick = f["tick"].get<std::uint64_t>();
    EXPECT_EQ(tick % 2, 0u);
    EXPECT_EQ(f, io::telemetry_frame(s.log()[tick]));
    EXPECT_EQ(f["schema"], io::kTelemetrySchemaVersion);
  }
}

TEST(Session, ViewersReceiveIdenticalSequences) {
  io::Session s(interactive_config());
  const auto a = s.connect(), b = s.connect();
  for (int i = 0; i < 30; ++i) s.advance();
  EXPECT_EQ(frames_of(s, a), frames_of(s, b));
}

TEST(Session, OnlyTheAuthorityMayCommand) {
  io::Session s(interactive_config());
  const auto a = s.connect(), b = s.connect();
  EXPECT_EQ(s.authority(), a);
  s.submit(b, R"({"type":"pause"})");
  EXPECT_EQ(frames_of(s, b, "error").size(), 1u);
  s.disconnect(a);
  s.submit(b, R"({"type":"pause"})");
  s.advance();
  EXPECT_TRUE(s.paused());
  EXPECT_EQ(s.authority(), b);
}

TEST(Session, ForceCommandReachesMeasuredForceWithinTwoTicks) {
  io::Session s(interactive_config());
  const auto id = s.connect();
  for (int i = 0; i < 10; ++i) s.advance();
  const std::uint64_t sent_at = s.simulation().tick();
  s.submit(id, R"({"type":"force","payload":{"mz":4.0}})");
  s.advance();
  s.advance();
  bool seen = false;
  for (const auto& r : s.log()) {
    if (r.tick >= sent_at && r.tick < sent_at + 2 && r.measured_force.mz > 3.9) seen = true;
  }
  EXPECT_TRUE(seen);
}

TEST(Session, MalformedCommandYieldsErrorAndSessionContinues) {
  io::Session s(interactive_config());
  const auto id = s.connect();
  s.submit(id, "{oops");
  s.submit(id, R"({"type":"warp"})");
  EXPECT_TRUE(s.advance());
  EXPECT_EQ(frames_of(s, id, "error").size(), 2u);
}

TEST(Session, PausedForcesApplyOnResume) {
  io::Session s(interactive_config());
  const auto id = s.connect();
  s.advance();
  s.submit(id, R"({"type":"pause"})");
  s.submit(id, R"({"type":"force","payload":{"fz":50}})");
  EXPECT_FALSE(s.advance());
  EXPECT_FALSE(s.advance());
  EXPECT_EQ(s.simulation().live_force().fz, 0.0);
  s.submit(id, R"({"type":"resume"})");
  EXPECT_TRUE(s.advance());
  EXPECT_EQ(s.simulation().live_force().fz, 50.0);
}

TEST(Session, SlowViewerLosesOldestFramesOnly) {
  io::SessionOptions opt;
  opt.queue_capacity = 5;
  io::Session s(interactive_config(), opt);
  const auto id = s.connect();
  for (int i = 0; i < 100; ++i) s.advance();
  const auto frames = frames_of(s, id);
  ASSERT_EQ(frames.size(), 5u);
  EXPECT_EQ(frames.back()["tick"], 98);
  EXPECT_EQ(s.log().size(), 100u);
}

TEST(Session, JournalReplayReproducesTheLog) {
  io::Session s(interactive_config());
  const auto id = s.connect();
  for (int i = 0; i < 200; ++i) {
    if (i == 20) s.submit(id, R"({"type":"force","payload":{"mz":10}})");
    if (i == 90) s.submit(id, R"({"type":"force","payload":{"mz":0}})");
    if (i == 120) s.submit(id, R"({"type":"reset"})");
    if (i == 130) s.submit(id, R"({"type":"force","payload":{"fx":20}})");
    s.advance();
  }
  const auto replayed = io::replay(interactive_config(), s.journal(), s.simulation().tick());
  ASSERT_EQ(replayed.size(), s.log().size());
  for (std::size_t i = 0; i < replayed.size(); ++i) {
    ASSERT_EQ(io::record_to_json(replayed[i]), io::record_to_json(s.log()[i]));
  }
}

TEST(Session, LoadScenarioReplacesTheSimulation) {
  io::Session s(interactive_config());
  const auto id = s.connect();
  for (int i = 0; i < 5; ++i) s.advance();
  s.submit(id, R"({"type":"load_scenario","payload":{"duration":0.5,"control_period":0.01}})");
  s.advance();
  EXPECT_EQ(s.simulation().config().duration, 0.5);
  EXPECT_EQ(s.log().size(), 1u);
  s.submit(id, R"({"type":"load_scenario","payload":{"duration":-1}})");
  s.advance();
  EXPECT_EQ(frames_of(s, id, "error").size(), 1u);
}

TEST(TelemetryServer, StreamsFramesAndAcceptsCommands) {
  io::Session session(interactive_config());
  io::TelemetryServer server(session, 0);
  server.start();

  net::io_context ioc;
  tcp::resolver resolver(ioc);
  websocket::stream<tcp::socket> ws(ioc);
  net::connect(ws.next_layer(), resolver.resolve("127.0.0.1", std::to_string(server.port())));
  ws.handshake("127.0.0.1", "/");

  beast::flat_buffer buf;
  ws.read(buf);
  const json hello = json::parse(beast::buffers_to_string(buf.data()));
  buf.consume(buf.size());
  EXPECT_EQ(hello["type"], "hello");
  EXPECT_EQ(hello["authority"], true);

  ws.write(net::buffer(std::string(R"({"type":"force","payload":{"mz":4.0}})")));
  ws.write(net::buffer(std::string(R"({"type":"bogus"})")));

  std::atomic<bool> stop{false};
  std::thread control([&] { session.run(stop, false); });

  bool saw_error = false, saw_force = false;
  std::uint64_t last_tick = 0;
  bool monotone = true;
  for (int i = 0; i < 400 && !(saw_error && saw_force); ++i) {
    ws.read(buf);
    const json j = json::parse(beast::buffers_to_string(buf.data()));
    buf.consume(buf.size());
    if (j["type"] == "error") saw_error = true;
    if (j["type"] == "frame") {
      const auto t = j["tick"].get<std::uint64_t>();
      monotone = monotone && (last_tick == 0 || t > last_tick);
      last_tick = t;
      if (j["F_c"][3].get<double>() > 3.9) saw_force = true;
    }
  }
  stop = true;
  control.join();
  beast::error_code ec;
  ws.close(websocket::close_code::normal, ec);
  server.stop();
  EXPECT_TRUE(saw_error);
  EXPECT_TRUE(saw_force);
  EXPECT_TRUE(monotone);
}
