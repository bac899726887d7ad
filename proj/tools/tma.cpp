// Command-line front end: simulation runs and sweeps, replay, SSD lookup,
// the TCP broker, and the individual node roles of the distributed graph.

#include <atomic>
#include <csignal>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "tma/bus/tcp.hpp"
#include "tma/cli/config.hpp"
#include "tma/cli/report.hpp"
#include "tma/io/pgm.hpp"
#include "tma/pipeline/nodes.hpp"
#include "tma/safety/ssd.hpp"

namespace fs = std::filesystem;
using namespace tma;

namespace {

std::atomic<bool> g_stop{false};

extern "C" void on_signal(int) { g_stop.store(true); }

struct GlobalOptions {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out = "out";
  std::string bus = "127.0.0.1:7447";
  std::string mode;
  std::string log_level = "info";
};

cli::RunConfig resolve_config(const GlobalOptions& g) {
  auto c = cli::load_run_config(g.config.empty() ? std::nullopt : std::optional<fs::path>(g.config));
  if (g.seed) c.scenario.seed = *g.seed;
  if (!g.mode.empty()) {
    try {
      c.pipeline.mode = safety::parse_mode(g.mode);
    } catch (const std::invalid_argument& e) {
      throw sim::ConfigError("mode", e.what());
    }
  }
  return c;
}

void print_summary(const cli::RunSummary& s) {
  auto opt = [](const auto& v) { return v ? fmt::format("{}", *v) : std::string("n/a"); };
  fmt::print("frames:             {}\n", s.frames);
  fmt::print("scored frames:      {}\n", s.scored_frames);
  fmt::print("mean speed (m/s):   {}\n", s.mean_speed_mps ? fmt::format("{:.4f}", *s.mean_speed_mps) : "n/a");
  fmt::print("speed MSE:          {}\n", s.speed_mse ? fmt::format("{:.6g}", *s.speed_mse) : "n/a");
  fmt::print("warn frames:        {}\n", s.warn_frames);
  fmt::print("first warn seq:     {}\n", opt(s.first_warn_seq));
  fmt::print("truth crossing seq: {}\n", opt(s.truth_crossing_seq));
}

int cmd_sim_run(const GlobalOptions& g, std::optional<int> scenario, std::optional<double> speed,
                const std::string& record) {
  auto c = resolve_config(g);
  if (scenario) c.scenario = sim::with_scenario(c.scenario, *scenario);
  if (speed) c.scenario.relative_speed_mps = *speed;
  sim::validate(c.scenario);
  std::optional<fs::path> record_dir;
  if (!record.empty()) record_dir = record;
  auto result = pipeline::run_in_process(std::make_unique<pipeline::SimFrameSource>(c.scenario, record_dir),
                                         c.pipeline);
  const auto report = cli::make_run_report(result.outcomes, c.scenario, c.pipeline);
  cli::write_run_report(g.out, report);
  io::write_file_atomic(fs::path(g.out) / "led.csv", cli::led_csv(result.led_history));
  print_summary(report.summary);
  return 0;
}

int cmd_sim_sweep(const GlobalOptions& g, const std::vector<double>& speeds, int runs) {
  const auto c = resolve_config(g);
  const auto report = cli::run_sweep(c.scenario, c.pipeline, speeds, runs, c.scenario.seed);
  cli::write_sweep_report(g.out, report);
  fmt::print("{}", cli::sweep_csv(report));
  return 0;
}

int cmd_replay(const GlobalOptions& g, const std::string& dir) {
  auto source = std::make_unique<pipeline::ReplayFrameSource>(dir);
  cli::RunConfig c;
  if (g.config.empty()) {
    c.scenario = source->reader().scenario();
    c.pipeline = pipeline::default_pipeline_config(c.scenario);
    if (!g.mode.empty()) c.pipeline.mode = safety::parse_mode(g.mode);
  } else {
    c = resolve_config(g);
  }
  auto result = pipeline::run_in_process(std::move(source), c.pipeline);
  const auto report = cli::make_run_report(result.outcomes, c.scenario, c.pipeline);
  cli::write_run_report(g.out, report);
  io::write_file_atomic(fs::path(g.out) / "led.csv", cli::led_csv(result.led_history));
  print_summary(report.summary);
  return 0;
}

int cmd_ssd(std::optional<double> speed_mph, bool table, const std::string& format) {
  const bool csv = format == "csv";
  if (speed_mph) {
    const double v = *speed_mph;
    const double continuous = safety::compute_ssd_ft(v);
    std::string tabled;
    if (v == 0.0) {
      tabled = "0";
    } else {
      try {
        tabled = fmt::format("{:.0f}", safety::design_ssd_ft(v));
      } catch (const safety::OutOfTableError&) {
        tabled = csv ? "" : "n/a (above table)";
      }
    }
    if (csv) {
      fmt::print("speed_mph,continuous_ssd_ft,continuous_ssd_m,table_ssd_ft\n{},{:.2f},{:.2f},{}\n", v,
                 continuous, safety::ft_to_m(continuous), tabled);
    } else {
      fmt::print("speed (mph):          {}\n", v);
      fmt::print("continuous SSD (ft):  {:.2f}\n", continuous);
      fmt::print("continuous SSD (m):   {:.2f}\n", safety::ft_to_m(continuous));
      fmt::print("table SSD (ft):       {}\n", tabled);
    }
  }
  if (table || !speed_mph) {
    if (speed_mph) fmt::print("\n");
    std::fputs(csv ? "speed_mph,ssd_ft,computed_ft\n" : "speed_mph  ssd_ft  computed_ft\n", stdout);
    for (const auto& row : safety::design_ssd_table()) {
      const double computed = safety::compute_ssd_ft(row.speed_mph);
      if (csv) {
        fmt::print("{},{},{:.2f}\n", row.speed_mph, row.ssd_ft, computed);
      } else {
        fmt::print("{:>9}  {:>6}  {:>11.2f}\n", row.speed_mph, row.ssd_ft, computed);
      }
    }
  }
  return 0;
}

int cmd_bus_serve(const std::string& listen, const std::string& port_file) {
  bus::Broker broker(bus::parse_endpoint(listen));
  spdlog::info("broker listening on port {}", broker.port());
  if (!port_file.empty()) io::write_file_atomic(port_file, fmt::format("{}\n", broker.port()));
  while (!g_stop.load()) std::this_thread::sleep_for(std::chrono::milliseconds(50));
  broker.stop();
  spdlog::info("broker stopped");
  return 0;
}

struct NodeOptions {
  std::string frame_qos = "lossless";
  std::string await_roles = "perception,led";
  double await_timeout_s = 30.0;
  std::string recording;
  std::string record;
  bool realtime = false;
};

std::vector<std::string> split_roles(const std::string& text) {
  std::vector<std::string> roles;
  if (text == "none" || text.empty()) return roles;
  std::string current;
  for (char ch : text + ",") {
    if (ch == ',') {
      if (!current.empty()) roles.push_back(current);
      current.clear();
    } else {
      current += ch;
    }
  }
  return roles;
}

int cmd_node(const GlobalOptions& g, const std::string& role, const NodeOptions& n) {
  const auto c = resolve_config(g);
  bus::TcpClient client(bus::parse_endpoint(g.bus));
  if (role == "sensor") {
    std::unique_ptr<pipeline::FrameSource> source;
    if (!n.recording.empty()) {
      source = std::make_unique<pipeline::ReplayFrameSource>(n.recording);
    } else {
      std::optional<fs::path> record_dir;
      if (!n.record.empty()) record_dir = n.record;
      source = std::make_unique<pipeline::SimFrameSource>(c.scenario, record_dir);
    }
    pipeline::SensorNode sensor(client, std::move(source));
    const auto roles = split_roles(n.await_roles);
    sensor.await_ready(roles, std::chrono::milliseconds(static_cast<long>(n.await_timeout_s * 1000)));
    const auto period = n.realtime ? std::chrono::nanoseconds(1'000'000'000LL / c.scenario.frame_rate_hz)
                                   : std::chrono::nanoseconds(0);
    sensor.run(g_stop, period);
    client.close();
    fmt::print("frames published: {}\n", sensor.frames_published());
    return 0;
  }
  if (role == "perception") {
    pipeline::PerceptionNode perception(client, c.pipeline, bus::parse_qos(n.frame_qos));
    const auto result = perception.run(g_stop);
    client.close();
    const auto report = cli::make_run_report(perception.outcomes(), c.scenario, c.pipeline);
    cli::write_run_report(g.out, report);
    print_summary(report.summary);
    return result == pipeline::PollResult::kEnd || g_stop.load() ? 0 : 1;
  }
  if (role == "led") {
    pipeline::LedNode led(client);
    led.run(g_stop);
    client.close();
    fs::create_directories(g.out);
    io::write_file_atomic(fs::path(g.out) / "led.csv", cli::led_csv(led.history()));
    fmt::print("led: {} statuses, {} transitions, final {}\n", led.history().size(), led.transitions(),
               led.state().on ? "ON" : "off");
    return 0;
  }
  throw std::invalid_argument(fmt::format("unknown role '{}'", role));
}

}  // namespace

int main(int argc, char** argv) {
  std::signal(SIGINT, on_signal);
  std::signal(SIGTERM, on_signal);
  spdlog::set_default_logger(spdlog::stderr_color_mt("tma"));

  CLI::App app{"Truck-mounted attenuator warning pipeline"};
  app.require_subcommand(1);
  app.fallthrough();
  GlobalOptions g;
  app.add_option("--config", g.config, "Run configuration (JSON)")->check(CLI::ExistingFile);
  app.add_option("--seed", g.seed, "Override the scenario seed");
  app.add_option("--out", g.out, "Output directory")->capture_default_str();
  app.add_option("--bus", g.bus, "Broker address host:port")->capture_default_str();
  app.add_option("--mode", g.mode, "Warning mode: sim | field_continuous | field_table");
  app.add_option("--log-level", g.log_level, "trace|debug|info|warn|error|off")->capture_default_str();

  std::function<int()> action;

  auto* sim_cmd = app.add_subcommand("sim", "Run simulated scenarios");
  sim_cmd->require_subcommand(1);
  sim_cmd->fallthrough();
  auto* run_cmd = sim_cmd->add_subcommand("run", "Run one scenario through the in-process graph");
  run_cmd->fallthrough();
  std::optional<int> scenario;
  std::optional<double> speed;
  std::string record;
  run_cmd->add_option("--scenario", scenario, "1 = same lane, 2 = other lane")->check(CLI::Range(1, 2));
  run_cmd->add_option("--speed-mps", speed, "Relative speed (negative = approaching)");
  run_cmd->add_option("--record", record, "Write a recording directory");
  run_cmd->callback([&] { action = [&] { return cmd_sim_run(g, scenario, speed, record); }; });

  auto* sweep_cmd = sim_cmd->add_subcommand("sweep", "Speed sweep with repeated runs");
  sweep_cmd->fallthrough();
  std::vector<double> speeds{-0.1, -0.2, -0.3, -0.4};
  int runs = 4;
  sweep_cmd->add_option("--speeds", speeds, "Relative speeds in m/s")->delimiter(',')->capture_default_str();
  sweep_cmd->add_option("--runs", runs, "Runs per speed")->check(CLI::PositiveNumber)->capture_default_str();
  sweep_cmd->callback([&] { action = [&] { return cmd_sim_sweep(g, speeds, runs); }; });

  auto* replay_cmd = app.add_subcommand("replay", "Replay a recording through the pipeline");
  replay_cmd->fallthrough();
  std::string replay_dir;
  replay_cmd->add_option("recording", replay_dir, "Recording directory")->required()->check(CLI::ExistingDirectory);
  replay_cmd->callback([&] { action = [&] { return cmd_replay(g, replay_dir); }; });

  auto* ssd_cmd = app.add_subcommand("ssd", "Stopping sight distance");
  ssd_cmd->fallthrough();
  std::optional<double> speed_mph;
  bool table = false;
  std::string format = "text";
  ssd_cmd->add_option("--speed-mph", speed_mph, "Design speed")->check(CLI::NonNegativeNumber);
  ssd_cmd->add_flag("--table", table, "Print the design table");
  ssd_cmd->add_option("--format", format, "text | csv")->check(CLI::IsMember({"text", "csv"}));
  ssd_cmd->callback([&] { action = [&] { return cmd_ssd(speed_mph, table, format); }; });

  auto* bus_cmd = app.add_subcommand("bus", "Message broker");
  bus_cmd->require_subcommand(1);
  bus_cmd->fallthrough();
  auto* serve_cmd = bus_cmd->add_subcommand("serve", "Run the broker until interrupted");
  serve_cmd->fallthrough();
  std::string listen = "127.0.0.1:7447";
  std::string port_file;
  serve_cmd->add_option("--listen", listen, "host:port (port 0 = any free port)")->capture_default_str();
  serve_cmd->add_option("--port-file", port_file, "Write the bound port here once listening");
  serve_cmd->callback([&] { action = [&] { return cmd_bus_serve(listen, port_file); }; });

  auto* node_cmd = app.add_subcommand("node", "Run one role of the distributed graph");
  node_cmd->fallthrough();
  std::string role;
  NodeOptions node;
  node_cmd->add_option("role", role, "sensor | perception | led")
      ->required()
      ->check(CLI::IsMember({"sensor", "perception", "led"}));
  node_cmd->add_option("--frame-qos", node.frame_qos, "perception frame QoS: lossless | keep_last:N")
      ->capture_default_str();
  node_cmd->add_option("--await", node.await_roles, "sensor: roles to wait for, or none")->capture_default_str();
  node_cmd->add_option("--await-timeout", node.await_timeout_s, "sensor: seconds to wait")->capture_default_str();
  node_cmd->add_option("--recording", node.recording, "sensor: replay this recording instead of simulating");
  node_cmd->add_option("--record", node.record, "sensor: also write a recording");
  node_cmd->add_flag("--realtime", node.realtime, "sensor: publish at the scenario frame rate");
  node_cmd->callback([&] { action = [&] { return cmd_node(g, role, node); }; });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    spdlog::set_level(spdlog::level::from_str(g.log_level));
    return action();
  } catch (const sim::ConfigError& e) {
    spdlog::error("config error in field '{}': {}", e.field(), e.what());
    return 3;
  } catch (const std::exception& e) {
    spdlog::error("{}", e.what());
    return 1;
  }
}
