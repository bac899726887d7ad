// Acceptance gate: prints one PASS/FAIL line per criterion and exits nonzero
// if any criterion fails.

#include <fcntl.h>
#include <signal.h>
#include <spawn.h>
#include <sys/wait.h>
#include <unistd.h>

#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <random>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "tma/bus/envelope.hpp"
#include "tma/bus/inproc.hpp"
#include "tma/bus/tcp.hpp"
#include "tma/cli/report.hpp"
#include "tma/pipeline/nodes.hpp"
#include "tma/ranging/ranging.hpp"
#include "tma/safety/ssd.hpp"
#include "tma/sim/scenario.hpp"

extern char** environ;

namespace fs = std::filesystem;
using namespace tma;
using namespace std::chrono_literals;

namespace {

struct Verdict {
  bool pass = false;
  std::string detail;
};

fs::path scratch_root() {
  static const fs::path root = fs::temp_directory_path() / fmt::format("tma_acceptance_{}", ::getpid());
  return root;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + p.string());
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

sim::ScenarioConfig quiet(sim::ScenarioConfig c) {
  c.noise = {0.0, 0.0};
  return c;
}

pipeline::GraphResult run_graph(const sim::ScenarioConfig& scenario, const pipeline::PipelineConfig& config) {
  return pipeline::run_in_process(std::make_unique<pipeline::SimFrameSource>(scenario), config);
}

std::optional<std::uint64_t> first_warn(const pipeline::GraphResult& r) {
  for (const auto& o : r.outcomes) {
    if (o.report.warn) return o.report.seq;
  }
  return std::nullopt;
}

std::string show(const std::optional<std::uint64_t>& v) { return v ? std::to_string(*v) : "none"; }

// 1 -------------------------------------------------------------------------
Verdict ssd_table() {
  int matched = 0;
  std::string bad;
  for (const auto& row : safety::design_ssd_table()) {
    const double rounded = std::ceil(safety::compute_ssd_ft(row.speed_mph) / 5.0) * 5.0;
    if (rounded == row.ssd_ft) {
      ++matched;
    } else {
      bad += fmt::format(" {}mph:{}!={}", row.speed_mph, rounded, row.ssd_ft);
    }
  }
  const auto n = safety::design_ssd_table().size();
  return {matched == 14 && n == 14, fmt::format("{}/{} rows match{}", matched, n, bad)};
}

// 2 -------------------------------------------------------------------------
Verdict ssd_spot_values() {
  const double v60 = safety::compute_ssd_ft(60.0);
  const double v15 = safety::compute_ssd_ft(15.0);
  return {std::abs(v60 - 566.04) <= 0.01 && std::abs(v15 - 76.72) <= 0.01,
          fmt::format("SSD(60 mph) = {:.4f} ft, SSD(15 mph) = {:.4f} ft", v60, v15)};
}

// 3 -------------------------------------------------------------------------
Verdict noise_free_exactness() {
  auto scenario = quiet(sim::lab_preset());
  scenario.relative_speed_mps = -0.2;
  const auto config = pipeline::default_pipeline_config(scenario);
  const auto result = run_graph(scenario, config);
  const auto rows = cli::rows_from_outcomes(result.outcomes);
  double worst = 0.0;
  std::size_t ranged = 0;
  for (const auto& row : rows) {
    if (!row.distance_est_m) continue;
    ++ranged;
    worst = std::max(worst, std::abs(*row.distance_est_m - *row.distance_truth_m));
  }
  const auto s = cli::summarize(rows, config);
  const bool ok = ranged == rows.size() && !rows.empty() && worst <= 1e-6 && s.mean_speed_mps &&
                  std::abs(*s.mean_speed_mps + 0.2) <= 0.005 && *s.speed_mse < 1e-4;
  return {ok, fmt::format("{} frames, {} ranged, max |d_est - d_true| = {:.3g} m, mean speed {:.6f} m/s, MSE {:.3g}",
                          rows.size(), ranged, worst, s.mean_speed_mps.value_or(NAN), s.speed_mse.value_or(NAN))};
}

// 4 -------------------------------------------------------------------------
Verdict noise_behaviour() {
  const double sigma = 0.005, dt = 0.1;
  std::mt19937_64 rng(4);
  std::normal_distribution<double> noise(0.0, sigma);
  ranging::SpeedTracker tracker(1);
  std::vector<double> speeds;
  for (std::uint64_t k = 0; speeds.size() < 20000; ++k) {
    const double truth = 20.0 - 0.2 * static_cast<double>(k) * dt;
    const ranging::RangeSample sample{truth + noise(rng), k * 100'000'000ULL, 1};
    if (auto e = tracker.update(sample)) speeds.push_back(e->speed_mps);
  }
  double mean = 0.0;
  for (double v : speeds) mean += v;
  mean /= static_cast<double>(speeds.size());
  double var = 0.0;
  for (double v : speeds) var += (v - mean) * (v - mean);
  var /= static_cast<double>(speeds.size() - 1);
  const double expected = 2.0 * sigma * sigma / (dt * dt);
  const double ratio = var / expected;
  const bool variance_ok = ratio >= 1.0 / 1.5 && ratio <= 1.5;

  std::vector<double> mses;
  bool monotone = true;
  for (double s0 : {0.0, 0.005, 0.02, 0.05}) {
    auto base = sim::lab_preset();
    base.noise = {s0, 0.0};
    base.duration_s = 10.0;
    const auto sweep = cli::run_sweep(base, pipeline::default_pipeline_config(base), {-0.2}, 3, 100);
    const double mse = sweep.rows.front().mse.value_or(NAN);
    if (!mses.empty() && !(mse >= mses.back())) monotone = false;
    mses.push_back(mse);
  }
  return {variance_ok && monotone,
          fmt::format("var/(2s^2/dt^2) = {:.3f} over {} estimates; pipeline MSE over sigma0 {{0, .005, .02, .05}} = "
                      "{:.3g}, {:.3g}, {:.3g}, {:.3g}",
                      ratio, speeds.size(), mses[0], mses[1], mses[2], mses[3])};
}

// 5 -------------------------------------------------------------------------
Verdict lane_oracle() {
  std::size_t checked = 0, wrong = 0, unlabeled = 0, s2_ranges = 0, s2_warns = 0, scenario2_frames = 0;
  for (int i = 0; i < 100; ++i) {
    std::mt19937_64 rng(5000 + i);
    std::uniform_real_distribution<double> width(0.30, 0.40), offset(-0.05, 0.05), start(0.8, 3.0);
    const int scenario_id = 1 + i % 2;
    auto scenario = sim::with_scenario(quiet(sim::lab_preset()), scenario_id);
    scenario.lane_width_m = width(rng);
    scenario.lane_offsets_m = sim::lane_offsets_for(scenario.lane_width_m, offset(rng));
    scenario.initial_distance_m = start(rng);
    scenario.duration_s = 3.0;
    scenario.seed = static_cast<std::uint64_t>(i);
    sim::validate(scenario);
    const auto config = pipeline::default_pipeline_config(scenario);

    sim::ScenarioGenerator gen(scenario);
    pipeline::TrackerState state(config);
    while (auto frame = gen.next()) {
      auto [report, next] = pipeline::process_frame(frame->bundle, std::move(state), config);
      state = std::move(next);
      if (scenario_id == 2) {
        ++scenario2_frames;
        for (const auto& d : report.detections) s2_ranges += d.distance_m ? 1 : 0;
        s2_warns += report.warn ? 1 : 0;
      }
      if (report.detections.empty()) continue;
      if (!report.lanes_found) {
        ++unlabeled;
        continue;
      }
      ++checked;
      if (report.detections.front().lane != frame->truth.lane) ++wrong;
    }
  }
  return {checked > 0 && wrong == 0 && s2_ranges == 0 && s2_warns == 0,
          fmt::format("{} labeled frames with a detection, {} wrong lane, {} without three lines; scenario 2: {} "
                      "frames, {} range samples, {} warnings",
                      checked, wrong, unlabeled, scenario2_frames, s2_ranges, s2_warns)};
}

// 6 -------------------------------------------------------------------------
Verdict sim_trigger() {
  int matched = 0;
  std::string misses;
  for (int r = 0; r < 20; ++r) {
    auto scenario = sim::lab_preset();
    const double speed = 0.1 + 0.1 * (r % 4);
    const double step = speed / scenario.frame_rate_hz;
    // Put the crossing frame half a step inside the threshold so truth never sits on it.
    const double lead = std::round(std::min(2.7, 0.8 * speed * scenario.duration_s) / step) * step;
    scenario.relative_speed_mps = -speed;
    scenario.initial_distance_m = 0.3 - step / 2.0 + lead + step * 0.05 * (r % 5);
    scenario.seed = 600 + static_cast<std::uint64_t>(r);
    const auto result = run_graph(scenario, pipeline::default_pipeline_config(scenario));
    std::optional<std::uint64_t> truth;
    for (const auto& o : result.outcomes) {
      if (o.truth && o.truth->distance_m < 0.3) {
        truth = o.report.seq;
        break;
      }
    }
    const auto warn = first_warn(result);
    if (truth && warn == truth) {
      ++matched;
    } else {
      misses += fmt::format(" run{}:truth={},warn={}", r, show(truth), show(warn));
    }
  }
  return {matched == 20, fmt::format("{}/20 runs warn first exactly at the truth crossing frame{}", matched, misses)};
}

// 7 -------------------------------------------------------------------------
Verdict field_threshold() {
  bool ok = true;
  std::string detail;
  for (auto mode : {safety::WarningMode::kFieldContinuous, safety::WarningMode::kFieldTable}) {
    int worst = 0;
    double threshold = 0.0;
    for (int j = 0; j < 5; ++j) {
      auto scenario = quiet(sim::field_preset());
      scenario.relative_speed_mps = -safety::mph_to_mps(60.0);
      scenario.initial_distance_m = 250.0 + 0.5 * j;
      auto config = pipeline::default_pipeline_config(scenario);
      config.mode = mode;
      const auto result = run_graph(scenario, config);
      threshold = safety::warning_threshold_m(safety::mph_to_mps(60.0), mode, config.warning);
      std::optional<std::uint64_t> truth;
      for (const auto& o : result.outcomes) {
        if (o.truth && o.truth->distance_m < threshold) {
          truth = o.report.seq;
          break;
        }
      }
      const auto warn = first_warn(result);
      if (!truth || !warn) {
        ok = false;
        worst = 1000;
        continue;
      }
      worst = std::max(worst, std::abs(static_cast<int>(*warn) - static_cast<int>(*truth)));
    }
    ok = ok && worst <= 1;
    detail += fmt::format("{}: threshold {:.2f} m, worst first-warn offset {} frame(s); ", safety::to_string(mode),
                          threshold, worst);
  }
  return {ok, detail};
}

// 8 -------------------------------------------------------------------------
class Child {
 public:
  Child(std::vector<std::string> args, const fs::path& log) {
    std::vector<char*> argv;
    argv.push_back(const_cast<char*>(TMA_CLI_PATH));
    for (auto& a : args) argv.push_back(a.data());
    argv.push_back(nullptr);
    posix_spawn_file_actions_t actions;
    posix_spawn_file_actions_init(&actions);
    posix_spawn_file_actions_addopen(&actions, 1, log.c_str(), O_WRONLY | O_CREAT | O_TRUNC, 0644);
    posix_spawn_file_actions_adddup2(&actions, 1, 2);
    const int rc = ::posix_spawn(&pid_, TMA_CLI_PATH, &actions, nullptr, argv.data(), environ);
    posix_spawn_file_actions_destroy(&actions);
    if (rc != 0) throw std::runtime_error("spawn failed");
  }
  Child(const Child&) = delete;
  Child& operator=(const Child&) = delete;
  ~Child() {
    if (pid_ > 0) {
      ::kill(pid_, SIGKILL);
      ::waitpid(pid_, nullptr, 0);
    }
  }

  /// Exit status, or -1 if the process did not exit within the timeout.
  int wait(std::chrono::seconds timeout) {
    const auto deadline = std::chrono::steady_clock::now() + timeout;
    while (std::chrono::steady_clock::now() < deadline) {
      int status = 0;
      if (::waitpid(pid_, &status, WNOHANG) == pid_) {
        pid_ = -1;
        return WIFEXITED(status) ? WEXITSTATUS(status) : 128 + WTERMSIG(status);
      }
      std::this_thread::sleep_for(20ms);
    }
    return -1;
  }
  void terminate() {
    if (pid_ > 0) ::kill(pid_, SIGTERM);
  }

 private:
  pid_t pid_ = -1;
};

Verdict distributed_equivalence() {
  const fs::path dir = scratch_root() / "distributed";
  fs::create_directories(dir);
  const std::string seed = "21";

  auto scenario = sim::lab_preset();
  scenario.seed = 21;
  const auto config = pipeline::default_pipeline_config(scenario);
  const auto local = run_graph(scenario, config);
  const auto local_report = cli::make_run_report(local.outcomes, scenario, config);
  std::vector<std::string> local_telemetry;
  for (const auto& o : local.outcomes) local_telemetry.push_back(pipeline::encode_telemetry(o.report));

  const fs::path port_file = dir / "port";
  Child broker({"--log-level", "warn", "bus", "serve", "--listen", "127.0.0.1:0", "--port-file", port_file.string()},
               dir / "broker.log");
  const auto deadline = std::chrono::steady_clock::now() + 10s;
  while (!fs::exists(port_file) && std::chrono::steady_clock::now() < deadline) std::this_thread::sleep_for(20ms);
  if (!fs::exists(port_file)) return {false, "broker did not report its port"};
  const std::string address = "127.0.0.1:" + std::to_string(std::stoi(slurp(port_file)));

  bus::TcpClient observer(bus::parse_endpoint(address));
  auto telemetry = observer.subscribe(std::string(pipeline::kTelemetryTopic), bus::TopicQos::lossless());

  auto node = [&](const std::string& role, std::vector<std::string> extra) {
    std::vector<std::string> args{"--log-level", "warn", "--seed", seed, "--bus", address,
                                  "--out",       (dir / role).string(), "node", role};
    args.insert(args.end(), extra.begin(), extra.end());
    return std::make_unique<Child>(std::move(args), dir / (role + ".log"));
  };
  auto perception = node("perception", {"--frame-qos", "lossless"});
  auto led = node("led", {});
  auto sensor = node("sensor", {});

  const int sensor_rc = sensor->wait(120s);
  const int perception_rc = perception->wait(120s);
  const int led_rc = led->wait(120s);

  std::vector<std::string> remote_telemetry;
  while (auto e = telemetry.receive(2000ms)) {
    remote_telemetry.emplace_back(e->payload.begin(), e->payload.end());
    if (remote_telemetry.size() == local_telemetry.size()) break;
  }
  observer.close();
  broker.terminate();
  const int broker_rc = broker.wait(10s);

  if (sensor_rc != 0 || perception_rc != 0 || led_rc != 0) {
    return {false, fmt::format("exit codes sensor={} perception={} led={} (logs in {})", sensor_rc, perception_rc,
                               led_rc, dir.string())};
  }
  const bool csv_same = slurp(dir / "perception" / "report.csv") == cli::run_csv(local_report.rows);
  const bool json_same = slurp(dir / "perception" / "report.json") == cli::run_json(local_report);
  const bool led_same = slurp(dir / "led" / "led.csv") == cli::led_csv(local.led_history);
  const bool telemetry_same = remote_telemetry == local_telemetry;
  return {csv_same && json_same && led_same && telemetry_same,
          fmt::format("{} frames; report.csv {}, report.json {}, LED decisions {}, telemetry stream {} "
                      "({} vs {} records); broker exit {}",
                      local.outcomes.size(), csv_same ? "identical" : "DIFFERENT",
                      json_same ? "identical" : "DIFFERENT", led_same ? "identical" : "DIFFERENT",
                      telemetry_same ? "identical" : "DIFFERENT", remote_telemetry.size(), local_telemetry.size(),
                      broker_rc)};
}

// 9 -------------------------------------------------------------------------
bus::Envelope random_envelope(std::mt19937_64& rng) {
  static const std::vector<std::string> pieces{"/", "a", "b", "led", "_", "7", "\xC3\xA9", "\xE2\x82\xAC",
                                               "\xF0\x9F\x9A\x97"};
  std::uniform_int_distribution<std::size_t> pick(0, pieces.size() - 1), len(1, 10), payload(0, 256);
  bus::Envelope e;
  for (std::size_t i = len(rng); i > 0; --i) e.topic += pieces[pick(rng)];
  e.seq = rng();
  e.timestamp_ns = rng();
  e.payload.resize(payload(rng));
  for (auto& b : e.payload) b = static_cast<std::uint8_t>(rng());
  return e;
}

std::size_t fifo_violations(bus::Bus& publisher, bus::Bus& subscriber, std::size_t count) {
  auto sub = subscriber.subscribe("/fifo", bus::TopicQos::lossless());
  std::thread producer([&] {
    for (std::size_t i = 0; i < count; ++i) {
      std::uint8_t payload[8];
      for (int b = 0; b < 8; ++b) payload[b] = static_cast<std::uint8_t>(i >> (8 * b));
      publisher.publish("/fifo", payload, i);
    }
  });
  std::size_t received = 0, violations = 0;
  while (received < count) {
    auto e = sub.receive(5000ms);
    if (!e) break;
    std::uint64_t value = 0;
    for (int b = 0; b < 8; ++b) value |= static_cast<std::uint64_t>(e->payload[b]) << (8 * b);
    if (value != received || e->seq != received || e->timestamp_ns != received) ++violations;
    ++received;
  }
  producer.join();
  if (sub.receive(200ms)) ++violations;  // duplicate or extra
  return violations + (count - received);
}

Verdict bus_properties() {
  const std::size_t n = 100'000;
  bus::InProcBus inproc;
  const std::size_t inproc_bad = fifo_violations(inproc, inproc, n);

  bus::Broker broker(bus::Endpoint{"127.0.0.1", 0});
  const bus::Endpoint address{"127.0.0.1", broker.port()};
  bus::TcpClient publisher(address), subscriber(address);
  const std::size_t tcp_bad = fifo_violations(publisher, subscriber, n);

  std::mt19937_64 rng(9);
  std::size_t roundtrip_bad = 0;
  for (int i = 0; i < 10'000; ++i) {
    const auto e = random_envelope(rng);
    if (bus::decode_envelope(bus::encode_envelope(e)) != e) ++roundtrip_bad;
  }

  std::size_t fuzz_ok = 0, fuzz_rejected = 0, fuzz_other = 0;
  for (int i = 0; i < 20'000; ++i) {
    auto frame = bus::encode_envelope(random_envelope(rng));
    std::uniform_int_distribution<std::size_t> at(0, frame.size() - 1);
    for (int f = 0; f <= i % 4; ++f) frame[at(rng)] = static_cast<std::uint8_t>(rng());
    if (i % 3 == 0) frame.resize(at(rng));
    try {
      bus::decode_envelope(frame);
      ++fuzz_ok;
    } catch (const bus::DecodeError&) {
      ++fuzz_rejected;
    } catch (...) {
      ++fuzz_other;
    }
  }
  return {inproc_bad == 0 && tcp_bad == 0 && roundtrip_bad == 0 && fuzz_other == 0,
          fmt::format("FIFO of {} envelopes: {} in-process and {} TCP violations; {} of 10000 roundtrips differ; "
                      "fuzz: {} decoded, {} rejected, {} unexpected",
                      n, inproc_bad, tcp_bad, roundtrip_bad, fuzz_ok, fuzz_rejected, fuzz_other)};
}

// 10 ------------------------------------------------------------------------
int run_cli(const std::string& args) {
  const std::string cmd = fmt::format("'{}' --log-level error {} >/dev/null 2>&1", TMA_CLI_PATH, args);
  const int raw = std::system(cmd.c_str());
  return WIFEXITED(raw) ? WEXITSTATUS(raw) : -1;
}

Verdict replay_determinism() {
  const fs::path dir = scratch_root() / "replay";
  const auto rec = dir / "rec";
  if (run_cli(fmt::format("--seed 33 --out '{}' sim run --record '{}'", (dir / "live").string(), rec.string())) != 0) {
    return {false, "live run failed"};
  }
  for (const char* name : {"a", "b"}) {
    if (run_cli(fmt::format("--out '{}' replay '{}'", (dir / name).string(), rec.string())) != 0) {
      return {false, "replay failed"};
    }
  }
  bool same = true;
  for (const char* file : {"report.csv", "report.json", "led.csv"}) {
    const auto live = slurp(dir / "live" / file);
    same = same && live == slurp(dir / "a" / file) && live == slurp(dir / "b" / file);
  }
  const auto frames = cli::parse_run_csv(slurp(dir / "live" / "report.csv")).size();
  return {same, fmt::format("{} frames; live, replay 1 and replay 2 reports are {}", frames,
                            same ? "byte-identical" : "DIFFERENT")};
}

}  // namespace

int main() {
  spdlog::set_level(spdlog::level::err);
  fs::create_directories(scratch_root());

  const std::vector<std::pair<const char*, std::function<Verdict()>>> criteria{
      {"SSD table reproduction", ssd_table},
      {"SSD spot values", ssd_spot_values},
      {"noise-free end-to-end exactness", noise_free_exactness},
      {"noise behaviour", noise_behaviour},
      {"lane-assignment oracle", lane_oracle},
      {"sim-mode trigger fidelity", sim_trigger},
      {"field-mode threshold", field_threshold},
      {"distributed equivalence", distributed_equivalence},
      {"bus properties", bus_properties},
      {"replay determinism", replay_determinism},
  };

  int failures = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const auto started = std::chrono::steady_clock::now();
    Verdict v;
    try {
      v = criteria[i].second();
    } catch (const std::exception& e) {
      v = {false, fmt::format("exception: {}", e.what())};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
    fmt::print("{} criterion {:>2} {}: {} [{:.1f} s]\n", v.pass ? "PASS" : "FAIL", i + 1, criteria[i].first,
               v.detail, secs);
    std::fflush(stdout);
    if (!v.pass) ++failures;
  }
  if (failures == 0) fs::remove_all(scratch_root());
  fmt::print("{} of {} criteria passed\n", criteria.size() - static_cast<std::size_t>(failures), criteria.size());
  return failures == 0 ? 0 : 1;
}
