#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "dsr/config.hpp"
#include "dsr/error.hpp"
#include "dsr/experiments.hpp"
#include "dsr/maps.hpp"
#include "dsr/metrics.hpp"
#include "dsr/snapshot.hpp"

using namespace dsr;
namespace fs = std::filesystem;

namespace {

bool throws_code(ErrCode want, const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code() == want;
  }
  return false;
}

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() /
           ("dsrlab_test_" + std::to_string(reinterpret_cast<std::uintptr_t>(this)));
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  std::string file(const std::string& name) const { return (path / name).string(); }
};

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(in.good());
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

void spit(const std::string& path, const std::string& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out << bytes;
}

TrainConfig quick_train() {
  TrainConfig cfg;
  cfg.lr = 0.002;
  cfg.batch_size = 8;
  cfg.hidden_dim = 16;
  cfg.feature_dim = 8;
  cfg.target_sync_interval = 50;
  cfg.epsilon = {1.0, 0.1, 600};
  cfg.max_env_steps = 3000;
  cfg.max_episodes = 100000;
  cfg.step_limit = 60;
  cfg.eval_interval_episodes = 100;
  cfg.eval_episodes = 5;
  cfg.seed = 7;
  return cfg;
}

}  // namespace

TEST_CASE("config defaults match the reference hyperparameters") {
  const ExperimentConfig cfg = parse_config_text("");
  CHECK(cfg.train.gamma == 0.99);
  CHECK(cfg.train.lr == 2.5e-4);
  CHECK(cfg.train.momentum == 0.95);
  CHECK(cfg.train.epsilon.start == 1.0);
  CHECK(cfg.train.epsilon.end == 0.1);
  CHECK(cfg.train.epsilon.anneal_steps == 20000);
  CHECK(cfg.train.replay_capacity == 1000000);
  CHECK(cfg.train.salient_sample_prob == 0.2);
  CHECK(cfg.train.reward_sample_init == 4000.0);
  CHECK(cfg.train.reward_sample_factor == 0.5);
  CHECK(cfg.train.reward_sample_floor == 1);
  CHECK(cfg.train.step_limit == 500);
  CHECK(cfg.map_rewards.step_penalty == -0.5);
  CHECK(cfg.map_rewards.water_penalty == -1.0);
  CHECK(cfg.map_rewards.goal_reward == 1.0);
}

TEST_CASE("config parsing: sections, overrides, comments") {
  const ExperimentConfig cfg = parse_config_text(
      "# experiment\n"
      "map = \"maps/two_room.txt\"\n"
      "seed = 42\n"
      "[map]\n"
      "water_penalty = -2.5  # heavier water\n"
      "[train]\n"
      "gamma = 0.9\n"
      "batch_size = 16\n"
      "epsilon_per_episode = true\n"
      "[subgoals]\n"
      "threshold = \"sign\"\n");
  CHECK(cfg.map_path == "maps/two_room.txt");
  CHECK(cfg.train.seed == 42);
  CHECK(cfg.map_rewards.water_penalty == -2.5);
  CHECK(cfg.train.gamma == 0.9);
  CHECK(cfg.train.batch_size == 16);
  CHECK(cfg.train.epsilon_per_episode);
  CHECK(cfg.subgoals.threshold == "sign");
}

TEST_CASE("config errors carry the offending key") {
  CHECK(throws_code(ErrCode::ParseError, [] { parse_config_text("nonsense\n"); }));
  CHECK(throws_code(ErrCode::ParseError, [] { parse_config_text("unknown_key = 1\n"); }));
  CHECK(throws_code(ErrCode::ParseError, [] { parse_config_text("[train]\ngamma = abc\n"); }));
  try {
    parse_config_text("[train]\ngamma = 1.5\n");
    CHECK(false);
  } catch (const Error& e) {
    CHECK(e.code() == ErrCode::RangeError);
    CHECK(std::string(e.what()).find("gamma") != std::string::npos);
  }
  CHECK(throws_code(ErrCode::RangeError, [] { parse_config_text("[train]\nlr = 0\n"); }));
  CHECK(throws_code(ErrCode::RangeError,
                    [] { parse_config_text("kernel_backend = \"sse9\"\n"); }));
  CHECK(throws_code(ErrCode::IoError, [] { load_config("/nonexistent/config.toml"); }));
}

TEST_CASE("metric files: header-only when empty, locale-free round trip") {
  TempDir tmp;
  const std::string path = tmp.file("empty.csv");
  write_metrics(path, {"a", "b"}, {});
  CHECK(slurp(path) == "a,b\n");

  const std::string full = tmp.file("rows.csv");
  const std::vector<std::vector<std::string>> rows{{format_double(0.1), format_double(-2.5)},
                                                   {format_double(1e-17), format_double(42.0)}};
  write_metrics(full, {"x", "y"}, rows);
  const CsvContent back = read_csv(full);
  CHECK(back.header == std::vector<std::string>{"x", "y"});
  REQUIRE(back.rows.size() == 2);
  CHECK(std::stod(back.rows[0][0]) == 0.1);
  CHECK(std::stod(back.rows[0][1]) == -2.5);
  CHECK(std::stod(back.rows[1][0]) == 1e-17);

  CHECK(throws_code(ErrCode::DimensionMismatch,
                    [&] { write_metrics(full, {"x"}, {{"1", "2"}}); }));
}

TEST_CASE("snapshots round-trip byte for byte and detect corruption") {
  const GridMap map = parse_map(maps::kCorridor);
  TrainConfig cfg = quick_train();
  cfg.max_env_steps = 500;
  cfg.eval_interval_episodes = 0;
  const TrainResult result = run_training(map, cfg);

  TempDir tmp;
  const std::string p1 = tmp.file("a.dsr");
  const std::string p2 = tmp.file("b.dsr");
  save_agent_snapshot(result.snapshot, p1);
  const AgentSnapshot loaded = load_agent_snapshot(p1);
  save_agent_snapshot(loaded, p2);
  CHECK(slurp(p1) == slurp(p2));
  CHECK(loaded.global_step == result.snapshot.global_step);
  CHECK(loaded.params.w == result.snapshot.params.w);
  CHECK(loaded.rng_state == result.snapshot.rng_state);
  CHECK(loaded.replay_main == result.snapshot.replay_main);

  // flip one payload byte: checksum must catch it
  std::string bytes = slurp(p1);
  bytes[bytes.size() / 2] = static_cast<char>(bytes[bytes.size() / 2] ^ 0x40);
  spit(p2, bytes);
  CHECK(throws_code(ErrCode::Corrupt, [&] { load_agent_snapshot(p2); }));

  // version bump: flagged as a version mismatch
  std::string vbytes = slurp(p1);
  vbytes[8] = 9;  // version field follows the 8-byte magic
  {
    // refresh the trailing checksum so only the version differs
    const std::string body = vbytes.substr(0, vbytes.size() - 8);
    std::uint64_t h = 1469598103934665603ULL;
    for (unsigned char c : body) {
      h ^= c;
      h *= 1099511628211ULL;
    }
    for (int i = 0; i < 8; ++i)
      vbytes[vbytes.size() - 8 + i] = static_cast<char>((h >> (8 * i)) & 0xff);
  }
  spit(p2, vbytes);
  CHECK(throws_code(ErrCode::VersionMismatch, [&] { load_agent_snapshot(p2); }));

  CHECK(snapshot_kind(p1) == SnapshotKind::Dsr);
  CHECK(throws_code(ErrCode::Corrupt, [&] { load_baseline_snapshot(p1); }));
}

TEST_CASE("training resumed from a snapshot file matches the uninterrupted run") {
  const GridMap map = parse_map(maps::kCorridor);
  TrainConfig cfg = quick_train();
  cfg.max_env_steps = 1 << 30;
  cfg.max_episodes = 60;
  cfg.eval_interval_episodes = 20;
  const TrainResult full = run_training(map, cfg);

  TrainConfig half = cfg;
  half.max_episodes = 30;
  const TrainResult part1 = run_training(map, half);

  TempDir tmp;
  save_agent_snapshot(part1.snapshot, tmp.file("half.dsr"));
  const AgentSnapshot resumed = load_agent_snapshot(tmp.file("half.dsr"));
  const TrainResult part2 = run_training(map, cfg, &resumed);

  REQUIRE(part1.episodes.size() + part2.episodes.size() == full.episodes.size());
  for (std::size_t i = 0; i < part2.episodes.size(); ++i) {
    const EpisodeRow& a = part2.episodes[i];
    const EpisodeRow& b = full.episodes[30 + i];
    CHECK(a.reward == b.reward);
    CHECK(a.steps == b.steps);
    CHECK(a.loss_r == b.loss_r);
    CHECK(a.loss_a == b.loss_a);
    CHECK(a.loss_m == b.loss_m);
  }
  CHECK(part2.snapshot.params.w == full.snapshot.params.w);
  CHECK(part2.snapshot.rng_state == full.snapshot.rng_state);

  // evals recorded after the resume point match as well
  std::vector<EvalRow> tail(full.evals.end() - part2.evals.size(), full.evals.end());
  REQUIRE(part2.evals.size() == tail.size());
  for (std::size_t i = 0; i < tail.size(); ++i)
    CHECK(part2.evals[i].mean_reward == tail[i].mean_reward);
}

TEST_CASE("the train subcommand is reproducible byte for byte") {
  TempDir tmp;
  const std::string map_path = tmp.file("corridor.txt");
  spit(map_path, maps::kCorridor);
  const std::string config_path = tmp.file("cfg.toml");
  spit(config_path,
       "map = \"" + map_path + "\"\n" +
           "seed = 7\n"
           "[train]\n"
           "lr = 0.002\n"
           "batch_size = 8\n"
           "hidden_dim = 16\n"
           "feature_dim = 8\n"
           "target_sync_interval = 50\n"
           "epsilon_anneal_steps = 600\n"
           "max_env_steps = 1500\n"
           "step_limit = 60\n"
           "eval_interval_episodes = 100\n"
           "eval_episodes = 5\n");

  const std::string out1 = tmp.file("out1");
  const std::string out2 = tmp.file("out2");
  CHECK(run_cli({"train", "--config", config_path, "--out", out1}) == 0);
  CHECK(run_cli({"train", "--config", config_path, "--out", out2}) == 0);
  CHECK(slurp(out1 + "/training.csv") == slurp(out2 + "/training.csv"));
  CHECK(slurp(out1 + "/evals.csv") == slurp(out2 + "/evals.csv"));
  CHECK(slurp(out1 + "/snapshot.dsr") == slurp(out2 + "/snapshot.dsr"));

  // the emitted training csv parses back with the pinned schema
  const CsvContent csv = read_csv(out1 + "/training.csv");
  CHECK(csv.header == std::vector<std::string>{"episode", "steps", "reward", "eps", "loss_r",
                                               "loss_a", "loss_m"});
  CHECK(!csv.rows.empty());

  // a different seed changes the artifacts
  const std::string out3 = tmp.file("out3");
  CHECK(run_cli({"train", "--config", config_path, "--seed", "8", "--out", out3}) == 0);
  CHECK(slurp(out1 + "/training.csv") != slurp(out3 + "/training.csv"));
}

TEST_CASE("training reward improves on the corridor smoke run") {
  TempDir tmp;
  const std::string map_path = tmp.file("corridor.txt");
  spit(map_path, maps::kCorridor);

  ExperimentConfig cfg;
  cfg.map_path = map_path;
  cfg.out_dir = tmp.file("out");
  cfg.train = quick_train();
  cfg.train.max_env_steps = 6000;
  std::ostringstream log;
  run_train_experiment(cfg, "", log);

  const CsvContent csv = read_csv(cfg.out_dir + "/training.csv");
  REQUIRE(csv.rows.size() >= 40);
  auto moving_average = [&](std::size_t begin) {
    double acc = 0.0;
    for (std::size_t i = begin; i < begin + 10; ++i) acc += std::stod(csv.rows[i][2]);
    return acc / 10.0;
  };
  const double early = moving_average(0);
  const double late = moving_average(csv.rows.size() - 10);
  CHECK(late > early);
  CHECK(late == doctest::Approx(0.5).epsilon(0.2));  // corridor optimum is 0.5
}

TEST_CASE("eval, distal and subgoals subcommands produce their artifacts") {
  TempDir tmp;
  const std::string map_path = tmp.file("two_room.txt");
  spit(map_path, maps::kTwoRoom);
  const std::string config_path = tmp.file("cfg.toml");
  spit(config_path,
       "map = \"" + map_path + "\"\n" +
           "seed = 11\n"
           "[train]\n"
           "lr = 0.002\n"
           "batch_size = 8\n"
           "hidden_dim = 16\n"
           "feature_dim = 8\n"
           "target_sync_interval = 50\n"
           "epsilon_anneal_steps = 800\n"
           "max_env_steps = 4000\n"
           "step_limit = 120\n"
           "eval_interval_episodes = 0\n"
           "[distal]\n"
           "goal_reward = 3.0\n"
           "max_env_steps = 2500\n"
           "[subgoals]\n"
           "runs = 2\n"
           "k = 4\n"
           "samples = 150\n"
           "train_steps = 1500\n"
           "segments = 2\n");

  const std::string out = tmp.file("out");
  REQUIRE(run_cli({"train", "--config", config_path, "--out", out}) == 0);

  CHECK(run_cli({"eval", "--snapshot", out + "/snapshot.dsr", "--config", config_path, "--out",
                 out, "--episodes", "4", "--epsilon", "0"}) == 0);
  CHECK(fs::exists(out + "/eval.csv"));

  CHECK(run_cli({"distal", "--snapshot", out + "/snapshot.dsr", "--config", config_path,
                 "--out", out}) == 0);
  const CsvContent distal = read_csv(out + "/distal.csv");
  CHECK(distal.header == std::vector<std::string>{"updates", "env_steps", "q_start", "target_q",
                                                  "loss_r"});
  CHECK(!distal.rows.empty());

  CHECK(run_cli({"subgoals", "--config", config_path, "--out", out}) == 0);
  const CsvContent sub = read_csv(out + "/subgoals.csv");
  CHECK(sub.header ==
        std::vector<std::string>{"state_id", "row", "col", "boundary_count", "rank"});
  CHECK(fs::exists(out + "/partition.txt"));

  CHECK(run_cli({"baseline", "--config", config_path, "--out", out + "_b"}) == 0);
  CHECK(fs::exists(out + "_b/snapshot.dqn"));
  CHECK(run_cli({"eval", "--snapshot", out + "_b/snapshot.dqn", "--config", config_path,
                 "--out", out + "_b", "--episodes", "4"}) == 0);
}

TEST_CASE("the sr table export writes one row per state-action pair") {
  const GridMap map = parse_map(maps::kCorridor);
  const TabularModel model = build_transition_model(map);
  const SRTable sr = sr_closed_form(model, uniform_policy(model.n_states), 0.9);
  TempDir tmp;
  const std::string path = tmp.file("sr.csv");
  write_sr_csv(path, sr);
  const CsvContent csv = read_csv(path);
  CHECK(csv.rows.size() == static_cast<std::size_t>(model.n_states * kNumActions));
  CHECK(csv.header.size() == static_cast<std::size_t>(2 + model.n_states));
}
