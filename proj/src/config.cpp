#include "dsr/config.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

#include "dsr/error.hpp"

namespace dsr {
namespace {

std::string trim(const std::string& s) {
  std::size_t a = s.find_first_not_of(" \t\r");
  std::size_t b = s.find_last_not_of(" \t\r");
  if (a == std::string::npos) return "";
  return s.substr(a, b - a + 1);
}

// strips a trailing comment that starts outside quotes
std::string strip_comment(const std::string& s) {
  bool quoted = false;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (s[i] == '"') quoted = !quoted;
    if (s[i] == '#' && !quoted) return s.substr(0, i);
  }
  return s;
}

struct RawValue {
  std::string text;
  int line = 0;
};

double parse_number(const std::string& key, const RawValue& v) {
  const std::string t = trim(v.text);
  double out = 0.0;
  const char* begin = t.data();
  const char* end = t.data() + t.size();
  const auto res = std::from_chars(begin, end, out);
  if (res.ec != std::errc{} || res.ptr != end)
    fail(ErrCode::ParseError,
         "line " + std::to_string(v.line) + ": expected a number for '" + key + "'");
  return out;
}

long long parse_int(const std::string& key, const RawValue& v) {
  const double d = parse_number(key, v);
  const long long i = static_cast<long long>(d);
  if (static_cast<double>(i) != d)
    fail(ErrCode::ParseError, "expected an integer for '" + key + "'");
  return i;
}

bool parse_bool(const std::string& key, const RawValue& v) {
  const std::string t = trim(v.text);
  if (t == "true") return true;
  if (t == "false") return false;
  fail(ErrCode::ParseError, "expected true/false for '" + key + "'");
}

std::string parse_string(const std::string& key, const RawValue& v) {
  const std::string t = trim(v.text);
  if (t.size() >= 2 && t.front() == '"' && t.back() == '"') return t.substr(1, t.size() - 2);
  if (!t.empty() && t.front() != '"') return t;  // bare word
  fail(ErrCode::ParseError, "unterminated string for '" + key + "'");
}

void range(bool ok, const std::string& key) {
  if (!ok) fail(ErrCode::RangeError, key);
}

}  // namespace

ExperimentConfig parse_config_text(const std::string& text) {
  ExperimentConfig cfg;
  std::istringstream in(text);
  std::string line;
  std::string section;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    line = trim(strip_comment(line));
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']')
        fail(ErrCode::ParseError, "line " + std::to_string(lineno) + ": malformed section");
      section = trim(line.substr(1, line.size() - 2));
      continue;
    }
    const std::size_t eq = line.find('=');
    if (eq == std::string::npos)
      fail(ErrCode::ParseError, "line " + std::to_string(lineno) + ": expected key = value");
    const std::string key_local = trim(line.substr(0, eq));
    const std::string key = section.empty() ? key_local : section + "." + key_local;
    const RawValue value{line.substr(eq + 1), lineno};

    auto num = [&] { return parse_number(key, value); };
    auto integer = [&] { return parse_int(key, value); };
    auto boolean = [&] { return parse_bool(key, value); };
    auto str = [&] { return parse_string(key, value); };

    if (key == "map") cfg.map_path = str();
    else if (key == "seed") cfg.train.seed = static_cast<std::uint64_t>(integer());
    else if (key == "out_dir") cfg.out_dir = str();
    else if (key == "kernel_backend") cfg.kernel_backend = str();
    else if (key == "map.step_penalty") cfg.map_rewards.step_penalty = num();
    else if (key == "map.water_penalty") cfg.map_rewards.water_penalty = num();
    else if (key == "map.goal_reward") cfg.map_rewards.goal_reward = num();
    else if (key == "train.gamma") cfg.train.gamma = num();
    else if (key == "train.lr") cfg.train.lr = num();
    else if (key == "train.momentum") cfg.train.momentum = num();
    else if (key == "train.batch_size") cfg.train.batch_size = static_cast<std::size_t>(integer());
    else if (key == "train.target_sync_interval") cfg.train.target_sync_interval = integer();
    else if (key == "train.salient_sample_prob") cfg.train.salient_sample_prob = num();
    else if (key == "train.reward_sample_init") cfg.train.reward_sample_init = num();
    else if (key == "train.reward_sample_factor") cfg.train.reward_sample_factor = num();
    else if (key == "train.reward_sample_floor") cfg.train.reward_sample_floor = integer();
    else if (key == "train.step_limit") cfg.train.step_limit = static_cast<int>(integer());
    else if (key == "train.max_env_steps") cfg.train.max_env_steps = integer();
    else if (key == "train.max_episodes") cfg.train.max_episodes = integer();
    else if (key == "train.replay_capacity")
      cfg.train.replay_capacity = static_cast<std::size_t>(integer());
    else if (key == "train.epsilon_start") cfg.train.epsilon.start = num();
    else if (key == "train.epsilon_end") cfg.train.epsilon.end = num();
    else if (key == "train.epsilon_anneal_steps") cfg.train.epsilon.anneal_steps = integer();
    else if (key == "train.epsilon_per_episode") cfg.train.epsilon_per_episode = boolean();
    else if (key == "train.hidden_dim") cfg.train.hidden_dim = static_cast<std::size_t>(integer());
    else if (key == "train.feature_dim")
      cfg.train.feature_dim = static_cast<std::size_t>(integer());
    else if (key == "train.loss_weight_r") cfg.train.loss_weight_r = num();
    else if (key == "train.loss_weight_a") cfg.train.loss_weight_a = num();
    else if (key == "train.update_period") cfg.train.update_period = static_cast<int>(integer());
    else if (key == "train.eval_epsilon") cfg.train.eval_epsilon = num();
    else if (key == "train.eval_interval_episodes") cfg.train.eval_interval_episodes = integer();
    else if (key == "train.eval_episodes") cfg.train.eval_episodes = static_cast<int>(integer());
    else if (key == "baseline.update_period")
      cfg.baseline_update_period = static_cast<int>(integer());
    else if (key == "eval.episodes") cfg.eval.episodes = static_cast<int>(integer());
    else if (key == "eval.epsilon") cfg.eval.epsilon = num();
    else if (key == "distal.goal_reward") cfg.distal.goal_reward = num();
    else if (key == "distal.max_env_steps") cfg.distal.max_env_steps = integer();
    else if (key == "distal.act_epsilon") cfg.distal.act_epsilon = num();
    else if (key == "distal.tolerance") cfg.distal.tolerance = num();
    else if (key == "distal.lr") cfg.distal.lr = num();
    else if (key == "distal.momentum") cfg.distal.momentum = num();
    else if (key == "subgoals.runs") cfg.subgoals.runs = static_cast<int>(integer());
    else if (key == "subgoals.k") cfg.subgoals.k = static_cast<int>(integer());
    else if (key == "subgoals.samples") cfg.subgoals.samples = static_cast<int>(integer());
    else if (key == "subgoals.sigma") cfg.subgoals.sigma = num();
    else if (key == "subgoals.collapse_duplicates")
      cfg.subgoals.collapse_duplicates = boolean();
    else if (key == "subgoals.action_averaged") cfg.subgoals.action_averaged = boolean();
    else if (key == "subgoals.normalize_samples") cfg.subgoals.normalize = boolean();
    else if (key == "subgoals.segments") cfg.subgoals.segments = static_cast<int>(integer());
    else if (key == "subgoals.train_steps") cfg.subgoals.train_steps = integer();
    else if (key == "subgoals.threshold") cfg.subgoals.threshold = str();
    else
      fail(ErrCode::ParseError, "line " + std::to_string(lineno) + ": unknown key '" + key + "'");
  }
  validate_config(cfg);
  return cfg;
}

void validate_config(const ExperimentConfig& cfg) {
  const TrainConfig& t = cfg.train;
  range(t.gamma >= 0.0 && t.gamma < 1.0, "gamma");
  range(t.lr > 0.0, "lr");
  range(t.momentum >= 0.0 && t.momentum < 1.0, "momentum");
  range(t.batch_size >= 1, "batch_size");
  range(t.target_sync_interval >= 1, "target_sync_interval");
  range(t.salient_sample_prob >= 0.0 && t.salient_sample_prob <= 1.0, "salient_sample_prob");
  range(t.reward_sample_init >= 0.0, "reward_sample_init");
  range(t.reward_sample_factor >= 0.0 && t.reward_sample_factor <= 1.0, "reward_sample_factor");
  range(t.reward_sample_floor >= 0, "reward_sample_floor");
  range(t.step_limit >= 1, "step_limit");
  range(t.max_env_steps >= 1, "max_env_steps");
  range(t.max_episodes >= 1, "max_episodes");
  range(t.replay_capacity >= t.batch_size, "replay_capacity");
  range(t.epsilon.start >= t.epsilon.end && t.epsilon.end >= 0.0 && t.epsilon.start <= 1.0,
        "epsilon_start");
  range(t.epsilon.anneal_steps >= 1, "epsilon_anneal_steps");
  range(t.hidden_dim >= 1, "hidden_dim");
  range(t.feature_dim >= 1, "feature_dim");
  range(t.loss_weight_r >= 0.0, "loss_weight_r");
  range(t.loss_weight_a >= 0.0, "loss_weight_a");
  range(t.update_period >= 1, "update_period");
  range(t.eval_epsilon >= 0.0 && t.eval_epsilon <= 1.0, "eval_epsilon");
  range(t.eval_episodes >= 1, "eval_episodes");
  range(cfg.baseline_update_period >= 1, "baseline.update_period");
  range(cfg.eval.episodes >= 1, "eval.episodes");
  range(cfg.eval.epsilon >= 0.0 && cfg.eval.epsilon <= 1.0, "eval.epsilon");
  range(cfg.distal.max_env_steps >= 1, "distal.max_env_steps");
  range(cfg.distal.act_epsilon >= 0.0 && cfg.distal.act_epsilon <= 1.0, "distal.act_epsilon");
  range(cfg.distal.tolerance > 0.0, "distal.tolerance");
  range(cfg.subgoals.runs >= 1, "subgoals.runs");
  range(cfg.subgoals.k >= 1, "subgoals.k");
  range(cfg.subgoals.samples >= 2, "subgoals.samples");
  range(cfg.subgoals.sigma >= 0.0, "subgoals.sigma");
  range(cfg.subgoals.segments >= 1, "subgoals.segments");
  range(cfg.subgoals.train_steps >= 1, "subgoals.train_steps");
  if (cfg.subgoals.threshold != "sweep" && cfg.subgoals.threshold != "sign")
    fail(ErrCode::RangeError, "subgoals.threshold");
  if (cfg.kernel_backend != "auto" && cfg.kernel_backend != "scalar" &&
      cfg.kernel_backend != "avx2")
    fail(ErrCode::RangeError, "kernel_backend");
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  require(in.good(), ErrCode::IoError, "cannot open config file " + path);
  std::ostringstream text;
  text << in.rdbuf();
  ExperimentConfig cfg = parse_config_text(text.str());
  if (!cfg.map_path.empty()) {
    std::ifstream map(cfg.map_path);
    require(map.good(), ErrCode::IoError, "config references missing map " + cfg.map_path);
  }
  return cfg;
}

}  // namespace dsr
