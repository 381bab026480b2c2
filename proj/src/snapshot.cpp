#include "dsr/snapshot.hpp"

#include <cstring>
#include <fstream>
#include <map>

#include "dsr/error.hpp"

namespace dsr {
namespace {

constexpr char kMagic[8] = {'D', 'S', 'R', 'S', 'N', 'P', '0', '1'};

std::uint64_t fnv1a(const std::string& bytes) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

struct Writer {
  std::string buf;

  void raw(const void* p, std::size_t n) { buf.append(static_cast<const char*>(p), n); }
  void u8(std::uint8_t v) { raw(&v, 1); }
  void u32(std::uint32_t v) { raw(&v, 4); }
  void u64(std::uint64_t v) { raw(&v, 8); }
  void i64(long long v) { raw(&v, 8); }
  void f64(double v) { raw(&v, 8); }
  void str(const std::string& s) {
    u64(s.size());
    raw(s.data(), s.size());
  }
  void vec(const Vec& v) {
    u64(v.size());
    raw(v.data(), v.size() * sizeof(double));
  }
};

struct Reader {
  const std::string& buf;
  std::size_t pos = 0;

  void raw(void* p, std::size_t n) {
    require(pos + n <= buf.size(), ErrCode::Corrupt, "snapshot truncated");
    std::memcpy(p, buf.data() + pos, n);
    pos += n;
  }
  std::uint8_t u8() {
    std::uint8_t v;
    raw(&v, 1);
    return v;
  }
  std::uint32_t u32() {
    std::uint32_t v;
    raw(&v, 4);
    return v;
  }
  std::uint64_t u64() {
    std::uint64_t v;
    raw(&v, 8);
    return v;
  }
  long long i64() {
    long long v;
    raw(&v, 8);
    return v;
  }
  double f64() {
    double v;
    raw(&v, 8);
    return v;
  }
  std::string str() {
    const std::uint64_t n = u64();
    require(pos + n <= buf.size(), ErrCode::Corrupt, "snapshot truncated");
    std::string s(buf.data() + pos, n);
    pos += n;
    return s;
  }
  Vec vec() {
    const std::uint64_t n = u64();
    Vec v(n);
    raw(v.data(), n * sizeof(double));
    return v;
  }
};

template <typename Params>
void write_tensors(Writer& w, Params& p) {
  std::uint32_t count = 0;
  for_each_tensor(p, [&](const std::string&, Vec&) { ++count; });
  w.u32(count);
  for_each_tensor(p, [&](const std::string& name, Vec& v) {
    w.str(name);
    w.vec(v);
  });
}

template <typename Params>
void read_tensors(Reader& r, Params& p) {
  std::map<std::string, Vec> loaded;
  const std::uint32_t count = r.u32();
  for (std::uint32_t i = 0; i < count; ++i) {
    const std::string name = r.str();
    loaded.emplace(name, r.vec());
  }
  for_each_tensor(p, [&](const std::string& name, Vec& v) {
    auto it = loaded.find(name);
    require(it != loaded.end(), ErrCode::Corrupt, "snapshot missing tensor " + name);
    require(it->second.size() == v.size(), ErrCode::Corrupt, "tensor size mismatch for " + name);
    v = std::move(it->second);
    loaded.erase(it);
  });
  require(loaded.empty(), ErrCode::Corrupt, "snapshot carries unexpected tensors");
}

void write_transitions(Writer& w, const std::vector<CellTransition>& ts) {
  w.u64(ts.size());
  for (const CellTransition& t : ts) {
    w.u32(static_cast<std::uint32_t>(t.from.row));
    w.u32(static_cast<std::uint32_t>(t.from.col));
    w.u32(static_cast<std::uint32_t>(t.action));
    w.f64(t.reward);
    w.u32(static_cast<std::uint32_t>(t.to.row));
    w.u32(static_cast<std::uint32_t>(t.to.col));
    w.u8(t.terminal ? 1 : 0);
  }
}

std::vector<CellTransition> read_transitions(Reader& r) {
  const std::uint64_t n = r.u64();
  std::vector<CellTransition> ts;
  ts.reserve(n);
  for (std::uint64_t i = 0; i < n; ++i) {
    CellTransition t;
    t.from.row = static_cast<int>(r.u32());
    t.from.col = static_cast<int>(r.u32());
    t.action = static_cast<int>(r.u32());
    t.reward = r.f64();
    t.to.row = static_cast<int>(r.u32());
    t.to.col = static_cast<int>(r.u32());
    t.terminal = r.u8() != 0;
    ts.push_back(t);
  }
  return ts;
}

void write_file(const std::string& path, SnapshotKind kind, const std::string& payload) {
  std::string out;
  out.append(kMagic, sizeof(kMagic));
  Writer head;
  head.u32(kSnapshotVersion);
  head.u8(static_cast<std::uint8_t>(kind));
  out += head.buf;
  out += payload;
  Writer sum;
  sum.u64(fnv1a(out));
  out += sum.buf;

  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  require(f.good(), ErrCode::IoError, "cannot open " + path + " for writing");
  f.write(out.data(), static_cast<std::streamsize>(out.size()));
  require(f.good(), ErrCode::IoError, "write failed for " + path);
}

std::string read_file(const std::string& path, SnapshotKind expected) {
  std::ifstream f(path, std::ios::binary);
  require(f.good(), ErrCode::IoError, "cannot open snapshot " + path);
  std::string bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  require(bytes.size() >= sizeof(kMagic) + 4 + 1 + 8, ErrCode::Corrupt, "snapshot too short");
  require(std::memcmp(bytes.data(), kMagic, sizeof(kMagic)) == 0, ErrCode::Corrupt,
          "bad snapshot magic");

  const std::string body = bytes.substr(0, bytes.size() - 8);
  Reader tail{bytes, bytes.size() - 8};
  require(tail.u64() == fnv1a(body), ErrCode::Corrupt, "snapshot checksum mismatch");

  Reader head{bytes, sizeof(kMagic)};
  const std::uint32_t version = head.u32();
  require(version == kSnapshotVersion, ErrCode::VersionMismatch,
          "snapshot version " + std::to_string(version));
  const std::uint8_t kind = head.u8();
  require(kind == static_cast<std::uint8_t>(expected), ErrCode::Corrupt,
          "snapshot holds a different agent kind");
  return body.substr(sizeof(kMagic) + 5);
}

}  // namespace

void save_agent_snapshot(const AgentSnapshot& snapshot, const std::string& path) {
  Writer w;
  w.str(snapshot.map_text);
  w.f64(snapshot.rewards.step_penalty);
  w.f64(snapshot.rewards.water_penalty);
  w.f64(snapshot.rewards.goal_reward);
  w.i64(snapshot.global_step);
  w.i64(snapshot.episode);
  for (std::uint64_t s : snapshot.rng_state) w.u64(s);

  w.u64(snapshot.params.obs_dim);
  w.u64(snapshot.params.hidden);
  w.u64(snapshot.params.feature_dim);
  write_tensors(w, const_cast<ModelParams&>(snapshot.params));
  w.f64(snapshot.opt.lr);
  w.f64(snapshot.opt.momentum);
  write_tensors(w, const_cast<OptimizerState&>(snapshot.opt));
  write_transitions(w, snapshot.replay_main);
  write_transitions(w, snapshot.replay_salient);
  write_file(path, SnapshotKind::Dsr, w.buf);
}

AgentSnapshot load_agent_snapshot(const std::string& path) {
  const std::string payload = read_file(path, SnapshotKind::Dsr);
  Reader r{payload};
  AgentSnapshot s;
  s.map_text = r.str();
  s.rewards.step_penalty = r.f64();
  s.rewards.water_penalty = r.f64();
  s.rewards.goal_reward = r.f64();
  s.global_step = r.i64();
  s.episode = r.i64();
  for (auto& x : s.rng_state) x = r.u64();

  const std::uint64_t obs_dim = r.u64();
  const std::uint64_t hidden = r.u64();
  const std::uint64_t feature = r.u64();
  s.params = init_params(obs_dim, hidden, feature, 0);
  read_tensors(r, s.params);
  const double lr = r.f64();
  const double momentum = r.f64();
  s.opt = make_optimizer(s.params, lr, momentum);
  read_tensors(r, s.opt);
  s.replay_main = read_transitions(r);
  s.replay_salient = read_transitions(r);
  require(r.pos == payload.size(), ErrCode::Corrupt, "snapshot carries trailing bytes");
  return s;
}

void save_baseline_snapshot(const BaselineSnapshot& snapshot, const std::string& path) {
  Writer w;
  w.str(snapshot.map_text);
  w.f64(snapshot.rewards.step_penalty);
  w.f64(snapshot.rewards.water_penalty);
  w.f64(snapshot.rewards.goal_reward);
  w.i64(snapshot.global_step);
  w.i64(snapshot.episode);
  for (std::uint64_t s : snapshot.rng_state) w.u64(s);

  w.u64(snapshot.params.obs_dim);
  w.u64(snapshot.params.hidden);
  w.u64(snapshot.params.feature_dim);
  write_tensors(w, const_cast<BaselineParams&>(snapshot.params));
  w.f64(snapshot.opt.lr);
  w.f64(snapshot.opt.momentum);
  write_tensors(w, const_cast<BaselineOpt&>(snapshot.opt));
  write_transitions(w, snapshot.replay_main);
  write_transitions(w, snapshot.replay_salient);
  write_file(path, SnapshotKind::Baseline, w.buf);
}

BaselineSnapshot load_baseline_snapshot(const std::string& path) {
  const std::string payload = read_file(path, SnapshotKind::Baseline);
  Reader r{payload};
  BaselineSnapshot s;
  s.map_text = r.str();
  s.rewards.step_penalty = r.f64();
  s.rewards.water_penalty = r.f64();
  s.rewards.goal_reward = r.f64();
  s.global_step = r.i64();
  s.episode = r.i64();
  for (auto& x : s.rng_state) x = r.u64();

  const std::uint64_t obs_dim = r.u64();
  const std::uint64_t hidden = r.u64();
  const std::uint64_t feature = r.u64();
  s.params = baseline_init(obs_dim, hidden, feature, 0);
  read_tensors(r, s.params);
  const double lr = r.f64();
  const double momentum = r.f64();
  s.opt = make_baseline_optimizer(s.params, lr, momentum);
  read_tensors(r, s.opt);
  s.replay_main = read_transitions(r);
  s.replay_salient = read_transitions(r);
  require(r.pos == payload.size(), ErrCode::Corrupt, "snapshot carries trailing bytes");
  return s;
}

SnapshotKind snapshot_kind(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  require(f.good(), ErrCode::IoError, "cannot open snapshot " + path);
  char head[13];
  f.read(head, sizeof(head));
  require(f.gcount() == sizeof(head), ErrCode::Corrupt, "snapshot too short");
  require(std::memcmp(head, kMagic, sizeof(kMagic)) == 0, ErrCode::Corrupt,
          "bad snapshot magic");
  return static_cast<SnapshotKind>(static_cast<std::uint8_t>(head[12]));
}

}  // namespace dsr
