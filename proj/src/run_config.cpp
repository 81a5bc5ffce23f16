#include "rewind/cli/run_config.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>

namespace rewindrl::cli {

namespace fs = std::filesystem;

RunConfig RunConfig::from_file(const std::string& path) {
  RunConfig c;
  c.load_file(path);
  return c;
}

void RunConfig::load_file(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw invalid_input("config: cannot open " + path);
  std::string line;
  while (std::getline(f, line)) {
    if (line.empty() || line[0] == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw invalid_input("config: malformed line '" + line + "' in " + path);
    const std::string key = line.substr(0, eq);
    // Manifest bookkeeping keys are not configuration.
    if (key == "command" || key.rfind("checksum.", 0) == 0) continue;
    kv[key] = line.substr(eq + 1);
  }
}

void RunConfig::set(const std::string& key, const std::string& value) {
  kv[key] = value;
}

std::string RunConfig::str(const std::string& key, const std::string& def) const {
  const auto it = kv.find(key);
  return it == kv.end() ? def : it->second;
}

double RunConfig::num(const std::string& key, double def) const {
  const auto it = kv.find(key);
  return it == kv.end() ? def : std::stod(it->second);
}

int RunConfig::integer(const std::string& key, int def) const {
  const auto it = kv.find(key);
  return it == kv.end() ? def : std::stoi(it->second);
}

std::uint64_t RunConfig::uint(const std::string& key, std::uint64_t def) const {
  const auto it = kv.find(key);
  return it == kv.end() ? def : std::stoull(it->second);
}

bool RunConfig::flag(const std::string& key, bool def) const {
  const auto it = kv.find(key);
  if (it == kv.end()) return def;
  return it->second == "1" || it->second == "true" || it->second == "on";
}

lang2d::Lang2DConfig RunConfig::env_config() const {
  lang2d::Lang2DConfig c;
  c.horizon = integer("env.horizon", c.horizon);
  c.eps = num("env.eps", c.eps);
  c.action_scale = num("env.action_scale", c.action_scale);
  c.grid = integer("env.grid", c.grid);
  c.validate();
  return c;
}

reward::AggregatorConfig RunConfig::agg_config() const {
  reward::AggregatorConfig c;
  c.d_img = integer("agg.d_img", c.d_img);
  c.d_lang = integer("agg.d_lang", c.d_lang);
  c.hidden = integer("agg.hidden", c.hidden);
  c.layers = integer("agg.layers", c.layers);
  c.heads = integer("agg.heads", c.heads);
  c.ff = integer("agg.ff", c.ff);
  c.max_frames = integer("agg.max_frames", c.max_frames);
  c.pos_mode = reward::pos_mode_from_name(str("pos_mode", "first_frame"));
  c.squash = reward::squash_from_name(str("agg.squash", "logistic"));
  c.validate();
  return c;
}

augment::BatchSpec RunConfig::batch_spec() const {
  augment::BatchSpec b;
  b.target_frac = num("target_frac", b.target_frac);
  b.rewind_prob = num("rewind_prob", b.rewind_prob);
  b.mismatch_prob = num("mismatch_prob", b.mismatch_prob);
  b.last3_frac = num("last3_frac", b.last3_frac);
  b.rewind_mode = augment::rewind_mode_from_name(str("rewind_mode", "to_end"));
  b.validate();
  return b;
}

reward::RewardTrainConfig RunConfig::reward_train_config() const {
  reward::RewardTrainConfig c;
  c.steps = integer("reward.steps", c.steps);
  c.batch_size = integer("reward.batch_size", c.batch_size);
  c.lr = num("reward.lr", c.lr);
  c.seed = seed();
  c.batch = batch_spec();
  c.checkpoint_every = integer("reward.checkpoint_every", c.checkpoint_every);
  c.chunk = integer("reward.chunk", c.chunk);
  c.validate();
  return c;
}

rl::IQLConfig RunConfig::iql_config() const {
  rl::IQLConfig c;
  c.expectile_tau = num("iql.tau", c.expectile_tau);
  c.awr_beta = num("iql.beta", c.awr_beta);
  c.awr_cap = num("iql.cap", c.awr_cap);
  c.gamma = num("iql.gamma", c.gamma);
  c.lr = num("iql.lr", c.lr);
  c.steps = integer("iql.steps", c.steps);
  c.success_bonus = num("iql.success_bonus", c.success_bonus);
  c.batch_size = integer("iql.batch_size", c.batch_size);
  c.n_critics = integer("iql.critics", c.n_critics);
  c.m_sample = integer("iql.m_sample", c.m_sample);
  c.polyak = num("iql.polyak", c.polyak);
  c.layernorm = flag("iql.layernorm", c.layernorm);
  c.seed = seed();
  const std::string w = str("iql.widths", "");
  if (!w.empty()) {
    c.widths.clear();
    std::size_t pos = 0;
    while (pos < w.size()) {
      auto comma = w.find(',', pos);
      if (comma == std::string::npos) comma = w.size();
      c.widths.push_back(std::stoi(w.substr(pos, comma - pos)));
      pos = comma + 1;
    }
  }
  c.validate();
  return c;
}

rl::OnlineConfig RunConfig::online_config() const {
  rl::OnlineConfig c;
  const std::string variant = str("online.variant", "metaworld");
  if (variant == "kl") {
    c.offline_frac = 0.5;
    c.online_fail_frac = 0.25;
    c.online_success_frac = 0.25;
    c.kl_alpha = 10.0;
  } else if (variant != "metaworld") {
    throw invalid_input("online.variant must be metaworld or kl");
  }
  c.total_steps = integer("online.total_steps", c.total_steps);
  c.warm_start_steps = integer("online.warm_start", c.warm_start_steps);
  c.n_critics = integer("online.critics", c.n_critics);
  c.m_sample = integer("online.m_sample", c.m_sample);
  c.utd = integer("online.utd", c.utd);
  c.success_bonus = num("online.success_bonus", c.success_bonus);
  c.gamma = num("online.gamma", c.gamma);
  c.lr = num("online.lr", c.lr);
  c.polyak = num("online.polyak", c.polyak);
  c.batch_size = integer("online.batch_size", c.batch_size);
  c.offline_frac = num("online.offline_frac", c.offline_frac);
  c.online_fail_frac = num("online.fail_frac", c.online_fail_frac);
  c.online_success_frac = num("online.success_frac", c.online_success_frac);
  c.kl_alpha = num("online.kl_alpha", c.kl_alpha);
  c.entropy_in_target = flag("online.entropy_in_target", c.entropy_in_target);
  c.sparse_only = flag("online.sparse", c.sparse_only);
  c.eval_every = integer("online.eval_every", c.eval_every);
  c.eval_episodes = integer("online.eval_episodes", c.eval_episodes);
  c.buffer_capacity = integer("online.buffer_capacity", c.buffer_capacity);
  c.seed = seed();
  c.validate();
  return c;
}

std::uint64_t checksum_path(const std::string& path) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  if (fs::is_directory(path)) {
    // Hash file contents keyed by root-relative paths, so identical trees
    // in different locations compare equal.
    std::vector<std::pair<std::string, std::string>> files;  // rel, abs
    for (const auto& e : fs::recursive_directory_iterator(path))
      if (e.is_regular_file())
        files.emplace_back(fs::relative(e.path(), path).generic_string(),
                           e.path().string());
    std::sort(files.begin(), files.end());
    for (const auto& [rel, abs] : files) {
      h = fnv1a64(rel.data(), rel.size(), h);
      std::ifstream in(abs, std::ios::binary);
      char buf[1 << 16];
      while (in.read(buf, sizeof buf) || in.gcount() > 0)
        h = fnv1a64(buf, std::size_t(in.gcount()), h);
    }
    return h;
  }
  std::ifstream in(path, std::ios::binary);
  if (!in) throw invalid_input("checksum: cannot open " + path);
  char buf[1 << 16];
  while (in.read(buf, sizeof buf) || in.gcount() > 0)
    h = fnv1a64(buf, std::size_t(in.gcount()), h);
  return h;
}

void RunConfig::write_manifest(const std::vector<std::string>& input_paths) const {
  fs::create_directories(out());
  std::ofstream mf(fs::path(out()) / "manifest.txt");
  mf << "command=" << command << "\n";
  for (const auto& [k, v] : kv) mf << k << "=" << v << "\n";
  for (const auto& p : input_paths)
    if (fs::exists(p))
      mf << "checksum." << p << "=" << checksum_path(p) << "\n";
}

}  // namespace rewindrl::cli
