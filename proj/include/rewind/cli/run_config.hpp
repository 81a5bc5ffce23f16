#pragma once

#include <map>
#include <string>
#include <vector>

#include "rewind/augment/augment.hpp"
#include "rewind/lang2d/env.hpp"
#include "rewind/reward/train.hpp"
#include "rewind/rl/online.hpp"

namespace rewindrl::cli {

// Layered key=value configuration: file values first, then command-line
// overrides. Every run writes a manifest with the resolved configuration
// and checksums of its inputs; feeding a manifest back through --config
// reproduces the run.
struct RunConfig {
  std::string command;
  std::map<std::string, std::string> kv;

  static RunConfig from_file(const std::string& path);
  void load_file(const std::string& path);
  void set(const std::string& key, const std::string& value);
  bool has(const std::string& key) const { return kv.count(key) > 0; }

  std::string str(const std::string& key, const std::string& def = "") const;
  double num(const std::string& key, double def) const;
  int integer(const std::string& key, int def) const;
  std::uint64_t uint(const std::string& key, std::uint64_t def) const;
  bool flag(const std::string& key, bool def) const;

  std::uint64_t seed() const { return uint("seed", 0); }
  std::string out() const { return str("out", "runs/out"); }
  int threads() const { return integer("threads", 0); }

  lang2d::Lang2DConfig env_config() const;
  reward::AggregatorConfig agg_config() const;
  augment::BatchSpec batch_spec() const;
  reward::RewardTrainConfig reward_train_config() const;
  rl::IQLConfig iql_config() const;
  rl::OnlineConfig online_config() const;

  // Writes <out>/manifest.txt: command, resolved keys, input checksums.
  void write_manifest(const std::vector<std::string>& input_paths) const;
};

std::uint64_t checksum_path(const std::string& path);

}  // namespace rewindrl::cli
