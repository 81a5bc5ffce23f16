#pragma once

#include <algorithm>
#include <map>
#include <string>
#include <vector>

#include "rewind/common.hpp"

namespace rewindrl::data {

// Row-major dense matrix of Real.
struct Mat {
  int rows = 0, cols = 0;
  std::vector<Real> v;

  Mat() = default;
  Mat(int r, int c) : rows(r), cols(c), v(std::size_t(r) * c, Real(0)) {}
  Real* row(int i) { return v.data() + std::size_t(i) * cols; }
  const Real* row(int i) const { return v.data() + std::size_t(i) * cols; }
  Real& at(int i, int j) { return v[std::size_t(i) * cols + j]; }
  Real at(int i, int j) const { return v[std::size_t(i) * cols + j]; }
  bool operator==(const Mat& o) const {
    return rows == o.rows && cols == o.cols && v == o.v;
  }
};

enum class Origin { original, paraphrase };

struct Instruction {
  std::string task_id;
  std::string text;
  Origin origin = Origin::original;
  bool operator==(const Instruction& o) const {
    return task_id == o.task_id && text == o.text && origin == o.origin;
  }
};

enum class Family { reach, push, pull, pick_place };
enum class Split { train, unseen };

const char* family_name(Family f);
Family family_from_name(const std::string& s);

// A language-specified task. (family, object, direction) is unique.
struct TaskSpec {
  std::string task_id;
  Family family = Family::reach;
  std::string color;      // object descriptor, e.g. "red"
  std::string shape;      // e.g. "block"
  std::string direction;  // "left"/"right"/"up"/"down", "none" for reach
  Split split = Split::train;
  std::vector<Instruction> instructions;  // original(s) first

  std::string object() const { return color + " " + shape; }
};

// One environment trajectory before encoding. observations[t] is the
// featurized state at which actions[t] was taken; the success flag refers
// to the state reached by the final action (terminate-on-success).
struct RawEpisode {
  std::string task_id;
  Mat observations;  // T x obs_dim
  Mat proprio;       // T x 3 (agent x, y, gripper)
  Mat actions;       // T x 3 (dx, dy, gripper)
  bool success = false;

  int length() const { return observations.rows; }
};

struct EmbeddedEpisode {
  std::string task_id;
  Mat obs_embed;  // T x d_img
  Mat proprio;    // T x d_p
  Mat actions;    // T x d_a
  Instruction lang_ref;
  bool success = false;
  std::string category;  // rollout-set category, empty otherwise

  int length() const { return obs_embed.rows; }
  bool operator==(const EmbeddedEpisode& o) const {
    return task_id == o.task_id && obs_embed == o.obs_embed &&
           proprio == o.proprio && actions == o.actions &&
           lang_ref == o.lang_ref && success == o.success &&
           category == o.category;
  }
};

enum class DatasetRole { target_demos, openx_proxy, rollout_sets };

const char* role_name(DatasetRole r);
DatasetRole role_from_name(const std::string& s);

struct DatasetManifest {
  std::string name;
  DatasetRole role = DatasetRole::target_demos;
  int d_img = 0;
  int d_lang = 0;
  std::vector<std::string> tasks;
  int episode_count = 0;
  std::uint64_t encoder_seed = 0;
};

struct Dataset {
  DatasetManifest manifest;
  std::vector<EmbeddedEpisode> episodes;
  // Instructions recorded with the dataset (originals; paraphrases live in
  // the separate paraphrase table).
  std::map<std::string, std::vector<Instruction>> instructions;

  std::vector<int> episodes_of(const std::string& task_id) const {
    std::vector<int> out;
    for (int i = 0; i < int(episodes.size()); ++i)
      if (episodes[i].task_id == task_id) out.push_back(i);
    return out;
  }
  std::vector<std::string> task_ids_present() const {
    std::vector<std::string> out;
    for (const auto& e : episodes)
      if (std::find(out.begin(), out.end(), e.task_id) == out.end())
        out.push_back(e.task_id);
    return out;
  }
};

}  // namespace rewindrl::data
