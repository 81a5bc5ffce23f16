#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "rewind/data/dataset_io.hpp"
#include "rewind/data/encoders.hpp"
#include "rewind/data/types.hpp"
#include "rewind/rng.hpp"

namespace rewindrl::augment {

enum class RewindMode { sampled_k, to_end, last3 };

const char* rewind_mode_name(RewindMode m);
RewindMode rewind_mode_from_name(const std::string& s);

// A rewound video: frames [o_1..o_i, o_{i-1}, ..., o_{i-k}] with progress
// targets t/T up to the split index and (i-t)/T down the mirrored suffix.
struct RewindSample {
  data::Mat frames;           // (i+k) x d
  std::vector<Real> targets;  // length i+k
  int split_index = 0;        // i, 1-based
  int rewind_count = 0;       // k
  RewindMode mode = RewindMode::to_end;
};

// mode sampled_k:  i ~ U{2..T-1}, k ~ U{1..min(i-1, T-i)}
// mode to_end:     i ~ U{2..T-1}, k = min(i-1, T-i)
// mode last3:      i = T, k = 3 (requires T >= 4)
RewindSample rewind_augment(const data::Mat& seq, Rng& rng, RewindMode mode);

// Training batch composition knobs (per-sample probabilities).
struct BatchSpec {
  int batch_size = 256;
  double target_frac = 0.2;    // target-demo share vs proxy
  double rewind_prob = 0.8;
  double mismatch_prob = 0.2;  // drawn independently of rewind; wins ties
  double last3_frac = 0.1;     // among rewound videos
  RewindMode rewind_mode = RewindMode::to_end;
  int max_frames = 16;

  void validate() const;
};

// Paraphrase table: task_id -> additional instructions (origin=paraphrase).
using ParaphraseTable = std::map<std::string, std::vector<data::Instruction>>;

ParaphraseTable load_paraphrases(const std::string& path,
                                 std::vector<std::string>* warnings = nullptr);

void save_paraphrases(const ParaphraseTable& table, const std::string& path);

// Uniform sampling over originals + paraphrases per task.
class InstructionSampler {
 public:
  InstructionSampler() = default;
  // originals come from the dataset/registry; table entries are merged in,
  // deduplicated, with a warning per task missing from the table.
  InstructionSampler(
      const std::map<std::string, std::vector<data::Instruction>>& originals,
      const ParaphraseTable& table, std::vector<std::string>* warnings = nullptr);

  const data::Instruction& sample(const std::string& task_id, Rng& rng) const;
  const std::vector<data::Instruction>& instructions(
      const std::string& task_id) const;
  bool has(const std::string& task_id) const;

 private:
  std::map<std::string, std::vector<data::Instruction>> merged_;
};

struct BatchElement {
  data::Mat frames;            // t x d_img, already subsampled/augmented
  std::vector<Real> lang;      // embedded instruction
  std::vector<Real> targets;   // per-frame progress targets
  bool is_mismatch = false;
  bool rewind_sampled = false;  // independent Bernoulli draw
  bool rewound = false;         // effective (mismatch wins ties)
  bool last3 = false;
  bool from_target = false;
  std::string instruction_task;  // task the instruction belongs to
  std::string frames_task;       // task the frames belong to
};

// Draws reward-model training batches. Sequences are subsampled to
// spec.max_frames before augmentation; proxy episodes keep their stored
// instruction while target episodes sample uniformly over originals and
// paraphrases.
class BatchComposer {
 public:
  BatchComposer(const data::Dataset* target, const data::Dataset* proxy,
                BatchSpec spec, const data::FrozenLanguageEncoder* lang_enc,
                const InstructionSampler* sampler);

  std::vector<BatchElement> compose(Rng& rng) const;
  BatchElement compose_one(Rng& rng) const;

  const BatchSpec& spec() const { return spec_; }

 private:
  struct Source {
    const data::Dataset* ds = nullptr;
    std::vector<data::Mat> subsampled;
  };
  const data::Mat& subsampled(bool from_target, int idx) const;
  const std::vector<Real>& embed(const std::string& text) const;

  Source target_, proxy_;
  BatchSpec spec_;
  const data::FrozenLanguageEncoder* lang_enc_;
  const InstructionSampler* sampler_;
  mutable std::map<std::string, std::vector<Real>> lang_cache_;
};

}  // namespace rewindrl::augment
