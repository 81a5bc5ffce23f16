#include "rewind/augment/augment.hpp"

#include <algorithm>
#include <fstream>

namespace rewindrl::augment {

const char* rewind_mode_name(RewindMode m) {
  switch (m) {
    case RewindMode::sampled_k: return "sampled_k";
    case RewindMode::to_end: return "to_end";
    case RewindMode::last3: return "last3";
  }
  return "?";
}

RewindMode rewind_mode_from_name(const std::string& s) {
  if (s == "sampled_k") return RewindMode::sampled_k;
  if (s == "to_end") return RewindMode::to_end;
  if (s == "last3") return RewindMode::last3;
  throw invalid_input("unknown rewind mode: " + s);
}

void BatchSpec::validate() const {
  for (double p : {target_frac, rewind_prob, mismatch_prob, last3_frac})
    if (p < 0 || p > 1)
      throw invalid_input("BatchSpec: probabilities must lie in [0,1]");
  if (batch_size < 1) throw invalid_input("BatchSpec: batch_size must be >= 1");
  if (max_frames < 2) throw invalid_input("BatchSpec: max_frames must be >= 2");
}

RewindSample rewind_augment(const data::Mat& seq, Rng& rng, RewindMode mode) {
  const int T = seq.rows;
  if (T < 3) throw invalid_input("rewind_augment: need T >= 3");
  if (mode == RewindMode::last3 && T < 4)
    throw invalid_input("rewind_augment: last3 needs T >= 4");

  int i, k;
  if (mode == RewindMode::last3) {
    i = T;
    k = 3;
  } else {
    i = int(rng.uniform_int(2, T - 1));
    const int kmax = std::min(i - 1, T - i);
    k = mode == RewindMode::sampled_k ? int(rng.uniform_int(1, kmax)) : kmax;
  }

  RewindSample out;
  out.split_index = i;
  out.rewind_count = k;
  out.mode = mode;
  out.frames = data::Mat(i + k, seq.cols);
  out.targets.resize(i + k);
  for (int t = 1; t <= i; ++t) {
    std::copy(seq.row(t - 1), seq.row(t - 1) + seq.cols, out.frames.row(t - 1));
    out.targets[t - 1] = Real(double(t) / T);
  }
  for (int j = 1; j <= k; ++j) {
    const int src = i - j;  // frame o_{i-j}, 1-based
    std::copy(seq.row(src - 1), seq.row(src - 1) + seq.cols,
              out.frames.row(i + j - 1));
    out.targets[i + j - 1] = Real(double(i - j) / T);
  }
  return out;
}

ParaphraseTable load_paraphrases(const std::string& path,
                                 std::vector<std::string>* warnings) {
  std::ifstream f(path);
  if (!f) throw invalid_input("load_paraphrases: cannot open " + path);
  ParaphraseTable table;
  std::string line;
  int n = 0;
  while (std::getline(f, line)) {
    if (line.empty()) continue;
    const auto tab = line.find('\t');
    if (tab == std::string::npos) {
      if (warnings)
        warnings->push_back("paraphrases: skipping malformed line '" + line + "'");
      continue;
    }
    const std::string task = line.substr(0, tab);
    const std::string text = line.substr(tab + 1);
    auto& list = table[task];
    const bool dup = std::any_of(list.begin(), list.end(),
                                 [&](const auto& o) { return o.text == text; });
    if (!dup) {
      list.push_back(data::Instruction{task, text, data::Origin::paraphrase});
      ++n;
    }
  }
  if (n == 0 && warnings)
    warnings->push_back("paraphrases: table at " + path + " is empty");
  return table;
}

void save_paraphrases(const ParaphraseTable& table, const std::string& path) {
  std::ofstream f(path);
  for (const auto& [task, list] : table)
    for (const auto& ins : list) f << task << "\t" << ins.text << "\n";
}

InstructionSampler::InstructionSampler(
    const std::map<std::string, std::vector<data::Instruction>>& originals,
    const ParaphraseTable& table, std::vector<std::string>* warnings) {
  for (const auto& [task, origs] : originals) {
    auto& list = merged_[task];
    list = origs;
    const auto it = table.find(task);
    if (it == table.end()) {
      if (warnings)
        warnings->push_back("paraphrases: task " + task +
                            " missing from table, using originals only");
      continue;
    }
    for (const auto& p : it->second) {
      const bool dup = std::any_of(list.begin(), list.end(),
                                   [&](const auto& o) { return o.text == p.text; });
      if (!dup) list.push_back(p);
    }
  }
}

const std::vector<data::Instruction>& InstructionSampler::instructions(
    const std::string& task_id) const {
  const auto it = merged_.find(task_id);
  if (it == merged_.end() || it->second.empty())
    throw invalid_input("no instructions for task " + task_id);
  return it->second;
}

bool InstructionSampler::has(const std::string& task_id) const {
  return merged_.count(task_id) > 0;
}

const data::Instruction& InstructionSampler::sample(const std::string& task_id,
                                                    Rng& rng) const {
  const auto& list = instructions(task_id);
  return list[rng.uniform_int(std::uint64_t(list.size()))];
}

BatchComposer::BatchComposer(const data::Dataset* target,
                             const data::Dataset* proxy, BatchSpec spec,
                             const data::FrozenLanguageEncoder* lang_enc,
                             const InstructionSampler* sampler)
    : spec_(spec), lang_enc_(lang_enc), sampler_(sampler) {
  spec_.validate();
  if (!target && !proxy)
    throw invalid_input("compose_batch: need at least one dataset");
  auto fill = [&](Source& src, const data::Dataset* ds) {
    src.ds = ds;
    if (!ds) return;
    if (ds->episodes.empty())
      throw invalid_input("compose_batch: dataset " + ds->manifest.name +
                          " is empty");
    src.subsampled.reserve(ds->episodes.size());
    for (const auto& e : ds->episodes)
      src.subsampled.push_back(data::take_rows(
          e.obs_embed, data::subsample_indices(e.length(), spec_.max_frames)));
  };
  fill(target_, target);
  fill(proxy_, proxy);
}

const std::vector<Real>& BatchComposer::embed(const std::string& text) const {
  auto it = lang_cache_.find(text);
  if (it == lang_cache_.end())
    it = lang_cache_.emplace(text, lang_enc_->encode(text)).first;
  return it->second;
}

BatchElement BatchComposer::compose_one(Rng& rng) const {
  BatchElement el;
  const bool have_both = target_.ds && proxy_.ds;
  el.from_target =
      have_both ? rng.bernoulli(spec_.target_frac) : target_.ds != nullptr;
  const Source& src = el.from_target ? target_ : proxy_;
  const int ep_idx = int(rng.uniform_int(std::uint64_t(src.ds->episodes.size())));
  const auto& ep = src.ds->episodes[ep_idx];

  // Proxy episodes keep their stored instruction; target episodes sample
  // uniformly over originals and paraphrases.
  const data::Instruction& ins =
      el.from_target && sampler_ && sampler_->has(ep.task_id)
          ? sampler_->sample(ep.task_id, rng)
          : ep.lang_ref;
  el.instruction_task = ins.task_id;
  el.lang = embed(ins.text);

  el.is_mismatch = rng.bernoulli(spec_.mismatch_prob);
  el.rewind_sampled = rng.bernoulli(spec_.rewind_prob);

  if (el.is_mismatch) {
    const auto& other = data::sample_mismatched(*src.ds, ep, rng);
    const auto idx = data::subsample_indices(other.length(), spec_.max_frames);
    el.frames = data::take_rows(other.obs_embed, idx);
    el.targets.assign(el.frames.rows, Real(0));
    el.frames_task = other.task_id;
    return el;
  }

  const data::Mat& sub = src.subsampled[ep_idx];
  el.frames_task = ep.task_id;
  if (el.rewind_sampled && sub.rows >= 3) {
    el.rewound = true;
    RewindMode mode = spec_.rewind_mode;
    if (rng.bernoulli(spec_.last3_frac) && sub.rows >= 4) {
      mode = RewindMode::last3;
      el.last3 = true;
    }
    auto rs = rewind_augment(sub, rng, mode);
    el.frames = std::move(rs.frames);
    el.targets = std::move(rs.targets);
    return el;
  }

  el.frames = sub;
  el.targets.resize(sub.rows);
  for (int t = 1; t <= sub.rows; ++t)
    el.targets[t - 1] = Real(double(t) / sub.rows);
  return el;
}

std::vector<BatchElement> BatchComposer::compose(Rng& rng) const {
  std::vector<BatchElement> batch;
  batch.reserve(spec_.batch_size);
  for (int b = 0; b < spec_.batch_size; ++b) batch.push_back(compose_one(rng));
  return batch;
}

}  // namespace rewindrl::augment
