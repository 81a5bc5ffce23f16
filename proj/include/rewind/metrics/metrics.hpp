#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "rewind/augment/augment.hpp"
#include "rewind/data/types.hpp"
#include "rewind/reward/train.hpp"

namespace rewindrl::metrics {

// Pearson product-moment correlation. Throws undefined_correlation when
// either input has zero variance.
double pearson_r(const std::vector<double>& x, const std::vector<double>& y);

// Spearman rank correlation: Pearson on fractional ranks, ties averaged.
double spearman_rho(const std::vector<double>& x, const std::vector<double>& y);

// Average ranks (1-based, ties averaged).
std::vector<double> fractional_ranks(const std::vector<double>& x);

struct AlignmentResult {
  double pearson = 0;
  double spearman = 0;
  int demos_used = 0;
  int demos_skipped = 0;
};

struct RankingResult {
  double rank_order_rho = 0;  // mean over tasks
  double reward_diff = 0;     // mean of [(succ-near)+(near-fail)]/2
  std::map<std::string, double> per_task_rho;
};

struct RobustnessResult {
  double avg_rho = 0;        // mean over variants and tasks
  double rho_variance = 0;   // population variance across variants, task-mean
  int variants_dropped = 0;
};

struct ConfusionResult {
  std::vector<std::string> tasks;
  data::Mat scores;  // n x n, row = video task, col = instruction task
  double diag_argmax_accuracy = 0;
};

struct MetricsReport {
  std::map<std::string, AlignmentResult> per_task_alignment;
  AlignmentResult alignment;  // task mean
  ConfusionResult confusion;
  RankingResult ranking;
  RobustnessResult robustness;
  std::map<std::string, std::string> metadata;
  std::vector<std::string> warnings;

  bool has_alignment = false, has_confusion = false, has_ranking = false,
       has_robustness = false;
};

enum class ScoreRule { mean_reward, final_reward };

// Evaluation bundle: a trained model plus the language encoder and frame
// budget used to label videos.
struct Evaluator {
  const reward::Aggregator<Real>* model = nullptr;
  const data::FrozenLanguageEncoder* lang_enc = nullptr;
  int max_frames = 16;
  ScoreRule rule = ScoreRule::mean_reward;

  std::vector<Real> embed(const std::string& text) const {
    return lang_enc->encode(text);
  }
  double video_score(const data::Mat& obs, const std::vector<Real>& lang) const;
};

// Per-demo correlation of labeled rewards against the timestep index,
// averaged per task over a demo dataset. Zero-variance demos are skipped
// with a warning; an empty result throws undefined_correlation.
AlignmentResult demo_alignment(const Evaluator& ev, const data::Dataset& demos,
                               std::map<std::string, AlignmentResult>* per_task = nullptr,
                               std::vector<std::string>* warnings = nullptr);

// Rewards for all combinations of one representative demo and one original
// instruction per task; diagonal-argmax accuracy with lowest-index ties.
ConfusionResult confusion_matrix(const Evaluator& ev, const data::Dataset& demos);

// failure / near_success / success category means ranked per task against
// the ideal order (1,2,3).
RankingResult rollout_ranking(const Evaluator& ev, const data::Dataset& rollouts);

// Spearman of reward-vs-time across instruction variants of one demo per
// task: mean and population variance over variants, averaged over tasks.
RobustnessResult input_robustness(const Evaluator& ev, const data::Dataset& demos,
                                  const augment::InstructionSampler& variants,
                                  int variants_per_task = 4,
                                  std::vector<std::string>* warnings = nullptr);

// CSV (task_id, metric, value) + JSON; optional PPM heatmap of the
// confusion matrix. Throws invalid_input if the report has no sections.
void emit_report(const MetricsReport& report, const std::string& dir,
                 bool heatmap = false);
MetricsReport load_report_json(const std::string& path);

}  // namespace rewindrl::metrics
