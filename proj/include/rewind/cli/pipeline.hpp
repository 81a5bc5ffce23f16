#pragma once

#include "rewind/cli/run_config.hpp"
#include "rewind/metrics/metrics.hpp"

namespace rewindrl::cli {

// Subcommand entry points; each writes its artifacts and manifest under
// config.out() and returns a process exit code (0 ok, 2 runtime failure).

int cmd_gen_data(RunConfig cfg);
int cmd_train_reward(RunConfig cfg);
int cmd_eval_reward(RunConfig cfg);
int cmd_pretrain_policy(RunConfig cfg);
int cmd_train_online(RunConfig cfg);
int cmd_pipeline(RunConfig cfg);
int cmd_ablate(RunConfig cfg);
int cmd_report(RunConfig cfg);

// Shared helpers, used by the acceptance suite as well.

struct EvalArtifacts {
  metrics::MetricsReport train;   // alignment + confusion over train demos
  metrics::MetricsReport unseen;  // alignment, confusion, ranking, robustness
};

// Full evaluation of a reward model against a gen-data directory layout.
EvalArtifacts evaluate_reward_model(const reward::Aggregator<Real>& model,
                                    const std::string& data_root,
                                    int max_frames);

// Loads the language/observation encoders consistent with a dataset root.
data::EncoderSet encoders_for(const std::string& data_root,
                              const lang2d::Lang2DConfig& env_cfg,
                              int d_img, int d_lang);

struct AblationRow {
  std::string label;
  double train_rho = 0, unseen_rho = 0, rank_order_rho = 0, reward_diff = 0,
         robust_avg_rho = 0, robust_rho_var = 0;
};

// Trains and evaluates one reward-model variant (toggles applied on top of
// the base config) and returns the Table-2 style row, averaged over seeds.
AblationRow run_ablation_variant(const RunConfig& base, const std::string& label,
                                 const std::string& data_root,
                                 const std::vector<std::uint64_t>& seeds);

const std::vector<std::string>& ablation_row_labels();

}  // namespace rewindrl::cli
