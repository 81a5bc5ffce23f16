#include <cstdio>
#include <exception>
#include <string>

#include <CLI11.hpp>

#include "rewind/cli/pipeline.hpp"

using rewindrl::cli::RunConfig;

namespace {

// Registers the options shared by every subcommand and wires them into the
// key=value store (config file first, flags override).
struct Common {
  std::string config_file;
  std::vector<std::string> sets;

  void attach(CLI::App* app) {
    app->add_option("--config", config_file, "key=value config file (a run manifest works)");
    app->add_option("--set", sets, "extra key=value overrides")->take_all();
  }

  void apply(RunConfig& cfg, CLI::App* app,
             const std::vector<std::pair<std::string, std::string*>>& strings,
             const std::vector<std::pair<std::string, bool*>>& flags = {}) {
    if (!config_file.empty()) cfg.load_file(config_file);
    for (const auto& [key, value] : strings)
      if (!value->empty()) cfg.set(key, *value);
    for (const auto& [key, value] : flags)
      if (*value) cfg.set(key, "1");
    for (const auto& s : sets) {
      const auto eq = s.find('=');
      if (eq == std::string::npos)
        throw CLI::ValidationError("--set expects key=value, got " + s);
      cfg.set(s.substr(0, eq), s.substr(eq + 1));
    }
    (void)app;
  }
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"ReWiND-style language-conditioned reward learning and RL on a synthetic 2D tabletop"};
  app.require_subcommand(1);

  std::string out, seed, threads;
  std::string datasets, checkpoint, reward_ckpt, policy_ckpt, demos, task,
      variant, steps, demos_per_task, rewind_mode, pos_mode, runs, online_task;
  bool no_proxy = false, no_rewind = false, no_instructions = false,
       no_target = false, sparse = false, images = false;

  auto add_shared = [&](CLI::App* sub) {
    sub->add_option("--out", out, "output directory");
    sub->add_option("--seed", seed, "run seed");
    sub->add_option("--threads", threads, "worker threads (1 = serial reference mode)");
  };

  Common common[8];
  int which = -1;
  RunConfig cfg;

  auto* gen = app.add_subcommand("gen-data", "generate demos, proxy data, rollout sets");
  add_shared(gen);
  common[0].attach(gen);
  gen->add_option("--demos-per-task", demos_per_task, "target demos per train task (default 5)");
  gen->callback([&] { which = 0; cfg.command = "gen-data"; });

  auto* tr = app.add_subcommand("train-reward", "train the progress reward model");
  add_shared(tr);
  common[1].attach(tr);
  tr->add_option("--datasets", datasets, "gen-data output root");
  tr->add_option("--steps", steps, "training steps");
  tr->add_option("--rewind-mode", rewind_mode, "to_end | sampled_k | last3");
  tr->add_option("--pos-mode", pos_mode, "first_frame | full | none");
  tr->add_flag("--no-proxy", no_proxy, "train without the broad proxy dataset");
  tr->add_flag("--no-rewind", no_rewind, "disable video rewind");
  tr->add_flag("--no-instructions", no_instructions, "disable paraphrase sampling");
  tr->add_flag("--no-target", no_target, "train on proxy data only");
  tr->callback([&] { which = 1; cfg.command = "train-reward"; });

  auto* ev = app.add_subcommand("eval-reward", "alignment/confusion/ranking/robustness metrics");
  add_shared(ev);
  common[2].attach(ev);
  ev->add_option("--checkpoint", checkpoint, "reward checkpoint")->required();
  ev->add_option("--datasets", datasets, "gen-data output root");
  ev->add_flag("--images", images, "emit confusion heatmap");
  ev->callback([&] { which = 2; cfg.command = "eval-reward"; });

  auto* pp = app.add_subcommand("pretrain-policy", "offline IQL pretraining on labeled demos");
  add_shared(pp);
  common[3].attach(pp);
  pp->add_option("--demos", demos, "demo dataset directory");
  pp->add_option("--datasets", datasets, "gen-data output root");
  pp->add_option("--reward-checkpoint", reward_ckpt, "reward checkpoint");
  pp->add_flag("--sparse", sparse, "label with the sparse success bonus only");
  pp->callback([&] { which = 3; cfg.command = "pretrain-policy"; });

  auto* on = app.add_subcommand("train-online", "online SAC fine-tuning on an unseen task");
  add_shared(on);
  common[4].attach(on);
  on->add_option("--task", task, "task id from the unseen registry")->required();
  on->add_option("--policy-checkpoint", policy_ckpt, "pretrained policy")->required();
  on->add_option("--reward-checkpoint", reward_ckpt, "reward checkpoint");
  on->add_option("--datasets", datasets, "gen-data output root");
  on->add_option("--variant", variant, "metaworld | kl");
  on->add_flag("--sparse", sparse, "success-bonus-only baseline");
  on->callback([&] { which = 4; cfg.command = "train-online"; });

  auto* pl = app.add_subcommand("pipeline", "gen-data + reward + offline + online, resumable");
  add_shared(pl);
  common[5].attach(pl);
  pl->add_option("--online-task", online_task, "task for the online phase");
  pl->callback([&] { which = 5; cfg.command = "pipeline"; });

  auto* ab = app.add_subcommand("ablate", "paired-seed component ablations");
  add_shared(ab);
  common[6].attach(ab);
  ab->add_option("--datasets", datasets, "gen-data output root");
  ab->callback([&] { which = 6; cfg.command = "ablate"; });

  auto* rp = app.add_subcommand("report", "merge run reports into one comparison table");
  add_shared(rp);
  common[7].attach(rp);
  rp->add_option("--runs", runs, "comma-separated run directories")->required();
  rp->callback([&] { which = 7; cfg.command = "report"; });

  CLI11_PARSE(app, argc, argv);

  try {
    const std::vector<std::pair<std::string, std::string*>> strings = {
        {"out", &out},
        {"seed", &seed},
        {"threads", &threads},
        {"datasets", &datasets},
        {"checkpoint", &checkpoint},
        {"reward_checkpoint", &reward_ckpt},
        {"policy_checkpoint", &policy_ckpt},
        {"demos", &demos},
        {"task", &task},
        {"online.variant", &variant},
        {"reward.steps", &steps},
        {"gen.demos_per_task", &demos_per_task},
        {"rewind_mode", &rewind_mode},
        {"pos_mode", &pos_mode},
        {"runs", &runs},
        {"online.task", &online_task},
    };
    const std::vector<std::pair<std::string, bool*>> flags = {
        {"no_proxy", &no_proxy},       {"no_rewind", &no_rewind},
        {"no_instructions", &no_instructions}, {"no_target", &no_target},
        {"sparse", &sparse},           {"online.sparse", &sparse},
        {"images", &images},
    };
    common[which].apply(cfg, nullptr, strings, flags);

    switch (which) {
      case 0: return rewindrl::cli::cmd_gen_data(cfg);
      case 1: return rewindrl::cli::cmd_train_reward(cfg);
      case 2: return rewindrl::cli::cmd_eval_reward(cfg);
      case 3: return rewindrl::cli::cmd_pretrain_policy(cfg);
      case 4: return rewindrl::cli::cmd_train_online(cfg);
      case 5: return rewindrl::cli::cmd_pipeline(cfg);
      case 6: return rewindrl::cli::cmd_ablate(cfg);
      case 7: return rewindrl::cli::cmd_report(cfg);
    }
    return 1;
  } catch (const rewindrl::invalid_input& e) {
    std::fprintf(stderr, "usage error: %s\n", e.what());
    return 1;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  }
}
