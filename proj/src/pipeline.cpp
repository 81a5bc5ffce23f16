#include "rewind/cli/pipeline.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>

#include "rewind/data/dataset_io.hpp"
#include "rewind/lang2d/rollouts.hpp"
#include "rewind/nn/kernels.hpp"

namespace rewindrl::cli {

namespace fs = std::filesystem;

namespace {

std::string dataset_dir(const std::string& root, const std::string& name) {
  return (fs::path(root) / "datasets" / name).string();
}

augment::InstructionSampler build_sampler(const lang2d::TaskRegistry& reg,
                                          const std::string& paraphrase_path,
                                          std::vector<std::string>* warnings) {
  std::map<std::string, std::vector<data::Instruction>> originals;
  for (const auto* t : reg.targets()) originals[t->task_id] = t->instructions;
  augment::ParaphraseTable table;
  if (!paraphrase_path.empty() && fs::exists(paraphrase_path))
    table = augment::load_paraphrases(paraphrase_path, warnings);
  return augment::InstructionSampler(originals, table, warnings);
}

void write_curve_csv(const std::string& path,
                     const std::vector<rl::CurvePoint>& curve) {
  std::ofstream f(path);
  f << "step,success_rate,mean_return\n";
  f.precision(17);
  for (const auto& p : curve)
    f << p.step << "," << p.success_rate << "," << p.mean_return << "\n";
}

void write_loss_csv(const std::string& path, const std::vector<double>& loss) {
  std::ofstream f(path);
  f << "step,loss\n";
  f.precision(17);
  for (std::size_t i = 0; i < loss.size(); ++i)
    f << i + 1 << "," << loss[i] << "\n";
}

}  // namespace

data::EncoderSet encoders_for(const std::string& data_root,
                              const lang2d::Lang2DConfig& env_cfg, int d_img,
                              int d_lang) {
  // The encoder seed is recorded in any dataset manifest under the root.
  const auto target = dataset_dir(data_root, "target_demos");
  const auto manifest = fs::exists(target) ? target
                                           : dataset_dir(data_root, "openx_proxy");
  const auto ds = data::load_dataset(manifest);
  return data::EncoderSet(lang2d::Lang2DEnv::obs_dim(env_cfg),
                          ds.manifest.d_img ? ds.manifest.d_img : d_img,
                          ds.manifest.d_lang ? ds.manifest.d_lang : d_lang,
                          ds.manifest.encoder_seed);
}

int cmd_gen_data(RunConfig cfg) {
  const auto env_cfg = cfg.env_config();
  const int d_img = cfg.integer("agg.d_img", 64);
  const int d_lang = cfg.integer("agg.d_lang", 32);
  const std::uint64_t enc_seed = cfg.uint("gen.encoder_seed", 777);
  const int demos_per_task = cfg.integer("gen.demos_per_task", 5);
  const int policy_demos = cfg.integer("gen.policy_demos_per_task", 10);
  const std::uint64_t seed = cfg.seed();

  nn::set_threads(cfg.threads());
  const auto reg = lang2d::build_registry();
  data::EncoderSet enc(lang2d::Lang2DEnv::obs_dim(env_cfg), d_img, d_lang,
                       enc_seed);
  const std::string root = cfg.out();
  fs::create_directories(fs::path(root) / "datasets");

  auto save = [&](const data::Dataset& ds, const std::string& name) {
    data::save_dataset(ds, dataset_dir(root, name));
    std::printf("gen-data: %s (%d episodes)\n", name.c_str(),
                ds.manifest.episode_count);
  };
  save(lang2d::build_demo_dataset(reg.train, demos_per_task, env_cfg, enc,
                                  seed + 1, "target_demos",
                                  data::DatasetRole::target_demos),
       "target_demos");
  save(lang2d::build_demo_dataset(reg.train, policy_demos, env_cfg, enc,
                                  seed + 2, "policy_demos",
                                  data::DatasetRole::target_demos),
       "policy_demos");
  save(lang2d::build_openx_proxy(reg, env_cfg, enc, seed + 3), "openx_proxy");
  save(lang2d::build_demo_dataset(reg.unseen, 5, env_cfg, enc, seed + 4,
                                  "unseen_demos", data::DatasetRole::target_demos),
       "unseen_demos");
  save(lang2d::build_rollout_dataset(reg.unseen, env_cfg, enc, seed + 5,
                                     "rollout_sets"),
       "rollout_sets");

  // Paraphrase table for every target task (train + unseen), either from
  // the built-in bank or an externally generated file.
  const std::string para_out = (fs::path(root) / "paraphrases.tsv").string();
  const std::string external = cfg.str("gen.paraphrase_file", "");
  if (!external.empty()) {
    fs::copy_file(external, para_out, fs::copy_options::overwrite_existing);
  } else {
    augment::ParaphraseTable table;
    for (const auto* t : reg.targets())
      for (const auto& p : lang2d::generate_paraphrases(*t))
        table[t->task_id].push_back(
            {t->task_id, p, data::Origin::paraphrase});
    augment::save_paraphrases(table, para_out);
  }

  {
    std::ofstream reg_out(fs::path(root) / "registry.tsv");
    auto dump = [&](const std::vector<data::TaskSpec>& list, const char* split) {
      for (const auto& t : list)
        reg_out << t.task_id << "\t" << data::family_name(t.family) << "\t"
                << t.color << "\t" << t.shape << "\t" << t.direction << "\t"
                << split << "\t" << t.instructions.front().text << "\n";
    };
    dump(reg.train, "train");
    dump(reg.unseen, "unseen");
    dump(reg.proxy, "proxy");
  }

  cfg.write_manifest(external.empty() ? std::vector<std::string>{}
                                      : std::vector<std::string>{external});
  return 0;
}

int cmd_train_reward(RunConfig cfg) {
  nn::set_threads(cfg.threads());
  const std::string data_root = cfg.str("datasets", cfg.out());
  const bool use_proxy = !cfg.flag("no_proxy", false) && !cfg.flag("no_openx", false);
  const bool use_target = !cfg.flag("no_target", false);
  const bool use_paraphrases = !cfg.flag("no_instructions", false);
  if (!use_proxy && !use_target)
    throw invalid_input("train-reward: both datasets disabled");

  auto train_cfg = cfg.reward_train_config();
  if (cfg.flag("no_rewind", false)) train_cfg.batch.rewind_prob = 0.0;
  const auto agg_cfg = cfg.agg_config();

  data::Dataset target, proxy;
  if (use_target)
    target = data::load_dataset(dataset_dir(data_root, "target_demos"));
  if (use_proxy)
    proxy = data::load_dataset(dataset_dir(data_root, "openx_proxy"));
  const auto& any = use_target ? target : proxy;
  data::FrozenLanguageEncoder lang_enc(any.manifest.d_lang,
                                       any.manifest.encoder_seed + 1);

  const auto reg = lang2d::build_registry();
  std::vector<std::string> warnings;
  const std::string para = (fs::path(data_root) / "paraphrases.tsv").string();
  augment::InstructionSampler sampler =
      use_paraphrases ? build_sampler(reg, para, &warnings)
                      : build_sampler(reg, "", nullptr);

  reward::Aggregator<Real> model(agg_cfg, cfg.uint("agg.init_seed", cfg.seed()));
  const auto result =
      train_reward(model, use_target ? &target : nullptr,
                   use_proxy ? &proxy : nullptr, &sampler, lang_enc, train_cfg);

  fs::create_directories(fs::path(cfg.out()) / "checkpoints");
  const std::string ckpt =
      cfg.str("checkpoint_out",
              (fs::path(cfg.out()) / "checkpoints" / "reward.ckpt").string());
  reward::RewardCheckpoint meta{agg_cfg, train_cfg.steps, Rng(cfg.seed()).serialize(),
                                cfg.uint("agg.init_seed", cfg.seed())};
  reward::save_reward_checkpoint(ckpt, model, meta);
  fs::create_directories(fs::path(cfg.out()) / "reports");
  write_loss_csv((fs::path(cfg.out()) / "reports" / "reward_loss.csv").string(),
                 result.loss_curve);
  if (!result.loss_curve.empty())
    std::printf("train-reward: %d steps, loss %.4f -> %.4f, checkpoint %s\n",
                train_cfg.steps, result.loss_curve.front(),
                result.loss_curve.back(), ckpt.c_str());
  cfg.write_manifest({dataset_dir(data_root, "target_demos"),
                      dataset_dir(data_root, "openx_proxy"), para});
  return 0;
}

EvalArtifacts evaluate_reward_model(const reward::Aggregator<Real>& model,
                                    const std::string& data_root,
                                    int max_frames) {
  EvalArtifacts out;
  const auto target = data::load_dataset(dataset_dir(data_root, "target_demos"));
  const auto unseen = data::load_dataset(dataset_dir(data_root, "unseen_demos"));
  const auto rollouts = data::load_dataset(dataset_dir(data_root, "rollout_sets"));
  data::FrozenLanguageEncoder lang_enc(target.manifest.d_lang,
                                       target.manifest.encoder_seed + 1);
  metrics::Evaluator ev{&model, &lang_enc, max_frames};

  out.train.has_alignment = true;
  out.train.alignment = metrics::demo_alignment(ev, target,
                                                &out.train.per_task_alignment,
                                                &out.train.warnings);
  out.train.has_confusion = true;
  out.train.confusion = metrics::confusion_matrix(ev, target);

  out.unseen.has_alignment = true;
  out.unseen.alignment = metrics::demo_alignment(ev, unseen,
                                                 &out.unseen.per_task_alignment,
                                                 &out.unseen.warnings);
  out.unseen.has_confusion = true;
  out.unseen.confusion = metrics::confusion_matrix(ev, unseen);
  out.unseen.has_ranking = true;
  out.unseen.ranking = metrics::rollout_ranking(ev, rollouts);

  const auto reg = lang2d::build_registry();
  const std::string para = (fs::path(data_root) / "paraphrases.tsv").string();
  auto sampler = build_sampler(reg, para, &out.unseen.warnings);
  out.unseen.has_robustness = true;
  out.unseen.robustness = metrics::input_robustness(ev, unseen, sampler, 4,
                                                    &out.unseen.warnings);
  return out;
}

int cmd_eval_reward(RunConfig cfg) {
  nn::set_threads(cfg.threads());
  const std::string data_root = cfg.str("datasets", cfg.out());
  const std::string ckpt = cfg.str("checkpoint", "");
  if (ckpt.empty()) throw invalid_input("eval-reward: --checkpoint required");

  reward::Aggregator<Real> model;
  const auto meta = reward::load_reward_checkpoint(ckpt, model);
  auto arts = evaluate_reward_model(model, data_root, meta.config.max_frames);

  const auto meta_kv = [&](metrics::MetricsReport& r) {
    // Content hash rather than a path: reports stay byte-identical when a
    // run is reproduced in a different directory.
    r.metadata["checkpoint"] = fs::path(ckpt).filename().string();
    r.metadata["checkpoint_hash"] = std::to_string(checksum_path(ckpt));
    r.metadata["checkpoint_step"] = std::to_string(meta.step);
    r.metadata["seed"] = std::to_string(cfg.seed());
  };
  meta_kv(arts.train);
  meta_kv(arts.unseen);

  const bool images = cfg.flag("images", false);
  metrics::emit_report(arts.train, (fs::path(cfg.out()) / "reports" / "train").string(),
                       images);
  metrics::emit_report(arts.unseen,
                       (fs::path(cfg.out()) / "reports" / "unseen").string(), images);
  std::printf(
      "eval-reward: train rho %.3f acc %.2f | unseen rho %.3f acc %.2f rank "
      "%.3f diff %.3f robust %.3f var %.4f\n",
      arts.train.alignment.spearman, arts.train.confusion.diag_argmax_accuracy,
      arts.unseen.alignment.spearman, arts.unseen.confusion.diag_argmax_accuracy,
      arts.unseen.ranking.rank_order_rho, arts.unseen.ranking.reward_diff,
      arts.unseen.robustness.avg_rho, arts.unseen.robustness.rho_variance);
  cfg.write_manifest({ckpt, data_root});
  return 0;
}

int cmd_pretrain_policy(RunConfig cfg) {
  nn::set_threads(cfg.threads());
  const std::string data_root = cfg.str("datasets", cfg.out());
  const std::string demos_dir =
      cfg.str("demos", dataset_dir(data_root, "policy_demos"));
  const std::string reward_ckpt = cfg.str("reward_checkpoint", "");
  const bool sparse = cfg.flag("sparse", false);
  if (!sparse && reward_ckpt.empty())
    throw invalid_input("pretrain-policy: --reward-checkpoint required");

  const auto demos = data::load_dataset(demos_dir);
  data::FrozenLanguageEncoder lang_enc(demos.manifest.d_lang,
                                       demos.manifest.encoder_seed + 1);
  reward::Aggregator<Real> model;
  if (!sparse) reward::load_reward_checkpoint(reward_ckpt, model);

  const auto reg = lang2d::build_registry();
  const std::string para = (fs::path(data_root) / "paraphrases.tsv").string();
  std::vector<std::string> warnings;
  auto sampler = build_sampler(reg, para, &warnings);

  auto iql_cfg = cfg.iql_config();
  Rng label_rng(cfg.seed() ^ 0xface);
  const auto transitions =
      rl::label_offline(demos, sparse ? nullptr : &model, lang_enc, &sampler,
                        iql_cfg.success_bonus, label_rng);
  std::printf("pretrain-policy: %zu transitions from %d episodes%s\n",
              transitions.size(), demos.manifest.episode_count,
              sparse ? " (sparse labels)" : "");

  rl::PolicyCheckpoint ck;
  const auto result = rl::iql_pretrain(transitions, iql_cfg, ck);
  fs::create_directories(fs::path(cfg.out()) / "checkpoints");
  const std::string ckpt_out = cfg.str(
      "checkpoint_out",
      (fs::path(cfg.out()) / "checkpoints" /
       (sparse ? "policy_sparse.ckpt" : "policy.ckpt")).string());
  rl::save_policy_checkpoint(ckpt_out, ck);
  fs::create_directories(fs::path(cfg.out()) / "reports");
  write_loss_csv(
      (fs::path(cfg.out()) / "reports" /
       (sparse ? "iql_loss_sparse.csv" : "iql_loss.csv")).string(),
      result.q_loss);
  std::printf("pretrain-policy: %d steps, checkpoint %s\n", iql_cfg.steps,
              ckpt_out.c_str());
  cfg.write_manifest({demos_dir, reward_ckpt});
  return 0;
}

int cmd_train_online(RunConfig cfg) {
  nn::set_threads(cfg.threads());
  const std::string data_root = cfg.str("datasets", cfg.out());
  const std::string task_id = cfg.str("task", "");
  if (task_id.empty()) throw invalid_input("train-online: --task required");
  const std::string policy_ckpt = cfg.str("policy_checkpoint", "");
  if (policy_ckpt.empty())
    throw invalid_input("train-online: --policy-checkpoint required");
  const std::string reward_ckpt = cfg.str("reward_checkpoint", "");

  auto online_cfg = cfg.online_config();
  if (!online_cfg.sparse_only && reward_ckpt.empty())
    throw invalid_input("train-online: --reward-checkpoint required");

  const auto reg = lang2d::build_registry();
  const auto& task = reg.find(task_id);
  const auto env_cfg = cfg.env_config();
  auto encoders = encoders_for(data_root, env_cfg, cfg.integer("agg.d_img", 64),
                               cfg.integer("agg.d_lang", 32));

  reward::Aggregator<Real> model;
  if (!online_cfg.sparse_only) reward::load_reward_checkpoint(reward_ckpt, model);
  auto ck = rl::load_policy_checkpoint(policy_ckpt);
  online_cfg.n_critics = ck.critics.size();

  // Offline transitions for the KL-variant buffer mixing.
  std::vector<rl::Transition> offline;
  if (online_cfg.offline_frac > 0) {
    const auto demos =
        data::load_dataset(cfg.str("demos", dataset_dir(data_root, "policy_demos")));
    data::FrozenLanguageEncoder lang_enc(demos.manifest.d_lang,
                                         demos.manifest.encoder_seed + 1);
    std::vector<std::string> warnings;
    auto sampler = build_sampler(
        reg, (fs::path(data_root) / "paraphrases.tsv").string(), &warnings);
    Rng label_rng(cfg.seed() ^ 0xface);
    offline = rl::label_offline(demos,
                                online_cfg.sparse_only ? nullptr : &model,
                                lang_enc, &sampler, online_cfg.success_bonus,
                                label_rng);
  }

  lang2d::Lang2DEnv env(env_cfg);
  std::vector<std::string> log;
  const auto result = rl::run_online(env, task, ck,
                                     online_cfg.sparse_only ? nullptr : &model,
                                     encoders, offline, online_cfg, &log);

  fs::create_directories(fs::path(cfg.out()) / "reports");
  fs::create_directories(fs::path(cfg.out()) / "checkpoints");
  const std::string tag = (online_cfg.sparse_only ? "sparse_" : "") + task_id;
  write_curve_csv(
      (fs::path(cfg.out()) / "reports" / ("online_" + tag + ".csv")).string(),
      result.curve);
  rl::save_policy_checkpoint(
      (fs::path(cfg.out()) / "checkpoints" / ("online_" + tag + ".ckpt")).string(),
      ck);
  std::printf("train-online[%s]: zero-shot %.2f -> final %.2f (%d env steps)\n",
              tag.c_str(), result.zero_shot_success, result.final_success,
              result.env_steps);
  cfg.write_manifest({policy_ckpt, reward_ckpt});
  return 0;
}

int cmd_pipeline(RunConfig cfg) {
  nn::set_threads(cfg.threads());
  const std::string root = cfg.out();
  std::vector<std::string> phases;

  // Phase 0 (setup): datasets, generated once.
  if (!fs::exists(dataset_dir(root, "target_demos"))) {
    RunConfig gen = cfg;
    gen.command = "gen-data";
    if (cmd_gen_data(gen) != 0) throw std::runtime_error("pipeline: gen-data failed");
  }

  const std::string reward_ckpt =
      (fs::path(root) / "checkpoints" / "reward.ckpt").string();
  if (!fs::exists(reward_ckpt)) {
    RunConfig tr = cfg;
    tr.command = "train-reward";
    tr.set("datasets", root);
    if (cmd_train_reward(tr) != 0)
      throw std::runtime_error("pipeline: phase reward failed");
  } else {
    std::printf("pipeline: reward checkpoint exists, skipping retrain\n");
  }
  phases.push_back("reward");

  const std::string policy_ckpt =
      (fs::path(root) / "checkpoints" / "policy.ckpt").string();
  if (!fs::exists(policy_ckpt)) {
    RunConfig pp = cfg;
    pp.command = "pretrain-policy";
    pp.set("datasets", root);
    pp.set("reward_checkpoint", reward_ckpt);
    if (cmd_pretrain_policy(pp) != 0)
      throw std::runtime_error("pipeline: phase offline failed");
  } else {
    std::printf("pipeline: policy checkpoint exists, skipping retrain\n");
  }
  phases.push_back("offline");

  {
    const auto reg = lang2d::build_registry();
    const std::string task =
        cfg.str("online.task", reg.unseen.front().task_id);
    const std::string online_ckpt =
        (fs::path(root) / "checkpoints" / ("online_" + task + ".ckpt")).string();
    if (!fs::exists(online_ckpt)) {
      RunConfig on = cfg;
      on.command = "train-online";
      on.set("datasets", root);
      on.set("task", task);
      on.set("policy_checkpoint", policy_ckpt);
      on.set("reward_checkpoint", reward_ckpt);
      if (cmd_train_online(on) != 0)
        throw std::runtime_error("pipeline: phase online failed");
    } else {
      std::printf("pipeline: online checkpoint exists, skipping retrain\n");
    }
    phases.push_back("online");
  }

  {
    RunConfig ev = cfg;
    ev.command = "eval-reward";
    ev.set("datasets", root);
    ev.set("checkpoint", reward_ckpt);
    cmd_eval_reward(ev);
  }

  RunConfig manifest_cfg = cfg;
  std::string phase_list;
  for (const auto& p : phases) phase_list += (phase_list.empty() ? "" : ",") + p;
  manifest_cfg.set("phases", phase_list);
  manifest_cfg.write_manifest({});
  return 0;
}

const std::vector<std::string>& ablation_row_labels() {
  static const std::vector<std::string> labels = {
      "Original ReWiND",  "- Targ. Env Data",    "- Open-X Subset",
      "- Video Rewind",   "- Instr. Generation", "+ Full Pos. Embeds"};
  return labels;
}

AblationRow run_ablation_variant(const RunConfig& base, const std::string& label,
                                 const std::string& data_root,
                                 const std::vector<std::uint64_t>& seeds) {
  AblationRow row;
  row.label = label;
  for (const auto seed : seeds) {
    RunConfig cfg = base;
    cfg.set("seed", std::to_string(seed));
    if (label == "- Targ. Env Data") cfg.set("no_target", "1");
    else if (label == "- Open-X Subset") cfg.set("no_proxy", "1");
    else if (label == "- Video Rewind") cfg.set("no_rewind", "1");
    else if (label == "- Instr. Generation") cfg.set("no_instructions", "1");
    else if (label == "+ Full Pos. Embeds") cfg.set("pos_mode", "full");
    else if (label != "Original ReWiND")
      throw invalid_input("unknown ablation label: " + label);

    const bool use_proxy = !cfg.flag("no_proxy", false);
    const bool use_target = !cfg.flag("no_target", false);
    auto train_cfg = cfg.reward_train_config();
    if (cfg.flag("no_rewind", false)) train_cfg.batch.rewind_prob = 0.0;
    const auto agg_cfg = cfg.agg_config();

    data::Dataset target, proxy;
    if (use_target)
      target = data::load_dataset(dataset_dir(data_root, "target_demos"));
    if (use_proxy)
      proxy = data::load_dataset(dataset_dir(data_root, "openx_proxy"));
    const auto& any = use_target ? target : proxy;
    data::FrozenLanguageEncoder lang_enc(any.manifest.d_lang,
                                         any.manifest.encoder_seed + 1);
    const auto reg = lang2d::build_registry();
    const std::string para = (fs::path(data_root) / "paraphrases.tsv").string();
    auto sampler = cfg.flag("no_instructions", false)
                       ? build_sampler(reg, "", nullptr)
                       : build_sampler(reg, para, nullptr);

    reward::Aggregator<Real> model(agg_cfg, seed);
    train_reward(model, use_target ? &target : nullptr,
                 use_proxy ? &proxy : nullptr, &sampler, lang_enc, train_cfg);
    auto arts = evaluate_reward_model(model, data_root, agg_cfg.max_frames);
    row.train_rho += arts.train.alignment.spearman / seeds.size();
    row.unseen_rho += arts.unseen.alignment.spearman / seeds.size();
    row.rank_order_rho += arts.unseen.ranking.rank_order_rho / seeds.size();
    row.reward_diff += arts.unseen.ranking.reward_diff / seeds.size();
    row.robust_avg_rho += arts.unseen.robustness.avg_rho / seeds.size();
    row.robust_rho_var += arts.unseen.robustness.rho_variance / seeds.size();
  }
  return row;
}

int cmd_ablate(RunConfig cfg) {
  nn::set_threads(cfg.threads());
  const std::string data_root = cfg.str("datasets", cfg.out());
  if (!fs::exists(dataset_dir(data_root, "target_demos"))) {
    RunConfig gen = cfg;
    gen.command = "gen-data";
    gen.set("out", data_root);
    cmd_gen_data(gen);
  }
  const int n_seeds = cfg.integer("ablate.seeds", 3);
  std::vector<std::uint64_t> seeds;
  for (int i = 0; i < n_seeds; ++i) seeds.push_back(cfg.seed() + 100 * (i + 1));

  std::vector<AblationRow> rows;
  for (const auto& label : ablation_row_labels()) {
    rows.push_back(run_ablation_variant(cfg, label, data_root, seeds));
    const auto& r = rows.back();
    std::printf("ablate: %-22s train %.3f unseen %.3f rank %.3f diff %.3f "
                "robust %.3f var %.4f\n",
                r.label.c_str(), r.train_rho, r.unseen_rho, r.rank_order_rho,
                r.reward_diff, r.robust_avg_rho, r.robust_rho_var);
  }

  fs::create_directories(fs::path(cfg.out()) / "reports");
  std::ofstream csv(fs::path(cfg.out()) / "reports" / "ablations.csv");
  csv << "model,train_demo_rho,unseen_demo_rho,rank_order_rho,reward_diff,"
         "robust_avg_rho,robust_rho_variance\n";
  csv.precision(17);
  for (const auto& r : rows)
    csv << r.label << "," << r.train_rho << "," << r.unseen_rho << ","
        << r.rank_order_rho << "," << r.reward_diff << "," << r.robust_avg_rho
        << "," << r.robust_rho_var << "\n";
  cfg.write_manifest({data_root});
  return 0;
}

int cmd_report(RunConfig cfg) {
  const std::string runs = cfg.str("runs", "");
  if (runs.empty()) throw invalid_input("report: --runs required");
  std::vector<std::string> dirs;
  std::size_t pos = 0;
  while (pos < runs.size()) {
    auto comma = runs.find(',', pos);
    if (comma == std::string::npos) comma = runs.size();
    dirs.push_back(runs.substr(pos, comma - pos));
    pos = comma + 1;
  }
  fs::create_directories(fs::path(cfg.out()) / "reports");
  std::ofstream csv(fs::path(cfg.out()) / "reports" / "comparison.csv");
  csv << "run,section,metric,value\n";
  csv.precision(17);
  for (const auto& dir : dirs) {
    for (const auto& section : {"train", "unseen"}) {
      const auto path = fs::path(dir) / "reports" / section / "metrics.json";
      if (!fs::exists(path)) continue;
      const auto r = metrics::load_report_json(path.string());
      if (r.has_alignment) {
        csv << dir << "," << section << ",pearson_r," << r.alignment.pearson << "\n";
        csv << dir << "," << section << ",spearman_rho," << r.alignment.spearman << "\n";
      }
      if (r.has_confusion)
        csv << dir << "," << section << ",confusion_diag_accuracy,"
            << r.confusion.diag_argmax_accuracy << "\n";
      if (r.has_ranking) {
        csv << dir << "," << section << ",rank_order_rho,"
            << r.ranking.rank_order_rho << "\n";
        csv << dir << "," << section << ",reward_diff," << r.ranking.reward_diff
            << "\n";
      }
      if (r.has_robustness) {
        csv << dir << "," << section << ",robustness_avg_rho,"
            << r.robustness.avg_rho << "\n";
        csv << dir << "," << section << ",robustness_rho_variance,"
            << r.robustness.rho_variance << "\n";
      }
    }
  }
  cfg.write_manifest(dirs);
  return 0;
}

}  // namespace rewindrl::cli
