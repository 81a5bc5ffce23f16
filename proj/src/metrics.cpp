#include "rewind/metrics/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>

#include <json.hpp>

namespace rewindrl::metrics {

namespace fs = std::filesystem;
using nlohmann::json;

double pearson_r(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size())
    throw invalid_input("pearson_r: length mismatch");
  const int n = int(x.size());
  if (n < 2) throw invalid_input("pearson_r: need at least 2 points");
  double mx = 0, my = 0;
  for (int i = 0; i < n; ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  double sxy = 0, sxx = 0, syy = 0;
  for (int i = 0; i < n; ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
  }
  if (sxx == 0 || syy == 0)
    throw undefined_correlation("pearson_r: zero variance input");
  return sxy / std::sqrt(sxx * syy);
}

std::vector<double> fractional_ranks(const std::vector<double>& x) {
  const int n = int(x.size());
  std::vector<int> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  std::sort(idx.begin(), idx.end(), [&](int a, int b) { return x[a] < x[b]; });
  std::vector<double> ranks(n);
  int i = 0;
  while (i < n) {
    int j = i;
    while (j + 1 < n && x[idx[j + 1]] == x[idx[i]]) ++j;
    const double avg = (double(i) + double(j)) / 2.0 + 1.0;
    for (int k = i; k <= j; ++k) ranks[idx[k]] = avg;
    i = j + 1;
  }
  return ranks;
}

double spearman_rho(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size())
    throw invalid_input("spearman_rho: length mismatch");
  if (x.size() < 2) throw invalid_input("spearman_rho: need at least 2 points");
  return pearson_r(fractional_ranks(x), fractional_ranks(y));
}

double Evaluator::video_score(const data::Mat& obs,
                              const std::vector<Real>& lang) const {
  if (rule == ScoreRule::mean_reward)
    return reward::video_score_mean(*model, obs, lang, max_frames);
  const auto r = reward::label_rewards(*model, obs, lang);
  return double(r.back());
}

namespace {

std::vector<double> reward_curve(const Evaluator& ev, const data::Mat& obs,
                                 const std::vector<Real>& lang) {
  const auto r = reward::label_rewards(*ev.model, obs, lang);
  return std::vector<double>(r.begin(), r.end());
}

std::vector<double> timeline(int T) {
  std::vector<double> t(T);
  std::iota(t.begin(), t.end(), 1.0);
  return t;
}

}  // namespace

AlignmentResult demo_alignment(const Evaluator& ev, const data::Dataset& demos,
                               std::map<std::string, AlignmentResult>* per_task,
                               std::vector<std::string>* warnings) {
  std::map<std::string, AlignmentResult> acc;
  std::map<std::string, std::pair<double, double>> sums;
  for (const auto& ep : demos.episodes) {
    const auto lang = ev.embed(ep.lang_ref.text);
    const auto curve = reward_curve(ev, ep.obs_embed, lang);
    auto& a = acc[ep.task_id];
    try {
      const auto t = timeline(int(curve.size()));
      const double r = pearson_r(curve, t);
      const double rho = spearman_rho(curve, t);
      sums[ep.task_id].first += r;
      sums[ep.task_id].second += rho;
      a.demos_used++;
    } catch (const undefined_correlation&) {
      a.demos_skipped++;
      if (warnings)
        warnings->push_back("demo_alignment: constant rewards on a demo of " +
                            ep.task_id + ", skipped");
    }
  }
  AlignmentResult total;
  int tasks_used = 0;
  for (auto& [task, a] : acc) {
    if (a.demos_used > 0) {
      a.pearson = sums[task].first / a.demos_used;
      a.spearman = sums[task].second / a.demos_used;
      total.pearson += a.pearson;
      total.spearman += a.spearman;
      ++tasks_used;
    }
    total.demos_used += a.demos_used;
    total.demos_skipped += a.demos_skipped;
  }
  if (tasks_used == 0)
    throw undefined_correlation(
        "demo_alignment: every demo produced constant rewards");
  total.pearson /= tasks_used;
  total.spearman /= tasks_used;
  if (per_task) *per_task = acc;
  return total;
}

ConfusionResult confusion_matrix(const Evaluator& ev, const data::Dataset& demos) {
  ConfusionResult out;
  out.tasks = demos.manifest.tasks;
  const int n = int(out.tasks.size());
  if (n < 2) throw invalid_input("confusion_matrix: need at least 2 tasks");
  out.scores = data::Mat(n, n);

  // One representative demo (first stored) and the original instruction per
  // task.
  std::vector<const data::EmbeddedEpisode*> demo_of(n, nullptr);
  std::vector<std::vector<Real>> lang_of(n);
  for (int i = 0; i < n; ++i) {
    const auto eps = demos.episodes_of(out.tasks[i]);
    if (eps.empty())
      throw invalid_input("confusion_matrix: no demo for task " + out.tasks[i]);
    demo_of[i] = &demos.episodes[eps.front()];
    const auto it = demos.instructions.find(out.tasks[i]);
    if (it == demos.instructions.end() || it->second.empty())
      throw invalid_input("confusion_matrix: no instruction for " + out.tasks[i]);
    lang_of[i] = ev.embed(it->second.front().text);
  }
  int correct = 0;
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j)
      out.scores.at(i, j) = Real(ev.video_score(demo_of[i]->obs_embed, lang_of[j]));
    // Deterministic lowest-index argmax.
    int best = 0;
    for (int j = 1; j < n; ++j)
      if (out.scores.at(i, j) > out.scores.at(i, best)) best = j;
    if (best == i) ++correct;
  }
  out.diag_argmax_accuracy = double(correct) / n;
  return out;
}

RankingResult rollout_ranking(const Evaluator& ev, const data::Dataset& rollouts) {
  RankingResult out;
  int n_tasks = 0;
  for (const auto& task : rollouts.manifest.tasks) {
    const auto it = rollouts.instructions.find(task);
    if (it == rollouts.instructions.end() || it->second.empty())
      throw invalid_input("rollout_ranking: no instruction for " + task);
    const auto lang = ev.embed(it->second.front().text);

    std::map<std::string, std::pair<double, int>> cat;  // sum, count
    for (const int ei : rollouts.episodes_of(task)) {
      const auto& ep = rollouts.episodes[ei];
      if (ep.category.empty()) continue;
      auto& c = cat[ep.category];
      c.first += ev.video_score(ep.obs_embed, lang);
      c.second += 1;
    }
    for (const char* need : {"failure", "near_success", "success"})
      if (!cat.count(need))
        throw invalid_input("rollout_ranking: task " + task +
                            " is missing category " + need);
    const double f = cat["failure"].first / cat["failure"].second;
    const double nr = cat["near_success"].first / cat["near_success"].second;
    const double sc = cat["success"].first / cat["success"].second;
    const double rho = spearman_rho({f, nr, sc}, {1.0, 2.0, 3.0});
    out.per_task_rho[task] = rho;
    out.rank_order_rho += rho;
    out.reward_diff += ((sc - nr) + (nr - f)) / 2.0;
    ++n_tasks;
  }
  if (n_tasks == 0) throw invalid_input("rollout_ranking: no tasks");
  out.rank_order_rho /= n_tasks;
  out.reward_diff /= n_tasks;
  return out;
}

RobustnessResult input_robustness(const Evaluator& ev, const data::Dataset& demos,
                                  const augment::InstructionSampler& variants,
                                  int variants_per_task,
                                  std::vector<std::string>* warnings) {
  if (variants_per_task < 2)
    throw invalid_input("input_robustness: need at least 2 variants");
  RobustnessResult out;
  int n_tasks = 0;
  for (const auto& task : demos.manifest.tasks) {
    const auto eps = demos.episodes_of(task);
    if (eps.empty()) continue;
    const auto& demo = demos.episodes[eps.front()];
    if (!variants.has(task)) {
      if (warnings)
        warnings->push_back("input_robustness: no instruction variants for " +
                            task);
      continue;
    }
    const auto& list = variants.instructions(task);
    const int n_var = std::min<int>(variants_per_task, int(list.size()));
    if (n_var < 2) {
      if (warnings)
        warnings->push_back("input_robustness: fewer than 2 variants for " +
                            task);
      continue;
    }
    std::vector<double> rhos;
    for (int v = 0; v < n_var; ++v) {
      const auto lang = ev.embed(list[v].text);
      const auto curve = reward_curve(ev, demo.obs_embed, lang);
      try {
        rhos.push_back(spearman_rho(curve, timeline(int(curve.size()))));
      } catch (const undefined_correlation&) {
        out.variants_dropped++;
        if (warnings)
          warnings->push_back("input_robustness: constant rewards under variant '" +
                              list[v].text + "', dropped");
      }
    }
    if (rhos.size() < 2) continue;
    double mean = 0;
    for (double r : rhos) mean += r;
    mean /= double(rhos.size());
    double var = 0;
    for (double r : rhos) var += (r - mean) * (r - mean);
    var /= double(rhos.size());  // population variance over the variant set
    out.avg_rho += mean;
    out.rho_variance += var;
    ++n_tasks;
  }
  if (n_tasks == 0)
    throw invalid_input("input_robustness: no task had usable variants");
  out.avg_rho /= n_tasks;
  out.rho_variance /= n_tasks;
  return out;
}

namespace {

json alignment_json(const AlignmentResult& a) {
  return json{{"pearson", a.pearson},
              {"spearman", a.spearman},
              {"demos_used", a.demos_used},
              {"demos_skipped", a.demos_skipped}};
}

AlignmentResult alignment_from_json(const json& j) {
  AlignmentResult a;
  a.pearson = j.at("pearson");
  a.spearman = j.at("spearman");
  a.demos_used = j.at("demos_used");
  a.demos_skipped = j.at("demos_skipped");
  return a;
}

}  // namespace

void emit_report(const MetricsReport& report, const std::string& dir,
                 bool heatmap) {
  if (!report.has_alignment && !report.has_confusion && !report.has_ranking &&
      !report.has_robustness) {
    std::string missing = "alignment, confusion, ranking, robustness";
    throw invalid_input("emit_report: no sections computed (missing: " +
                        missing + ")");
  }
  fs::create_directories(dir);

  // CSV: task_id, metric, value.
  {
    std::ofstream csv(fs::path(dir) / "metrics.csv");
    csv << "task_id,metric,value\n";
    csv.precision(17);
    if (report.has_alignment) {
      for (const auto& [task, a] : report.per_task_alignment) {
        csv << task << ",pearson_r," << a.pearson << "\n";
        csv << task << ",spearman_rho," << a.spearman << "\n";
      }
      csv << "ALL,pearson_r," << report.alignment.pearson << "\n";
      csv << "ALL,spearman_rho," << report.alignment.spearman << "\n";
    }
    if (report.has_confusion)
      csv << "ALL,confusion_diag_accuracy,"
          << report.confusion.diag_argmax_accuracy << "\n";
    if (report.has_ranking) {
      for (const auto& [task, rho] : report.ranking.per_task_rho)
        csv << task << ",rank_order_rho," << rho << "\n";
      csv << "ALL,rank_order_rho," << report.ranking.rank_order_rho << "\n";
      csv << "ALL,reward_diff," << report.ranking.reward_diff << "\n";
    }
    if (report.has_robustness) {
      csv << "ALL,robustness_avg_rho," << report.robustness.avg_rho << "\n";
      csv << "ALL,robustness_rho_variance," << report.robustness.rho_variance
          << "\n";
    }
  }

  // Structured JSON.
  {
    json j;
    j["metadata"] = report.metadata;
    j["warnings"] = report.warnings;
    if (report.has_alignment) {
      j["alignment"] = alignment_json(report.alignment);
      json per;
      for (const auto& [task, a] : report.per_task_alignment)
        per[task] = alignment_json(a);
      j["per_task_alignment"] = per;
    }
    if (report.has_confusion) {
      j["confusion"]["tasks"] = report.confusion.tasks;
      j["confusion"]["diag_argmax_accuracy"] =
          report.confusion.diag_argmax_accuracy;
      std::vector<std::vector<double>> rows;
      for (int i = 0; i < report.confusion.scores.rows; ++i)
        rows.emplace_back(report.confusion.scores.row(i),
                          report.confusion.scores.row(i) +
                              report.confusion.scores.cols);
      j["confusion"]["scores"] = rows;
    }
    if (report.has_ranking) {
      j["ranking"]["rank_order_rho"] = report.ranking.rank_order_rho;
      j["ranking"]["reward_diff"] = report.ranking.reward_diff;
      j["ranking"]["per_task_rho"] = report.ranking.per_task_rho;
    }
    if (report.has_robustness) {
      j["robustness"]["avg_rho"] = report.robustness.avg_rho;
      j["robustness"]["rho_variance"] = report.robustness.rho_variance;
      j["robustness"]["variants_dropped"] = report.robustness.variants_dropped;
    }
    std::ofstream jf(fs::path(dir) / "metrics.json");
    jf << j.dump(2) << "\n";
  }

  if (heatmap && report.has_confusion) {
    // Binary PPM heatmap, white (low) to blue (high).
    const auto& m = report.confusion.scores;
    const int cell = 12;
    std::ofstream ppm(fs::path(dir) / "confusion.ppm", std::ios::binary);
    ppm << "P6\n" << m.cols * cell << " " << m.rows * cell << "\n255\n";
    Real lo = m.v.empty() ? 0 : m.v[0], hi = lo;
    for (Real v : m.v) {
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
    const Real span = hi > lo ? hi - lo : Real(1);
    for (int py = 0; py < m.rows * cell; ++py)
      for (int px = 0; px < m.cols * cell; ++px) {
        const Real v = (m.at(py / cell, px / cell) - lo) / span;
        const unsigned char r = static_cast<unsigned char>(255 * (1 - v));
        const unsigned char g = static_cast<unsigned char>(255 * (1 - v * 0.6));
        const unsigned char b = 255;
        ppm.put(char(r)).put(char(g)).put(char(b));
      }
  }
}

MetricsReport load_report_json(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw corruption_error("load_report_json: cannot open " + path);
  json j = json::parse(f, nullptr, true);
  MetricsReport r;
  if (j.contains("metadata"))
    for (const auto& [k, v] : j["metadata"].items())
      r.metadata[k] = v.get<std::string>();
  if (j.contains("warnings"))
    r.warnings = j["warnings"].get<std::vector<std::string>>();
  if (j.contains("alignment")) {
    r.has_alignment = true;
    r.alignment = alignment_from_json(j["alignment"]);
    if (j.contains("per_task_alignment"))
      for (const auto& [task, a] : j["per_task_alignment"].items())
        r.per_task_alignment[task] = alignment_from_json(a);
  }
  if (j.contains("confusion")) {
    r.has_confusion = true;
    r.confusion.tasks = j["confusion"]["tasks"].get<std::vector<std::string>>();
    r.confusion.diag_argmax_accuracy = j["confusion"]["diag_argmax_accuracy"];
    const auto rows = j["confusion"]["scores"].get<std::vector<std::vector<double>>>();
    r.confusion.scores = data::Mat(int(rows.size()),
                                   rows.empty() ? 0 : int(rows[0].size()));
    for (int i = 0; i < int(rows.size()); ++i)
      for (int c = 0; c < int(rows[i].size()); ++c)
        r.confusion.scores.at(i, c) = Real(rows[i][c]);
  }
  if (j.contains("ranking")) {
    r.has_ranking = true;
    r.ranking.rank_order_rho = j["ranking"]["rank_order_rho"];
    r.ranking.reward_diff = j["ranking"]["reward_diff"];
    if (j["ranking"].contains("per_task_rho"))
      for (const auto& [task, v] : j["ranking"]["per_task_rho"].items())
        r.ranking.per_task_rho[task] = v.get<double>();
  }
  if (j.contains("robustness")) {
    r.has_robustness = true;
    r.robustness.avg_rho = j["robustness"]["avg_rho"];
    r.robustness.rho_variance = j["robustness"]["rho_variance"];
    r.robustness.variants_dropped = j["robustness"]["variants_dropped"];
  }
  return r;
}

}  // namespace rewindrl::metrics
