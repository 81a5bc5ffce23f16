#include "rewind/data/dataset_io.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace rewindrl::data {

namespace fs = std::filesystem;

static_assert(std::endian::native == std::endian::little,
              "dataset format is little-endian");
static_assert(sizeof(Real) == 4, "episode arrays are stored as float32");

std::vector<int> subsample_indices(int T, int n) {
  if (T < 1) throw invalid_input("subsample_frames: T must be >= 1");
  if (n < 2) throw invalid_input("subsample_frames: n must be >= 2");
  std::vector<int> idx;
  if (T <= n) {
    idx.resize(T);
    for (int i = 0; i < T; ++i) idx[i] = i;
    return idx;
  }
  idx.resize(n);
  for (int j = 0; j < n; ++j)
    idx[j] = int(std::llround(double(j) * double(T - 1) / double(n - 1)));
  idx.front() = 0;
  idx.back() = T - 1;
  return idx;
}

Mat take_rows(const Mat& m, const std::vector<int>& idx) {
  Mat out(int(idx.size()), m.cols);
  for (int i = 0; i < out.rows; ++i)
    std::copy(m.row(idx[i]), m.row(idx[i]) + m.cols, out.row(i));
  return out;
}

namespace {

const char* origin_name(Origin o) {
  return o == Origin::original ? "original" : "paraphrase";
}

Origin origin_from_name(const std::string& s) {
  if (s == "original") return Origin::original;
  if (s == "paraphrase") return Origin::paraphrase;
  throw corruption_error("instructions.tsv: unknown origin '" + s + "'");
}

std::string ep_filename(int i) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "ep%04d.bin", i);
  return buf;
}

void write_u32(std::ostream& os, std::uint32_t v) {
  os.write(reinterpret_cast<const char*>(&v), 4);
}

std::uint32_t read_u32(std::istream& is, const char* what) {
  std::uint32_t v = 0;
  is.read(reinterpret_cast<char*>(&v), 4);
  if (!is) throw corruption_error(std::string("episode file truncated at ") + what);
  return v;
}

void write_mat(std::ostream& os, const Mat& m) {
  os.write(reinterpret_cast<const char*>(m.v.data()),
           std::streamsize(m.v.size() * sizeof(Real)));
}

void read_mat(std::istream& is, Mat& m, const char* what) {
  is.read(reinterpret_cast<char*>(m.v.data()),
          std::streamsize(m.v.size() * sizeof(Real)));
  if (!is) throw corruption_error(std::string("episode file truncated in ") + what);
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : s) {
    if (c == sep) {
      out.push_back(cur);
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  out.push_back(cur);
  return out;
}

}  // namespace

void save_dataset(const Dataset& ds, const std::string& dir) {
  if (int(ds.episodes.size()) != ds.manifest.episode_count)
    throw corruption_error("save_dataset: manifest episodes=" +
                           std::to_string(ds.manifest.episode_count) +
                           " but dataset holds " +
                           std::to_string(ds.episodes.size()));
  for (const auto& e : ds.episodes) {
    if (e.obs_embed.cols != ds.manifest.d_img)
      throw corruption_error("save_dataset: episode obs_embed width " +
                             std::to_string(e.obs_embed.cols) +
                             " does not match manifest d_img=" +
                             std::to_string(ds.manifest.d_img));
    if (e.obs_embed.rows != e.proprio.rows || e.obs_embed.rows != e.actions.rows)
      throw corruption_error("save_dataset: episode sequence lengths differ");
  }

  fs::create_directories(fs::path(dir) / "episodes");

  {
    std::ofstream mf(fs::path(dir) / "manifest.txt");
    mf << "name=" << ds.manifest.name << "\n";
    mf << "role=" << role_name(ds.manifest.role) << "\n";
    mf << "d_img=" << ds.manifest.d_img << "\n";
    mf << "d_lang=" << ds.manifest.d_lang << "\n";
    mf << "encoder_seed=" << ds.manifest.encoder_seed << "\n";
    mf << "tasks=";
    for (std::size_t i = 0; i < ds.manifest.tasks.size(); ++i)
      mf << (i ? "," : "") << ds.manifest.tasks[i];
    mf << "\n";
    mf << "episodes=" << ds.manifest.episode_count << "\n";
  }

  {
    std::ofstream tf(fs::path(dir) / "instructions.tsv");
    for (const auto& [task, list] : ds.instructions)
      for (const auto& ins : list)
        tf << task << "\t" << origin_name(ins.origin) << "\t" << ins.text << "\n";
  }

  {
    std::ofstream ef(fs::path(dir) / "episodes.tsv");
    for (int i = 0; i < int(ds.episodes.size()); ++i) {
      const auto& e = ds.episodes[i];
      ef << ep_filename(i) << "\t" << e.task_id << "\t"
         << (e.category.empty() ? "-" : e.category) << "\t"
         << origin_name(e.lang_ref.origin) << "\t" << e.lang_ref.text << "\n";
    }
  }

  for (int i = 0; i < int(ds.episodes.size()); ++i) {
    const auto& e = ds.episodes[i];
    std::ofstream bf(fs::path(dir) / "episodes" / ep_filename(i),
                     std::ios::binary);
    write_u32(bf, std::uint32_t(e.length()));
    write_u32(bf, std::uint32_t(e.obs_embed.cols));
    write_u32(bf, std::uint32_t(e.actions.cols));
    write_u32(bf, std::uint32_t(e.proprio.cols));
    write_mat(bf, e.obs_embed);
    write_mat(bf, e.proprio);
    write_mat(bf, e.actions);
    const char succ = e.success ? 1 : 0;
    bf.write(&succ, 1);
    if (!bf) throw corruption_error("save_dataset: write failed for episode " +
                                    std::to_string(i));
  }
}

Dataset load_dataset(const std::string& dir) {
  Dataset ds;
  {
    std::ifstream mf(fs::path(dir) / "manifest.txt");
    if (!mf) throw corruption_error("load_dataset: missing manifest.txt in " + dir);
    std::string line;
    while (std::getline(mf, line)) {
      if (line.empty()) continue;
      auto eq = line.find('=');
      if (eq == std::string::npos)
        throw corruption_error("manifest.txt: malformed line '" + line + "'");
      const std::string key = line.substr(0, eq);
      const std::string val = line.substr(eq + 1);
      if (key == "name") ds.manifest.name = val;
      else if (key == "role") ds.manifest.role = role_from_name(val);
      else if (key == "d_img") ds.manifest.d_img = std::stoi(val);
      else if (key == "d_lang") ds.manifest.d_lang = std::stoi(val);
      else if (key == "encoder_seed") ds.manifest.encoder_seed = std::stoull(val);
      else if (key == "episodes") ds.manifest.episode_count = std::stoi(val);
      else if (key == "tasks") {
        if (!val.empty())
          for (auto& t : split(val, ',')) ds.manifest.tasks.push_back(t);
      }
    }
  }

  {
    std::ifstream tf(fs::path(dir) / "instructions.tsv");
    if (!tf) throw corruption_error("load_dataset: missing instructions.tsv");
    std::string line;
    while (std::getline(tf, line)) {
      if (line.empty()) continue;
      auto cols = split(line, '\t');
      if (cols.size() != 3)
        throw corruption_error("instructions.tsv: malformed line '" + line + "'");
      Instruction ins{cols[0], cols[2], origin_from_name(cols[1])};
      ds.instructions[cols[0]].push_back(ins);
    }
  }

  struct EpRow {
    std::string file, task, category;
    Instruction ins;
  };
  std::vector<EpRow> rows;
  {
    std::ifstream ef(fs::path(dir) / "episodes.tsv");
    if (!ef) throw corruption_error("load_dataset: missing episodes.tsv");
    std::string line;
    while (std::getline(ef, line)) {
      if (line.empty()) continue;
      auto cols = split(line, '\t');
      if (cols.size() != 5)
        throw corruption_error("episodes.tsv: malformed line '" + line + "'");
      EpRow r;
      r.file = cols[0];
      r.task = cols[1];
      r.category = cols[2] == "-" ? "" : cols[2];
      r.ins = Instruction{cols[1], cols[4], origin_from_name(cols[3])};
      rows.push_back(std::move(r));
    }
  }
  if (int(rows.size()) != ds.manifest.episode_count)
    throw corruption_error("load_dataset: manifest episodes=" +
                           std::to_string(ds.manifest.episode_count) +
                           " but episodes.tsv lists " +
                           std::to_string(rows.size()));

  for (const auto& r : rows) {
    std::ifstream bf(fs::path(dir) / "episodes" / r.file, std::ios::binary);
    if (!bf) throw corruption_error("load_dataset: missing episode file " + r.file);
    EmbeddedEpisode e;
    e.task_id = r.task;
    e.category = r.category;
    e.lang_ref = r.ins;
    const int T = int(read_u32(bf, "T"));
    const int d_img = int(read_u32(bf, "d_img"));
    const int d_a = int(read_u32(bf, "d_a"));
    const int d_p = int(read_u32(bf, "d_p"));
    if (d_img != ds.manifest.d_img)
      throw corruption_error("load_dataset: d_img mismatch in " + r.file +
                             ": manifest d_img=" +
                             std::to_string(ds.manifest.d_img) + ", array width " +
                             std::to_string(d_img));
    if (T < 1) throw corruption_error("load_dataset: empty episode " + r.file);
    e.obs_embed = Mat(T, d_img);
    e.proprio = Mat(T, d_p);
    e.actions = Mat(T, d_a);
    read_mat(bf, e.obs_embed, "obs_embed");
    read_mat(bf, e.proprio, "proprio");
    read_mat(bf, e.actions, "actions");
    char succ = 0;
    bf.read(&succ, 1);
    if (!bf) throw corruption_error("episode file truncated at success byte: " + r.file);
    e.success = succ != 0;
    ds.episodes.push_back(std::move(e));
  }
  return ds;
}

const EmbeddedEpisode& sample_mismatched(const Dataset& ds,
                                         const EmbeddedEpisode& episode,
                                         Rng& rng) {
  std::vector<std::string> others;
  for (const auto& t : ds.task_ids_present())
    if (t != episode.task_id) others.push_back(t);
  if (others.empty())
    throw no_mismatch_available(
        "sample_mismatched: dataset has no episode from a different task");
  const auto& task = others[rng.uniform_int(std::uint64_t(others.size()))];
  const auto eps = ds.episodes_of(task);
  return ds.episodes[eps[rng.uniform_int(std::uint64_t(eps.size()))]];
}

}  // namespace rewindrl::data
