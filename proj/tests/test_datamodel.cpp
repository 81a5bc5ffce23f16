#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>

#include "rewind/data/dataset_io.hpp"
#include "rewind/data/encoders.hpp"
#include "rewind/lang2d/env.hpp"
#include "rewind/lang2d/rollouts.hpp"
#include "rewind/lang2d/tasks.hpp"

using namespace rewindrl;
using namespace rewindrl::data;

namespace fs = std::filesystem;

TEST_CASE("frozen observation encoder is linear and deterministic") {
  FrozenEncoder enc(10, 6, 42);
  std::vector<Real> zero(10, Real(0));
  for (Real v : enc.encode(zero)) CHECK(v == Real(0));

  Rng rng(1);
  std::vector<Real> obs(10);
  for (auto& x : obs) x = Real(rng.uniform(-1, 1));
  CHECK(enc.encode(obs) == enc.encode(obs));
  FrozenEncoder enc2(10, 6, 42);
  CHECK(enc.encode(obs) == enc2.encode(obs));

  CHECK_THROWS_AS(enc.encode(std::vector<Real>(9, Real(0))), invalid_input);
}

TEST_CASE("distinct scene states embed apart") {
  lang2d::Lang2DConfig cfg;
  lang2d::Lang2DEnv env(cfg);
  auto reg = lang2d::build_registry();
  const auto& task = reg.train.front();

  Rng r1(100), r2(2000);
  auto obs_a = env.reset(task, r1);  // object placements differ per seed
  auto obs_b = env.reset(task, r2);
  FrozenEncoder enc(lang2d::Lang2DEnv::obs_dim(cfg), 64, 7);
  const double cos = cosine_similarity(enc.encode(obs_a), enc.encode(obs_b));
  CHECK(cos < 0.99);
}

TEST_CASE("language encoder determinism and neighborhood structure") {
  FrozenLanguageEncoder enc(32, 5);
  CHECK_THROWS_AS(enc.encode(""), invalid_input);
  CHECK_THROWS_AS(enc.encode(" .,"), invalid_input);
  CHECK(enc.encode("push the red block left") ==
        enc.encode("push the red block left"));

  const auto a = enc.encode("push the red block left");
  const auto b = enc.encode("shove the red block to the left");
  const auto c = enc.encode("open the green bin");
  CHECK(cosine_similarity(a, b) > cosine_similarity(a, c));
}

TEST_CASE("subsample_frames index rule") {
  CHECK_THROWS_AS(subsample_indices(10, 1), invalid_input);

  auto identity = subsample_indices(16, 16);
  REQUIRE(identity.size() == 16);
  for (int i = 0; i < 16; ++i) CHECK(identity[i] == i);

  auto pass = subsample_indices(5, 16);
  REQUIRE(pass.size() == 5);
  for (int i = 0; i < 5; ++i) CHECK(pass[i] == i);

  // T=32 -> n=16: nearest-integer spacing of (T-1)/(n-1), endpoints pinned.
  auto idx = subsample_indices(32, 16);
  REQUIRE(idx.size() == 16);
  std::vector<int> expect;
  for (int j = 0; j < 16; ++j)
    expect.push_back(int(std::llround(j * 31.0 / 15.0)));
  CHECK(idx == expect);
  CHECK(idx.front() == 0);
  CHECK(idx.back() == 31);

  // Property: strictly increasing with both endpoints for any T >= 2.
  Rng rng(3);
  for (int trial = 0; trial < 200; ++trial) {
    const int T = int(rng.uniform_int(2, 400));
    const int n = int(rng.uniform_int(2, 40));
    auto v = subsample_indices(T, n);
    CHECK(int(v.size()) == std::min(T, n));
    CHECK(v.front() == 0);
    CHECK(v.back() == T - 1);
    for (std::size_t i = 1; i < v.size(); ++i) CHECK(v[i] > v[i - 1]);
  }
}

namespace {

Dataset tiny_dataset(int n_tasks, int eps_per_task, std::uint64_t seed) {
  Dataset ds;
  ds.manifest.name = "tiny";
  ds.manifest.role = DatasetRole::target_demos;
  ds.manifest.d_img = 8;
  ds.manifest.d_lang = 4;
  ds.manifest.encoder_seed = seed;
  Rng rng(seed);
  for (int t = 0; t < n_tasks; ++t) {
    const std::string task = "task" + std::to_string(t);
    ds.manifest.tasks.push_back(task);
    Instruction ins{task, "do thing " + std::to_string(t), Origin::original};
    ds.instructions[task].push_back(ins);
    for (int e = 0; e < eps_per_task; ++e) {
      EmbeddedEpisode ep;
      ep.task_id = task;
      ep.lang_ref = ins;
      ep.success = true;
      const int T = 3 + int(rng.uniform_int(5));
      ep.obs_embed = Mat(T, 8);
      ep.proprio = Mat(T, 3);
      ep.actions = Mat(T, 3);
      for (auto& x : ep.obs_embed.v) x = Real(rng.uniform(-1, 1));
      for (auto& x : ep.proprio.v) x = Real(rng.uniform(0, 1));
      for (auto& x : ep.actions.v) x = Real(rng.uniform(-1, 1));
      ds.episodes.push_back(std::move(ep));
    }
  }
  ds.manifest.episode_count = int(ds.episodes.size());
  return ds;
}

}  // namespace

TEST_CASE("dataset round-trip is bit exact") {
  auto ds = tiny_dataset(3, 2, 12);
  ds.episodes[1].category = "near_success";
  const std::string dir = "tmp_ds_roundtrip";
  fs::remove_all(dir);
  save_dataset(ds, dir);
  auto back = load_dataset(dir);
  CHECK(back.manifest.name == ds.manifest.name);
  CHECK(back.manifest.tasks == ds.manifest.tasks);
  CHECK(back.manifest.encoder_seed == ds.manifest.encoder_seed);
  REQUIRE(back.episodes.size() == ds.episodes.size());
  for (std::size_t i = 0; i < ds.episodes.size(); ++i)
    CHECK(back.episodes[i] == ds.episodes[i]);
  CHECK(back.instructions == ds.instructions);
  fs::remove_all(dir);
}

TEST_CASE("truncated episode file raises corruption error") {
  auto ds = tiny_dataset(2, 1, 13);
  const std::string dir = "tmp_ds_trunc";
  fs::remove_all(dir);
  save_dataset(ds, dir);
  const auto p = fs::path(dir) / "episodes" / "ep0001.bin";
  const auto full = fs::file_size(p);
  fs::resize_file(p, full / 2);
  CHECK_THROWS_AS(load_dataset(dir), corruption_error);
  fs::remove_all(dir);
}

TEST_CASE("manifest width mismatch names d_img") {
  auto ds = tiny_dataset(2, 1, 14);
  const std::string dir = "tmp_ds_mismatch";
  fs::remove_all(dir);
  save_dataset(ds, dir);
  // Rewrite the manifest with a wrong width.
  {
    std::ofstream mf(fs::path(dir) / "manifest.txt");
    mf << "name=tiny\nrole=target_demos\nd_img=32\nd_lang=4\n"
       << "encoder_seed=14\ntasks=task0,task1\nepisodes=2\n";
  }
  try {
    load_dataset(dir);
    FAIL("expected corruption_error");
  } catch (const corruption_error& e) {
    CHECK(std::string(e.what()).find("d_img") != std::string::npos);
  }
  fs::remove_all(dir);
}

TEST_CASE("sample_mismatched honors task identity") {
  Rng rng(20);
  auto two = tiny_dataset(2, 3, 15);
  for (int i = 0; i < 20; ++i) {
    const auto& other = sample_mismatched(two, two.episodes[0], rng);
    CHECK(other.task_id == "task1");
  }

  auto one = tiny_dataset(1, 3, 16);
  CHECK_THROWS_AS(sample_mismatched(one, one.episodes[0], rng),
                  no_mismatch_available);
}

TEST_CASE("sample_mismatched is uniform over the other tasks") {
  auto ds = tiny_dataset(20, 1, 17);
  Rng rng(21);
  const int draws = 10000;
  std::map<std::string, int> counts;
  for (int i = 0; i < draws; ++i)
    counts[sample_mismatched(ds, ds.episodes[0], rng).task_id]++;
  CHECK(counts.count("task0") == 0);
  const double expected = draws / 19.0;
  const double sigma = std::sqrt(draws * (1.0 / 19) * (18.0 / 19));
  for (const auto& [task, n] : counts)
    CHECK(std::abs(n - expected) < 3 * sigma);
}
