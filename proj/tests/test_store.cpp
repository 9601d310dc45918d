#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>

#include "memgaze/data/normalize.hpp"
#include "memgaze/data/store.hpp"
#include "memgaze/sim/replace.hpp"

using namespace memgaze;
using namespace memgaze::data;

namespace {

namespace fs = std::filesystem;

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() /
           ("memgaze_test_" + std::to_string(::getpid()) + "_" +
            std::to_string(counter()++));
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  static int& counter() {
    static int c = 0;
    return c;
  }
  std::string file(const std::string& name) const { return (path / name).string(); }
};

Episode random_episode(std::uint64_t seed, int len) {
  Rng rng(seed);
  Episode ep;
  ep.seed = seed;
  for (int t = 0; t < len; ++t) {
    Mat_f f(kFrameSize * kFrameSize, 3), g(kGlobalSize * kGlobalSize, 3);
    for (int c = 0; c < 3; ++c) {
      f.col(c).setConstant((float)rng.uniform01());
      g.col(c).setConstant((float)rng.uniform01());
    }
    f(17, 1) = (float)rng.uniform01();  // break uniformity
    ep.frames.push_back(f);
    ep.global_images.push_back(g);
  }
  ep.states.resize(len, kStateDim);
  ep.gazes.resize(len, 2);
  ep.actions.resize(len, kActionDim);
  for (int t = 0; t < len; ++t) {
    for (int i = 0; i < kStateDim; ++i) {
      ep.states(t, i) = (float)rng.uniform(-1, 1);
      ep.actions(t, i) = (float)rng.uniform(-1, 1);
    }
    ep.gazes(t, 0) = (float)rng.uniform(0, 255);
    ep.gazes(t, 1) = (float)rng.uniform(0, 255);
  }
  ep.s_gp = std::max(1, len / 4);
  ep.s_gr = std::max(2, len / 2);
  ep.s_rp = std::max(3, 3 * len / 4);
  if (len < 5) ep.s_gp = 1, ep.s_gr = 2, ep.s_rp = 3;
  return ep;
}

bool episodes_equal(const Episode& a, const Episode& b) {
  if (a.length() != b.length() || a.seed != b.seed || a.stereo != b.stereo)
    return false;
  if (a.s_gp != b.s_gp || a.s_gr != b.s_gr || a.s_rp != b.s_rp) return false;
  for (int t = 0; t < a.length(); ++t)
    if (a.frames[t] != b.frames[t] || a.global_images[t] != b.global_images[t])
      return false;
  return a.states == b.states && a.gazes == b.gazes && a.actions == b.actions;
}

DatasetManifest tiny_manifest(int n) {
  DatasetManifest m;
  m.episode_count = n;
  for (int i = 0; i < n; ++i) {
    ManifestItem it;
    it.file = "ep_" + std::to_string(i) + ".rplc";
    it.length = 5 + i;
    it.seed = (std::uint64_t)i;
    it.s_gp = 1;
    it.s_gr = 2;
    it.s_rp = 3;
    m.items.push_back(it);
  }
  return m;
}

}  // namespace

TEST_CASE("episode round-trip is exact, including length 1") {
  TempDir tmp;
  for (int len : {1, 7}) {
    Episode ep = random_episode(40 + len, len);
    std::string p = tmp.file("ep.rplc");
    write_episode(ep, p);
    Episode back = read_episode(p);
    CHECK(episodes_equal(ep, back));
  }
}

TEST_CASE("simulated episode round-trips bit-exactly") {
  TempDir tmp;
  Episode ep = sim::generate_episode(5);
  std::string p = tmp.file("sim.rplc");
  write_episode(ep, p);
  CHECK(episodes_equal(ep, read_episode(p)));
}

TEST_CASE("truncated files and bad magic raise format errors") {
  TempDir tmp;
  Episode ep = random_episode(1, 4);
  std::string p = tmp.file("trunc.rplc");
  write_episode(ep, p);

  auto size = fs::file_size(p);
  fs::resize_file(p, size / 2);
  CHECK_THROWS_AS((void)read_episode(p), FormatError);

  std::string q = tmp.file("magic.rplc");
  std::ofstream f(q, std::ios::binary);
  f << "NOPExxxxxxxxxxxxxxxxxxxxxxxxxxxx";
  f.close();
  CHECK_THROWS_AS((void)read_episode(q), FormatError);

  try {
    (void)read_episode(q);
    FAIL("expected FormatError");
  } catch (const FormatError& e) {
    CHECK(std::string(e.what()).find("offset") != std::string::npos);
  }
}

TEST_CASE("split makes a seeded disjoint exhaustive 90/10 partition") {
  DatasetManifest m = tiny_manifest(10);
  auto [train, val] = split(m, 0.9, 7);
  CHECK(train.episode_count == 9);
  CHECK(val.episode_count == 1);

  std::set<std::string> seen;
  for (const auto& it : train.items) seen.insert(it.file);
  for (const auto& it : val.items) seen.insert(it.file);
  CHECK(seen.size() == 10);

  auto [train2, val2] = split(m, 0.9, 7);
  CHECK(train2.items[0].file == train.items[0].file);
  CHECK(val2.items[0].file == val.items[0].file);

  auto [train3, val3] = split(m, 0.9, 8);
  bool same = train3.items[0].file == train.items[0].file &&
              train3.items[1].file == train.items[1].file &&
              train3.items[2].file == train.items[2].file;
  CHECK_FALSE(same);  // different seed shuffles differently (w.h.p.)

  CHECK_THROWS_AS(split(m, 0.0, 1), ConfigError);
  CHECK_THROWS_AS(split(m, 1.0, 1), ConfigError);
  CHECK_THROWS_AS(split(tiny_manifest(1), 0.9, 1), ConfigError);
}

TEST_CASE("manifest validates files written next to it") {
  TempDir tmp;
  DatasetManifest m;
  for (int i = 0; i < 2; ++i) {
    Episode ep = sim::generate_episode((std::uint64_t)i);
    ManifestItem it;
    it.file = "ep_" + std::to_string(i) + ".rplc";
    it.length = ep.length();
    it.seed = ep.seed;
    it.s_gp = ep.s_gp;
    it.s_gr = ep.s_gr;
    it.s_rp = ep.s_rp;
    write_episode(ep, tmp.file(it.file));
    m.items.push_back(it);
  }
  m.episode_count = 2;
  std::string mp = tmp.file("manifest.json");
  write_manifest(m, mp);
  DatasetManifest back = read_manifest(mp);
  CHECK(back.items.size() == 2);
  CHECK(back.items[1].length == m.items[1].length);
  CHECK_NOTHROW(validate_manifest(back, tmp.path.string()));

  back.items[0].length += 1;
  CHECK_THROWS_AS(validate_manifest(back, tmp.path.string()), FormatError);
}

TEST_CASE("batchify pads to the batch max length with a correct mask") {
  Episode e3 = random_episode(1, 3), e5 = random_episode(2, 5);
  TrainEpisode t3 = make_train_episode(e3), t5 = make_train_episode(e5);

  auto batches = batchify({&t3, &t5}, 2);
  REQUIRE(batches.size() == 1);
  const Batch& b = batches[0];
  CHECK(b.l_max == 5);
  int valid = 0;
  for (int t = 0; t < b.l_max; ++t) valid += b.mask(0, t) ? 1 : 0;
  CHECK(valid == 3);
  // Padding rows are zero.
  CHECK(b.states.row(b.row(0, 4)).isZero());

  auto single = batchify({&t5}, 4);
  REQUIRE(single.size() == 1);
  for (int t = 0; t < single[0].l_max; ++t) CHECK(single[0].mask(0, t));
}

TEST_CASE("episodes reconstruct exactly from a padded batch") {
  Episode e3 = random_episode(3, 4), e5 = random_episode(4, 6);
  TrainEpisode t3 = make_train_episode(e3), t5 = make_train_episode(e5);
  auto batches = batchify({&t3, &t5}, 2);
  const Batch& b = batches[0];
  const TrainEpisode* eps[2] = {&t3, &t5};
  for (int bi = 0; bi < 2; ++bi)
    for (int t = 0; t < b.l_max; ++t) {
      if (!b.mask(bi, t)) continue;
      CHECK(b.global.row(b.row(bi, t)) == eps[bi]->global.row(t));
      CHECK(b.fov.row(b.row(bi, t)) == eps[bi]->fov.row(t));
      CHECK(b.states.row(b.row(bi, t)) == eps[bi]->states_norm.row(t));
      CHECK(b.actions.row(b.row(bi, t)) == eps[bi]->actions_norm.row(t));
    }
}
