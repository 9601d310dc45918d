#include "memgaze/data/store.hpp"

#include <filesystem>
#include <fstream>

#include <json.hpp>

#include "memgaze/data/normalize.hpp"
#include "memgaze/nn/vision.hpp"

namespace memgaze::data {

namespace {

struct Writer {
  std::ofstream f;
  explicit Writer(const std::string& path)
      : f(path, std::ios::binary | std::ios::trunc) {
    if (!f) throw FormatError("cannot open for write: " + path);
  }
  void raw(const void* p, size_t n) { f.write((const char*)p, (std::streamsize)n); }
  template <class T>
  void pod(T v) {
    raw(&v, sizeof(T));
  }
  void mat_rowmajor(const Mat_f& m) {
    RowMat<float> r = m;
    raw(r.data(), sizeof(float) * (size_t)r.size());
  }
};

struct Reader {
  std::ifstream f;
  size_t off = 0;
  std::string path;
  explicit Reader(const std::string& p) : f(p, std::ios::binary), path(p) {
    if (!f) throw FormatError("cannot open: " + p);
  }
  void raw(void* p, size_t n) {
    f.read((char*)p, (std::streamsize)n);
    if ((size_t)f.gcount() != n)
      throw FormatError(path + ": truncated at offset " + std::to_string(off));
    off += n;
  }
  template <class T>
  T pod() {
    T v;
    raw(&v, sizeof(T));
    return v;
  }
  Mat_f mat_rowmajor(int rows, int cols) {
    RowMat<float> r(rows, cols);
    raw(r.data(), sizeof(float) * (size_t)r.size());
    return r;
  }
};

}  // namespace

void write_episode(const Episode& ep, const std::string& path) {
  Writer w(path);
  const int L = ep.length();
  const int fc = ep.frame_channels();
  w.raw("RPLC", 4);
  w.pod<std::uint16_t>(kRplcVersion);
  w.pod<std::uint16_t>(ep.stereo ? 1 : 0);
  w.pod<std::uint32_t>((std::uint32_t)L);
  w.pod<std::uint32_t>(kFrameSize);
  w.pod<std::uint32_t>(kFrameSize);
  w.pod<std::uint32_t>((std::uint32_t)fc);
  w.pod<std::uint32_t>(kGlobalSize);
  w.pod<std::uint32_t>(kGlobalSize);
  w.pod<std::uint32_t>((std::uint32_t)fc);
  w.pod<std::uint32_t>(kStateDim);
  w.pod<std::uint32_t>(kActionDim);
  w.pod<std::uint32_t>((std::uint32_t)ep.s_gp);
  w.pod<std::uint32_t>((std::uint32_t)ep.s_gr);
  w.pod<std::uint32_t>((std::uint32_t)ep.s_rp);
  w.pod<std::uint64_t>(ep.seed);
  for (const auto& fr : ep.frames) w.mat_rowmajor(fr);
  for (const auto& g : ep.global_images) w.mat_rowmajor(g);
  w.mat_rowmajor(ep.states);
  w.mat_rowmajor(ep.gazes);
  w.mat_rowmajor(ep.actions);
  if (!w.f) throw FormatError("write failed: " + path);
}

namespace {

struct RplcHeader {
  std::uint16_t version, stereo;
  std::uint32_t L, fh, fw, fc, gh, gw, gc, sd, ad, s_gp, s_gr, s_rp;
  std::uint64_t seed;
};

RplcHeader read_header(Reader& r) {
  char magic[4];
  r.raw(magic, 4);
  if (std::string(magic, 4) != "RPLC")
    throw FormatError(r.path + ": bad magic at offset 0");
  RplcHeader h;
  h.version = r.pod<std::uint16_t>();
  if (h.version != kRplcVersion)
    throw FormatError(r.path + ": unsupported version " +
                      std::to_string(h.version) + " at offset 4");
  h.stereo = r.pod<std::uint16_t>();
  h.L = r.pod<std::uint32_t>();
  h.fh = r.pod<std::uint32_t>();
  h.fw = r.pod<std::uint32_t>();
  h.fc = r.pod<std::uint32_t>();
  h.gh = r.pod<std::uint32_t>();
  h.gw = r.pod<std::uint32_t>();
  h.gc = r.pod<std::uint32_t>();
  h.sd = r.pod<std::uint32_t>();
  h.ad = r.pod<std::uint32_t>();
  h.s_gp = r.pod<std::uint32_t>();
  h.s_gr = r.pod<std::uint32_t>();
  h.s_rp = r.pod<std::uint32_t>();
  h.seed = r.pod<std::uint64_t>();
  if (h.L == 0) throw FormatError(r.path + ": zero-length episode");
  if (h.fh != kFrameSize || h.fw != kFrameSize || h.sd != kStateDim ||
      h.ad != kActionDim || h.gh != kGlobalSize || h.gw != kGlobalSize)
    throw FormatError(r.path + ": unexpected dimensions in header");
  return h;
}

}  // namespace

Episode read_episode(const std::string& path) {
  Reader r(path);
  RplcHeader h = read_header(r);
  Episode ep;
  ep.stereo = h.stereo != 0;
  ep.seed = h.seed;
  ep.s_gp = (int)h.s_gp;
  ep.s_gr = (int)h.s_gr;
  ep.s_rp = (int)h.s_rp;
  ep.frames.reserve(h.L);
  ep.global_images.reserve(h.L);
  for (std::uint32_t t = 0; t < h.L; ++t)
    ep.frames.push_back(r.mat_rowmajor((int)(h.fh * h.fw), (int)h.fc));
  for (std::uint32_t t = 0; t < h.L; ++t)
    ep.global_images.push_back(r.mat_rowmajor((int)(h.gh * h.gw), (int)h.gc));
  ep.states = r.mat_rowmajor((int)h.L, (int)h.sd);
  ep.gazes = r.mat_rowmajor((int)h.L, 2);
  ep.actions = r.mat_rowmajor((int)h.L, (int)h.ad);
  return ep;
}

void write_manifest(const DatasetManifest& m, const std::string& path) {
  nlohmann::json j;
  j["version"] = m.version;
  j["episode_count"] = m.episode_count;
  j["frame"] = {m.frame_h, m.frame_w, m.frame_c};
  j["global"] = {m.global_h, m.global_w, m.global_c};
  j["state_dim"] = m.state_dim;
  j["stereo"] = m.stereo;
  j["items"] = nlohmann::json::array();
  for (const auto& it : m.items)
    j["items"].push_back({{"file", it.file},
                          {"length", it.length},
                          {"seed", it.seed},
                          {"boundaries", {it.s_gp, it.s_gr, it.s_rp}}});
  std::ofstream f(path, std::ios::trunc);
  if (!f) throw FormatError("cannot write manifest: " + path);
  f << j.dump(2) << "\n";
}

DatasetManifest read_manifest(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw FormatError("cannot open manifest: " + path);
  nlohmann::json j;
  try {
    f >> j;
  } catch (const std::exception& e) {
    throw FormatError("manifest parse error: " + std::string(e.what()));
  }
  DatasetManifest m;
  m.version = j.at("version").get<int>();
  m.episode_count = j.at("episode_count").get<int>();
  m.frame_h = j.at("frame").at(0).get<int>();
  m.frame_w = j.at("frame").at(1).get<int>();
  m.frame_c = j.at("frame").at(2).get<int>();
  m.global_h = j.at("global").at(0).get<int>();
  m.global_w = j.at("global").at(1).get<int>();
  m.global_c = j.at("global").at(2).get<int>();
  m.state_dim = j.at("state_dim").get<int>();
  m.stereo = j.at("stereo").get<bool>();
  for (const auto& it : j.at("items")) {
    ManifestItem mi;
    mi.file = it.at("file").get<std::string>();
    mi.length = it.at("length").get<int>();
    mi.seed = it.at("seed").get<std::uint64_t>();
    mi.s_gp = it.at("boundaries").at(0).get<int>();
    mi.s_gr = it.at("boundaries").at(1).get<int>();
    mi.s_rp = it.at("boundaries").at(2).get<int>();
    m.items.push_back(mi);
  }
  return m;
}

void validate_manifest(const DatasetManifest& m, const std::string& dir) {
  if ((int)m.items.size() != m.episode_count)
    throw FormatError("manifest: episode_count does not match item list");
  for (const auto& it : m.items) {
    std::string p = dir + "/" + it.file;
    if (!std::filesystem::exists(p))
      throw FormatError("manifest: missing file " + p);
    Reader r(p);
    RplcHeader h = read_header(r);
    if ((int)h.L != it.length)
      throw FormatError("manifest: length mismatch for " + p);
  }
}

std::pair<DatasetManifest, DatasetManifest> split(const DatasetManifest& m,
                                                  double fraction,
                                                  std::uint64_t seed) {
  if (!(fraction > 0.0 && fraction < 1.0))
    throw ConfigError("split: fraction must lie in (0,1)");
  const int n = (int)m.items.size();
  if (n < 2) throw ConfigError("split: need at least 2 episodes");

  std::vector<int> idx(n);
  for (int i = 0; i < n; ++i) idx[i] = i;
  Rng rng(seed);
  for (int i = n - 1; i > 0; --i)
    std::swap(idx[i], idx[(int)rng.uniform_int((std::uint64_t)i + 1)]);

  int n_train = (int)std::llround(fraction * n);
  n_train = std::max(1, std::min(n - 1, n_train));

  DatasetManifest train = m, val = m;
  train.items.clear();
  val.items.clear();
  for (int i = 0; i < n; ++i)
    (i < n_train ? train : val).items.push_back(m.items[idx[i]]);
  train.episode_count = (int)train.items.size();
  val.episode_count = (int)val.items.size();
  return {train, val};
}

TrainEpisode make_train_episode(const Episode& ep) {
  const int L = ep.length();
  const int gc = (int)ep.global_images.at(0).cols();
  TrainEpisode te;
  te.global.resize(L, kGlobalSize * kGlobalSize * gc);
  te.fov.resize(L, kFoveaSize * kFoveaSize * 3);
  te.states_norm.resize(L, kStateDim);
  te.gazes_norm.resize(L, 2);
  te.gazes_px = ep.gazes;
  te.actions_norm.resize(L, kActionDim);
  te.s_gp = ep.s_gp;
  te.s_gr = ep.s_gr;
  te.s_rp = ep.s_rp;
  te.seed = ep.seed;
  te.global_c = gc;

  const Vec_f scales = action_scales();
  for (int t = 0; t < L; ++t) {
    RowMat<float> g = ep.global_images[t];
    te.global.row(t) = Eigen::Map<const Eigen::RowVectorXf>(g.data(), g.size());
    // Foveated crop from the left frame at the ground-truth gaze.
    Mat_f left = ep.frames[t].leftCols(3);
    RowMat<float> crop =
        nn::crop_foveated<float>(left, ep.gazes(t, 0), ep.gazes(t, 1));
    te.fov.row(t) =
        Eigen::Map<const Eigen::RowVectorXf>(crop.data(), crop.size());
    Vec_f st = ep.states.row(t).transpose();
    te.states_norm.row(t) = normalize_state<float>(st).transpose();
    te.gazes_norm.row(t) =
        normalize_gaze_px<float>(ep.gazes(t, 0), ep.gazes(t, 1)).transpose();
    te.actions_norm.row(t) =
        (ep.actions.row(t).transpose().array() / scales.array()).transpose();
  }
  return te;
}

std::vector<Batch> batchify(const std::vector<const TrainEpisode*>& eps,
                            int batch_size) {
  if (eps.empty()) throw ConfigError("batchify: empty episode list");
  std::vector<Batch> out;
  for (size_t start = 0; start < eps.size(); start += (size_t)batch_size) {
    size_t end = std::min(eps.size(), start + (size_t)batch_size);
    Batch b;
    b.global_c = eps[start]->global_c;
    for (size_t i = start; i < end; ++i) {
      b.lengths.push_back(eps[i]->length());
      b.l_max = std::max(b.l_max, eps[i]->length());
    }
    const int rows = (int)b.lengths.size() * b.l_max;
    b.global.setZero(rows, eps[start]->global.cols());
    b.fov.setZero(rows, eps[start]->fov.cols());
    b.states.setZero(rows, kStateDim);
    b.gazes_norm.setZero(rows, 2);
    b.gazes_px.setZero(rows, 2);
    b.actions.setZero(rows, kActionDim);
    for (size_t i = start; i < end; ++i) {
      const TrainEpisode& te = *eps[i];
      const int bi = (int)(i - start);
      const int L = te.length();
      b.global.middleRows(b.row(bi, 0), L) = te.global;
      b.fov.middleRows(b.row(bi, 0), L) = te.fov;
      b.states.middleRows(b.row(bi, 0), L) = te.states_norm;
      b.gazes_norm.middleRows(b.row(bi, 0), L) = te.gazes_norm;
      b.gazes_px.middleRows(b.row(bi, 0), L) = te.gazes_px;
      b.actions.middleRows(b.row(bi, 0), L) = te.actions_norm;
    }
    out.push_back(std::move(b));
  }
  return out;
}

}  // namespace memgaze::data
