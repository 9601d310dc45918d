#include "memgaze/analysis/attention_map.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

#include "memgaze/io/png.hpp"

namespace memgaze::analysis {

Mat_d normalize_map(const Mat_d& attention) {
  Mat_d m = attention;
  for (int i = 0; i < m.rows(); ++i) {
    double mx = m.row(i).maxCoeff();
    if (!(mx > 0.0))
      throw std::invalid_argument(
          "normalize_map: row " + std::to_string(i) + " has no positive entry");
    m.row(i) /= mx;
  }
  return m;
}

Mat_d subtask_attention(const Mat_d& m, int s_gp, int s_gr, int s_rp) {
  const int L = (int)m.rows();
  if (m.cols() != L) throw std::invalid_argument("subtask_attention: M not square");
  if (!(0 < s_gp && s_gp < s_gr && s_gr < s_rp && s_rp < L))
    throw std::invalid_argument("subtask_attention: invalid boundaries");
  const int lo[4] = {0, s_gp, s_gr, s_rp};
  const int hi[4] = {s_gp, s_gr, s_rp, L};
  Mat_d s(4, 4);
  for (int ti = 0; ti < 4; ++ti)
    for (int si = 0; si < 4; ++si) {
      double sum = 0.0;
      for (int i = lo[ti]; i < hi[ti]; ++i)
        for (int j = lo[si]; j < hi[si]; ++j) sum += m(i, j);
      s(ti, si) = sum / (double(hi[ti] - lo[ti]) * double(hi[si] - lo[si]));
    }
  return s;
}

void write_csv(const Mat_d& m, const std::string& path) {
  std::ofstream f(path, std::ios::trunc);
  if (!f) throw std::runtime_error("write_csv: cannot open " + path);
  char buf[64];
  for (int i = 0; i < m.rows(); ++i) {
    for (int j = 0; j < m.cols(); ++j) {
      std::snprintf(buf, sizeof(buf), "%.9g", m(i, j));
      f << buf << (j + 1 < m.cols() ? "," : "");
    }
    f << "\n";
  }
  if (!f) throw std::runtime_error("write_csv: write failed for " + path);
}

Mat_d read_csv(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("read_csv: cannot open " + path);
  std::vector<std::vector<double>> rows;
  std::string line;
  while (std::getline(f, line)) {
    if (line.empty()) continue;
    std::vector<double> row;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) row.push_back(std::stod(cell));
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw std::runtime_error("read_csv: empty file " + path);
  Mat_d m((int)rows.size(), (int)rows[0].size());
  for (int i = 0; i < m.rows(); ++i) {
    if ((int)rows[i].size() != m.cols())
      throw std::runtime_error("read_csv: ragged rows in " + path);
    for (int j = 0; j < m.cols(); ++j) m(i, j) = rows[i][j];
  }
  return m;
}

void write_heatmap_png(const Mat_d& m, const std::string& path) {
  const int rows = (int)m.rows(), cols = (int)m.cols();
  int block = std::max(1, 512 / std::max(rows, cols));
  block = std::min(block, 64);
  const int w = cols * block, h = rows * block;
  std::vector<std::uint8_t> px((size_t)w * h);
  for (int i = 0; i < rows; ++i)
    for (int j = 0; j < cols; ++j) {
      double v = clamp(m(i, j), 0.0, 1.0);
      auto g = (std::uint8_t)std::lround(v * 255.0);
      for (int dy = 0; dy < block; ++dy)
        for (int dx = 0; dx < block; ++dx)
          px[(size_t)(i * block + dy) * w + j * block + dx] = g;
    }
  io::write_png_gray8(path, w, h, px);
}

void emit_heatmap(const Mat_d& m, const std::string& png_path,
                  const std::string& csv_path) {
  write_heatmap_png(m, png_path);
  write_csv(m, csv_path);
}

}  // namespace memgaze::analysis
