// Sequential attention map (per-target-row max normalization) and the 4x4
// subtask-block aggregation, with CSV/heatmap emission.
#pragma once

#include <string>

#include "memgaze/common.hpp"

namespace memgaze::analysis {

// Subtask order used for the 4x4 aggregate, as (target, source) indices.
enum Subtask { kGreenPick = 0, kGreenPlace = 1, kRedPick = 2, kRedPlace = 3 };

// M[i,j] = A[i,j] / max_j A[i,:]. Rows must be nonnegative with a positive
// maximum (softmax attention always satisfies this).
Mat_d normalize_map(const Mat_d& attention);

// Mean of M over each (target block, source block) pair with block extents
// [0,s_gp), [s_gp,s_gr), [s_gr,s_rp), [s_rp,L).
Mat_d subtask_attention(const Mat_d& m, int s_gp, int s_gr, int s_rp);

void write_csv(const Mat_d& m, const std::string& path);
Mat_d read_csv(const std::string& path);

// Grayscale raster, one square block per cell, row 0 at top, values
// clamped to [0,1].
void write_heatmap_png(const Mat_d& m, const std::string& path);

void emit_heatmap(const Mat_d& m, const std::string& png_path,
                  const std::string& csv_path);

}  // namespace memgaze::analysis
