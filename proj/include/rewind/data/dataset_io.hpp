#pragma once

#include <string>
#include <vector>

#include "rewind/data/types.hpp"
#include "rewind/rng.hpp"

namespace rewindrl::data {

// Evenly spaced frame indices (0-based) over [0, T-1]: length min(T, n),
// strictly increasing, always containing the first and last frame.
// n < 2 is rejected.
std::vector<int> subsample_indices(int T, int n);

// Gather rows of m at idx.
Mat take_rows(const Mat& m, const std::vector<int>& idx);

// Directory layout:
//   manifest.txt      key=value: name, role, d_img, d_lang, encoder_seed,
//                     tasks (comma separated), episodes
//   instructions.tsv  task_id <TAB> origin <TAB> text
//   episodes.tsv      file <TAB> task_id <TAB> category <TAB> origin <TAB> text
//   episodes/epNNNN.bin  header uint32[4] = {T, d_img, d_a, d_p}; float32
//                     row-major obs_embed, proprio, actions; success byte.
// All binary data is little-endian float32.
void save_dataset(const Dataset& ds, const std::string& dir);
Dataset load_dataset(const std::string& dir);

// Episode from a different task, uniform over the other tasks then uniform
// over that task's episodes. Throws no_mismatch_available on single-task
// datasets.
const EmbeddedEpisode& sample_mismatched(const Dataset& ds,
                                         const EmbeddedEpisode& episode,
                                         Rng& rng);

}  // namespace rewindrl::data
