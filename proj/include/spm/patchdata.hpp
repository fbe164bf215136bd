#ifndef SPM_PATCHDATA_HPP
#define SPM_PATCHDATA_HPP

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Core>

namespace spm {

// A square grayscale patch flattened row-major, intensities in [0, 1].
struct Patch {
  Eigen::VectorXd pixels;  // length side*side
  int side = 0;

  int dim() const { return static_cast<int>(pixels.size()); }
};

// Indices of two patches and whether they show the same 3-D point.
struct PairLabel {
  std::int64_t idx_a = 0;
  std::int64_t idx_b = 0;
  int label = 0;  // 1 = match
};

struct PatchDataset {
  std::vector<Patch> patches;
  std::vector<PairLabel> pairs;
  std::string name;
  // Synthetic provenance: generating prototype per patch. Empty for
  // datasets loaded from disk.
  std::vector<int> prototype_of;

  double match_fraction() const;
  void validate() const;  // pair indices in range, labels in {0,1}
};

// Reads one patch sheet: an 8-bit grayscale image of size
// (grid*patch_side) x (grid*patch_side) holding grid^2 patches in row-major
// sheet order. Accepts 8-bit palette BMP ("BM") and binary PGM ("P5");
// pixel values are scaled by 1/255.
std::vector<Patch> load_patch_sheet(const std::string& path,
                                    int patch_side = 64, int grid = 16);

// Reads the per-patch 3-D point id column (first integer of each line) from
// an info file.
std::vector<std::int64_t> load_point_ids(const std::string& path);

// Parses a match file: each line carries at least six integers
//   patchID1 pointID1 _ patchID2 pointID2 _
// and the pair label is 1 exactly when the two point ids are equal.
// point_ids (from the info file) bounds the valid patch index range; pass an
// empty list to skip the range check.
std::vector<PairLabel> load_match_file(
    const std::string& path, const std::vector<std::int64_t>& point_ids);

struct SynthSpec {
  std::uint64_t seed = 0;
  int n_prototypes = 40;
  int pairs_per_class = 50;
  int side = 8;
  double noise_sigma = 0.05;
  int shift_max = 1;
};

// Generates a labeled patch-pair dataset from smooth random prototypes.
// Matching pairs are two circularly-shifted, noised views of one prototype;
// non-matching pairs cross two distinct prototypes. The label balance is
// exactly 50% and the whole dataset is a pure function of the spec.
PatchDataset synth_dataset(const SynthSpec& spec);

// Binary patch container: magic "SPMP", version, m, n, row-major f64
// patches, CRC32. Pairs travel in a sidecar CSV "idx_a,idx_b,label".
void save_dataset(const PatchDataset& ds, const std::string& bin_path,
                  const std::string& pairs_csv_path);
PatchDataset load_dataset(const std::string& bin_path,
                          const std::string& pairs_csv_path);

// The sidecar format on its own (also used for pair lists over encoded
// codes).
void save_pair_csv(const std::vector<PairLabel>& pairs,
                   const std::string& path);
std::vector<PairLabel> load_pair_csv(const std::string& path);

// Columns are the flattened patches (m x n). Optionally subtracts each
// patch's mean (off by default; encoded values then leave [0,1]).
Eigen::MatrixXd patches_to_matrix(const std::vector<Patch>& patches,
                                  bool zero_mean = false);

}  // namespace spm

#endif
