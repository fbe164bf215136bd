#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "doctest.h"
#include "spm/errors.hpp"
#include "spm/io_util.hpp"
#include "spm/patchdata.hpp"
#include "spm/rng.hpp"

namespace fs = std::filesystem;
using namespace spm;

namespace {

std::string temp_path(const std::string& name) {
  const auto dir = fs::temp_directory_path() / "spm_patch_tests";
  fs::create_directories(dir);
  return (dir / name).string();
}

void put_u32le(std::string& s, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) s.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}
void put_u16le(std::string& s, std::uint16_t v) {
  s.push_back(static_cast<char>(v & 0xff));
  s.push_back(static_cast<char>((v >> 8) & 0xff));
}

// Minimal 8-bit grayscale-palette BMP, bottom-up rows.
std::string make_bmp(int width, int height,
                     const std::vector<std::uint8_t>& topdown_pixels) {
  const int stride = (width + 3) & ~3;
  const std::uint32_t data_offset = 14 + 40 + 256 * 4;
  std::string s;
  s += "BM";
  put_u32le(s, data_offset + stride * height);
  put_u32le(s, 0);
  put_u32le(s, data_offset);
  put_u32le(s, 40);
  put_u32le(s, static_cast<std::uint32_t>(width));
  put_u32le(s, static_cast<std::uint32_t>(height));
  put_u16le(s, 1);
  put_u16le(s, 8);
  put_u32le(s, 0);  // BI_RGB
  put_u32le(s, static_cast<std::uint32_t>(stride * height));
  put_u32le(s, 2835);
  put_u32le(s, 2835);
  put_u32le(s, 256);
  put_u32le(s, 0);
  for (int i = 0; i < 256; ++i) {
    s.push_back(static_cast<char>(i));
    s.push_back(static_cast<char>(i));
    s.push_back(static_cast<char>(i));
    s.push_back(0);
  }
  for (int y = height - 1; y >= 0; --y) {
    for (int x = 0; x < width; ++x) {
      s.push_back(static_cast<char>(
          topdown_pixels[static_cast<std::size_t>(y) * width + x]));
    }
    for (int pad = width; pad < stride; ++pad) s.push_back(0);
  }
  return s;
}

std::string make_pgm(int width, int height,
                     const std::vector<std::uint8_t>& pixels) {
  std::string s = "P5\n" + std::to_string(width) + " " +
                  std::to_string(height) + "\n255\n";
  for (auto v : pixels) s.push_back(static_cast<char>(v));
  return s;
}

}  // namespace

TEST_CASE("sheet splits into grid^2 patches in row-major order") {
  // 1024x1024 sheet with 16x16 grid of 64-pixel patches.
  std::vector<std::uint8_t> img(1024 * 1024, 0);
  const std::string path = temp_path("sheet_full.pgm");
  write_text_file(path, make_pgm(1024, 1024, img));
  const auto patches = load_patch_sheet(path, 64, 16);
  REQUIRE(patches.size() == 256);
  CHECK(patches[0].dim() == 4096);
  CHECK(patches[0].side == 64);
  for (const auto& p : patches) {
    CHECK(p.pixels.minCoeff() == 0.0);
    CHECK(p.pixels.maxCoeff() == 0.0);
  }
}

TEST_CASE("patch values and layout") {
  // 2x2 grid of 4-pixel patches; top-left patch all white.
  const int side = 4, grid = 2, w = side * grid;
  std::vector<std::uint8_t> img(static_cast<std::size_t>(w) * w, 0);
  for (int y = 0; y < side; ++y) {
    for (int x = 0; x < side; ++x) img[static_cast<std::size_t>(y) * w + x] = 255;
  }
  SUBCASE("pgm") {
    const std::string path = temp_path("sheet_tl.pgm");
    write_text_file(path, make_pgm(w, w, img));
    const auto patches = load_patch_sheet(path, side, grid);
    REQUIRE(patches.size() == 4);
    CHECK(patches[0].pixels.isApproxToConstant(1.0));
    for (int i = 1; i < 4; ++i) CHECK(patches[i].pixels.maxCoeff() == 0.0);
  }
  SUBCASE("bmp matches pgm bit for bit") {
    const std::string bmp_path = temp_path("sheet_tl.bmp");
    const std::string pgm_path = temp_path("sheet_tl2.pgm");
    write_text_file(bmp_path, make_bmp(w, w, img));
    write_text_file(pgm_path, make_pgm(w, w, img));
    const auto a = load_patch_sheet(bmp_path, side, grid);
    const auto b = load_patch_sheet(pgm_path, side, grid);
    REQUIRE(a.size() == b.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
      CHECK(a[i].pixels == b[i].pixels);
    }
  }
}

TEST_CASE("sheet loading is a pure function of the file bytes") {
  Rng rng(3);
  std::vector<std::uint8_t> img(64 * 64);
  for (auto& v : img) v = static_cast<std::uint8_t>(rng.bounded(256));
  const std::string path = temp_path("sheet_rand.pgm");
  write_text_file(path, make_pgm(64, 64, img));
  const auto first = load_patch_sheet(path, 8, 8);
  const auto second = load_patch_sheet(path, 8, 8);
  REQUIRE(first.size() == second.size());
  for (std::size_t i = 0; i < first.size(); ++i) {
    CHECK(first[i].pixels == second[i].pixels);
  }
  // Intensity scaling is exactly 1/255.
  CHECK(first[0].pixels[0] == img[0] / 255.0);
}

TEST_CASE("wrong sheet dimensions name expected and actual size") {
  std::vector<std::uint8_t> img(32 * 32, 0);
  const std::string path = temp_path("sheet_small.pgm");
  write_text_file(path, make_pgm(32, 32, img));
  try {
    load_patch_sheet(path, 64, 16);
    FAIL("expected data_error");
  } catch (const data_error& e) {
    const std::string msg = e.what();
    CHECK(msg.find("32x32") != std::string::npos);
    CHECK(msg.find("1024x1024") != std::string::npos);
  }
  CHECK_THROWS_AS(load_patch_sheet(temp_path("missing.pgm"), 64, 16),
                  data_error);
}

TEST_CASE("match file labels are the point-id equality indicator") {
  const std::string path = temp_path("matches.txt");
  write_text_file(path,
                  "0 0 0 1 0 0 0\n"
                  "5 3 0 9 7 0 0\n");
  const auto pairs = load_match_file(path, {});
  REQUIRE(pairs.size() == 2);
  CHECK(pairs[0].idx_a == 0);
  CHECK(pairs[0].idx_b == 1);
  CHECK(pairs[0].label == 1);
  CHECK(pairs[1].idx_a == 5);
  CHECK(pairs[1].idx_b == 9);
  CHECK(pairs[1].label == 0);

  SUBCASE("generated file keeps the indicator invariant") {
    Rng rng(11);
    std::string text;
    std::vector<std::int64_t> ids(40);
    for (auto& id : ids) id = static_cast<std::int64_t>(rng.bounded(10));
    int n_match = 0;
    for (int i = 0; i < 200; ++i) {
      const auto a = rng.bounded(40), b = rng.bounded(40);
      text += std::to_string(a) + " " + std::to_string(ids[a]) + " 0 " +
              std::to_string(b) + " " + std::to_string(ids[b]) + " 0 0\n";
      if (ids[a] == ids[b]) ++n_match;
    }
    const std::string gen = temp_path("matches_gen.txt");
    write_text_file(gen, text);
    const auto loaded = load_match_file(gen, ids);
    REQUIRE(loaded.size() == 200);
    int seen = 0;
    for (const auto& p : loaded) seen += p.label;
    CHECK(seen == n_match);
  }
}

TEST_CASE("match file errors") {
  SUBCASE("malformed line reports its number") {
    const std::string path = temp_path("matches_bad.txt");
    write_text_file(path, "0 0 0 1 0 0\nnot numbers here\n");
    try {
      load_match_file(path, {});
      FAIL("expected data_error");
    } catch (const data_error& e) {
      CHECK(std::string(e.what()).find(":2") != std::string::npos);
    }
  }
  SUBCASE("out-of-range patch index") {
    const std::string path = temp_path("matches_range.txt");
    write_text_file(path, "0 0 0 7 0 0 0\n");
    CHECK_THROWS_AS(load_match_file(path, {1, 2, 3}), data_error);
  }
}

TEST_CASE("synthetic dataset contracts") {
  SynthSpec spec;
  spec.seed = 7;
  spec.n_prototypes = 40;
  spec.pairs_per_class = 50;

  SUBCASE("deterministic for a fixed seed") {
    const PatchDataset a = synth_dataset(spec);
    const PatchDataset b = synth_dataset(spec);
    REQUIRE(a.patches.size() == b.patches.size());
    REQUIRE(a.pairs.size() == b.pairs.size());
    for (std::size_t i = 0; i < a.patches.size(); ++i) {
      CHECK(a.patches[i].pixels == b.patches[i].pixels);
    }
    for (std::size_t i = 0; i < a.pairs.size(); ++i) {
      CHECK(a.pairs[i].idx_a == b.pairs[i].idx_a);
      CHECK(a.pairs[i].idx_b == b.pairs[i].idx_b);
      CHECK(a.pairs[i].label == b.pairs[i].label);
    }
  }

  SUBCASE("exact 50/50 balance and pair count") {
    const PatchDataset ds = synth_dataset(spec);
    CHECK(ds.pairs.size() == 2000);
    std::int64_t ones = 0;
    for (const auto& p : ds.pairs) ones += p.label;
    CHECK(ones == 1000);
    CHECK(ds.match_fraction() == 0.5);
  }

  SUBCASE("degenerate generation gives identical matching patches") {
    spec.noise_sigma = 0;
    spec.shift_max = 0;
    const PatchDataset ds = synth_dataset(spec);
    for (const auto& p : ds.pairs) {
      if (p.label == 1) {
        CHECK(ds.patches[p.idx_a].pixels == ds.patches[p.idx_b].pixels);
      }
    }
  }

  SUBCASE("no prototype leakage across non-matching pairs") {
    const PatchDataset ds = synth_dataset(spec);
    REQUIRE(ds.prototype_of.size() == ds.patches.size());
    for (const auto& p : ds.pairs) {
      const int pa = ds.prototype_of[static_cast<std::size_t>(p.idx_a)];
      const int pb = ds.prototype_of[static_cast<std::size_t>(p.idx_b)];
      if (p.label == 0) {
        CHECK(pa != pb);
      } else {
        CHECK(pa == pb);
      }
    }
  }

  SUBCASE("pixel range stays in [0,1] under heavy noise") {
    spec.noise_sigma = 0.8;
    const PatchDataset ds = synth_dataset(spec);
    for (const auto& p : ds.patches) {
      CHECK(p.pixels.minCoeff() >= 0.0);
      CHECK(p.pixels.maxCoeff() <= 1.0);
    }
  }

  SUBCASE("config errors") {
    spec.n_prototypes = 1;
    CHECK_THROWS_AS(synth_dataset(spec), config_error);
    spec.n_prototypes = 40;
    spec.shift_max = 10;
    CHECK_THROWS_AS(synth_dataset(spec), config_error);
  }
}

TEST_CASE("dataset container round trip") {
  SynthSpec spec;
  spec.seed = 12;
  spec.n_prototypes = 4;
  spec.pairs_per_class = 5;
  const PatchDataset ds = synth_dataset(spec);
  const std::string bin = temp_path("ds.spmp");
  const std::string csv = temp_path("ds_pairs.csv");
  save_dataset(ds, bin, csv);
  const PatchDataset back = load_dataset(bin, csv);
  REQUIRE(back.patches.size() == ds.patches.size());
  REQUIRE(back.pairs.size() == ds.pairs.size());
  for (std::size_t i = 0; i < ds.patches.size(); ++i) {
    CHECK(back.patches[i].pixels == ds.patches[i].pixels);
    CHECK(back.patches[i].side == ds.patches[i].side);
  }
  for (std::size_t i = 0; i < ds.pairs.size(); ++i) {
    CHECK(back.pairs[i].idx_a == ds.pairs[i].idx_a);
    CHECK(back.pairs[i].label == ds.pairs[i].label);
  }

  SUBCASE("truncated container is rejected") {
    const std::string data = read_text_file(bin);
    write_text_file(bin, data.substr(0, data.size() / 2));
    CHECK_THROWS_AS(load_dataset(bin, csv), data_error);
  }
}

TEST_CASE("patch matrix assembly and standardization") {
  SynthSpec spec;
  spec.seed = 5;
  spec.n_prototypes = 3;
  spec.pairs_per_class = 4;
  const PatchDataset ds = synth_dataset(spec);
  const Eigen::MatrixXd x = patches_to_matrix(ds.patches);
  CHECK(x.rows() == ds.patches.front().dim());
  CHECK(x.cols() == static_cast<Eigen::Index>(ds.patches.size()));
  CHECK(x.col(0) == ds.patches[0].pixels);

  const Eigen::MatrixXd z = patches_to_matrix(ds.patches, true);
  for (Eigen::Index j = 0; j < z.cols(); ++j) {
    CHECK(std::abs(z.col(j).mean()) < 1e-14);
  }
}
