#include "spm/patchdata.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <sstream>

#include "spm/errors.hpp"
#include "spm/io_util.hpp"
#include "spm/rng.hpp"

namespace spm {

namespace {

constexpr std::uint32_t kDatasetVersion = 1;

struct GrayImage {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> pixels;  // row-major, top-down
};

std::uint32_t rd_u32le(const std::string& d, std::size_t off) {
  std::uint32_t v = 0;
  for (int i = 3; i >= 0; --i) {
    v = (v << 8) | static_cast<unsigned char>(d[off + i]);
  }
  return v;
}

std::int32_t rd_i32le(const std::string& d, std::size_t off) {
  return static_cast<std::int32_t>(rd_u32le(d, off));
}

std::uint16_t rd_u16le(const std::string& d, std::size_t off) {
  return static_cast<std::uint16_t>(
      static_cast<unsigned char>(d[off]) |
      (static_cast<unsigned char>(d[off + 1]) << 8));
}

// 8-bit palette BMP, the format the photo-tour patch sheets ship in.
GrayImage decode_bmp(const std::string& d, const std::string& path) {
  if (d.size() < 54) throw data_error("truncated BMP header: " + path);
  const std::uint32_t data_offset = rd_u32le(d, 10);
  const std::uint32_t header_size = rd_u32le(d, 14);
  if (header_size < 40) throw data_error("unsupported BMP header: " + path);
  const std::int32_t width = rd_i32le(d, 18);
  const std::int32_t height_raw = rd_i32le(d, 22);
  const std::uint16_t bpp = rd_u16le(d, 28);
  const std::uint32_t compression = rd_u32le(d, 30);
  if (bpp != 8 || compression != 0) {
    throw data_error("expected uncompressed 8-bit BMP: " + path);
  }
  const bool top_down = height_raw < 0;
  const int height = top_down ? -height_raw : height_raw;
  if (width <= 0 || height <= 0) throw data_error("bad BMP size: " + path);

  std::uint32_t palette_count = rd_u32le(d, 46);
  if (palette_count == 0) palette_count = 256;
  const std::size_t palette_off = 14 + header_size;
  if (palette_off + 4ull * palette_count > d.size()) {
    throw data_error("truncated BMP palette: " + path);
  }
  std::vector<std::uint8_t> gray_of_index(palette_count);
  for (std::uint32_t i = 0; i < palette_count; ++i) {
    const auto b = static_cast<unsigned char>(d[palette_off + 4 * i + 0]);
    const auto g = static_cast<unsigned char>(d[palette_off + 4 * i + 1]);
    const auto r = static_cast<unsigned char>(d[palette_off + 4 * i + 2]);
    if (b != g || g != r) {
      throw data_error("BMP palette is not grayscale: " + path);
    }
    gray_of_index[i] = b;
  }

  const std::size_t row_stride = (static_cast<std::size_t>(width) + 3) & ~3ull;
  if (data_offset + row_stride * height > d.size()) {
    throw data_error("truncated BMP pixel data: " + path);
  }
  GrayImage img;
  img.width = width;
  img.height = height;
  img.pixels.resize(static_cast<std::size_t>(width) * height);
  for (int y = 0; y < height; ++y) {
    const int src_row = top_down ? y : height - 1 - y;
    const std::size_t src = data_offset + row_stride * src_row;
    for (int x = 0; x < width; ++x) {
      const auto idx = static_cast<unsigned char>(d[src + x]);
      if (idx >= palette_count) {
        throw data_error("BMP pixel outside palette: " + path);
      }
      img.pixels[static_cast<std::size_t>(y) * width + x] = gray_of_index[idx];
    }
  }
  return img;
}

// Binary PGM (P5), maxval <= 255.
GrayImage decode_pgm(const std::string& d, const std::string& path) {
  std::size_t pos = 2;
  auto next_token = [&]() -> long {
    while (pos < d.size()) {
      if (std::isspace(static_cast<unsigned char>(d[pos]))) {
        ++pos;
      } else if (d[pos] == '#') {
        while (pos < d.size() && d[pos] != '\n') ++pos;
      } else {
        break;
      }
    }
    if (pos >= d.size()) throw data_error("truncated PGM header: " + path);
    long v = 0;
    bool any = false;
    while (pos < d.size() && std::isdigit(static_cast<unsigned char>(d[pos]))) {
      v = v * 10 + (d[pos] - '0');
      ++pos;
      any = true;
    }
    if (!any) throw data_error("malformed PGM header: " + path);
    return v;
  };
  const long width = next_token();
  const long height = next_token();
  const long maxval = next_token();
  if (maxval <= 0 || maxval > 255) {
    throw data_error("PGM maxval out of 8-bit range: " + path);
  }
  ++pos;  // single whitespace after maxval
  const std::size_t need = static_cast<std::size_t>(width) * height;
  if (pos + need > d.size()) throw data_error("truncated PGM data: " + path);
  GrayImage img;
  img.width = static_cast<int>(width);
  img.height = static_cast<int>(height);
  img.pixels.assign(d.begin() + static_cast<std::ptrdiff_t>(pos),
                    d.begin() + static_cast<std::ptrdiff_t>(pos + need));
  return img;
}

GrayImage load_gray_image(const std::string& path) {
  const std::string d = read_text_file(path);
  if (d.size() >= 2 && d[0] == 'B' && d[1] == 'M') return decode_bmp(d, path);
  if (d.size() >= 2 && d[0] == 'P' && d[1] == '5') return decode_pgm(d, path);
  throw data_error("unrecognized image format (want 8-bit BMP or P5 PGM): " +
                   path);
}

// Smooth prototype: random 4x4 control grid in [0,1], bilinearly upsampled.
Eigen::VectorXd make_prototype(Rng& rng, int side) {
  constexpr int g = 4;
  double ctrl[g][g];
  for (auto& row : ctrl) {
    for (double& v : row) v = rng.uniform01();
  }
  Eigen::VectorXd out(static_cast<Eigen::Index>(side) * side);
  for (int y = 0; y < side; ++y) {
    const double fy = static_cast<double>(y) / side * (g - 1);
    const int y0 = std::min(static_cast<int>(fy), g - 2);
    const double ty = fy - y0;
    for (int x = 0; x < side; ++x) {
      const double fx = static_cast<double>(x) / side * (g - 1);
      const int x0 = std::min(static_cast<int>(fx), g - 2);
      const double tx = fx - x0;
      const double v = (1 - ty) * ((1 - tx) * ctrl[y0][x0] + tx * ctrl[y0][x0 + 1]) +
                       ty * ((1 - tx) * ctrl[y0 + 1][x0] + tx * ctrl[y0 + 1][x0 + 1]);
      out[static_cast<Eigen::Index>(y) * side + x] = v;
    }
  }
  return out;
}

// Circular shift plus clamped Gaussian pixel noise.
Patch make_view(Rng& rng, const Eigen::VectorXd& proto, int side,
                double noise_sigma, int shift_max) {
  int dx = 0, dy = 0;
  if (shift_max > 0) {
    dx = static_cast<int>(rng.uniform_int(-shift_max, shift_max));
    dy = static_cast<int>(rng.uniform_int(-shift_max, shift_max));
  }
  Patch p;
  p.side = side;
  p.pixels.resize(proto.size());
  for (int y = 0; y < side; ++y) {
    const int sy = ((y + dy) % side + side) % side;
    for (int x = 0; x < side; ++x) {
      const int sx = ((x + dx) % side + side) % side;
      double v = proto[static_cast<Eigen::Index>(sy) * side + sx];
      if (noise_sigma > 0) v += noise_sigma * rng.normal();
      p.pixels[static_cast<Eigen::Index>(y) * side + x] =
          std::clamp(v, 0.0, 1.0);
    }
  }
  return p;
}

}  // namespace

double PatchDataset::match_fraction() const {
  if (pairs.empty()) return 0.0;
  std::int64_t n1 = 0;
  for (const auto& p : pairs) n1 += p.label;
  return static_cast<double>(n1) / static_cast<double>(pairs.size());
}

void PatchDataset::validate() const {
  const auto n = static_cast<std::int64_t>(patches.size());
  for (const auto& p : pairs) {
    if (p.idx_a < 0 || p.idx_a >= n || p.idx_b < 0 || p.idx_b >= n) {
      throw data_error("pair index out of range in dataset '" + name + "'");
    }
    if (p.label != 0 && p.label != 1) {
      throw data_error("pair label outside {0,1} in dataset '" + name + "'");
    }
  }
}

std::vector<Patch> load_patch_sheet(const std::string& path, int patch_side,
                                    int grid) {
  if (patch_side <= 0 || grid <= 0) {
    throw config_error("patch_side and grid must be positive");
  }
  const GrayImage img = load_gray_image(path);
  const int want = patch_side * grid;
  if (img.width != want || img.height != want) {
    std::ostringstream msg;
    msg << "sheet " << path << " has size " << img.width << "x" << img.height
        << ", expected " << want << "x" << want << " (" << grid << "x" << grid
        << " patches of side " << patch_side << ")";
    throw data_error(msg.str());
  }
  std::vector<Patch> out;
  out.reserve(static_cast<std::size_t>(grid) * grid);
  for (int pr = 0; pr < grid; ++pr) {
    for (int pc = 0; pc < grid; ++pc) {
      Patch p;
      p.side = patch_side;
      p.pixels.resize(static_cast<Eigen::Index>(patch_side) * patch_side);
      for (int y = 0; y < patch_side; ++y) {
        const std::size_t row =
            (static_cast<std::size_t>(pr) * patch_side + y) * img.width +
            static_cast<std::size_t>(pc) * patch_side;
        for (int x = 0; x < patch_side; ++x) {
          p.pixels[static_cast<Eigen::Index>(y) * patch_side + x] =
              img.pixels[row + x] / 255.0;
        }
      }
      out.push_back(std::move(p));
    }
  }
  return out;
}

std::vector<std::int64_t> load_point_ids(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw data_error("cannot open: " + path);
  std::vector<std::int64_t> ids;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(f, line)) {
    ++lineno;
    std::istringstream ss(line);
    std::int64_t id;
    if (!(ss >> id)) {
      if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
      throw data_error(path + ":" + std::to_string(lineno) +
                       ": expected an integer point id");
    }
    ids.push_back(id);
  }
  return ids;
}

std::vector<PairLabel> load_match_file(
    const std::string& path, const std::vector<std::int64_t>& point_ids) {
  std::ifstream f(path);
  if (!f) throw data_error("cannot open: " + path);
  std::vector<PairLabel> pairs;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(f, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    std::istringstream ss(line);
    std::int64_t f0, f1, f2, f3, f4, f5;
    if (!(ss >> f0 >> f1 >> f2 >> f3 >> f4 >> f5)) {
      throw data_error(path + ":" + std::to_string(lineno) +
                       ": expected >= 6 integers per match record");
    }
    PairLabel p;
    p.idx_a = f0;
    p.idx_b = f3;
    p.label = (f1 == f4) ? 1 : 0;
    if (!point_ids.empty()) {
      const auto n = static_cast<std::int64_t>(point_ids.size());
      if (p.idx_a < 0 || p.idx_a >= n || p.idx_b < 0 || p.idx_b >= n) {
        throw data_error(path + ":" + std::to_string(lineno) +
                         ": patch index out of range (have " +
                         std::to_string(n) + " patches)");
      }
    }
    pairs.push_back(p);
  }
  return pairs;
}

PatchDataset synth_dataset(const SynthSpec& spec) {
  if (spec.n_prototypes < 2) {
    throw config_error("synth: need at least 2 prototypes to form "
                       "non-matching pairs");
  }
  if (spec.side < 4) throw config_error("synth: side must be >= 4");
  if (spec.noise_sigma < 0) throw config_error("synth: noise_sigma < 0");
  if (spec.shift_max < 0 || spec.shift_max >= (spec.side + 1) / 2) {
    throw config_error("synth: shift_max must lie in [0, side/2)");
  }
  if (spec.pairs_per_class < 1) {
    throw config_error("synth: pairs_per_class must be >= 1");
  }
  const std::int64_t total =
      static_cast<std::int64_t>(spec.n_prototypes) * spec.pairs_per_class;
  if (total % 2 != 0) {
    throw config_error(
        "synth: n_prototypes * pairs_per_class must be even for an exact "
        "50/50 label balance");
  }

  Rng rng(spec.seed);
  std::vector<Eigen::VectorXd> protos;
  protos.reserve(spec.n_prototypes);
  for (int i = 0; i < spec.n_prototypes; ++i) {
    protos.push_back(make_prototype(rng, spec.side));
  }

  PatchDataset ds;
  ds.name = "synth";
  auto add_view = [&](int proto) -> std::int64_t {
    ds.patches.push_back(make_view(rng, protos[proto], spec.side,
                                   spec.noise_sigma, spec.shift_max));
    ds.prototype_of.push_back(proto);
    return static_cast<std::int64_t>(ds.patches.size()) - 1;
  };

  const std::int64_t n_match = total / 2;
  for (std::int64_t t = 0; t < n_match; ++t) {
    const int proto = static_cast<int>(t % spec.n_prototypes);
    const auto a = add_view(proto);
    const auto b = add_view(proto);
    ds.pairs.push_back({a, b, 1});
  }
  for (std::int64_t t = 0; t < total - n_match; ++t) {
    const int pa = static_cast<int>(t % spec.n_prototypes);
    const int pb = static_cast<int>(
        (pa + 1 + rng.bounded(static_cast<std::uint64_t>(spec.n_prototypes - 1))) %
        spec.n_prototypes);
    const auto a = add_view(pa);
    const auto b = add_view(pb);
    ds.pairs.push_back({a, b, 0});
  }
  rng.shuffle(ds.pairs);
  return ds;
}

void save_pair_csv(const std::vector<PairLabel>& pairs,
                   const std::string& path) {
  std::ostringstream csv;
  csv << "idx_a,idx_b,label\n";
  for (const auto& p : pairs) {
    csv << p.idx_a << ',' << p.idx_b << ',' << p.label << '\n';
  }
  write_text_file(path, csv.str());
}

std::vector<PairLabel> load_pair_csv(const std::string& path) {
  const std::string csv = read_text_file(path);
  std::istringstream ss(csv);
  std::string line;
  std::vector<PairLabel> pairs;
  std::size_t lineno = 0;
  while (std::getline(ss, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line == "idx_a,idx_b,label") continue;
    const auto fields = split(line, ',');
    if (fields.size() != 3) {
      throw data_error(path + ":" + std::to_string(lineno) +
                       ": expected idx_a,idx_b,label");
    }
    try {
      pairs.push_back({std::stoll(fields[0]), std::stoll(fields[1]),
                       std::stoi(fields[2])});
    } catch (const std::exception&) {
      throw data_error(path + ":" + std::to_string(lineno) +
                       ": malformed integer field");
    }
  }
  return pairs;
}

void save_dataset(const PatchDataset& ds, const std::string& bin_path,
                  const std::string& pairs_csv_path) {
  ds.validate();
  const int m = ds.patches.empty() ? 0 : ds.patches.front().dim();
  BinaryWriter w;
  w.bytes("SPMP", 4);
  w.u32(kDatasetVersion);
  w.u32(static_cast<std::uint32_t>(m));
  w.u32(static_cast<std::uint32_t>(ds.patches.size()));
  w.str(ds.name);
  for (const auto& p : ds.patches) {
    if (p.dim() != m) throw data_error("inconsistent patch dimensions");
    for (Eigen::Index i = 0; i < p.pixels.size(); ++i) w.f64(p.pixels[i]);
  }
  w.commit(bin_path);
  save_pair_csv(ds.pairs, pairs_csv_path);
}

PatchDataset load_dataset(const std::string& bin_path,
                          const std::string& pairs_csv_path) {
  BinaryReader r(bin_path, "SPMP");
  const std::uint32_t version = r.u32();
  if (version != kDatasetVersion) {
    throw data_error("unsupported dataset version " + std::to_string(version) +
                     " in " + bin_path);
  }
  const std::uint32_t m = r.u32();
  const std::uint32_t n = r.u32();
  const int side = static_cast<int>(std::lround(std::sqrt(double(m))));
  if (static_cast<std::uint32_t>(side) * side != m) {
    throw data_error("patch dimension is not a perfect square in " + bin_path);
  }
  PatchDataset ds;
  ds.name = r.str();
  ds.patches.resize(n);
  for (auto& p : ds.patches) {
    p.side = side;
    p.pixels.resize(m);
    for (std::uint32_t i = 0; i < m; ++i) p.pixels[i] = r.f64();
  }
  ds.pairs = load_pair_csv(pairs_csv_path);
  ds.validate();
  return ds;
}

Eigen::MatrixXd patches_to_matrix(const std::vector<Patch>& patches,
                                  bool zero_mean) {
  if (patches.empty()) return {};
  const int m = patches.front().dim();
  Eigen::MatrixXd x(m, patches.size());
  for (std::size_t j = 0; j < patches.size(); ++j) {
    if (patches[j].dim() != m) {
      throw data_error("inconsistent patch dimensions");
    }
    x.col(static_cast<Eigen::Index>(j)) = patches[j].pixels;
  }
  if (zero_mean) {
    const Eigen::RowVectorXd mu = x.colwise().mean();
    x.rowwise() -= mu;
  }
  return x;
}

}  // namespace spm
