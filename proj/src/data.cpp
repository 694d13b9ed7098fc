#include "akspace/data.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <sstream>
#include <stdexcept>

#include "akspace/csv.hpp"

namespace akspace {

namespace fs = std::filesystem;

// ---------- datasets ----------

int Dataset::n() const {
  if (items.empty()) throw std::runtime_error("dataset is empty");
  return items.front().grid.dims[0];
}

Standardization standardize(DTensor& grid) {
  constexpr double kStdFloor = 1e-6;
  const int64_t n = grid.numel();
  double sum = 0.0;
  for (int64_t i = 0; i < n; ++i) sum += grid[i];
  const double mean = sum / static_cast<double>(n);
  double ss = 0.0;
  for (int64_t i = 0; i < n; ++i) {
    const double d = grid[i] - mean;
    ss += d * d;
  }
  const double sd = std::sqrt(ss / static_cast<double>(n));
  if (sd < kStdFloor) {
    grid.fill(0.0);
    return {mean, kStdFloor};
  }
  for (int64_t i = 0; i < n; ++i) grid[i] = (grid[i] - mean) / sd;
  return {mean, sd};
}

namespace {

DTensor random_phantom(Rng& rng, int n) {
  DTensor g({n, n});
  const int shapes = rng.range(3, 8);
  for (int s = 0; s < shapes; ++s) {
    const bool ellipse = rng.uniform() < 0.5;
    const double cy = rng.uniform(0.15, 0.85) * n;
    const double cx = rng.uniform(0.15, 0.85) * n;
    const double ay = rng.uniform(0.08, 0.35) * n;
    const double ax = rng.uniform(0.08, 0.35) * n;
    const double phi = rng.uniform(0.0, std::numbers::pi);
    const double amp = rng.uniform(0.15, 1.0);
    const double c = std::cos(phi), si = std::sin(phi);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) {
        const double dy = i + 0.5 - cy;
        const double dx = j + 0.5 - cx;
        const double u = dx * c + dy * si;
        const double v = -dx * si + dy * c;
        const bool inside = ellipse
            ? (u * u) / (ax * ax) + (v * v) / (ay * ay) <= 1.0
            : std::abs(u) <= ax && std::abs(v) <= ay;
        if (inside) g.at(i, j) += amp;
      }
  }
  for (int64_t i = 0; i < g.numel(); ++i) g[i] = std::clamp(g[i], 0.0, 1.0);
  return g;
}

std::string sanitize_id(const std::string& raw) {
  std::string out;
  for (char ch : raw)
    out.push_back(std::isalnum(static_cast<unsigned char>(ch)) || ch == '.' || ch == '_' ||
                          ch == '-'
                      ? ch
                      : '_');
  return out.empty() ? std::string("item") : out;
}

}  // namespace

Dataset generate_phantoms(uint64_t seed, int count, int n) {
  if (count < 1) throw std::invalid_argument("phantom count must be positive");
  if (n < 8 || n % 2 != 0)
    throw std::invalid_argument("phantom size must be even and at least 8");

  Dataset ds;
  ds.items.reserve(static_cast<size_t>(count));
  for (int i = 0; i < count; ++i) {
    Rng rng(Rng::mix(seed, static_cast<uint64_t>(i)));
    DTensor g = random_phantom(rng, n);
    const Standardization st = standardize(g);
    char id[32];
    std::snprintf(id, sizeof(id), "phantom_%06d", i);
    ds.items.push_back({id, std::move(g), st.mean, st.std_dev});
  }
  return ds;
}

Dataset load_image_dir(const std::string& dir, int n) {
  if (!fs::is_directory(dir)) throw std::runtime_error("not a directory: " + dir);
  std::vector<fs::path> paths;
  for (const auto& entry : fs::directory_iterator(dir))
    if (entry.is_regular_file()) paths.push_back(entry.path());
  std::sort(paths.begin(), paths.end());

  Dataset ds;
  for (const auto& p : paths) {
    try {
      DTensor raw = load_pgm(p.string());
      DTensor g = resize_bilinear(raw, n);
      const Standardization st = standardize(g);
      ds.items.push_back({sanitize_id(p.stem().string()), std::move(g), st.mean, st.std_dev});
    } catch (const std::exception& e) {
      std::fprintf(stderr, "warning: skipping %s: %s\n", p.string().c_str(), e.what());
    }
  }
  if (ds.items.empty()) throw std::runtime_error("no usable images in " + dir);
  return ds;
}

void save_dataset(const std::string& dir, const Dataset& ds) {
  if (ds.items.empty()) throw std::invalid_argument("refusing to save an empty dataset");
  fs::create_directories(dir);
  std::ofstream csv(dir + "/index.csv");
  if (!csv) throw std::runtime_error("cannot write index.csv in " + dir);
  csv << "image_id,file,mean,std\n";
  for (const auto& item : ds.items) {
    if (item.id.empty() || item.id != sanitize_id(item.id))
      throw std::invalid_argument("unsafe image id: " + item.id);
    const std::string file = item.id + ".akt";
    write_akt1(dir + "/" + file, item.grid.cast<float>());
    csv << item.id << ',' << file << ',' << fmt_g(item.mean) << ',' << fmt_g(item.std_dev)
        << '\n';
  }
  if (!csv) throw std::runtime_error("write failed for index.csv in " + dir);
}

Dataset load_dataset(const std::string& dir) {
  std::ifstream csv(dir + "/index.csv");
  if (!csv) throw std::runtime_error("missing index.csv in " + dir);
  std::string line;
  if (!std::getline(csv, line) || line != "image_id,file,mean,std")
    throw std::runtime_error("bad index.csv header in " + dir);

  Dataset ds;
  while (std::getline(csv, line)) {
    if (line.empty()) continue;
    std::vector<std::string> fields;
    std::stringstream ss(line);
    std::string f;
    while (std::getline(ss, f, ',')) fields.push_back(f);
    if (fields.size() != 4) throw std::runtime_error("bad index.csv row: " + line);
    if (fields[1] != sanitize_id(fields[1]))
      throw std::runtime_error("unsafe file name in index.csv: " + fields[1]);

    Tensor t = read_akt1(dir + "/" + fields[1]);
    if (t.rank() != 2 || t.dims[0] != t.dims[1])
      throw std::runtime_error("dataset item is not square: " + fields[1]);
    ds.items.push_back({fields[0], t.cast<double>(), std::stod(fields[2]),
                        std::stod(fields[3])});
  }
  if (ds.items.empty()) throw std::runtime_error("empty dataset in " + dir);
  const int n0 = ds.items.front().grid.dims[0];
  for (const auto& item : ds.items)
    if (item.grid.dims[0] != n0)
      throw std::runtime_error("dataset mixes image sizes in " + dir);
  return ds;
}

// ---------- images ----------

namespace {

int pgm_token(std::istream& is, const std::string& path) {
  int c = is.get();
  while (c == '#' || std::isspace(c)) {
    if (c == '#')
      while (c != '\n' && c != EOF) c = is.get();
    c = is.get();
  }
  if (!std::isdigit(c)) throw std::runtime_error("malformed header in " + path);
  int64_t v = 0;
  while (std::isdigit(c)) {
    v = v * 10 + (c - '0');
    if (v > (1 << 30)) throw std::runtime_error("absurd header value in " + path);
    c = is.get();
  }
  // the terminating character is the separator; leave the stream past it
  return static_cast<int>(v);
}

}  // namespace

DTensor load_pgm(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open " + path);
  if (is.get() != 'P' || is.get() != '5')
    throw std::runtime_error("not a binary PGM (P5): " + path);

  const int w = pgm_token(is, path);
  const int h = pgm_token(is, path);
  const int maxval = pgm_token(is, path);
  if (w <= 0 || h <= 0 || w > 16384 || h > 16384)
    throw std::runtime_error("bad image dimensions in " + path);
  if (maxval <= 0 || maxval > 255)
    throw std::runtime_error("unsupported sample depth in " + path);

  std::vector<unsigned char> buf(static_cast<size_t>(w) * h);
  is.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
  if (!is) throw std::runtime_error("truncated image data in " + path);

  DTensor g({h, w});
  for (int64_t i = 0; i < g.numel(); ++i)
    g[i] = buf[static_cast<size_t>(i)] / static_cast<double>(maxval);
  return g;
}

void save_pgm(const std::string& path, const DTensor& grid) {
  if (grid.rank() != 2) throw std::invalid_argument("save_pgm: want a 2-d grid");
  const int h = grid.dims[0], w = grid.dims[1];
  double lo = grid[0], hi = grid[0];
  for (int64_t i = 0; i < grid.numel(); ++i) {
    lo = std::min(lo, grid[i]);
    hi = std::max(hi, grid[i]);
  }
  const double range = hi - lo;

  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot write " + path);
  os << "P5\n" << w << " " << h << "\n255\n";
  std::vector<unsigned char> buf(static_cast<size_t>(w) * h);
  for (int64_t i = 0; i < grid.numel(); ++i) {
    const double v = range < 1e-12 ? 0.0 : (grid[i] - lo) / range;
    buf[static_cast<size_t>(i)] =
        static_cast<unsigned char>(std::clamp(std::lround(v * 255.0), 0l, 255l));
  }
  os.write(reinterpret_cast<const char*>(buf.data()),
           static_cast<std::streamsize>(buf.size()));
  if (!os) throw std::runtime_error("write failed for " + path);
}

DTensor resize_bilinear(const DTensor& src, int n) {
  if (src.rank() != 2) throw std::invalid_argument("resize: want a 2-d grid");
  if (n < 1) throw std::invalid_argument("resize: bad target size");
  const int h = src.dims[0], w = src.dims[1];

  DTensor out({n, n});
  for (int dy = 0; dy < n; ++dy) {
    double sy = (dy + 0.5) * h / n - 0.5;
    sy = std::clamp(sy, 0.0, static_cast<double>(h - 1));
    const int y0 = static_cast<int>(sy);
    const int y1 = std::min(y0 + 1, h - 1);
    const double fy = sy - y0;
    for (int dx = 0; dx < n; ++dx) {
      double sx = (dx + 0.5) * w / n - 0.5;
      sx = std::clamp(sx, 0.0, static_cast<double>(w - 1));
      const int x0 = static_cast<int>(sx);
      const int x1 = std::min(x0 + 1, w - 1);
      const double fx = sx - x0;
      out.at(dy, dx) = (1 - fy) * ((1 - fx) * src.at(y0, x0) + fx * src.at(y0, x1)) +
                       fy * ((1 - fx) * src.at(y1, x0) + fx * src.at(y1, x1));
    }
  }
  return out;
}

// ---------- sampling masks ----------

void MaskSamplerConfig::validate() const {
  if (n < 8 || n % 2 != 0)
    throw std::invalid_argument("mask sampler: size must be even and at least 8");
  if (fixed_low_rows < 0 || fixed_low_rows % 2 != 0 || fixed_low_rows > n - 2)
    throw std::invalid_argument("mask sampler: fixed rows must be even and fit the spectrum");
  if (min_pairs < 1 || min_pairs < fixed_low_rows / 2)
    throw std::invalid_argument("mask sampler: minimum pairs must cover the fixed rows");
  if (max_pairs < min_pairs || max_pairs > n / 2)
    throw std::invalid_argument("mask sampler: bad pair-count range");
}

SamplingMask fixed_low_freq_mask(int n, int fixed_rows) {
  if (n < 2 || n % 2 != 0) throw std::invalid_argument("mask: size must be even");
  if (fixed_rows < 0 || fixed_rows % 2 != 0 || fixed_rows > n - 2)
    throw std::invalid_argument("mask: fixed rows must be even and fit the spectrum");
  SamplingMask m(n);
  for (int p = 1; p <= fixed_rows / 2; ++p) {
    m.observe(p);
    m.observe(conjugate_pair(p, n));
  }
  return m;
}

SamplingMask sample_mask_with_pairs(Rng& rng, int n, int fixed_rows, int pair_target) {
  SamplingMask m = fixed_low_freq_mask(n, fixed_rows);
  if (pair_target > n / 2) throw std::invalid_argument("mask: pair target exceeds spectrum");

  std::vector<int> pool;
  pool.reserve(static_cast<size_t>(n / 2 + 1));
  for (int p = 0; p <= n / 2; ++p)
    if (!m.is_observed(p)) pool.push_back(p);
  rng.shuffle(pool);

  int have = fixed_rows / 2;
  for (size_t i = 0; have < pair_target && i < pool.size(); ++i) {
    m.observe(pool[i]);
    m.observe(conjugate_pair(pool[i], n));
    ++have;
  }
  return m;
}

SamplingMask sample_training_mask(Rng& rng, const MaskSamplerConfig& cfg) {
  cfg.validate();
  const int target = rng.range(cfg.min_pairs, cfg.max_pairs);
  return sample_mask_with_pairs(rng, cfg.n, cfg.fixed_low_rows, target);
}

}  // namespace akspace
