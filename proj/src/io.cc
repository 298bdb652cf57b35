#include "adamatch/io.hpp"

#include <algorithm>
#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "adamatch/errors.hpp"

namespace adamatch {

using nlohmann::json;

static_assert(std::endian::native == std::endian::little, "container I/O assumes little-endian hosts");

namespace {

template <typename T>
void put(std::string& out, T v) {
  char buf[sizeof(T)];
  std::memcpy(buf, &v, sizeof(T));
  out.append(buf, sizeof(T));
}

class Reader {
 public:
  explicit Reader(std::string_view bytes) : bytes_(bytes) {}

  template <typename T>
  T get() {
    need(sizeof(T));
    T v;
    std::memcpy(&v, bytes_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    return v;
  }
  std::string_view take(size_t n) {
    need(n);
    const auto s = bytes_.substr(pos_, n);
    pos_ += n;
    return s;
  }
  bool done() const { return pos_ == bytes_.size(); }

 private:
  void need(size_t n) const {
    if (bytes_.size() - pos_ < n) throw FormatError("tensor container truncated");
  }
  std::string_view bytes_;
  size_t pos_ = 0;
};

json mat_json(const Mat3& m) {
  json a = json::array();
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 3; ++c) a.push_back(m(r, c));
  return a;
}

Mat3 mat_from(const json& a) {
  if (!a.is_array() || a.size() != 9) throw FormatError("expected 9-element matrix");
  Mat3 m;
  for (int k = 0; k < 9; ++k) m(k / 3, k % 3) = a.at(k).get<double>();
  return m;
}

json vec_json(const Vec3& v) { return json::array({v.x(), v.y(), v.z()}); }

Vec3 vec_from(const json& a) {
  if (!a.is_array() || a.size() != 3) throw FormatError("expected 3-element vector");
  return {a.at(0).get<double>(), a.at(1).get<double>(), a.at(2).get<double>()};
}

json config_json(const SceneConfig& c) {
  return {{"width", c.width},
          {"height", c.height},
          {"coarse_stride", c.coarse_stride},
          {"fine_stride", c.fine_stride},
          {"coarse_channels", c.coarse_channels},
          {"fine_channels", c.fine_channels},
          {"components", c.components},
          {"coarse_length", c.coarse_length},
          {"coarse_length_max", c.coarse_length_max},
          {"fine_length", c.fine_length},
          {"fine_length_max", c.fine_length_max},
          {"noise_sigma", c.noise_sigma}};
}

SceneConfig config_from(const json& j) {
  SceneConfig c;
  c.width = j.at("width").get<int>();
  c.height = j.at("height").get<int>();
  c.coarse_stride = j.at("coarse_stride").get<int>();
  c.fine_stride = j.at("fine_stride").get<int>();
  c.coarse_channels = j.at("coarse_channels").get<int>();
  c.fine_channels = j.at("fine_channels").get<int>();
  c.components = j.at("components").get<int>();
  c.coarse_length = j.at("coarse_length").get<double>();
  c.coarse_length_max = j.at("coarse_length_max").get<double>();
  c.fine_length = j.at("fine_length").get<double>();
  c.fine_length_max = j.at("fine_length_max").get<double>();
  c.noise_sigma = j.at("noise_sigma").get<double>();
  return c;
}

json pairs_json(const std::vector<std::pair<int, int>>& v) {
  json a = json::array();
  for (const auto& [i, j] : v) a.push_back(json::array({i, j}));
  return a;
}

std::vector<std::pair<int, int>> pairs_from(const json& a) {
  std::vector<std::pair<int, int>> v;
  for (const json& e : a) v.emplace_back(e.at(0).get<int>(), e.at(1).get<int>());
  return v;
}

json parse_json(const fs::path& path) {
  try {
    return json::parse(read_file(path));
  } catch (const json::exception& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

FeatureGrid read_grid(const fs::path& path) { return grid_from_tensors(read_tensors(path)); }

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.6f", v);
  return buf;
}

}  // namespace

std::string encode_tensors(const TensorMap& tensors) {
  std::string out = "ADMT";
  put<uint32_t>(out, kContainerVersion);
  put<uint32_t>(out, static_cast<uint32_t>(tensors.size()));
  for (const auto& [name, t] : tensors) {
    if (name.size() > 0xFFFF) throw std::invalid_argument("tensor name too long: " + name);
    put<uint16_t>(out, static_cast<uint16_t>(name.size()));
    out += name;
    put<uint8_t>(out, static_cast<uint8_t>(t.rank()));
    for (int64_t d : t.shape()) put<uint64_t>(out, static_cast<uint64_t>(d));
    out.append(reinterpret_cast<const char*>(t.raw()), t.size() * sizeof(float));
  }
  return out;
}

TensorMap decode_tensors(std::string_view bytes) {
  Reader in(bytes);
  if (in.take(4) != "ADMT") throw FormatError("bad tensor container magic");
  const uint32_t version = in.get<uint32_t>();
  if (version != kContainerVersion) {
    throw FormatError("unsupported tensor container version " + std::to_string(version));
  }
  const uint32_t count = in.get<uint32_t>();
  TensorMap out;
  for (uint32_t e = 0; e < count; ++e) {
    const uint16_t len = in.get<uint16_t>();
    std::string name(in.take(len));
    const uint8_t rank = in.get<uint8_t>();
    std::vector<int64_t> shape;
    uint64_t n = 1;
    for (int r = 0; r < rank; ++r) {
      const uint64_t d = in.get<uint64_t>();
      if (d > (uint64_t{1} << 40) || (d != 0 && n > (uint64_t{1} << 40) / d)) {
        throw FormatError("tensor '" + name + "' is implausibly large");
      }
      n *= d;
      shape.push_back(static_cast<int64_t>(d));
    }
    const std::string_view raw = in.take(n * sizeof(float));
    std::vector<float> data(n);
    std::memcpy(data.data(), raw.data(), raw.size());
    if (!out.emplace(name, Tensor(std::move(shape), std::move(data))).second) {
      throw FormatError("duplicate tensor name '" + name + "'");
    }
  }
  if (!in.done()) throw FormatError("trailing bytes after tensor container");
  return out;
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  if (in.bad()) throw IoError("read failed: " + path.string());
  return ss.str();
}

void write_file_atomic(const fs::path& path, std::string_view contents) {
  std::error_code ec;
  if (path.has_parent_path()) {
    fs::create_directories(path.parent_path(), ec);
    if (ec) throw IoError("cannot create " + path.parent_path().string() + ": " + ec.message());
  }
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + tmp.string());
    out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
    if (!out) throw IoError("write failed: " + tmp.string());
  }
  fs::rename(tmp, path, ec);
  if (ec) throw IoError("cannot rename onto " + path.string() + ": " + ec.message());
}

void write_tensors(const fs::path& path, const TensorMap& tensors) {
  write_file_atomic(path, encode_tensors(tensors));
}

TensorMap read_tensors(const fs::path& path) {
  try {
    return decode_tensors(read_file(path));
  } catch (const FormatError& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

TensorMap weights_to_tensors(const ModelWeights& weights) {
  TensorMap out = weights.params;
  out["meta.dims"] = Tensor({4}, {static_cast<float>(weights.dims.d_model),
                                  static_cast<float>(weights.dims.fine_dim),
                                  static_cast<float>(weights.dims.heads),
                                  static_cast<float>(weights.dims.attention)});
  return out;
}

ModelWeights weights_from_tensors(const TensorMap& tensors) {
  const auto it = tensors.find("meta.dims");
  if (it == tensors.end() || it->second.size() != 4) throw FormatError("weights: missing meta.dims");
  ModelDims dims;
  dims.d_model = static_cast<int>(it->second[0]);
  dims.fine_dim = static_cast<int>(it->second[1]);
  dims.heads = static_cast<int>(it->second[2]);
  const int kind = static_cast<int>(it->second[3]);
  if (kind != 0 && kind != 1) throw FormatError("weights: unknown attention kind");
  dims.attention = static_cast<AttentionKind>(kind);

  // Every expected parameter must be present with the expected shape.
  const ModelWeights reference = zero_weights(dims);
  ModelWeights w;
  w.dims = dims;
  for (const auto& [name, ref] : reference.params) {
    const auto p = tensors.find(name);
    if (p == tensors.end()) throw FormatError("weights: missing " + name);
    if (p->second.shape() != ref.shape()) {
      throw FormatError("weights: " + name + " has shape " + p->second.shape_string() +
                        ", expected " + ref.shape_string());
    }
    w.params[name] = p->second;
  }
  if (tensors.size() != reference.params.size() + 1) throw FormatError("weights: unexpected extra entries");
  return w;
}

TensorMap grid_to_tensors(const FeatureGrid& grid) {
  return {{"features", grid.map}, {"stride", Tensor({1}, {static_cast<float>(grid.stride)})}};
}

FeatureGrid grid_from_tensors(const TensorMap& tensors) {
  const auto f = tensors.find("features");
  const auto s = tensors.find("stride");
  if (f == tensors.end() || s == tensors.end() || s->second.size() != 1) {
    throw FormatError("feature file needs 'features' and 'stride'");
  }
  if (f->second.rank() != 3) throw FormatError("features must be h x w x c");
  const int stride = static_cast<int>(s->second[0]);
  if (stride <= 0) throw FormatError("stride must be positive");
  return FeatureGrid(f->second, stride);
}

std::string labels_to_json(const GroundTruthLabels& l) {
  json j = {{"patch_size", l.patch_size}, {"rows_a", l.rows_a}, {"cols_a", l.cols_a},
            {"rows_b", l.rows_b},         {"cols_b", l.cols_b}, {"positives", pairs_json(l.positives)},
            {"from_a", pairs_json(l.from_a)}, {"from_b", pairs_json(l.from_b)},
            {"cov_a", l.cov_a},           {"cov_b", l.cov_b}};
  return j.dump(1) + "\n";
}

void save_pair(const fs::path& dir, const ScenePair& pair) {
  const PairMeta& m = pair.meta;
  json meta = {{"seed", m.seed},
               {"mode", m.mode},
               {"scale_ratio", m.scale_ratio},
               {"bucket", bucket_name(m.bucket)},
               {"rotation_deg", m.rotation_deg},
               {"generator", m.generator},
               {"config", config_json(m.config)}};
  const PairGeometry& g = pair.geometry;
  if (g.kind == PairKind::kPlanar) {
    meta["homography"] = mat_json(g.H.matrix());
  } else {
    meta["depth_profile"] = m.depth_profile;
    meta["zoom"] = m.zoom;
    meta["depth_tolerance"] = g.project_options.depth_tolerance;
    meta["camera_a"] = {{"K", mat_json(g.frameA.K)}, {"R", mat_json(g.frameA.R)}, {"t", vec_json(g.frameA.t)}};
    meta["camera_b"] = {{"K", mat_json(g.frameB.K)}, {"R", mat_json(g.frameB.R)}, {"t", vec_json(g.frameB.t)}};
    write_tensors(dir / "depthA.bin", {{"depth", g.frameA.depth}});
    write_tensors(dir / "depthB.bin", {{"depth", g.frameB.depth}});
  }
  write_tensors(dir / "descA_c.bin", grid_to_tensors(pair.descA_c));
  write_tensors(dir / "descB_c.bin", grid_to_tensors(pair.descB_c));
  write_tensors(dir / "descA_f.bin", grid_to_tensors(pair.descA_f));
  write_tensors(dir / "descB_f.bin", grid_to_tensors(pair.descB_f));
  write_file_atomic(dir / "labels.json", labels_to_json(pair.gt));
  write_file_atomic(dir / "meta.json", meta.dump(1) + "\n");
}

ScenePair load_pair(const fs::path& dir) {
  const json meta = parse_json(dir / "meta.json");
  ScenePair pair;
  try {
    PairMeta& m = pair.meta;
    m.seed = meta.at("seed").get<uint64_t>();
    m.mode = meta.at("mode").get<std::string>();
    m.scale_ratio = meta.at("scale_ratio").get<double>();
    m.bucket = bucket_of(m.scale_ratio);
    m.rotation_deg = meta.at("rotation_deg").get<double>();
    m.generator = meta.at("generator").get<std::string>();
    m.config = config_from(meta.at("config"));
    if (m.mode == "planar") {
      pair.geometry = PairGeometry::planar(Homography(mat_from(meta.at("homography"))),
                                           m.config.width, m.config.height);
    } else if (m.mode == "stereo") {
      m.depth_profile = meta.at("depth_profile").get<std::string>();
      m.zoom = meta.at("zoom").get<double>();
      CameraFrame a, b;
      a.K = mat_from(meta.at("camera_a").at("K"));
      a.R = mat_from(meta.at("camera_a").at("R"));
      a.t = vec_from(meta.at("camera_a").at("t"));
      b.K = mat_from(meta.at("camera_b").at("K"));
      b.R = mat_from(meta.at("camera_b").at("R"));
      b.t = vec_from(meta.at("camera_b").at("t"));
      a.depth = read_tensors(dir / "depthA.bin").at("depth");
      b.depth = read_tensors(dir / "depthB.bin").at("depth");
      pair.geometry = PairGeometry::stereo(std::move(a), std::move(b));
      pair.geometry.project_options.depth_tolerance = meta.at("depth_tolerance").get<double>();
    } else {
      throw FormatError("unknown pair mode '" + m.mode + "'");
    }
  } catch (const json::exception& e) {
    throw FormatError((dir / "meta.json").string() + ": " + e.what());
  } catch (const std::out_of_range& e) {
    throw FormatError(dir.string() + ": missing tensor entry");
  } catch (const std::invalid_argument& e) {
    throw FormatError(dir.string() + ": " + e.what());
  }
  pair.descA_c = read_grid(dir / "descA_c.bin");
  pair.descB_c = read_grid(dir / "descB_c.bin");
  pair.descA_f = read_grid(dir / "descA_f.bin");
  pair.descB_f = read_grid(dir / "descB_f.bin");

  const json labels = parse_json(dir / "labels.json");
  try {
    GroundTruthLabels& l = pair.gt;
    l.patch_size = labels.at("patch_size").get<int>();
    l.rows_a = labels.at("rows_a").get<int>();
    l.cols_a = labels.at("cols_a").get<int>();
    l.rows_b = labels.at("rows_b").get<int>();
    l.cols_b = labels.at("cols_b").get<int>();
    l.positives = pairs_from(labels.at("positives"));
    l.from_a = pairs_from(labels.at("from_a"));
    l.from_b = pairs_from(labels.at("from_b"));
    l.cov_a = labels.at("cov_a").get<std::vector<uint8_t>>();
    l.cov_b = labels.at("cov_b").get<std::vector<uint8_t>>();
  } catch (const json::exception& e) {
    throw FormatError((dir / "labels.json").string() + ": " + e.what());
  }
  return pair;
}

std::vector<fs::path> list_pairs(const fs::path& dataset) {
  std::error_code ec;
  if (!fs::is_directory(dataset, ec)) throw IoError("dataset directory not found: " + dataset.string());
  std::vector<fs::path> out;
  for (const auto& entry : fs::directory_iterator(dataset)) {
    if (entry.is_directory() && fs::exists(entry.path() / "meta.json")) out.push_back(entry.path());
  }
  std::sort(out.begin(), out.end());
  return out;
}

std::string matches_to_csv(const std::vector<RefinedMatch>& matches) {
  std::string out = "xA,yA,xB,yB,confidence,variance\n";
  for (const RefinedMatch& m : matches) {
    out += fmt(m.pA.x()) + "," + fmt(m.pA.y()) + "," + fmt(m.pB.x()) + "," + fmt(m.pB.y()) + "," +
           fmt(m.confidence) + "," + fmt(m.variance) + "\n";
  }
  return out;
}

std::vector<CsvMatch> matches_from_csv(std::string_view text) {
  std::vector<CsvMatch> out;
  std::istringstream in{std::string(text)};
  std::string line;
  if (!std::getline(in, line) || line.rfind("xA,yA,xB,yB,confidence", 0) != 0) {
    throw FormatError("match CSV: missing header");
  }
  int row = 1;
  while (std::getline(in, line)) {
    ++row;
    if (line.empty()) continue;
    std::vector<double> v;
    std::istringstream fields(line);
    std::string cell;
    while (std::getline(fields, cell, ',')) {
      try {
        size_t used = 0;
        v.push_back(std::stod(cell, &used));
        if (used != cell.size()) throw std::invalid_argument(cell);
      } catch (const std::exception&) {
        throw FormatError("match CSV row " + std::to_string(row) + ": bad number '" + cell + "'");
      }
    }
    if (v.size() != 5 && v.size() != 6) {
      throw FormatError("match CSV row " + std::to_string(row) + ": expected 5 or 6 fields");
    }
    CsvMatch m;
    m.pA = {v[0], v[1]};
    m.pB = {v[2], v[3]};
    m.confidence = v[4];
    m.variance = v.size() == 6 ? v[5] : 0.0;
    out.push_back(m);
  }
  return out;
}

}  // namespace adamatch
