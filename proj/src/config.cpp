#include "mono3d/config.hpp"

#include <cstdlib>
#include <fstream>
#include <sstream>

#include "mono3d/detect.hpp"

namespace mono3d {

namespace {

struct KeySpec {
  const char* key;
  const char* def;
  const char* doc;
};

// Single source of truth for keys, defaults, and docs. Training constants
// mirror the reference setup (lr 1e-4, score 0.75, NMS IoU 0.4, crop 100,
// input 288x1280); model sizes default to the desk-scale toy profile.
const KeySpec kKeys[] = {
    {"seed", "1", "base RNG seed; every command is deterministic under it"},
    {"C", "32", "feature channels (toy profile; full-scale reference is 256)"},
    {"H", "12", "feature map height (input_h / stride at full scale)"},
    {"W", "12", "feature map width"},
    {"D", "24", "depth bin count (full-scale reference is 96)"},
    {"r", "4", "bin merge scale; merged bins D' = D/r"},
    {"d_min", "1.0", "depth range lower bound, meters"},
    {"d_max", "80.0", "depth range upper bound, meters"},
    {"disc_method", "LID", "depth discretization: UD | SID | LID"},
    {"heads", "2", "attention heads"},
    {"enc_layers", "1", "transformer encoder layers"},
    {"dec_layers", "1", "transformer decoder layers"},
    {"ffn_dim", "0", "feed-forward hidden width, 0 = 4*C"},
    {"attention", "linear", "attention kernel: vanilla | linear"},
    {"layer_norm", "false", "enable layer normalization inside transformer layers"},
    {"stride", "8", "feature-map stride in image pixels"},
    {"ratios", "0.5,1.0,1.5", "anchor aspect ratios (width/height)"},
    {"scales", "7,10,14,19", "anchor heights in pixels, or exp16 / exp12"},
    {"classes", "Car", "comma-separated class names"},
    {"lr", "0.0001", "Adam learning rate at the start of the cosine schedule"},
    {"steps", "500", "training steps for train-toy"},
    {"scenes", "1", "number of synthetic scenes for train-toy"},
    {"scene_boxes", "2", "ground-truth boxes per synthetic scene"},
    {"gamma_focal", "2.0", "focal loss exponent"},
    {"alpha_focal", "0.25", "focal loss positive weight"},
    {"w_cls", "1.0", "classification loss weight"},
    {"w_reg", "1.0", "regression loss weight"},
    {"w_dep", "1.0", "auxiliary depth loss weight"},
    {"score_thresh", "0.75", "confidence threshold at inference"},
    {"nms_iou", "0.4", "NMS 2D IoU threshold"},
    {"crop_top", "100", "pixels cropped from the image top in preprocessing"},
    {"input_h", "288", "network input height after preprocessing"},
    {"input_w", "1280", "network input width after preprocessing"},
    {"eval_ious", "0.5", "IoU thresholds for evaluation, comma separated"},
    {"depth_per_image", "true",
     "average the depth loss per image before the batch mean (vs one global pixel mean)"},
    {"bench_sizes", "512,1024,2048,4096", "token counts for the attention benchmark"},
    {"bench_runs", "5", "timed repetitions per benchmark cell (median reported)"},
    {"bench_dim", "32", "model width for the attention benchmark"},
    {"gradcheck_eps", "1e-5", "central difference step"},
    {"gradcheck_tol", "1e-4", "max relative error accepted by the gradient suite"},
    {"gradcheck_seeds", "20", "random restarts per checked operation"},
    {"gradcheck_corrupt", "", "test hook: op name whose backward gets deliberately corrupted"},
    {"out_dir", ".", "directory for generated files (curves, reports, checkpoints)"},
};

const KeySpec* find_key(const std::string& key) {
  for (const auto& k : kKeys)
    if (key == k.key) return &k;
  return nullptr;
}

}  // namespace

RunConfig::RunConfig() {
  for (const auto& k : kKeys) values_[k.key] = k.def;
}

void RunConfig::set(const std::string& key, const std::string& value) {
  if (!find_key(key)) throw InputError("unknown config key: " + key);
  values_[key] = value;
}

void RunConfig::parse_stream(const std::string& text, const std::string& origin) {
  std::istringstream is(text);
  std::string line;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    const size_t hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    // trim
    const auto b = line.find_first_not_of(" \t\r");
    if (b == std::string::npos) continue;
    const auto e = line.find_last_not_of(" \t\r");
    line = line.substr(b, e - b + 1);
    const size_t eq = line.find('=');
    if (eq == std::string::npos)
      throw InputError(origin + ":" + std::to_string(lineno) + ": expected key=value");
    auto strip = [](std::string s) {
      const auto x = s.find_first_not_of(" \t");
      if (x == std::string::npos) return std::string();
      const auto y = s.find_last_not_of(" \t");
      return s.substr(x, y - x + 1);
    };
    std::string key = strip(line.substr(0, eq));
    std::string value = strip(line.substr(eq + 1));
    if (key.empty()) throw InputError(origin + ":" + std::to_string(lineno) + ": empty key");
    if (!find_key(key))
      throw InputError(origin + ":" + std::to_string(lineno) + ": unknown config key: " + key);
    values_[key] = value;
  }
}

void RunConfig::load_file(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw InputError("cannot open config: " + path);
  std::ostringstream os;
  os << f.rdbuf();
  parse_stream(os.str(), path);
}

const std::string& RunConfig::get(const std::string& key) const {
  auto it = values_.find(key);
  if (it == values_.end()) throw InputError("unknown config key: " + key);
  return it->second;
}

namespace {

double parse_num(const std::string& key, const std::string& v) {
  char* end = nullptr;
  double d = std::strtod(v.c_str(), &end);
  if (end == v.c_str() || *end != '\0')
    throw InputError("config key '" + key + "': not a number: " + v);
  return d;
}

}  // namespace

int RunConfig::get_int(const std::string& key) const {
  double d = parse_num(key, get(key));
  int i = static_cast<int>(d);
  if (d != i) throw InputError("config key '" + key + "': expected an integer");
  return i;
}

uint64_t RunConfig::get_u64(const std::string& key) const {
  const std::string& v = get(key);
  char* end = nullptr;
  unsigned long long u = std::strtoull(v.c_str(), &end, 10);
  if (end == v.c_str() || *end != '\0')
    throw InputError("config key '" + key + "': expected an unsigned integer");
  return u;
}

double RunConfig::get_double(const std::string& key) const { return parse_num(key, get(key)); }

bool RunConfig::get_bool(const std::string& key) const {
  const std::string& v = get(key);
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  throw InputError("config key '" + key + "': expected true/false");
}

std::vector<double> RunConfig::get_list(const std::string& key) const {
  std::vector<double> out;
  std::istringstream is(get(key));
  std::string item;
  while (std::getline(is, item, ',')) out.push_back(parse_num(key, item));
  if (out.empty()) throw InputError("config key '" + key + "': empty list");
  return out;
}

std::vector<std::string> RunConfig::get_names(const std::string& key) const {
  std::vector<std::string> out;
  std::istringstream is(get(key));
  std::string item;
  while (std::getline(is, item, ',')) out.push_back(item);
  if (out.empty()) throw InputError("config key '" + key + "': empty list");
  return out;
}

std::vector<double> RunConfig::scales() const {
  const std::string& v = get("scales");
  if (v == "exp16") return exponential_scales(16);
  if (v == "exp12") return exponential_scales(12);
  return get_list("scales");
}

std::string RunConfig::dump() const {
  std::ostringstream os;
  for (const auto& k : kKeys) os << k.key << " = " << values_.at(k.key) << "\n";
  return os.str();
}

std::string RunConfig::documented_defaults() {
  std::ostringstream os;
  for (const auto& k : kKeys) os << k.key << " = " << k.def << "  # " << k.doc << "\n";
  return os.str();
}

}  // namespace mono3d
