#include "gfp/config.hpp"

#include <fstream>
#include <functional>
#include <sstream>
#include <stdexcept>

#include "gfp/ply_io.hpp"

namespace gfp {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::string join_ints(const std::vector<int>& v) {
  std::ostringstream os;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) os << ',';
    os << v[i];
  }
  return os.str();
}

}  // namespace

std::vector<int> parse_int_list(const std::string& csv) {
  std::vector<int> out;
  std::stringstream ss(csv);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    tok = trim(tok);
    if (tok.empty()) continue;
    out.push_back(std::stoi(tok));
  }
  if (out.empty()) throw std::invalid_argument("empty integer list");
  return out;
}

void Config::load_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config: " + path);
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash_pos = line.find('#');
    if (hash_pos != std::string::npos) line = line.substr(0, hash_pos);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw std::runtime_error("config line " + std::to_string(line_no) +
                               ": expected key = value");
    try {
      set(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
    } catch (const std::exception& e) {
      throw std::runtime_error("config line " + std::to_string(line_no) + ": " + e.what());
    }
  }
}

void Config::set(const std::string& key, const std::string& value) {
  auto as_int = [&] { return std::stoi(value); };
  auto as_double = [&] { return std::stod(value); };
  auto as_u64 = [&] { return static_cast<std::uint64_t>(std::stoull(value)); };
  auto as_bool = [&] {
    if (value == "true" || value == "1") return true;
    if (value == "false" || value == "0") return false;
    throw std::invalid_argument("expected true/false, got '" + value + "'");
  };

  if (key == "seed") seed = as_u64();
  else if (key == "threads") threads = as_int();
  else if (key == "normals.k") normals_k = as_int();
  else if (key == "gp.target_points") gp_target_points = as_int();
  else if (key == "gp.mls_radius") gp_mls_radius = as_double();
  else if (key == "gp.mls_order") gp_mls_order = as_int();
  else if (key == "gp.gpa_max_rounds") gpa_max_rounds = as_int();
  else if (key == "gp.gpa_tol") gpa_tol = as_double();
  else if (key == "icp.max_iters") icp_max_iters = as_int();
  else if (key == "icp.tol") icp_tol = as_double();
  else if (key == "icp.trim_fraction") icp_trim_fraction = as_double();
  else if (key == "register.outer_iters") register_outer_iters = as_int();
  else if (key == "register.inner_steps") register_inner_steps = as_int();
  else if (key == "gfs.steps") gfs_steps = as_int();
  else if (key == "gfs.step_size") gfs_step_size = as_double();
  else if (key == "gfs.smooth_blend") gfs_smooth_blend = as_double();
  else if (key == "gfs.smooth_k") gfs_smooth_k = as_int();
  else if (key == "labels.mls_radius") label_mls_radius = as_double();
  else if (key == "labels.mls_order") label_mls_order = as_int();
  else if (key == "patch.radius_frac") patch_radius_frac = as_double();
  else if (key == "complete.iters") complete_iters = as_int();
  else if (key == "net.encoder_widths") net.encoder_widths = parse_int_list(value);
  else if (key == "net.iterative_encoder_widths") net.iterative_encoder_widths = parse_int_list(value);
  else if (key == "net.decoder_widths") net.decoder_widths = parse_int_list(value);
  else if (key == "net.head_width") net.head_width = as_int();
  else if (key == "net.source_count") net.source_count = as_int();
  else if (key == "net.template_count") net.template_count = as_int();
  else if (key == "net.dropout") net.dropout_p = as_double();
  else if (key == "net.iterative") net.iterative = as_bool();
  else if (key == "loss.alpha") loss.alpha = as_double();
  else if (key == "loss.laplacian_k") laplacian_k = as_int();
  else if (key == "loss.chamfer_squared") chamfer_squared = as_bool();
  else if (key == "train.lr") adam.learning_rate = as_double();
  else if (key == "train.beta1") adam.beta1 = as_double();
  else if (key == "train.beta2") adam.beta2 = as_double();
  else if (key == "train.epsilon") adam.epsilon = as_double();
  else if (key == "train.lr_decay") adam.lr_decay_per_epoch = as_double();
  else if (key == "train.batch") train_batch = as_int();
  else if (key == "train.epochs") train_epochs = as_int();
  else if (key == "train.microbatch") train_microbatch = as_int();
  else if (key == "train.val_fraction") train_val_fraction = as_double();
  else if (key == "views.per_shape") views_per_shape = as_int();
  else if (key == "views.image_size") view_image_size = as_int();
  else if (key == "noise.sigma") noise_sigma = as_double();
  else if (key == "dataset.patches_per_shape") patches_per_shape = as_int();
  else throw std::invalid_argument("unknown config key '" + key + "'");
}

std::string Config::serialize() const {
  std::ostringstream os;
  os << "seed = " << seed << '\n';
  os << "threads = " << threads << '\n';
  os << "normals.k = " << normals_k << '\n';
  os << "gp.target_points = " << gp_target_points << '\n';
  os << "gp.mls_radius = " << format_coord(gp_mls_radius) << '\n';
  os << "gp.mls_order = " << gp_mls_order << '\n';
  os << "gp.gpa_max_rounds = " << gpa_max_rounds << '\n';
  os << "gp.gpa_tol = " << format_coord(gpa_tol) << '\n';
  os << "icp.max_iters = " << icp_max_iters << '\n';
  os << "icp.tol = " << format_coord(icp_tol) << '\n';
  os << "icp.trim_fraction = " << format_coord(icp_trim_fraction) << '\n';
  os << "register.outer_iters = " << register_outer_iters << '\n';
  os << "register.inner_steps = " << register_inner_steps << '\n';
  os << "gfs.steps = " << gfs_steps << '\n';
  os << "gfs.step_size = " << format_coord(gfs_step_size) << '\n';
  os << "gfs.smooth_blend = " << format_coord(gfs_smooth_blend) << '\n';
  os << "gfs.smooth_k = " << gfs_smooth_k << '\n';
  os << "labels.mls_radius = " << format_coord(label_mls_radius) << '\n';
  os << "labels.mls_order = " << label_mls_order << '\n';
  os << "patch.radius_frac = " << format_coord(patch_radius_frac) << '\n';
  os << "complete.iters = " << complete_iters << '\n';
  os << "net.encoder_widths = " << join_ints(net.encoder_widths) << '\n';
  os << "net.iterative_encoder_widths = " << join_ints(net.iterative_encoder_widths) << '\n';
  os << "net.decoder_widths = " << join_ints(net.decoder_widths) << '\n';
  os << "net.head_width = " << net.head_width << '\n';
  os << "net.source_count = " << net.source_count << '\n';
  os << "net.template_count = " << net.template_count << '\n';
  os << "net.dropout = " << format_coord(net.dropout_p) << '\n';
  os << "net.iterative = " << (net.iterative ? "true" : "false") << '\n';
  os << "loss.alpha = " << format_coord(loss.alpha) << '\n';
  os << "loss.laplacian_k = " << laplacian_k << '\n';
  os << "loss.chamfer_squared = " << (chamfer_squared ? "true" : "false") << '\n';
  os << "train.lr = " << format_coord(adam.learning_rate) << '\n';
  os << "train.beta1 = " << format_coord(adam.beta1) << '\n';
  os << "train.beta2 = " << format_coord(adam.beta2) << '\n';
  os << "train.epsilon = " << format_coord(adam.epsilon) << '\n';
  os << "train.lr_decay = " << format_coord(adam.lr_decay_per_epoch) << '\n';
  os << "train.batch = " << train_batch << '\n';
  os << "train.epochs = " << train_epochs << '\n';
  os << "train.microbatch = " << train_microbatch << '\n';
  os << "train.val_fraction = " << format_coord(train_val_fraction) << '\n';
  os << "views.per_shape = " << views_per_shape << '\n';
  os << "views.image_size = " << view_image_size << '\n';
  os << "noise.sigma = " << format_coord(noise_sigma) << '\n';
  os << "dataset.patches_per_shape = " << patches_per_shape << '\n';
  return os.str();
}

std::uint64_t Config::hash() const {
  // FNV-1a over the canonical rendering
  const std::string s = serialize();
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

}  // namespace gfp
