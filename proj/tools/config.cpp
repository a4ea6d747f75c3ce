#include "config.hpp"

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <charconv>
#include <functional>
#include <map>
#include <sstream>

#include "lnforge/digest.hpp"
#include "lnforge/error.hpp"

namespace lnforge::cli {

namespace {

[[noreturn]] void bad(const std::string& key, const std::string& detail) { fail(Errc::config, key, detail); }

std::string trim(std::string s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(trim(item));
  return out;
}

template <class T>
T parse_number(const std::string& key, const std::string& text) {
  const std::string t = trim(text);
  T v{};
  const auto* end = t.data() + t.size();
  const auto [ptr, ec] = std::from_chars(t.data(), end, v);
  if (t.empty() || ec != std::errc{} || ptr != end) bad(key, "cannot parse '" + text + "' as a number");
  return v;
}

std::string format_double(double v) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

template <class T>
std::string join(const std::vector<T>& v) {
  std::string out;
  for (std::size_t n = 0; n < v.size(); ++n) {
    if (n) out += ",";
    if constexpr (std::is_floating_point_v<T>) out += format_double(v[n]);
    else out += std::to_string(v[n]);
  }
  return out;
}

struct Field {
  std::string section;
  std::string key;
  std::function<std::string(const PipelineConfig&)> get;
  std::function<void(PipelineConfig&, const std::string&)> set;
  std::function<void(const PipelineConfig&)> check;
};

std::string name_of(const std::string& section, const std::string& key) { return section + "." + key; }

Field int_field(std::string sec, std::string key, int PipelineConfig::*m, int lo, int hi) {
  const std::string n = name_of(sec, key);
  return {sec, key, [m](const PipelineConfig& c) { return std::to_string(c.*m); },
          [m, n](PipelineConfig& c, const std::string& v) { c.*m = parse_number<int>(n, v); },
          [m, n, lo, hi](const PipelineConfig& c) {
            if (c.*m < lo || c.*m > hi)
              bad(n, std::to_string(c.*m) + " outside [" + std::to_string(lo) + ", " + std::to_string(hi) + "]");
          }};
}

Field double_field(std::string sec, std::string key, double PipelineConfig::*m, double lo, double hi,
                   bool open_lo = false) {
  const std::string n = name_of(sec, key);
  return {sec, key, [m](const PipelineConfig& c) { return format_double(c.*m); },
          [m, n](PipelineConfig& c, const std::string& v) { c.*m = parse_number<double>(n, v); },
          [m, n, lo, hi, open_lo](const PipelineConfig& c) {
            const double v = c.*m;
            if (!(v >= lo && v <= hi) || (open_lo && v == lo))
              bad(n, format_double(v) + " outside " + (open_lo ? "(" : "[") + format_double(lo) + ", " +
                         format_double(hi) + "]");
          }};
}

Field string_field(std::string sec, std::string key, std::string PipelineConfig::*m) {
  return {sec, key, [m](const PipelineConfig& c) { return c.*m; },
          [m](PipelineConfig& c, const std::string& v) { c.*m = trim(v); }, [](const PipelineConfig&) {}};
}

Field dims_field(std::string sec, std::string key, Dims PipelineConfig::*m) {
  const std::string n = name_of(sec, key);
  return {sec, key,
          [m](const PipelineConfig& c) {
            const Dims& d = c.*m;
            return std::to_string(d.nx) + "," + std::to_string(d.ny) + "," + std::to_string(d.nz);
          },
          [m, n](PipelineConfig& c, const std::string& v) {
            const auto parts = split_list(v);
            if (parts.size() != 3) bad(n, "expected three comma-separated voxel counts");
            c.*m = Dims{parse_number<std::int64_t>(n, parts[0]), parse_number<std::int64_t>(n, parts[1]),
                        parse_number<std::int64_t>(n, parts[2])};
          },
          [m, n](const PipelineConfig& c) {
            const Dims& d = c.*m;
            for (std::int64_t x : {d.nx, d.ny, d.nz})
              if (x < 4 || x > 512) bad(n, "each voxel count must lie in [4, 512]");
          }};
}

const std::vector<Field>& fields() {
  using C = PipelineConfig;
  static const std::vector<Field> table = [] {
    std::vector<Field> f;
    f.push_back({"general", "seed", [](const C& c) { return std::to_string(c.seed); },
                 [](C& c, const std::string& v) { c.seed = parse_number<std::uint64_t>("general.seed", v); },
                 [](const C&) {}});
    f.push_back(string_field("paths", "data_dir", &C::data_dir));
    f.push_back(string_field("paths", "checkpoint_dir", &C::checkpoint_dir));
    f.push_back(string_field("paths", "out_dir", &C::out_dir));

    f.push_back(dims_field("geometry", "shape_dims", &C::shape_dims));
    f.push_back(dims_field("geometry", "patch_dims", &C::patch_dims));
    f.push_back(double_field("geometry", "spacing_mm", &C::spacing_mm, 0.01, 100.0));
    f.push_back(double_field("geometry", "tau", &C::tau, 0.0, 1.0, true));
    f.push_back(double_field("geometry", "norm_scale", &C::norm_scale, 0.0, 1e4));

    f.push_back(int_field("codec", "shape_dim", &C::shape_latent, 1, 1024));
    f.push_back(int_field("codec", "texture_dim", &C::texture_latent, 1, 1024));
    f.push_back(int_field("codec", "cond_dim", &C::cond_latent, 1, 1024));

    f.push_back(int_field("schedule", "steps", &C::schedule_steps, 1, 10000));
    f.push_back(double_field("schedule", "beta_start", &C::beta_start, 0.0, 0.999, true));
    f.push_back(double_field("schedule", "beta_end", &C::beta_end, 0.0, 0.999, true));

    f.push_back(double_field("training", "lr", &C::lr, 0.0, 1.0, true));
    f.push_back(int_field("training", "steps", &C::steps, 1, 10000000));
    f.push_back(int_field("training", "batch", &C::batch, 1, 65536));
    f.push_back({"training", "hidden", [](const C& c) { return join(c.hidden); },
                 [](C& c, const std::string& v) {
                   c.hidden.clear();
                   for (const auto& p : split_list(v)) c.hidden.push_back(parse_number<int>("training.hidden", p));
                 },
                 [](const C& c) {
                   if (c.hidden.empty()) bad("training.hidden", "at least one hidden layer is required");
                   for (int h : c.hidden)
                     if (h < 1 || h > 4096) bad("training.hidden", "layer widths must lie in [1, 4096]");
                 }});
    f.push_back(double_field("training", "lambda", &C::lambda, 0.0, 1e6));
    f.push_back(double_field("training", "sigma_adapter", &C::sigma_adapter, 0.0, 10.0));
    f.push_back(int_field("training", "adapter_steps", &C::adapter_steps, 1, 10000000));
    f.push_back(int_field("training", "adapter_batch", &C::adapter_batch, 1, 4096));
    f.push_back(double_field("training", "adapter_lr", &C::adapter_lr, 0.0, 1.0, true));
    f.push_back(int_field("training", "adapter_channels", &C::adapter_channels, 1, 64));
    f.push_back({"training", "adapter_norm", [](const C& c) { return c.adapter_norm; },
                 [](C& c, const std::string& v) { c.adapter_norm = trim(v); },
                 [](const C& c) {
                   if (c.adapter_norm != "l1" && c.adapter_norm != "l2")
                     bad("training.adapter_norm", "expected l1 or l2, got '" + c.adapter_norm + "'");
                 }});
    f.push_back(int_field("training", "adapter_pairs", &C::adapter_pairs, 1, 100));
    f.push_back(int_field("training", "texture_steps", &C::texture_steps, 1, 10000000));
    f.push_back(int_field("training", "texture_batch", &C::texture_batch, 1, 65536));
    f.push_back(double_field("training", "texture_lr", &C::texture_lr, 0.0, 1.0, true));

    f.push_back({"placement", "hu_lo", [](const C& c) { return format_double(c.placement.hu_lo); },
                 [](C& c, const std::string& v) { c.placement.hu_lo = parse_number<float>("placement.hu_lo", v); },
                 [](const C& c) {
                   if (!(c.placement.hu_lo >= -2000.0f && c.placement.hu_lo <= 4000.0f))
                     bad("placement.hu_lo", "outside [-2000, 4000]");
                 }});
    f.push_back({"placement", "hu_hi", [](const C& c) { return format_double(c.placement.hu_hi); },
                 [](C& c, const std::string& v) { c.placement.hu_hi = parse_number<float>("placement.hu_hi", v); },
                 [](const C& c) {
                   if (!(c.placement.hu_hi >= -2000.0f && c.placement.hu_hi <= 4000.0f))
                     bad("placement.hu_hi", "outside [-2000, 4000]");
                   if (!(c.placement.hu_lo < c.placement.hu_hi)) bad("placement.hu_hi", "must exceed placement.hu_lo");
                 }});
    f.push_back({"placement", "min_soft_fraction", [](const C& c) { return format_double(c.placement.min_soft_fraction); },
                 [](C& c, const std::string& v) {
                   c.placement.min_soft_fraction = parse_number<double>("placement.min_soft_fraction", v);
                 },
                 [](const C& c) {
                   const double v = c.placement.min_soft_fraction;
                   if (!(v >= 0.0 && v <= 1.0)) bad("placement.min_soft_fraction", "outside [0, 1]");
                 }});
    f.push_back({"placement", "margin", [](const C& c) { return std::to_string(c.placement.margin); },
                 [](C& c, const std::string& v) { c.placement.margin = parse_number<int>("placement.margin", v); },
                 [](const C& c) {
                   if (c.placement.margin < 0 || c.placement.margin > 64) bad("placement.margin", "outside [0, 64]");
                 }});
    f.push_back({"placement", "stride", [](const C& c) { return std::to_string(c.placement.stride); },
                 [](C& c, const std::string& v) { c.placement.stride = parse_number<int>("placement.stride", v); },
                 [](const C& c) {
                   if (c.placement.stride < 1 || c.placement.stride > 64) bad("placement.stride", "outside [1, 64]");
                 }});
    f.push_back({"placement", "radius_ladder", [](const C& c) { return join(c.placement.radius_ladder_mm); },
                 [](C& c, const std::string& v) {
                   c.placement.radius_ladder_mm.clear();
                   for (const auto& p : split_list(v))
                     c.placement.radius_ladder_mm.push_back(parse_number<double>("placement.radius_ladder", p));
                 },
                 [](const C& c) {
                   const auto& r = c.placement.radius_ladder_mm;
                   if (r.empty()) bad("placement.radius_ladder", "must list at least one radius");
                   for (std::size_t n = 0; n < r.size(); ++n) {
                     if (!(r[n] > 0.0 && r[n] <= 1000.0)) bad("placement.radius_ladder", "radii must lie in (0, 1000]");
                     if (n > 0 && !(r[n] > r[n - 1])) bad("placement.radius_ladder", "radii must increase");
                   }
                 }});
    f.push_back({"placement", "feather_mm", [](const C& c) { return format_double(c.placement.feather_mm); },
                 [](C& c, const std::string& v) { c.placement.feather_mm = parse_number<double>("placement.feather_mm", v); },
                 [](const C& c) {
                   if (!(c.placement.feather_mm >= 0.0 && c.placement.feather_mm <= 100.0))
                     bad("placement.feather_mm", "outside [0, 100]");
                 }});
    f.push_back({"placement", "max_retries", [](const C& c) { return std::to_string(c.placement.max_retries); },
                 [](C& c, const std::string& v) { c.placement.max_retries = parse_number<int>("placement.max_retries", v); },
                 [](const C& c) {
                   if (c.placement.max_retries < 1 || c.placement.max_retries > 100000)
                     bad("placement.max_retries", "outside [1, 100000]");
                 }});
    f.push_back(int_field("placement", "max_shape_tries", &C::max_shape_tries, 1, 1000));

    f.push_back(double_field("long_axis", "lo", &C::long_axis_lo, 0.0, 1000.0, true));
    f.push_back(double_field("long_axis", "hi", &C::long_axis_hi, 0.0, 1000.0, true));
    f.push_back(int_field("long_axis", "bins", &C::bins, 1, 10000));

    f.push_back(int_field("metric", "k", &C::k, 1, 1000));

    f.push_back(dims_field("phantom", "background_dims", &C::background_dims));
    return f;
  }();
  return table;
}

const Field* find_field(const std::string& section, const std::string& key) {
  for (const auto& f : fields())
    if (f.section == section && f.key == key) return &f;
  return nullptr;
}

}  // namespace

void PipelineConfig::validate() const {
  for (const auto& f : fields()) f.check(*this);
  if (!(beta_start < beta_end)) bad("schedule.beta_end", "must exceed schedule.beta_start");
  if (!(long_axis_lo < long_axis_hi)) bad("long_axis.hi", "must exceed long_axis.lo");
  if (patch_dims.nx < shape_dims.nx || patch_dims.ny < shape_dims.ny || patch_dims.nz < shape_dims.nz)
    bad("geometry.patch_dims", "must be at least geometry.shape_dims on every axis");
}

void set_value(PipelineConfig& cfg, const std::string& dotted_key, const std::string& value) {
  const auto dot = dotted_key.find('.');
  if (dot == std::string::npos) bad(dotted_key, "expected section.key");
  const Field* f = find_field(dotted_key.substr(0, dot), dotted_key.substr(dot + 1));
  if (!f) bad(dotted_key, "unknown configuration key");
  f->set(cfg, value);
}

void load_ini(PipelineConfig& cfg, const std::filesystem::path& path) {
  boost::property_tree::ptree tree;
  try {
    boost::property_tree::read_ini(path.string(), tree);
  } catch (const boost::property_tree::ini_parser_error& e) {
    fail(Errc::config, path.string(), e.message() + " (line " + std::to_string(e.line()) + ")");
  }
  for (const auto& [section, body] : tree) {
    if (body.empty()) bad(section, "top-level keys must belong to a section");
    for (const auto& [key, value] : body) {
      if (!value.empty()) bad(section + "." + key, "nested keys are not supported");
      set_value(cfg, section + "." + key, value.data());
    }
  }
}

std::string dump_config(const PipelineConfig& cfg) {
  std::string out;
  std::string current;
  for (const auto& f : fields()) {
    if (f.section != current) {
      if (!current.empty()) out += "\n";
      out += "[" + f.section + "]\n";
      current = f.section;
    }
    out += f.key + " = " + f.get(cfg) + "\n";
  }
  return out;
}

std::string config_hash(const PipelineConfig& cfg) {
  PipelineConfig c = cfg;
  c.data_dir.clear();
  c.checkpoint_dir.clear();
  c.out_dir.clear();
  return sha256_hex(dump_config(c));
}

}  // namespace lnforge::cli
